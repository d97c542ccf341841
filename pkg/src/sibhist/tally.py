"""Expand sibling rosters into per-respondent, per-cell death and exposure counts."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Cell, SurveyDataset, write_rows
from .errors import OverlappingCellsError


class ExposureMode(enum.Enum):
    PERSON_YEARS = "person-years"
    HEADCOUNT = "headcount"

    @classmethod
    def coerce(cls, value) -> "ExposureMode":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if text in (mode.value, mode.name.lower().replace("_", "-")):
                return mode
        raise ValueError(f"unknown exposure mode {value!r}")


def check_disjoint(cells: Sequence[Cell]) -> None:
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            if cells[a].overlaps(cells[b]):
                raise OverlappingCellsError(
                    f"cells {cells[a]} and {cells[b]} overlap")


def _window(cell: Cell, interview: np.ndarray):
    if cell.relative:
        return interview + cell.window_start, interview + cell.window_end
    return (np.full_like(interview, cell.window_start),
            np.full_like(interview, cell.window_end))


def cell_contributions(sex, dob, alive, dod, interview, cells: Sequence[Cell],
                       mode=ExposureMode.PERSON_YEARS):
    """Exposure and deaths contributed by each person to each cell.

    All inputs are per-person arrays; ``interview`` anchors relative windows.
    Returns two ``(n_persons, n_cells)`` float arrays.
    """
    mode = ExposureMode.coerce(mode)
    sex = np.asarray(sex)
    dob = np.asarray(dob, dtype=np.int64)
    alive = np.asarray(alive, dtype=bool)
    dod = np.asarray(dod, dtype=np.int64)
    interview = np.asarray(interview, dtype=np.int64)
    n = len(dob)
    exposure = np.zeros((n, len(cells)))
    deaths = np.zeros((n, len(cells)))
    for c, cell in enumerate(cells):
        ws, we = _window(cell, interview)
        match = np.ones(n, bool) if cell.sex is None else (sex == cell.sex)
        band_lo = dob + 12 * cell.age_lo
        band_hi = dob + 12 * cell.age_hi + 11
        died = ~alive & (dod >= ws) & (dod <= we) & (dod >= band_lo) & (dod <= band_hi) & match
        if mode is ExposureMode.PERSON_YEARS:
            last = np.where(alive, we, dod)
            start = np.maximum.reduce([dob, ws, band_lo])
            stop = np.minimum.reduce([we, last, band_hi])
            months = np.clip(stop - start + 1, 0, None).astype(float)
            exposure[:, c] = np.where(match, (months - 0.5 * died) / 12.0, 0.0)
        else:
            present = (dob <= we) & (alive | (dod >= ws))
            ref = np.where(alive | (dod > we), we, dod)
            age = np.floor_divide(ref - dob, 12)
            inside = present & match & (age >= cell.age_lo) & (age <= cell.age_hi)
            exposure[:, c] = inside
        deaths[:, c] = died
    return exposure, deaths


@dataclass(frozen=True)
class Tally:
    resp_id: str
    cell: Cell
    y_D: float
    y_N_inF: float
    y_N_notF: float
    y_F: int

    @property
    def y_N(self) -> float:
        return self.y_N_inF + self.y_N_notF


@dataclass(frozen=True)
class TallyTable:
    """Columnar tallies: arrays of shape ``(n_respondents, n_cells)``.

    ``y_F`` has one entry per respondent; it already includes the respondent
    when ``include_respondent`` is set.
    """

    resp_ids: np.ndarray
    cells: tuple[Cell, ...]
    weights: np.ndarray
    y_D: np.ndarray
    y_N_inF: np.ndarray
    y_N_notF: np.ndarray
    y_F: np.ndarray
    include_respondent: bool
    exposure_mode: ExposureMode

    @property
    def y_N(self) -> np.ndarray:
        return self.y_N_inF + self.y_N_notF

    def __len__(self) -> int:
        return len(self.resp_ids)

    def cell_index(self, cell) -> int:
        if isinstance(cell, (int, np.integer)):
            return int(cell)
        return self.cells.index(cell)

    def take(self, rows) -> "TallyTable":
        """Restrict to a subset of respondents."""
        return TallyTable(self.resp_ids[rows], self.cells, self.weights[rows],
                          self.y_D[rows], self.y_N_inF[rows], self.y_N_notF[rows],
                          self.y_F[rows], self.include_respondent, self.exposure_mode)

    def records(self) -> list[Tally]:
        out = []
        for i, rid in enumerate(self.resp_ids):
            for c, cell in enumerate(self.cells):
                out.append(Tally(rid, cell, float(self.y_D[i, c]), float(self.y_N_inF[i, c]),
                                 float(self.y_N_notF[i, c]), int(self.y_F[i])))
        return out

    def to_csv(self, path) -> None:
        header = ["resp_id", "cell", "window_start", "window_end", "y_D",
                  "y_N_inF", "y_N_notF", "y_F"]
        order = np.argsort(self.resp_ids.astype(str), kind="stable")
        rows = ([self.resp_ids[i], cell.label, cell.window_start, cell.window_end,
                 self.y_D[i, c], self.y_N_inF[i, c], self.y_N_notF[i, c], int(self.y_F[i])]
                for i in order for c, cell in enumerate(self.cells))
        write_rows(path, header, rows)


def tally(dataset: SurveyDataset, cells: Sequence[Cell], include_respondent: bool = False,
          exposure_mode=ExposureMode.PERSON_YEARS) -> TallyTable:
    """Per-respondent, per-cell reported deaths and exposure."""
    cells = tuple(cells)
    check_disjoint(cells)
    mode = ExposureMode.coerce(exposure_mode)
    r, s = dataset.resp, dataset.sibs
    n, k = len(dataset.respondents), len(cells)

    expo, deaths = cell_contributions(s.sex, s.dob, s.alive, s.dod,
                                      r.interview[s.owner], cells, mode)
    y_D = np.zeros((n, k))
    y_in = np.zeros((n, k))
    y_out = np.zeros((n, k))
    np.add.at(y_D, s.owner, deaths)
    np.add.at(y_in, s.owner[s.in_frame], expo[s.in_frame])
    np.add.at(y_out, s.owner[~s.in_frame], expo[~s.in_frame])
    y_F = np.bincount(s.owner[s.in_frame], minlength=n).astype(np.int64)

    if include_respondent:
        own, _ = cell_contributions(r.sex, r.dob, np.ones(n, bool), np.zeros(n, np.int64),
                                    r.interview, cells, mode)
        y_in += own
        y_F = y_F + 1
    return TallyTable(r.ids, cells, r.weight.copy(), y_D, y_in, y_out, y_F,
                      bool(include_respondent), mode)
