"""Survey records, frame definitions, cells and CSV input/output.

Dates are century-month codes (CMC): months elapsed since January 1900.
Ages are completed years, ``floor((event - dob) / 12)``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, Issue

SEXES = ("f", "m")

RESPONDENT_COLUMNS = ("resp_id", "stratum_id", "psu_id", "weight", "sex",
                      "dob_cmc", "interview_cmc")
SIBLING_COLUMNS = ("resp_id", "sib_index", "sex", "dob_cmc", "alive", "dod_cmc")


def completed_age(dob, when):
    """Completed years between ``dob`` and ``when`` (works on arrays)."""
    return np.floor_divide(np.subtract(when, dob), 12)


@dataclass(frozen=True)
class FrameDefinition:
    """Who is eligible to be interviewed, judged at the interview month."""

    sexes_eligible: frozenset
    age_min: int
    age_max: int

    def __post_init__(self):
        object.__setattr__(self, "sexes_eligible", frozenset(self.sexes_eligible))
        if not self.sexes_eligible:
            raise ValueError("frame needs at least one eligible sex")
        if not self.sexes_eligible <= set(SEXES):
            raise ValueError(f"unknown sex code in {sorted(self.sexes_eligible)}")
        if not 0 <= self.age_min <= self.age_max <= 130:
            raise ValueError(f"bad frame ages {self.age_min}-{self.age_max}")

    @classmethod
    def parse(cls, text: str) -> "FrameDefinition":
        """Parse ``f15-49``, ``m15-59`` or ``fm15-49``."""
        m = re.fullmatch(r"([fm]{1,2})(\d+)-(\d+)", text.strip().lower())
        if not m:
            raise ValueError(f"cannot parse frame {text!r}; expected e.g. f15-49")
        return cls(frozenset(m.group(1)), int(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return f"{''.join(sorted(self.sexes_eligible))}{self.age_min}-{self.age_max}"

    def contains(self, sex, age, alive=True):
        """Vectorised membership test on sex codes, completed ages and status."""
        sex = np.asarray(sex)
        age = np.asarray(age)
        ok_sex = np.isin(sex, sorted(self.sexes_eligible))
        return ok_sex & (age >= self.age_min) & (age <= self.age_max) & np.asarray(alive, bool)


@dataclass(frozen=True)
class Cell:
    """A sex by age-band by calendar-window group.

    ``sex=None`` means both sexes. With ``relative=True`` the window bounds
    are month offsets from each respondent's interview (``-84, -1`` is the
    seven years before the interview month).
    """

    sex: str | None
    age_lo: int
    age_hi: int
    window_start: int
    window_end: int
    relative: bool = False

    def __post_init__(self):
        if self.sex is not None and self.sex not in SEXES:
            raise ValueError(f"unknown sex code {self.sex!r}")
        if self.age_lo > self.age_hi:
            raise ValueError("age_lo must not exceed age_hi")
        if self.window_start > self.window_end:
            raise ValueError("window_start must not exceed window_end")

    @property
    def label(self) -> str:
        return f"{self.sex or 'any'}{self.age_lo}-{self.age_hi}"

    def overlaps(self, other: "Cell") -> bool:
        sex = self.sex is None or other.sex is None or self.sex == other.sex
        ages = self.age_lo <= other.age_hi and other.age_lo <= self.age_hi
        if self.relative != other.relative:
            # relative and absolute windows cannot be compared without data
            return sex and ages
        window = self.window_start <= other.window_end and other.window_start <= self.window_end
        return sex and ages and window

    def touches_frame(self, frame: FrameDefinition) -> bool:
        """False when the cell is disjoint from the frame by sex or by age."""
        sex_ok = self.sex is None or self.sex in frame.sexes_eligible
        age_ok = self.age_lo <= frame.age_max and frame.age_min <= self.age_hi
        return sex_ok and age_ok


def make_cells(age_min: int = 15, age_max: int = 49, width: int = 5,
               sexes: Sequence[str | None] = SEXES, window: tuple[int, int] = (-84, -1),
               relative: bool = True) -> list[Cell]:
    """Age bands of ``width`` years for each sex over one window."""
    cells = []
    for sex in sexes:
        for lo in range(age_min, age_max + 1, width):
            cells.append(Cell(sex, lo, min(lo + width - 1, age_max), window[0], window[1], relative))
    return cells


@dataclass(frozen=True)
class Respondent:
    resp_id: str
    stratum_id: str
    psu_id: str
    weight: float
    sex: str
    dob: int
    interview: int


@dataclass(frozen=True)
class SiblingReport:
    resp_id: str
    sib_index: int
    sex: str
    dob: int
    alive: bool
    dod: int | None = None


def is_frame_member(sib: SiblingReport, frame: FrameDefinition, interview: int) -> bool:
    age = int(completed_age(sib.dob, interview))
    return bool(sib.alive and sib.sex in frame.sexes_eligible
                and frame.age_min <= age <= frame.age_max)


@dataclass(frozen=True)
class _RespondentArrays:
    ids: np.ndarray
    stratum: np.ndarray
    psu: np.ndarray
    weight: np.ndarray
    sex: np.ndarray
    dob: np.ndarray
    interview: np.ndarray


@dataclass(frozen=True)
class _SiblingArrays:
    owner: np.ndarray  # row index of the owning respondent
    sex: np.ndarray
    dob: np.ndarray
    alive: np.ndarray
    dod: np.ndarray  # meaningless where alive
    in_frame: np.ndarray


@dataclass(frozen=True)
class SurveyDataset:
    frame: FrameDefinition
    respondents: tuple[Respondent, ...]
    siblings: tuple[SiblingReport, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "respondents", tuple(self.respondents))
        object.__setattr__(self, "siblings", tuple(self.siblings))

    @cached_property
    def index(self) -> dict[str, int]:
        return {r.resp_id: k for k, r in enumerate(self.respondents)}

    @cached_property
    def resp(self) -> _RespondentArrays:
        rs = self.respondents
        return _RespondentArrays(
            ids=np.array([r.resp_id for r in rs], dtype=object),
            stratum=np.array([r.stratum_id for r in rs], dtype=object),
            psu=np.array([r.psu_id for r in rs], dtype=object),
            weight=np.array([r.weight for r in rs], dtype=float),
            sex=np.array([r.sex for r in rs], dtype="<U1"),
            dob=np.array([r.dob for r in rs], dtype=np.int64),
            interview=np.array([r.interview for r in rs], dtype=np.int64),
        )

    @cached_property
    def sibs(self) -> _SiblingArrays:
        ss = self.siblings
        owner = np.array([self.index[s.resp_id] for s in ss], dtype=np.int64)
        sex = np.array([s.sex for s in ss], dtype="<U1")
        dob = np.array([s.dob for s in ss], dtype=np.int64)
        alive = np.array([s.alive for s in ss], dtype=bool)
        dod = np.array([s.dod if s.dod is not None else 0 for s in ss], dtype=np.int64)
        age = completed_age(dob, self.resp.interview[owner]) if len(ss) else dob
        return _SiblingArrays(owner, sex, dob, alive, dod,
                              self.frame.contains(sex, age, alive))

    def respondent_ages(self) -> np.ndarray:
        r = self.resp
        return completed_age(r.dob, r.interview)

    def sibling_ages(self) -> np.ndarray:
        """Sibling ages at the owning respondent's interview."""
        s = self.sibs
        return completed_age(s.dob, self.resp.interview[s.owner])

    def frame_sibling_counts(self) -> np.ndarray:
        """Number of living frame-eligible siblings on each roster."""
        s = self.sibs
        return np.bincount(s.owner[s.in_frame], minlength=len(self.respondents))


def check_dataset(dataset: SurveyDataset) -> list[Issue]:
    """Semantic checks shared by the CSV loader and programmatic construction."""
    issues = []
    seen = {}
    for row, r in enumerate(dataset.respondents, start=1):
        if r.resp_id in seen:
            issues.append(Issue("DUPLICATE_ID", "respondents", row, f"resp_id {r.resp_id!r} repeated"))
        seen.setdefault(r.resp_id, r)
        if not r.weight > 0:
            issues.append(Issue("NONPOSITIVE_WEIGHT", "respondents", row, f"weight {r.weight}"))
        if r.sex not in SEXES:
            issues.append(Issue("BAD_VALUE", "respondents", row, f"sex {r.sex!r}"))
        if not r.dob < r.interview:
            issues.append(Issue("BAD_DATE", "respondents", row, "dob must precede interview"))
        elif not dataset.frame.contains(r.sex, completed_age(r.dob, r.interview)):
            issues.append(Issue("FRAME_VIOLATION", "respondents", row,
                                f"respondent {r.resp_id!r} (sex {r.sex}, age "
                                f"{completed_age(r.dob, r.interview)}) is outside frame {dataset.frame}"))
    keys = set()
    for row, s in enumerate(dataset.siblings, start=1):
        owner = seen.get(s.resp_id)
        if owner is None:
            issues.append(Issue("ORPHAN_SIBLING", "siblings", row, f"no respondent {s.resp_id!r}"))
        key = (s.resp_id, s.sib_index)
        if key in keys:
            issues.append(Issue("DUPLICATE_SIBLING", "siblings", row, f"(resp_id, sib_index) {key} repeated"))
        keys.add(key)
        if s.sex not in SEXES:
            issues.append(Issue("BAD_VALUE", "siblings", row, f"sex {s.sex!r}"))
        if s.alive:
            if s.dod is not None:
                issues.append(Issue("BAD_DATE", "siblings", row, "living sibling has a death date"))
        elif s.dod is None:
            issues.append(Issue("BAD_DATE", "siblings", row, "dead sibling lacks dod_cmc"))
        elif s.dod < s.dob:
            issues.append(Issue("BAD_DATE", "siblings", row, "dod_cmc precedes dob_cmc"))
        if owner is not None:
            if s.dob > owner.interview:
                issues.append(Issue("BAD_DATE", "siblings", row, "born after the interview"))
            if s.dod is not None and s.dod > owner.interview:
                issues.append(Issue("BAD_DATE", "siblings", row, "dod_cmc after the interview"))
    return issues


def _read_rows(path, columns: Sequence[str], label: str, issues: list[Issue]):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in columns if c not in header]
        if missing:
            issues.append(Issue("MISSING_COLUMN", label, 0, f"missing column(s) {', '.join(missing)}"))
            return []
        reader.fieldnames = header
        return [(n, {k: (v or "").strip() for k, v in row.items() if k in columns})
                for n, row in enumerate(reader, start=1)]


def _int(text: str, code: str, label: str, row: int, name: str, issues: list[Issue]):
    try:
        return int(text)
    except ValueError:
        issues.append(Issue(code, label, row, f"{name}={text!r} is not an integer"))
        return None


def load_dataset(respondents_path, siblings_path, frame: FrameDefinition) -> SurveyDataset:
    """Read and validate the two CSV files; raise :class:`DataError` listing every bad row."""
    issues: list[Issue] = []
    rrows = _read_rows(respondents_path, RESPONDENT_COLUMNS, "respondents", issues)
    srows = _read_rows(siblings_path, SIBLING_COLUMNS, "siblings", issues)
    if issues:
        raise DataError(issues)

    respondents = []
    for n, row in rrows:
        dob = _int(row["dob_cmc"], "BAD_DATE", "respondents", n, "dob_cmc", issues)
        itv = _int(row["interview_cmc"], "BAD_DATE", "respondents", n, "interview_cmc", issues)
        try:
            weight = float(row["weight"])
        except ValueError:
            issues.append(Issue("NONPOSITIVE_WEIGHT", "respondents", n, f"weight={row['weight']!r}"))
            continue
        if dob is None or itv is None:
            continue
        respondents.append(Respondent(row["resp_id"], row["stratum_id"], row["psu_id"],
                                      weight, row["sex"].lower(), dob, itv))

    siblings = []
    for n, row in srows:
        idx = _int(row["sib_index"], "BAD_VALUE", "siblings", n, "sib_index", issues)
        dob = _int(row["dob_cmc"], "BAD_DATE", "siblings", n, "dob_cmc", issues)
        if row["alive"] not in ("0", "1"):
            issues.append(Issue("BAD_VALUE", "siblings", n,
                                f"alive={row['alive']!r}; survival status must be 0 or 1"))
            continue
        alive = row["alive"] == "1"
        dod = None
        if row["dod_cmc"]:
            dod = _int(row["dod_cmc"], "BAD_DATE", "siblings", n, "dod_cmc", issues)
            if dod is None:
                continue
        if idx is None or dob is None:
            continue
        siblings.append(SiblingReport(row["resp_id"], idx, row["sex"].lower(), dob, alive, dod))

    dataset = SurveyDataset(frame, tuple(respondents), tuple(siblings))
    issues.extend(check_dataset(dataset))
    if issues:
        raise DataError(issues)
    return dataset


def _fmt_weight(w: float) -> str:
    return repr(float(w))


def write_dataset(dataset: SurveyDataset, respondents_path, siblings_path) -> None:
    """Write the two CSV files in the same schema :func:`load_dataset` reads."""
    with open(respondents_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESPONDENT_COLUMNS)
        for r in dataset.respondents:
            w.writerow([r.resp_id, r.stratum_id, r.psu_id, _fmt_weight(r.weight),
                        r.sex, r.dob, r.interview])
    with open(siblings_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIBLING_COLUMNS)
        for s in dataset.siblings:
            w.writerow([s.resp_id, s.sib_index, s.sex, s.dob, int(s.alive),
                        "" if s.dod is None else s.dod])


def concat_datasets(parts: Iterable[SurveyDataset]) -> SurveyDataset:
    parts = list(parts)
    return SurveyDataset(parts[0].frame,
                         tuple(r for p in parts for r in p.respondents),
                         tuple(s for p in parts for s in p.siblings))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> None:
    """Write a table as CSV, or as a JSON list of records when ``fmt == 'json'``."""
    rows = [list(r) for r in rows]
    if fmt == "json":
        import json

        def clean(v):
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return None if np.isnan(v) else v
            if isinstance(v, np.integer):
                return int(v)
            return v
        Path(path).write_text(json.dumps([{h: clean(v) for h, v in zip(header, r)} for r in rows],
                                         indent=1) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if (isinstance(v, float) and np.isnan(v)) else v for v in r])
