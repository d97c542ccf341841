"""Aggregate- and individual-visibility death-rate estimators.

Every estimator is a ratio of weighted totals, so functions accept either a
weight vector ``(n,)`` or a stack of replicate weights ``(R, n)`` and
broadcast accordingly.
"""

from __future__ import annotations

import enum

import numpy as np

from .data import Cell, SurveyDataset
from .errors import UndefinedTermError, ZeroExposureError
from .tally import TallyTable


class Family(enum.Enum):
    AGGREGATE = "agg"
    INDIVIDUAL = "ind"


class Estimator(enum.Enum):
    AGG_EXCL = (Family.AGGREGATE, False)
    AGG_INCL = (Family.AGGREGATE, True)
    IND_EXCL = (Family.INDIVIDUAL, False)
    IND_INCL = (Family.INDIVIDUAL, True)

    @property
    def family(self) -> Family:
        return self.value[0]

    @property
    def include_respondent(self) -> bool:
        return self.value[1]

    @classmethod
    def parse(cls, text: str) -> "Estimator":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown estimator {text!r}; choose from "
                             f"{', '.join(e.name.lower() for e in cls)}") from None


def _select(tallies: TallyTable, cell):
    if cell is None:
        return slice(None)
    return tallies.cell_index(cell)


def _ratio(num, den, allow_empty: bool, what: str):
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    empty = ~(den > 0)
    if np.any(empty) and not allow_empty:
        raise ZeroExposureError(f"zero weighted exposure in {what}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(empty, np.nan, num / np.where(empty, 1.0, den))
    return out[()] if out.ndim == 0 else out


def _weights(tallies: TallyTable, weights):
    return tallies.weights if weights is None else np.asarray(weights, float)


def aggregate_terms(tallies: TallyTable):
    """Per-respondent numerator and denominator contributions, ``(n, n_cells)``."""
    return tallies.y_D, tallies.y_N


def individual_terms(tallies: TallyTable):
    """Per-respondent contributions of the individual estimator, ``(n, n_cells)``.

    Excluding the respondent, deaths are divided by ``y_F + 1`` and exposure of
    frame siblings by ``y_F`` (0/0 counts as 0). Including the respondent, both
    are divided by ``y_F`` which then already counts the respondent.
    """
    y_F = tallies.y_F.astype(float)[:, None]
    if tallies.include_respondent:
        return tallies.y_D / y_F, tallies.y_N / y_F
    bad = (tallies.y_N_inF > 0) & (y_F == 0)
    if np.any(bad):
        i, c = np.argwhere(bad)[0]
        raise UndefinedTermError(
            f"respondent {tallies.resp_ids[i]} has frame-sibling exposure in "
            f"{tallies.cells[c].label} but no frame siblings")
    with np.errstate(invalid="ignore", divide="ignore"):
        frame_part = np.where(y_F > 0, tallies.y_N_inF / np.where(y_F > 0, y_F, 1.0), 0.0)
    return tallies.y_D / (y_F + 1.0), frame_part + tallies.y_N_notF / (y_F + 1.0)


def _estimate(terms, tallies, cell, weights, allow_empty, name):
    num, den = terms
    sel = _select(tallies, cell)
    w = _weights(tallies, weights)
    label = "all cells" if cell is None else tallies.cells[tallies.cell_index(cell)].label
    return _ratio(w @ num[:, sel], w @ den[:, sel], allow_empty, f"{name} {label}")


def estimate_aggregate(tallies: TallyTable, cell: Cell | int | None = None, weights=None,
                       allow_empty: bool = False):
    """Ratio of weighted reported deaths to weighted reported exposure.

    Returns a float for one ``cell`` or an array over all cells. Cells with no
    weighted exposure raise :class:`ZeroExposureError`, or give NaN when
    ``allow_empty`` is set.
    """
    return _estimate(aggregate_terms(tallies), tallies, cell, weights, allow_empty, "aggregate")


def estimate_individual(tallies: TallyTable, cell: Cell | int | None = None, weights=None,
                        allow_empty: bool = False):
    """Visibility-weighted ratio: each report is divided by the reporter's frame-sibling count."""
    return _estimate(individual_terms(tallies), tallies, cell, weights, allow_empty, "individual")


def estimate(estimator: Estimator, tallies: TallyTable, cell=None, weights=None,
             allow_empty: bool = False):
    if tallies.include_respondent != estimator.include_respondent:
        raise ValueError(f"{estimator.name} needs tallies with include_respondent="
                         f"{estimator.include_respondent}")
    fn = estimate_aggregate if estimator.family is Family.AGGREGATE else estimate_individual
    return fn(tallies, cell, weights, allow_empty)


class HeuristicMode(enum.Enum):
    ALL_AGES = "all-ages"
    AGE_SPECIFIC = "age-specific"


def mean_frame_siblings(dataset: SurveyDataset, age_band: tuple[int, int] | None = None,
                        sex: str | None = None, weights=None) -> float:
    """Weighted mean number of living frame siblings per respondent.

    Optionally restricted to respondents of ``sex`` whose age at interview is in ``age_band``.
    """
    w = dataset.resp.weight if weights is None else np.asarray(weights, float)
    y = dataset.frame_sibling_counts()
    keep = np.ones(len(y), bool)
    if age_band is not None:
        age = dataset.respondent_ages()
        keep &= (age >= age_band[0]) & (age <= age_band[1])
    if sex is not None:
        keep &= dataset.resp.sex == sex
    if not keep.any():
        return float("nan")
    return float(np.sum(w[keep] * y[keep]) / np.sum(w[keep]))


def heuristic_agg_adjustment(estimate_value: float, dataset: SurveyDataset, cell: Cell,
                             mode=HeuristicMode.ALL_AGES) -> float:
    """Scale an exclude-respondent aggregate estimate by ``ybar / (ybar + 1)``.

    ``ybar`` is the mean count of frame siblings among all respondents
    (``ALL_AGES``) or among respondents in the cell's sex and age band
    (``AGE_SPECIFIC``). Cells outside the frame are returned unchanged.
    """
    mode = HeuristicMode(mode) if not isinstance(mode, HeuristicMode) else mode
    if not cell.touches_frame(dataset.frame):
        return estimate_value
    if mode is HeuristicMode.ALL_AGES:
        ybar = mean_frame_siblings(dataset)
    else:
        ybar = mean_frame_siblings(dataset, (cell.age_lo, cell.age_hi), cell.sex)
    if np.isnan(ybar):
        return estimate_value
    return estimate_value * ybar / (ybar + 1.0)
