"""Internal-consistency checks and the invisibility report."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import SurveyDataset


def _cross_age_terms(dataset: SurveyDataset, lo: int, hi: int, weights):
    w = dataset.resp.weight if weights is None else np.asarray(weights, float)
    s = dataset.sibs
    r_age = dataset.respondent_ages()
    s_age = dataset.sibling_ages()
    n = len(dataset.respondents)
    r_in = (r_age >= lo) & (r_age <= hi)
    s_in = (s_age >= lo) & (s_age <= hi)
    sibs_out = np.bincount(s.owner[s.in_frame & ~s_in], minlength=n)
    sibs_in = np.bincount(s.owner[s.in_frame & s_in], minlength=n)
    ties_from = w @ (r_in * sibs_out)
    ties_to = w @ (~r_in * sibs_in)
    return ties_from, ties_to


def ic_delta(dataset: SurveyDataset, age: int, weights=None, age_hi: int | None = None):
    """Difference between two estimates of the sibling ties crossing age ``age``.

    The first term sums, over respondents of that age, their living frame
    siblings of other ages. The second sums, over respondents of other ages,
    their living frame siblings of that age. Ages are taken at interview.
    Both terms estimate the same number, so the difference is zero on a
    perfect census. Pass ``age_hi`` to use an age band instead of a single
    year. ``weights`` may be a stack ``(R, n)`` of replicate weights.
    """
    hi = age if age_hi is None else age_hi
    ties_from, ties_to = _cross_age_terms(dataset, age, hi, weights)
    out = ties_from - ties_to
    return float(out) if np.ndim(out) == 0 else out


def ic_delta_band(dataset: SurveyDataset, age_lo: int, age_hi: int, weights=None):
    return ic_delta(dataset, age_lo, weights, age_hi=age_hi)


def ic_checks(dataset: SurveyDataset, ages: Sequence[int], replicate_weights=None):
    """Rows ``(age, delta, ci_lo, ci_hi)``; CIs need at least 200 replicate weight sets."""
    rows = []
    for a in ages:
        delta = ic_delta(dataset, a)
        lo = hi = float("nan")
        if replicate_weights is not None and len(replicate_weights) >= 200:
            reps = ic_delta(dataset, a, replicate_weights)
            lo, hi = (float(v) for v in np.percentile(reps, [2.5, 97.5]))
        rows.append((a, delta, lo, hi))
    return rows


def invisible_fraction_by_age(dataset: SurveyDataset, age_bands: Sequence[tuple[int, int]],
                              weights=None) -> dict:
    """Weighted share of respondents in each age band with no frame siblings.

    Bands with no respondents map to NaN.
    """
    w = dataset.resp.weight if weights is None else np.asarray(weights, float)
    age = dataset.respondent_ages()
    none = dataset.frame_sibling_counts() == 0
    out = {}
    for lo, hi in age_bands:
        m = (age >= lo) & (age <= hi)
        total = w[m].sum()
        out[(lo, hi)] = float(w[m & none].sum() / total) if total > 0 else float("nan")
    return out
