"""Rescaled bootstrap replicate weights and linearisation variance."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import SurveyDataset, write_rows
from .errors import SingletonStratumError, ZeroExposureError

MIN_REPS_SE = 50
MIN_REPS_CI = 200


def _stable_key(label) -> int:
    return zlib.crc32(str(label).encode("utf-8"))


@dataclass(frozen=True)
class _Design:
    strata: list  # stratum labels, sorted
    members: list  # per stratum: PSU index of each respondent (n_h PSUs)
    rows: list  # per stratum: respondent row numbers
    n_psu: list


def _design(dataset: SurveyDataset) -> _Design:
    r = dataset.resp
    strata, members, rows, n_psu = [], [], [], []
    labels = r.stratum.astype(str)
    psus = r.psu.astype(str)
    for h in sorted(set(labels)):
        idx = np.flatnonzero(labels == h)
        uniq, inv = np.unique(psus[idx], return_inverse=True)
        if len(uniq) < 2:
            raise SingletonStratumError(
                f"stratum {h!r} has a single PSU; collapse strata before bootstrapping")
        strata.append(h)
        members.append(inv)
        rows.append(idx)
        n_psu.append(len(uniq))
    return _Design(strata, members, rows, n_psu)


def replicate_multipliers(dataset: SurveyDataset, n_reps: int, seed: int) -> np.ndarray:
    """Multiplier matrix of shape ``(n_reps, n_respondents)``.

    In stratum ``h`` with ``n_h`` PSUs, ``n_h - 1`` PSUs are drawn with
    replacement and PSU ``p`` gets ``n_h / (n_h - 1) * r_p`` where ``r_p`` counts
    its draws. Each (replicate, stratum) pair has its own generator seeded from
    ``(seed, rep, crc32(stratum))`` so results do not depend on evaluation order.
    """
    design = _design(dataset)
    out = np.zeros((n_reps, len(dataset.respondents)))
    for h, label in enumerate(design.strata):
        n_h = design.n_psu[h]
        key = _stable_key(label)
        scale = n_h / (n_h - 1)
        for rep in range(n_reps):
            rng = np.random.default_rng(np.random.SeedSequence([seed, rep, key]))
            counts = np.bincount(rng.integers(0, n_h, n_h - 1), minlength=n_h)
            out[rep, design.rows[h]] = scale * counts[design.members[h]]
    return out


@dataclass(frozen=True)
class ReplicateWeights:
    rep_index: int
    multipliers: dict


def make_replicates(dataset: SurveyDataset, n_reps: int, seed: int) -> list[ReplicateWeights]:
    mult = replicate_multipliers(dataset, n_reps, seed)
    ids = list(dataset.resp.ids)
    return [ReplicateWeights(rep, dict(zip(ids, row.tolist()))) for rep, row in enumerate(mult)]


def as_multiplier_matrix(dataset: SurveyDataset, replicates) -> np.ndarray:
    if isinstance(replicates, np.ndarray):
        return replicates
    ids = dataset.resp.ids
    return np.array([[rw.multipliers[i] for i in ids] for rw in replicates], dtype=float)


def write_replicates(path, dataset: SurveyDataset, replicates) -> None:
    mult = as_multiplier_matrix(dataset, replicates)
    ids = dataset.resp.ids
    write_rows(path, ["rep_index", "resp_id", "multiplier"],
               ([rep, ids[i], mult[rep, i]] for rep in range(mult.shape[0]) for i in range(len(ids))))


@dataclass(frozen=True)
class BootstrapResult:
    se: float | None
    ci_lo: float | None
    ci_hi: float | None
    n_used: int
    n_dropped: int
    estimates: np.ndarray


def summarize_replicates(estimates) -> BootstrapResult:
    """SE and percentile interval from replicate estimates; NaNs count as dropped."""
    est = np.asarray(estimates, float)
    ok = est[~np.isnan(est)]
    dropped = int(est.size - ok.size)
    if ok.size < MIN_REPS_SE:
        raise ValueError(f"need at least {MIN_REPS_SE} usable replicates, have {ok.size}")
    se = float(np.std(ok, ddof=1))
    lo = hi = None
    if ok.size >= MIN_REPS_CI:
        lo, hi = (float(v) for v in np.percentile(ok, [2.5, 97.5]))
    return BootstrapResult(se, lo, hi, int(ok.size), dropped, ok)


def bootstrap_summary(point_fn: Callable[[np.ndarray], float], dataset: SurveyDataset,
                      replicates) -> BootstrapResult:
    """Evaluate ``point_fn`` on each set of replicate weights and summarise.

    ``point_fn`` receives a weight vector aligned with ``dataset.respondents``.
    Replicates raising :class:`ZeroExposureError` are dropped and counted.
    """
    mult = as_multiplier_matrix(dataset, replicates)
    base = dataset.resp.weight
    values = np.empty(mult.shape[0])
    for rep in range(mult.shape[0]):
        try:
            values[rep] = point_fn(base * mult[rep])
        except ZeroExposureError:
            values[rep] = np.nan
    return summarize_replicates(values)


def taylor_variance(d_hat: float, n_hat: float, var_d: float, var_n: float, cov_dn: float) -> float:
    """Linearised variance of the ratio ``d_hat / n_hat``."""
    if not n_hat > 0:
        raise ValueError("n_hat must be positive")
    m = d_hat / n_hat
    return (var_d + m * m * var_n - 2.0 * m * cov_dn) / (n_hat * n_hat)


def design_covariance(dataset: SurveyDataset, a, b, weights=None) -> np.ndarray:
    """With-replacement design covariance of the weighted totals of ``a`` and ``b``.

    ``a`` and ``b`` are per-respondent arrays, ``(n,)`` or ``(n, k)``.
    Returns ``sum_h n_h/(n_h-1) sum_p (A_hp - mean_h A)(B_hp - mean_h B)`` where
    ``A_hp`` is the weighted PSU total.
    """
    design = _design(dataset)
    w = dataset.resp.weight if weights is None else np.asarray(weights, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    shape = a.shape[1:]
    total = np.zeros(shape)
    for h in range(len(design.strata)):
        rows, inv, n_h = design.rows[h], design.members[h], design.n_psu[h]
        ta = np.zeros((n_h,) + shape)
        tb = np.zeros((n_h,) + shape)
        np.add.at(ta, inv, (w[rows] * a[rows].T).T)
        np.add.at(tb, inv, (w[rows] * b[rows].T).T)
        ta -= ta.mean(axis=0)
        tb -= tb.mean(axis=0)
        total += n_h / (n_h - 1) * np.sum(ta * tb, axis=0)
    return total


def linearized_ratio_variance(dataset: SurveyDataset, num, den, weights=None):
    """Taylor variance of ``sum w*num / sum w*den`` using :func:`design_covariance`."""
    w = dataset.resp.weight if weights is None else np.asarray(weights, float)
    d_hat = w @ np.asarray(num, float)
    n_hat = w @ np.asarray(den, float)
    var_d = design_covariance(dataset, num, num, w)
    var_n = design_covariance(dataset, den, den, w)
    cov = design_covariance(dataset, num, den, w)
    return np.vectorize(taylor_variance)(d_hat, n_hat, var_d, var_n, cov)


def relative_variance_terms(d_hat, n_hat, var_d, var_n, cov_dn) -> tuple[float, float, float]:
    """(rel-var of D, rel-var of N, rel-cov) whose combination gives the ratio's rel-var."""
    return var_d / d_hat ** 2, var_n / n_hat ** 2, cov_dn / (d_hat * n_hat)
