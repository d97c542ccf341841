"""Sensitivity algebra for invisible deaths and reporting error.

The closed forms take hypothetical inputs. The ``realized_*`` functions
measure the same factors on a simulated universe and reporting network, where
multiplying the census estimand by the factors recovers the true rate exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Cell, FrameDefinition
from .errors import UndefinedFactorError
from .estimators import individual_terms
from .simulate import PseudoPopulation, ReportingNetwork, network_tallies
from .tally import ExposureMode, check_disjoint


class Param(enum.Enum):
    DEATHS = "deaths"
    EXPOSURE = "exposure"

    @classmethod
    def coerce(cls, value) -> "Param":
        return value if isinstance(value, cls) else cls(str(value).lower())


def rel_error_by_deaths(K, p_inv_D):
    """Relative error of the visible rate when a share ``p_inv_D`` of deaths is invisible."""
    K = np.asarray(K, float)
    return p_inv_D * (1.0 - K) / K


def rel_error_by_exposure(K, p_inv_N):
    """Relative error of the visible rate when a share ``p_inv_N`` of exposure is invisible."""
    x = np.asarray(p_inv_N, float) * (1.0 - np.asarray(K, float))
    return x / (1.0 - x)


def total_from_visible(M_vis, K, p_inv, param=Param.EXPOSURE):
    """Total death rate implied by the visible rate, the rate ratio ``K`` and invisible share."""
    param = Param.coerce(param)
    if param is Param.DEATHS:
        if np.any(np.asarray(K) <= 0):
            raise ValueError("the deaths form needs K > 0")
        return M_vis * K / (p_inv + K * (1.0 - p_inv))
    return M_vis * (1.0 + p_inv * (K - 1.0))


def sensitivity_surface(K_grid, p_grid, param=Param.EXPOSURE) -> list[tuple[float, float, float]]:
    """Rows ``(K, p, rel_error)`` over the cartesian grid, K varying slowest."""
    fn = rel_error_by_deaths if Param.coerce(param) is Param.DEATHS else rel_error_by_exposure
    return [(float(k), float(p), float(fn(k, p))) for k in K_grid for p in p_grid]


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid; ``grid(0.8, 1.2, 0.05)`` has 9 points."""
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 12)


def aggregate_adjustment(visibility_ratio: float, tau_N: float, tau_D: float, eta_N: float = 1.0,
                         eta_D: float = 1.0, p_invisible_N: float = 0.0, K: float = 1.0) -> float:
    """Factor turning the aggregate estimand into the true rate under hypothetical inputs."""
    gamma_N, gamma_D = tau_N / eta_N, tau_D / eta_D
    return visibility_ratio * gamma_N / gamma_D * (1.0 + p_invisible_N * (K - 1.0))


def individual_adjustment(gamma_star_N: float, gamma_D: float, K_N: float = 0.0, K_D: float = 0.0,
                          p_invisible_N: float = 0.0, K: float = 1.0) -> float:
    return gamma_star_N * (1.0 + K_N) / (gamma_D * (1.0 + K_D)) * (1.0 + p_invisible_N * (K - 1.0))


def _invisible_factor(p, K):
    return 1.0 if K is None else 1.0 + p * (K - 1.0)


@dataclass(frozen=True)
class AggAdjustment:
    """Realised factors for the aggregate estimator in one cell.

    ``K`` is ``None`` when the cell has no invisible exposure.
    """

    cell: Cell
    estimand: float
    visibility_ratio: float
    tau_N: float
    tau_D: float
    p_invisible_N: float
    K: float | None
    M: float
    M_vis: float
    eta_N: float = 1.0
    eta_D: float = 1.0

    @property
    def gamma_N(self) -> float:
        return self.tau_N / self.eta_N

    @property
    def gamma_D(self) -> float:
        return self.tau_D / self.eta_D

    def adjusted(self) -> float:
        return (self.estimand * self.visibility_ratio * self.gamma_N / self.gamma_D
                * _invisible_factor(self.p_invisible_N, self.K))


@dataclass(frozen=True)
class IndAdjustment:
    """Realised sibship-level factors for the individual estimator in one cell."""

    cell: Cell
    estimand: float
    gamma_star_N: float
    gamma_D: float
    K_N: float
    K_D: float
    p_invisible_N: float
    K: float | None
    M: float
    M_vis: float

    def adjusted(self) -> float:
        return (self.estimand * self.gamma_star_N * (1.0 + self.K_N) / (self.gamma_D * (1.0 + self.K_D))
                * _invisible_factor(self.p_invisible_N, self.K))


@dataclass
class _Census:
    """Universe-level quantities shared by the realised-factor computations."""

    expo: np.ndarray
    deaths: np.ndarray
    degree: np.ndarray
    visible: np.ndarray

    @classmethod
    def build(cls, universe, cells, include_respondent, mode, frame):
        expo, deaths = universe.contributions(cells, mode)
        degree = universe.visibility(include_respondent, frame)
        return cls(expo, deaths, degree, degree > 0)

    def rates(self, c):
        D, N = self.deaths[:, c].sum(), self.expo[:, c].sum()
        Dv, Nv = self.deaths[self.visible, c].sum(), self.expo[self.visible, c].sum()
        p_inv = (N - Nv) / N if N > 0 else 0.0
        K = None
        if N - Nv > 0 and Dv > 0:
            K = ((D - Dv) / (N - Nv)) / (Dv / Nv)
        return D, N, Dv, Nv, p_inv, K


def _prepare(universe, network, cells, include_respondent, exposure_mode, frame):
    cells = tuple(cells)
    check_disjoint(cells)
    mode = ExposureMode.coerce(exposure_mode)
    if frame is not None and frame != universe.frame:
        raise ValueError("realised factors use the universe's own frame")
    census = _Census.build(universe, cells, include_respondent, mode, frame)
    tab = network_tallies(universe, network, cells, include_respondent, mode,
                          (census.expo, census.deaths))
    return cells, census, tab


def realized_agg_factors_all(universe: PseudoPopulation, network: ReportingNetwork,
                             cells: Sequence[Cell], include_respondent: bool = False,
                             exposure_mode=ExposureMode.HEADCOUNT,
                             frame: FrameDefinition | None = None) -> list[AggAdjustment | None]:
    """Realised aggregate factors per cell; ``None`` where they are undefined."""
    cells, census, tab = _prepare(universe, network, cells, include_respondent, exposure_mode, frame)
    reported_D = tab.y_D.sum(axis=0)
    reported_N = tab.y_N.sum(axis=0)
    out = []
    for c, cell in enumerate(cells):
        D, N, Dv, Nv, p_inv, K = census.rates(c)
        true_D = census.deaths[:, c] @ census.degree
        true_N = census.expo[:, c] @ census.degree
        if Dv == 0 or reported_D[c] == 0 or reported_N[c] == 0:
            out.append(None)
            continue
        dbar_D, dbar_N = true_D / Dv, true_N / Nv
        out.append(AggAdjustment(cell, reported_D[c] / reported_N[c], dbar_N / dbar_D,
                                 reported_N[c] / true_N, reported_D[c] / true_D,
                                 p_inv, K, D / N, Dv / Nv))
    return out


def realized_agg_factors(universe: PseudoPopulation, network: ReportingNetwork, cell: Cell,
                         include_respondent: bool = False,
                         exposure_mode=ExposureMode.HEADCOUNT) -> AggAdjustment:
    """Aggregate factors for one cell measured on the universe and network.

    Visibility uses the true sibship degrees; reporting accuracy is the ratio of
    reported to truly visible deaths (or exposure); the invisible share and
    rate ratio come from the census. Raises :class:`UndefinedFactorError` if
    the cell has no visible or no reported deaths.
    """
    res = realized_agg_factors_all(universe, network, [cell], include_respondent, exposure_mode)[0]
    if res is None:
        raise UndefinedFactorError(f"no visible (or no reported) deaths in {cell.label}")
    return res


def _relative_covariance(gamma, size):
    """Population covariance of ``gamma`` and ``size`` over their means' product."""
    gbar, sbar = gamma.mean(), size.mean()
    return np.mean((gamma - gbar) * (size - sbar)) / (gbar * sbar)


def realized_ind_factors_all(universe: PseudoPopulation, network: ReportingNetwork,
                             cells: Sequence[Cell], include_respondent: bool = False,
                             exposure_mode=ExposureMode.HEADCOUNT,
                             frame: FrameDefinition | None = None) -> list[IndAdjustment | None]:
    """Realised individual-estimator factors per cell; ``None`` where undefined.

    For each sibship, the reporting factor is the sibship's visibility-weighted
    reports divided by its true visible deaths (or exposure). Averages and
    covariances run over sibships with positive visible deaths (or exposure),
    with divide-by-n moments.
    """
    cells, census, tab = _prepare(universe, network, cells, include_respondent, exposure_mode, frame)
    num, den = individual_terms(tab)
    frame_rows = np.flatnonzero(universe.in_frame)
    rep_sib = universe.sibship_id[frame_rows]
    n_sib = universe.n_sibships
    out = []
    for c, cell in enumerate(cells):
        D, N, Dv, Nv, p_inv, K = census.rates(c)
        A = np.bincount(rep_sib, weights=num[:, c], minlength=n_sib)
        B = np.bincount(rep_sib, weights=den[:, c], minlength=n_sib)
        Dv_s = np.bincount(universe.sibship_id, weights=census.deaths[:, c] * census.visible, minlength=n_sib)
        Nv_s = np.bincount(universe.sibship_id, weights=census.expo[:, c] * census.visible, minlength=n_sib)
        sd, sn = Dv_s > 0, Nv_s > 0
        if not sd.any() or A.sum() == 0 or B.sum() == 0:
            out.append(None)
            continue
        g_D = A[sd] / Dv_s[sd]
        g_N = B[sn] / Nv_s[sn]
        out.append(IndAdjustment(cell, A.sum() / B.sum(), g_N.mean(), g_D.mean(),
                                 _relative_covariance(g_N, Nv_s[sn]),
                                 _relative_covariance(g_D, Dv_s[sd]),
                                 p_inv, K, D / N, Dv / Nv))
    return out


def realized_ind_factors(universe: PseudoPopulation, network: ReportingNetwork, cell: Cell,
                         include_respondent: bool = False,
                         exposure_mode=ExposureMode.HEADCOUNT) -> IndAdjustment:
    res = realized_ind_factors_all(universe, network, [cell], include_respondent, exposure_mode)[0]
    if res is None:
        raise UndefinedFactorError(f"no visible (or no reported) deaths in {cell.label}")
    return res


def c_factor(universe: PseudoPopulation, cell: Cell, exposure_mode=ExposureMode.HEADCOUNT,
             frame: FrameDefinition | None = None):
    """Exposure of frame members in ``cell`` who are the only frame member of their sibship.

    This is what including the respondent adds to visible exposure. In
    headcount mode it is a count of people.
    """
    mode = ExposureMode.coerce(exposure_mode)
    expo, _ = universe.contributions([cell], mode)
    lonely = universe.frame_flags(frame) & (universe.frame_degree(frame) == 1)
    total = expo[lonely, 0].sum()
    return int(round(total)) if mode is ExposureMode.HEADCOUNT else float(total)


@dataclass(frozen=True)
class HomogeneousExpectation:
    E_Dv: float
    E_Nv: float
    E_Di: float
    E_Ni: float
    M_vis: float
    M_invis: float


def homogeneous_model(q: float, sibship_sizes: Sequence[int],
                      include_respondent: bool = False) -> HomogeneousExpectation:
    """Expected visible and invisible deaths and exposure when everyone dies with probability ``q``.

    ``sibship_sizes`` lists, for each person, the number of their siblings.
    Survivors form the frame and exposure is a headcount of everyone.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    s = np.asarray(sibship_sizes, float)
    all_sibs_dead = np.sum(q ** s)
    n = len(s)
    if include_respondent:
        E_Di = q * all_sibs_dead
        E_Dv = q * (n - all_sibs_dead)
        E_Ni = E_Di
        E_Nv = n - E_Di
        return HomogeneousExpectation(E_Dv, E_Nv, E_Di, E_Ni, E_Dv / E_Nv, 1.0)
    E_Nv = n - all_sibs_dead
    E_Ni = all_sibs_dead
    return HomogeneousExpectation(q * E_Nv, E_Nv, q * E_Ni, E_Ni, q, q)


def homogeneous_draws(q: float, sibship_member_counts: Sequence[int], n_draws: int, rng_seed=0,
                      include_respondent: bool = False) -> dict:
    """Monte Carlo draws of (D_vis, N_vis, D_invis, N_invis) for the homogeneous model.

    ``sibship_member_counts`` gives the size of each sibship (people, not siblings).
    Returns arrays of length ``n_draws`` keyed like :class:`HomogeneousExpectation`.
    """
    sizes = np.asarray(sibship_member_counts, int)
    sib = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(rng_seed)
    out = {k: np.empty(n_draws) for k in ("E_Dv", "E_Nv", "E_Di", "E_Ni")}
    membership = np.zeros((len(sib), len(sizes)))
    membership[np.arange(len(sib)), sib] = 1.0
    chunk = max(1, 2_000_000 // max(1, len(sib)))
    for start in range(0, n_draws, chunk):
        stop = min(n_draws, start + chunk)
        dead = rng.random((stop - start, len(sib))) < q
        alive_per_sib = (~dead).astype(float) @ membership
        alive_sibs = alive_per_sib[:, sib] - ~dead
        if include_respondent:
            visible = ~dead | (alive_sibs > 0)
        else:
            visible = alive_sibs > 0
        out["E_Dv"][start:stop] = np.sum(dead & visible, axis=1)
        out["E_Di"][start:stop] = np.sum(dead & ~visible, axis=1)
        out["E_Nv"][start:stop] = np.sum(visible, axis=1)
        out["E_Ni"][start:stop] = np.sum(~visible, axis=1)
    return out


def weighted_harmonic_mean(values, weights) -> float:
    values = np.asarray(values, float)
    weights = np.asarray(weights, float)
    return float(weights.sum() / np.sum(weights / values))


def weighted_arithmetic_mean(values, weights) -> float:
    values = np.asarray(values, float)
    weights = np.asarray(weights, float)
    return float(np.sum(weights * values) / weights.sum())
