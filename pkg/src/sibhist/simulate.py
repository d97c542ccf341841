"""Sibship microsimulation with known ground truth.

A universe of sibships is resampled from seed survey rosters, reporting
errors are injected by thinning respondent-to-sibling edges, and repeated
surveys are drawn from the frame to trace out each estimator's sampling
distribution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .data import (Cell, FrameDefinition, Respondent, SiblingReport, SurveyDataset,
                   completed_age, load_dataset, make_cells, write_rows)
from .errors import EmptySeedError, ZeroTruthError
from .estimators import Estimator, aggregate_terms, individual_terms
from .tally import ExposureMode, TallyTable, cell_contributions, check_disjoint


@dataclass(frozen=True, eq=False)
class PseudoPopulation:
    """Persons partitioned into sibships; rows are sorted by ``sibship_id``.

    ``dod`` is only meaningful where ``alive`` is false. Each sibship shares
    one reference month (``interview``) at which frame membership is judged.
    """

    person_id: np.ndarray
    sibship_id: np.ndarray
    sex: np.ndarray
    dob: np.ndarray
    alive: np.ndarray
    dod: np.ndarray
    interview: np.ndarray
    frame: FrameDefinition

    def __post_init__(self):
        step = np.diff(self.sibship_id)
        if len(self.sibship_id) and (self.sibship_id[0] != 0 or np.any((step < 0) | (step > 1))):
            raise ValueError("sibship_id must run 0, 1, 2, ... in sorted order")

    def __len__(self) -> int:
        return len(self.person_id)

    @cached_property
    def n_sibships(self) -> int:
        return int(self.sibship_id[-1]) + 1 if len(self) else 0

    @cached_property
    def sibship_start(self) -> np.ndarray:
        return np.searchsorted(self.sibship_id, np.arange(self.n_sibships))

    @cached_property
    def sibship_size(self) -> np.ndarray:
        return np.bincount(self.sibship_id, minlength=self.n_sibships)

    def frame_flags(self, frame: FrameDefinition | None = None) -> np.ndarray:
        frame = frame or self.frame
        if frame == self.frame:
            return self.in_frame
        return frame.contains(self.sex, completed_age(self.dob, self.interview), self.alive)

    @cached_property
    def in_frame(self) -> np.ndarray:
        return self.frame.contains(self.sex, completed_age(self.dob, self.interview), self.alive)

    def frame_degree(self, frame: FrameDefinition | None = None) -> np.ndarray:
        """Per person, the number of frame members in their sibship (self included)."""
        flags = self.frame_flags(frame)
        per_sibship = np.bincount(self.sibship_id, weights=flags, minlength=self.n_sibships)
        return per_sibship.astype(np.int64)[self.sibship_id]

    def visibility(self, include_respondent: bool = False,
                   frame: FrameDefinition | None = None) -> np.ndarray:
        """Times each person would be reported if the whole frame were interviewed."""
        deg = self.frame_degree(frame)
        return deg if include_respondent else deg - self.frame_flags(frame)

    def contributions(self, cells: Sequence[Cell], exposure_mode=ExposureMode.HEADCOUNT):
        """Per-person exposure and deaths, ``(n_persons, n_cells)`` each."""
        return cell_contributions(self.sex, self.dob, self.alive, self.dod, self.interview,
                                  cells, exposure_mode)


def _seed_rosters(seed: SurveyDataset):
    """Flatten respondent + siblings into one member table grouped by seed sibship."""
    r, s = seed.resp, seed.sibs
    n = len(seed.respondents)
    owner = np.concatenate([np.arange(n), s.owner])
    order = np.argsort(owner, kind="stable")
    owner = owner[order]
    sex = np.concatenate([r.sex, s.sex])[order]
    dob = np.concatenate([r.dob, s.dob])[order]
    alive = np.concatenate([np.ones(n, bool), s.alive])[order]
    dod = np.concatenate([np.zeros(n, np.int64), s.dod])[order]
    return owner, sex, dob, alive, dod


def build_universe(seed_sibships, m_sibships: int, rng_seed=0,
                   frame: FrameDefinition | None = None) -> PseudoPopulation:
    """Resample ``m_sibships`` seed sibships into a pseudo-population.

    ``seed_sibships`` is a :class:`SurveyDataset` or a ``(respondents, siblings)``
    pair of CSV paths. Sibships are drawn with replacement with probability
    proportional to their number of frame-eligible members, and each draw has
    every member's sex swapped with probability 1/2.
    """
    if isinstance(seed_sibships, (tuple, list)):
        seed_sibships = load_dataset(seed_sibships[0], seed_sibships[1],
                                     frame or FrameDefinition({"f"}, 15, 49))
    seed = seed_sibships
    frame = frame or seed.frame
    if not seed.respondents:
        raise EmptySeedError("seed data has no sibships")
    owner, sex, dob, alive, dod = _seed_rosters(seed)
    n_seed = len(seed.respondents)
    interview = seed.resp.interview
    eligible = frame.contains(sex, completed_age(dob, interview[owner]), alive)
    weight = np.bincount(owner, weights=eligible, minlength=n_seed)
    if np.any(weight == 0):
        warnings.warn(f"{int(np.sum(weight == 0))} seed sibship(s) have no frame-eligible "
                      "member and are excluded (ZERO_VISIBILITY_SEED)", stacklevel=2)
    if weight.sum() == 0:
        raise EmptySeedError("no seed sibship has a frame-eligible member")

    rng = np.random.default_rng(rng_seed)
    picks = rng.choice(n_seed, size=m_sibships, p=weight / weight.sum())
    flips = rng.random(m_sibships) < 0.5

    start = np.searchsorted(owner, np.arange(n_seed))
    size = np.bincount(owner, minlength=n_seed)
    sizes = size[picks]
    new_start = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    total = int(sizes.sum())
    local = np.arange(total) - np.repeat(new_start, sizes)
    src = np.repeat(start[picks], sizes) + local
    sib = np.repeat(np.arange(m_sibships), sizes)
    new_sex = sex[src].copy()
    flip = np.repeat(flips, sizes)
    new_sex[flip] = np.where(new_sex[flip] == "f", "m", "f")
    return PseudoPopulation(np.arange(total, dtype=np.int64), sib.astype(np.int64), new_sex,
                            dob[src], alive[src], dod[src], interview[picks][sib], frame)


@dataclass(frozen=True, eq=False)
class ReportingNetwork:
    """Retained report edges ``reporter -> subject`` (row indices into the universe)."""

    reporter: np.ndarray
    subject: np.ndarray
    tau_d: float = 1.0
    tau_n: float = 1.0
    eta_d: float = 1.0
    eta_n: float = 1.0

    def __len__(self) -> int:
        return len(self.reporter)

    def matrix(self, n_persons: int) -> sparse.csr_matrix:
        data = np.ones(len(self.reporter))
        return sparse.csr_matrix((data, (self.reporter, self.subject)), shape=(n_persons, n_persons))


def _all_edges(universe: PseudoPopulation):
    reporters = np.flatnonzero(universe.in_frame)
    sib = universe.sibship_id[reporters]
    sizes = universe.sibship_size[sib]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    local = np.arange(int(sizes.sum())) - np.repeat(offsets, sizes)
    reporter = np.repeat(reporters, sizes)
    subject = np.repeat(universe.sibship_start[sib], sizes) + local
    keep = subject != reporter
    return reporter[keep], subject[keep]


def full_network(universe: PseudoPopulation) -> ReportingNetwork:
    reporter, subject = _all_edges(universe)
    return ReportingNetwork(reporter, subject)


def apply_reporting(universe: PseudoPopulation, tau_d: float, tau_n: float,
                    rng_seed=0) -> ReportingNetwork:
    """Keep each frame-member-to-sibling edge independently.

    Edges to dead siblings survive with probability ``tau_d``; edges to living
    siblings with probability ``tau_n``. There are no false reports.
    """
    for t in (tau_d, tau_n):
        if not 0 < t <= 1:
            raise ValueError("reporting rates must lie in (0, 1]")
    reporter, subject = _all_edges(universe)
    rng = np.random.default_rng(rng_seed)
    p = np.where(universe.alive[subject], tau_n, tau_d)
    keep = rng.random(len(reporter)) < p
    return ReportingNetwork(reporter[keep], subject[keep], float(tau_d), float(tau_n))


@dataclass(frozen=True)
class CensusTruth:
    cell: Cell
    D: float
    N: float
    D_vis: float
    N_vis: float
    M: float | None
    M_vis: float | None
    M_invis: float | None
    p_inv_D: float | None
    p_inv_N: float | None

    @property
    def D_invis(self) -> float:
        return self.D - self.D_vis

    @property
    def N_invis(self) -> float:
        return self.N - self.N_vis

    @property
    def K(self) -> float | None:
        if self.M_vis is None or self.M_invis is None or self.M_vis == 0:
            return None
        return self.M_invis / self.M_vis


def _div(a, b):
    return float(a / b) if b > 0 else None


def census_truth(universe: PseudoPopulation, cells: Sequence[Cell],
                 frame: FrameDefinition | None = None, include_respondent: bool = False,
                 exposure_mode=ExposureMode.HEADCOUNT) -> list[CensusTruth]:
    """True, visible and invisible death rates per cell by direct enumeration.

    Rates whose denominator is zero are ``None``.
    """
    cells = tuple(cells)
    check_disjoint(cells)
    expo, deaths = universe.contributions(cells, exposure_mode)
    visible = universe.visibility(include_respondent, frame) > 0
    out = []
    for c, cell in enumerate(cells):
        D, N = deaths[:, c].sum(), expo[:, c].sum()
        Dv, Nv = deaths[visible, c].sum(), expo[visible, c].sum()
        out.append(CensusTruth(cell, float(D), float(N), float(Dv), float(Nv),
                               _div(D, N), _div(Dv, Nv), _div(D - Dv, N - Nv),
                               _div(D - Dv, D), _div(N - Nv, N)))
    return out


def network_tallies(universe: PseudoPopulation, network: ReportingNetwork, cells: Sequence[Cell],
                    include_respondent: bool = False,
                    exposure_mode=ExposureMode.HEADCOUNT, contributions=None) -> TallyTable:
    """Tallies that every frame member would report, i.e. a full census of the frame.

    Rows follow the order of frame members in the universe; weights are 1.
    """
    cells = tuple(cells)
    check_disjoint(cells)
    mode = ExposureMode.coerce(exposure_mode)
    expo, deaths = contributions if contributions is not None else universe.contributions(cells, mode)
    frame_rows = np.flatnonzero(universe.in_frame)
    reports = network.matrix(len(universe))[frame_rows]
    in_f = universe.in_frame.astype(float)
    y_D = np.asarray(reports @ deaths)
    y_in = np.asarray(reports @ (expo * in_f[:, None]))
    y_out = np.asarray(reports @ (expo * (1.0 - in_f)[:, None]))
    y_F = np.rint(np.asarray(reports @ in_f)).astype(np.int64)
    if include_respondent:
        y_in = y_in + expo[frame_rows]
        y_F = y_F + 1
    return TallyTable(universe.person_id[frame_rows].astype(str).astype(object), cells,
                      np.ones(len(frame_rows)), y_D, y_in, y_out, y_F,
                      bool(include_respondent), mode)


def sample_size(n_frame: int, f: float) -> int:
    if not 0 < f <= 1:
        raise ValueError("sampling fraction must lie in (0, 1]")
    return int(math.floor(f * n_frame + 1e-9))


def _sample_rows(n_frame: int, f: float, rng_seed) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    return np.sort(rng.choice(n_frame, size=sample_size(n_frame, f), replace=False))


def draw_survey(universe: PseudoPopulation, network: ReportingNetwork, f: float,
                rng_seed=0) -> SurveyDataset:
    """Simple random sample without replacement of ``floor(f * |F|)`` frame members.

    Every respondent gets weight ``1/f``, one stratum, and their own PSU. Rosters
    hold only the siblings the respondent reports through ``network``.
    """
    frame_rows = np.flatnonzero(universe.in_frame)
    chosen = frame_rows[_sample_rows(len(frame_rows), f, rng_seed)]
    u = universe
    respondents = tuple(
        Respondent(str(u.person_id[i]), "1", str(u.person_id[i]), 1.0 / f, str(u.sex[i]),
                   int(u.dob[i]), int(u.interview[i])) for i in chosen)
    order = np.argsort(network.reporter, kind="stable")
    rep_sorted = network.reporter[order]
    subj_sorted = network.subject[order]
    lo = np.searchsorted(rep_sorted, chosen, side="left")
    hi = np.searchsorted(rep_sorted, chosen, side="right")
    siblings = []
    for i, a, b in zip(chosen, lo, hi):
        rid = str(u.person_id[i])
        for k, j in enumerate(np.sort(subj_sorted[a:b]), start=1):
            siblings.append(SiblingReport(rid, k, str(u.sex[j]), int(u.dob[j]), bool(u.alive[j]),
                                          None if u.alive[j] else int(u.dod[j])))
    return SurveyDataset(u.frame, respondents, tuple(siblings))


@dataclass(frozen=True)
class MSEDecomposition:
    rel_mse: float
    rel_bias_sq: float
    rel_var: float


def mse_decomposition(estimates, truth: float) -> MSEDecomposition:
    """Relative MSE of a set of estimates, split into squared bias and variance.

    All three pieces divide by the number of estimates, so the split is exact.
    """
    est = np.asarray(estimates, float)
    if est.size == 0:
        raise ValueError("need at least one estimate")
    if truth == 0:
        raise ZeroTruthError("truth is zero; relative error undefined")
    k = est.size
    err = est - truth
    return MSEDecomposition(float(np.sum(err ** 2) / (k * truth ** 2)),
                            float((np.sum(err) / (k * truth)) ** 2),
                            float(np.sum((est - est.mean()) ** 2) / (k * truth ** 2)))


@dataclass(frozen=True)
class ScenarioConfig:
    m_sibships: int = 5000
    tau_d: tuple = (1.0,)
    tau_n: tuple = (1.0,)
    sampling_fractions: tuple = (0.05,)
    n_surveys: int = 100
    seed: int = 0
    cells: tuple = field(default_factory=lambda: tuple(make_cells()))
    frame: FrameDefinition = field(default_factory=lambda: FrameDefinition({"f"}, 15, 49))
    exposure_mode: ExposureMode = ExposureMode.HEADCOUNT
    estimators: tuple = tuple(Estimator)
    seed_data: SurveyDataset | tuple | None = None
    synthetic_respondents: int = 2000

    def __post_init__(self):
        for name in ("tau_d", "tau_n", "sampling_fractions", "cells", "estimators"):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        object.__setattr__(self, "exposure_mode", ExposureMode.coerce(self.exposure_mode))
        if self.n_surveys < 1:
            raise ValueError("n_surveys must be at least 1")
        for f in self.sampling_fractions:
            if not 0 < f <= 1:
                raise ValueError("sampling fractions must lie in (0, 1]")
        for t in self.tau_d + self.tau_n:
            if not 0 < t <= 1:
                raise ValueError("reporting rates must lie in (0, 1]")

    def seed_dataset(self) -> SurveyDataset:
        from .synthetic import generate_survey

        if isinstance(self.seed_data, SurveyDataset):
            return self.seed_data
        if self.seed_data is not None:
            return load_dataset(self.seed_data[0], self.seed_data[1], self.frame)
        return generate_survey(self.synthetic_respondents, seed=[self.seed, 99], frame=self.frame)


def _parse_range(text: str) -> tuple[int, int]:
    lo, hi = str(text).split(":")
    return int(lo), int(hi)


def load_config(path) -> ScenarioConfig:
    """Read a TOML scenario file; relative paths resolve against its directory."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    path = Path(path)
    raw = tomllib.loads(path.read_text())
    frame = FrameDefinition.parse(raw.get("frame", "f15-49"))
    cells_cfg = raw.get("cells", {})
    lo, hi = _parse_range(cells_cfg.get("ages", f"{frame.age_min}:{frame.age_max}"))
    if "window" in cells_cfg:
        window, relative = _parse_range(cells_cfg["window"]), False
    else:
        window, relative = (-12 * int(cells_cfg.get("window_years", 7)), -1), True
    cells = make_cells(lo, hi, int(cells_cfg.get("width", 5)),
                       tuple(cells_cfg.get("sexes", ["f", "m"])), window, relative)
    seed_cfg = raw.get("seed_data", {})
    seed_data = None
    if "respondents" in seed_cfg:
        seed_data = (path.parent / seed_cfg["respondents"], path.parent / seed_cfg["siblings"])
    return ScenarioConfig(
        m_sibships=int(raw.get("m_sibships", 5000)),
        tau_d=tuple(float(t) for t in np.atleast_1d(raw.get("tau_d", [1.0]))),
        tau_n=tuple(float(t) for t in np.atleast_1d(raw.get("tau_n", [1.0]))),
        sampling_fractions=tuple(float(f) for f in np.atleast_1d(raw.get("sampling_fractions", [0.05]))),
        n_surveys=int(raw.get("n_surveys", 100)),
        seed=int(raw.get("seed", 0)),
        cells=tuple(cells),
        frame=frame,
        exposure_mode=raw.get("exposure", "headcount"),
        estimators=tuple(Estimator.parse(e) for e in raw.get("estimators", [e.name for e in Estimator])),
        seed_data=seed_data,
        synthetic_respondents=int(seed_cfg.get("synthetic_respondents", 2000)),
    )


def _key(x: float) -> int:
    return int(round(x * 1_000_000))


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    """Sampling distribution of each estimator for one (tau_d, tau_n, f) scenario.

    ``estimates[e]`` has shape ``(n_surveys, n_cells)``; NaN marks cells with no
    sampled exposure. ``truth[e]`` is the visible death rate matching the
    estimator's visibility rule, ``estimand[e]`` the full-frame census value,
    and ``expected_reports[e]`` the expected number of sampled death reports.
    """

    tau_d: float
    tau_n: float
    f: float
    cells: tuple
    estimates: dict
    truth: dict
    estimand: dict
    expected_reports: dict

    def summary(self) -> list[dict]:
        rows = []
        for e, est in self.estimates.items():
            for c, cell in enumerate(self.cells):
                truth = self.truth[e][c]
                vals = est[:, c][~np.isnan(est[:, c])]
                if np.isnan(truth) or truth == 0 or vals.size == 0:
                    dec = MSEDecomposition(np.nan, np.nan, np.nan)
                else:
                    dec = mse_decomposition(vals, truth)
                rows.append(dict(tau_d=self.tau_d, tau_n=self.tau_n, f=self.f, estimator=e.name,
                                 cell=cell.label, n_surveys=int(vals.size), truth=truth,
                                 estimand=self.estimand[e][c],
                                 mean_estimate=float(vals.mean()) if vals.size else np.nan,
                                 rel_mse=dec.rel_mse, rel_bias_sq=dec.rel_bias_sq,
                                 rel_var=dec.rel_var))
        return rows


def _truth_vector(truths: list[CensusTruth]) -> np.ndarray:
    return np.array([np.nan if t.M_vis is None else t.M_vis for t in truths])


def run_scenario(config: ScenarioConfig, universe: PseudoPopulation | None = None) -> list[ScenarioResult]:
    """Run every (tau_d, tau_n, f) combination of ``config``.

    Each random stream is derived from ``config.seed`` and the scenario values,
    so any single scenario reproduces regardless of the grid it sits in.
    Survey ``rep`` of a scenario draws the same respondents as
    ``draw_survey(universe, network, f, survey_seed(config, tau_d, tau_n, f, rep))``.
    """
    cells = tuple(config.cells)
    mode = config.exposure_mode
    if universe is None:
        universe = build_universe(config.seed_dataset(), config.m_sibships,
                                  np.random.SeedSequence([config.seed, 0]), config.frame)
    contrib = universe.contributions(cells, mode)
    truth = {}
    for incl in (False, True):
        truth[incl] = _truth_vector(census_truth(universe, cells, None, incl, mode))
    n_frame = int(universe.in_frame.sum())
    results = []
    for tau_d in config.tau_d:
        for tau_n in config.tau_n:
            network = apply_reporting(universe, tau_d, tau_n, network_seed(config, tau_d, tau_n))
            terms = {}
            for incl in (False, True):
                tab = network_tallies(universe, network, cells, incl, mode, contrib)
                terms[(False, incl)] = aggregate_terms(tab)
                terms[(True, incl)] = individual_terms(tab)
            for f in config.sampling_fractions:
                est = {e: np.empty((config.n_surveys, len(cells))) for e in config.estimators}
                for rep in range(config.n_surveys):
                    rows = _sample_rows(n_frame, f, survey_seed(config, tau_d, tau_n, f, rep))
                    for e in config.estimators:
                        num, den = terms[(e.family.value == "ind", e.include_respondent)]
                        d = den[rows].sum(axis=0)
                        with np.errstate(invalid="ignore", divide="ignore"):
                            est[e][rep] = np.where(d > 0, num[rows].sum(axis=0) / np.where(d > 0, d, 1), np.nan)
                estimand = {}
                expected = {}
                for e in config.estimators:
                    num, den = terms[(e.family.value == "ind", e.include_respondent)]
                    dsum = den.sum(axis=0)
                    with np.errstate(invalid="ignore", divide="ignore"):
                        estimand[e] = np.where(dsum > 0, num.sum(axis=0) / np.where(dsum > 0, dsum, 1), np.nan)
                    y_D = terms[(False, e.include_respondent)][0]
                    expected[e] = f * y_D.sum(axis=0)
                results.append(ScenarioResult(
                    tau_d, tau_n, f, cells, est,
                    {e: truth[e.include_respondent] for e in config.estimators},
                    estimand, expected))
    return results


def network_seed(config: ScenarioConfig, tau_d: float, tau_n: float) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed, 1, _key(tau_d), _key(tau_n)])


def survey_seed(config: ScenarioConfig, tau_d: float, tau_n: float, f: float,
                rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed, 2, _key(tau_d), _key(tau_n), _key(f), rep])


RESULT_COLUMNS = ["tau_d", "tau_n", "f", "rep", "estimator", "cell", "estimate", "truth"]
SUMMARY_COLUMNS = ["tau_d", "tau_n", "f", "estimator", "cell", "n_surveys", "truth", "estimand",
                   "mean_estimate", "rel_mse", "rel_bias_sq", "rel_var"]


def write_scenario_outputs(results: Sequence[ScenarioResult], out_dir, fmt: str = "csv") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "json" if fmt == "json" else "csv"
    res_path = out_dir / f"scenario_results.{ext}"
    sum_path = out_dir / f"scenario_summary.{ext}"

    def result_rows():
        for r in results:
            for e, est in r.estimates.items():
                for rep in range(est.shape[0]):
                    for c, cell in enumerate(r.cells):
                        yield [r.tau_d, r.tau_n, r.f, rep, e.name, cell.label,
                               float(est[rep, c]), float(r.truth[e][c])]

    write_rows(res_path, RESULT_COLUMNS, result_rows(), fmt)
    write_rows(sum_path, SUMMARY_COLUMNS,
               ([row[k] for k in SUMMARY_COLUMNS] for r in results for row in r.summary()), fmt)
    return res_path, sum_path
