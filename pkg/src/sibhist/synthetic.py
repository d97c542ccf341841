"""Synthetic sibling-history surveys for fixtures, demos and seeding the simulator.

Sibships are generated by a simple birth-spacing process with a piecewise
hazard of death; one frame-eligible member is interviewed per sibship.
"""

from __future__ import annotations

import numpy as np

from .data import FrameDefinition, Respondent, SiblingReport, SurveyDataset


def _monthly_hazard(max_age: int, adult_level: float, adult_slope: float) -> np.ndarray:
    ages = np.arange(max_age * 12) / 12.0
    annual = np.select(
        [ages < 1, ages < 5, ages < 15],
        [0.08, 0.015, 0.003],
        adult_level * np.exp(adult_slope * (ages - 15.0)),
    )
    return annual / 12.0


def generate_survey(n_respondents: int, seed=0, frame: FrameDefinition | None = None,
                    interview_cmc: int = 1212, fieldwork_months: int = 6,
                    mean_sibship: float = 5.0, adult_level: float = 0.006,
                    adult_slope: float = 0.045, frailty_sd: float = 0.0,
                    n_strata: int = 10, psu_size: int = 20, weight_sd: float = 0.0) -> SurveyDataset:
    """Simulate a survey of ``n_respondents`` sibling histories.

    ``frailty_sd`` adds a shared log-normal mortality multiplier per sibship,
    which links sibship size and survival. ``weight_sd`` is the log-scale spread
    of design weights (0 gives equal weights).
    """
    frame = frame or FrameDefinition({"f"}, 15, 49)
    rng = np.random.default_rng(seed)
    cum_hazard = np.cumsum(_monthly_hazard(110, adult_level, adult_slope))
    eligible_sexes = sorted(frame.sexes_eligible)

    respondents, siblings = [], []
    made = 0
    while made < n_respondents:
        interview = interview_cmc + int(rng.integers(0, fieldwork_months))
        size = 1 + rng.poisson(mean_sibship - 1)
        first = interview - int(rng.integers(12 * frame.age_min, 12 * (frame.age_max + 25)))
        gaps = 12 + rng.gamma(2.0, 10.0, size - 1).astype(np.int64)
        dob = first + np.concatenate([[0], np.cumsum(gaps)])
        dob = dob[dob < interview]
        n = len(dob)
        sex = np.where(rng.random(n) < 0.5, "f", "m")
        frailty = np.exp(frailty_sd * rng.standard_normal() - frailty_sd ** 2 / 2)
        death_age = np.searchsorted(cum_hazard, -np.log(rng.random(n)) / frailty)
        dod = dob + death_age
        alive = dod > interview
        age = (interview - dob) // 12
        ok = alive & np.isin(sex, eligible_sexes) & (age >= frame.age_min) & (age <= frame.age_max)
        # keep sibships in proportion to their eligible members, as a survey of
        # individuals would
        if rng.random() * 8 >= ok.sum():
            continue
        ego = int(rng.choice(np.flatnonzero(ok)))
        rid = f"r{made + 1:06d}"
        stratum = made % n_strata
        psu = f"{stratum}-{made // (n_strata * psu_size)}"
        weight = float(np.exp(weight_sd * rng.standard_normal())) if weight_sd > 0 else 1.0
        respondents.append(Respondent(rid, str(stratum), psu, weight, str(sex[ego]),
                                      int(dob[ego]), interview))
        k = 0
        for j in range(n):
            if j == ego:
                continue
            k += 1
            siblings.append(SiblingReport(rid, k, str(sex[j]), int(dob[j]), bool(alive[j]),
                                          None if alive[j] else int(dod[j])))
        made += 1
    return SurveyDataset(frame, tuple(respondents), tuple(siblings))
