import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sibhist import Respondent, SiblingReport, SurveyDataset
from sibhist.diagnostics import ic_checks, ic_delta, ic_delta_band, invisible_fraction_by_age
from sibhist.simulate import build_universe, draw_survey, full_network
from sibhist.synthetic import generate_survey
from sibhist.variance import replicate_multipliers

from conftest import F1549

AGES = range(15, 50)


@pytest.fixture(scope="module")
def census(universe):
    return draw_survey(universe, full_network(universe), 1.0)


def test_census_is_consistent_at_every_age(census):
    for a in AGES:
        assert ic_delta(census, a) == pytest.approx(0, abs=1e-9)


def test_census_sums_are_symmetric(census):
    from sibhist.diagnostics import _cross_age_terms
    terms = np.array([_cross_age_terms(census, a, a, None) for a in AGES])
    assert terms[:, 0].sum() == pytest.approx(terms[:, 1].sum())
    assert terms[:, 0].sum() > 0


def test_deleting_reports_of_one_age(census):
    itv = {r.resp_id: r.interview for r in census.respondents}
    r_age = {r.resp_id: (r.interview - r.dob) // 12 for r in census.respondents}
    kept, lost = [], {}
    for s in census.siblings:
        if s.alive and s.sex == "f" and (itv[s.resp_id] - s.dob) // 12 == 25:
            lost[r_age[s.resp_id]] = lost.get(r_age[s.resp_id], 0) + 1
        else:
            kept.append(s)
    damaged = SurveyDataset(census.frame, census.respondents, tuple(kept))
    assert ic_delta(damaged, 25) == pytest.approx(sum(v for a, v in lost.items() if a != 25))
    assert ic_delta(damaged, 25) > 0
    others = {a: ic_delta(damaged, a) for a in AGES if a != 25}
    for a, d in others.items():
        assert d == pytest.approx(-lost.get(a, 0))
    assert sum(d < 0 for d in others.values()) >= 15
    assert sum(others.values()) == pytest.approx(-ic_delta(damaged, 25))


def test_single_respondent():
    resp = (Respondent("r", "1", "1", 2.5, "f", 1200 - 12 * 30, 1200),)
    sibs = (SiblingReport("r", 1, "f", 1200 - 12 * 35, True),)
    ds = SurveyDataset(F1549, resp, sibs)
    assert ic_delta(ds, 30) == 2.5
    # the same tie seen from the other side
    assert ic_delta(ds, 35) == -2.5
    assert ic_delta(ds, 40) == 0


def test_band_variant_and_replicates(survey):
    assert ic_delta_band(survey, 30, 34) == pytest.approx(
        ic_delta(survey, 30, age_hi=34))
    reps = replicate_multipliers(survey, 200, 1) * survey.resp.weight
    assert ic_delta(survey, 30, reps).shape == (200,)
    rows = ic_checks(survey, [20, 30], reps)
    for age, delta, lo, hi in rows:
        assert lo <= hi
        assert delta == ic_delta(survey, age)
    assert all(np.isnan(r[2]) for r in ic_checks(survey, [20], reps[:100]))


def test_fraction_zero_when_everyone_has_a_frame_sibling():
    resp = [Respondent(f"r{i}", "1", str(i), 1.0, "f", 1200 - 12 * (20 + i), 1200) for i in range(5)]
    sibs = [SiblingReport(f"r{i}", 1, "f", 1200 - 12 * 30, True) for i in range(5)]
    ds = SurveyDataset(F1549, resp, sibs)
    assert invisible_fraction_by_age(ds, [(15, 49)]) == {(15, 49): 0.0}


def test_half_weight_invisible():
    resp = [Respondent("a", "1", "1", 3.0, "f", 1200 - 12 * 46, 1200),
            Respondent("b", "1", "2", 1.0, "f", 1200 - 12 * 47, 1200),
            Respondent("c", "1", "3", 2.0, "f", 1200 - 12 * 48, 1200),
            Respondent("d", "1", "4", 5.0, "f", 1200 - 12 * 30, 1200)]
    sibs = [SiblingReport("a", 1, "f", 1200 - 12 * 40, True),
            SiblingReport("b", 1, "f", 1200 - 12 * 60, True),     # too old for the frame
            SiblingReport("c", 1, "m", 1200 - 12 * 40, True),     # wrong sex
            SiblingReport("b", 2, "f", 1200 - 12 * 40, False, 1100)]
    out = invisible_fraction_by_age(SurveyDataset(F1549, resp, sibs), [(45, 49), (30, 34), (15, 19)])
    assert out[(45, 49)] == 0.5
    assert out[(30, 34)] == 1.0
    assert np.isnan(out[(15, 19)])


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_fraction_in_unit_interval(seed):
    ds = generate_survey(150, seed=seed, weight_sd=0.5)
    bands = [(a, a + 4) for a in range(15, 50, 5)]
    for v in invisible_fraction_by_age(ds, bands).values():
        assert 0 <= v <= 1


def test_invisibility_is_u_shaped_in_age(seed_survey):
    universe = build_universe(seed_survey, 40_000, rng_seed=2)
    ds = draw_survey(universe, full_network(universe), 0.25, rng_seed=3)
    frac = invisible_fraction_by_age(ds, [(15, 19), (30, 34), (45, 49)])
    assert frac[(15, 19)] > frac[(30, 34)]
    assert frac[(45, 49)] > frac[(30, 34)]
