import numpy as np
import pytest

from sibhist import FrameDefinition, Respondent, SiblingReport, SurveyDataset
from sibhist.simulate import build_universe
from sibhist.synthetic import generate_survey

F1549 = FrameDefinition({"f"}, 15, 49)

# Acceptance criterion lines collected across the session, printed at the end.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def two_respondents():
    """Two respondents interviewed in CMC 1200 with five siblings between them."""
    resp = (
        Respondent("a", "s1", "p1", 2.0, "f", 1200 - 12 * 30 - 5, 1200),
        Respondent("b", "s1", "p2", 1.0, "f", 1200 - 12 * 22, 1200),
    )
    sibs = (
        SiblingReport("a", 1, "f", 1200 - 12 * 35, True),
        SiblingReport("a", 2, "m", 1200 - 12 * 28, False, 1200 - 30),
        SiblingReport("a", 3, "f", 1200 - 12 * 60, True),
        SiblingReport("b", 1, "f", 1200 - 12 * 25, True),
        SiblingReport("b", 2, "f", 1200 - 12 * 40, False, 1200 - 10),
    )
    return SurveyDataset(F1549, resp, sibs)


@pytest.fixture(scope="session")
def survey():
    return generate_survey(1500, seed=5)


@pytest.fixture(scope="session")
def seed_survey():
    return generate_survey(2000, seed=17)


@pytest.fixture(scope="session")
def universe(seed_survey):
    return build_universe(seed_survey, 3000, rng_seed=4)


def brute_force_tallies(dataset, cells, include_respondent=False):
    """Month-by-month reference implementation of person-year tallies."""
    frame = dataset.frame
    n, k = len(dataset.respondents), len(cells)
    y_D, y_in, y_out = np.zeros((n, k)), np.zeros((n, k)), np.zeros((n, k))
    y_F = np.zeros(n, int)
    index = {r.resp_id: i for i, r in enumerate(dataset.respondents)}

    def add(i, sex, dob, alive, dod, interview, in_frame):
        for c, cell in enumerate(cells):
            ws, we = cell.window_start, cell.window_end
            if cell.relative:
                ws, we = interview + ws, interview + we
            if cell.sex is not None and sex != cell.sex:
                continue
            for m in range(ws, we + 1):
                if m < dob or (not alive and m > dod):
                    continue
                age = (m - dob) // 12
                if not cell.age_lo <= age <= cell.age_hi:
                    continue
                amount = 0.5 / 12 if (not alive and m == dod) else 1 / 12
                (y_in if in_frame else y_out)[i, c] += amount
                if not alive and m == dod:
                    y_D[i, c] += 1

    for s in dataset.siblings:
        i = index[s.resp_id]
        itv = dataset.respondents[i].interview
        age = (itv - s.dob) // 12
        member = s.alive and s.sex in frame.sexes_eligible and frame.age_min <= age <= frame.age_max
        y_F[i] += member
        add(i, s.sex, s.dob, s.alive, s.dod, itv, member)
    if include_respondent:
        for i, r in enumerate(dataset.respondents):
            y_F[i] += 1
            add(i, r.sex, r.dob, True, None, r.interview, True)
    return y_D, y_in, y_out, y_F
