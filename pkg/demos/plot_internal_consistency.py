"""
Checking reports for internal consistency
=========================================

Every tie between a respondent aged 30 and a frame sibling aged 35 should
appear from both ends. Comparing the two directions age by age flags
patterns of omission.
"""

from sibhist import SurveyDataset
from sibhist.diagnostics import ic_delta, invisible_fraction_by_age
from sibhist.simulate import build_universe, draw_survey, full_network
from sibhist.synthetic import generate_survey

universe = build_universe(generate_survey(2000, seed=3), 4000, rng_seed=4)
census = draw_survey(universe, full_network(universe), 1.0)

# On a census with perfect reporting both directions agree exactly.
print("census deltas:", {a: ic_delta(census, a) for a in range(25, 31)})

# %%
# Now suppose respondents forget their living sisters aged 25.
itv = {r.resp_id: r.interview for r in census.respondents}
kept = tuple(s for s in census.siblings
             if not (s.alive and s.sex == "f" and (itv[s.resp_id] - s.dob) // 12 == 25))
damaged = SurveyDataset(census.frame, census.respondents, kept)
print("after omission:", {a: ic_delta(damaged, a) for a in range(23, 28)})

# %%
# A related check: the share of respondents who have no sibling on the frame,
# by age. Their own deaths would be invisible to the survey.
sample = draw_survey(universe, full_network(universe), 0.3, rng_seed=5)
bands = [(a, a + 4) for a in range(15, 50, 5)]
for band, share in invisible_fraction_by_age(sample, bands).items():
    print(f"{band[0]}-{band[1]}: {share:.3f}")
