import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sibhist import (Cell, FrameDefinition, SiblingReport, is_frame_member, load_dataset,
                     make_cells, tally, write_dataset)
from sibhist.errors import DataError

from conftest import F1549

RESP_HEADER = "resp_id,stratum_id,psu_id,weight,sex,dob_cmc,interview_cmc\n"
SIB_HEADER = "resp_id,sib_index,sex,dob_cmc,alive,dod_cmc\n"


def write(tmp_path, resp_rows, sib_rows, resp_header=RESP_HEADER, sib_header=SIB_HEADER):
    r = tmp_path / "respondents.csv"
    s = tmp_path / "siblings.csv"
    r.write_text(resp_header + "".join(line + "\n" for line in resp_rows))
    s.write_text(sib_header + "".join(line + "\n" for line in sib_rows))
    return r, s


GOOD_RESP = ["r1,1,10,1.5,f,840,1200", "r2,1,11,2.0,f,960,1201"]
GOOD_SIBS = ["r1,1,m,850,1,", "r1,2,f,880,0,1100", "r1,3,f,900,1,",
             "r2,1,m,950,1,", "r2,2,f,1000,0,1190"]


def test_load_well_formed(tmp_path):
    ds = load_dataset(*write(tmp_path, GOOD_RESP, GOOD_SIBS), F1549)
    assert len(ds.respondents) == 2
    assert len(ds.siblings) == 5
    assert ds.respondents[0].weight == 1.5
    assert ds.siblings[1].dod == 1100 and not ds.siblings[1].alive


def test_column_order_is_free(tmp_path):
    header = "interview_cmc,dob_cmc,sex,weight,psu_id,stratum_id,resp_id\n"
    rows = ["1200,840,f,1.5,10,1,r1", "1201,960,f,2.0,11,1,r2"]
    ds = load_dataset(*write(tmp_path, rows, GOOD_SIBS, resp_header=header), F1549)
    assert ds.respondents[1].resp_id == "r2"


def test_missing_column(tmp_path):
    header = "resp_id,stratum_id,psu_id,sex,dob_cmc,interview_cmc\n"
    rows = ["r1,1,10,f,840,1200"]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, rows, [], resp_header=header), F1549)
    assert err.value.codes == {"MISSING_COLUMN"}
    assert "weight" in str(err.value)


def test_dead_without_dod_is_bad_date(tmp_path):
    sibs = GOOD_SIBS[:1] + ["r1,2,f,880,0,"] + GOOD_SIBS[2:]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, sibs), F1549)
    assert err.value.codes == {"BAD_DATE"}
    assert err.value.issues[0].row == 2
    assert "siblings:2" in str(err.value)


@pytest.mark.parametrize("row", ["r1,2,f,880,0,870", "r1,2,f,880,0,1300"])
def test_death_date_out_of_range(tmp_path, row):
    sibs = GOOD_SIBS[:1] + [row] + GOOD_SIBS[2:]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, sibs), F1549)
    assert "BAD_DATE" in err.value.codes


def test_orphan_sibling(tmp_path):
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, GOOD_SIBS + ["zz,1,f,900,1,"]), F1549)
    assert err.value.codes == {"ORPHAN_SIBLING"}


@pytest.mark.parametrize("w", ["0", "-1", "abc"])
def test_nonpositive_weight(tmp_path, w):
    rows = [f"r1,1,10,{w},f,840,1200", GOOD_RESP[1]]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, rows, GOOD_SIBS), F1549)
    assert "NONPOSITIVE_WEIGHT" in err.value.codes


def test_respondent_outside_frame(tmp_path):
    rows = [f"r1,1,10,1.0,f,{1200 - 12 * 52},1200", GOOD_RESP[1]]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, rows, GOOD_SIBS), F1549)
    assert err.value.codes == {"FRAME_VIOLATION"}
    assert "age 52" in str(err.value)


def test_unknown_survival_status_rejected(tmp_path):
    sibs = GOOD_SIBS[:1] + ["r1,2,f,880,8,"] + GOOD_SIBS[2:]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, sibs), F1549)
    assert err.value.codes == {"BAD_VALUE"}


def test_duplicate_sibling(tmp_path):
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, GOOD_SIBS + ["r1,1,m,850,1,"]), F1549)
    assert "DUPLICATE_SIBLING" in err.value.codes


def test_all_bad_rows_reported_together(tmp_path):
    sibs = ["r1,1,m,850,0,", "zz,1,f,900,1,", "r2,1,m,950,0,900"]
    with pytest.raises(DataError) as err:
        load_dataset(*write(tmp_path, GOOD_RESP, sibs), F1549)
    assert [i.row for i in err.value.issues] == [1, 2, 3]


def test_round_trip(tmp_path, survey):
    r, s = tmp_path / "r.csv", tmp_path / "s.csv"
    write_dataset(survey, r, s)
    again = load_dataset(r, s, survey.frame)
    assert again == survey
    r2, s2 = tmp_path / "r2.csv", tmp_path / "s2.csv"
    write_dataset(again, r2, s2)
    assert r.read_bytes() == r2.read_bytes()
    assert s.read_bytes() == s2.read_bytes()


def test_round_trip_of_input_file(tmp_path):
    paths = write(tmp_path, GOOD_RESP, GOOD_SIBS)
    ds = load_dataset(*paths, F1549)
    out = tmp_path / "out"
    out.mkdir()
    write_dataset(ds, out / "r.csv", out / "s.csv")
    assert (out / "s.csv").read_text() == paths[1].read_text()


@pytest.mark.parametrize("sib, expected", [
    (SiblingReport("x", 1, "f", 1200 - 12 * 30, True), True),
    (SiblingReport("x", 1, "f", 1200 - 12 * 30, False, 1190), False),
    (SiblingReport("x", 1, "m", 1200 - 12 * 30, True), False),
    (SiblingReport("x", 1, "f", 1200 - 12 * 50, True), False),
    (SiblingReport("x", 1, "f", 1200 - 12 * 50 + 1, True), True),
    (SiblingReport("x", 1, "f", 1200 - 12 * 15, True), True),
    (SiblingReport("x", 1, "f", 1200 - 12 * 15 + 1, True), False),
])
def test_is_frame_member(sib, expected):
    assert is_frame_member(sib, F1549, 1200) is expected


def test_frame_parse():
    assert FrameDefinition.parse("f15-49") == F1549
    fm = FrameDefinition.parse("fm15-59")
    assert fm.sexes_eligible == {"f", "m"} and fm.age_max == 59
    assert str(fm) == "fm15-59"
    for bad in ("x15-49", "f49-15", "f15"):
        with pytest.raises(ValueError):
            FrameDefinition.parse(bad)


def test_frame_invariants():
    with pytest.raises(ValueError):
        FrameDefinition(set(), 15, 49)
    with pytest.raises(ValueError):
        FrameDefinition({"f"}, 15, 140)


def test_cell_invariants():
    with pytest.raises(ValueError):
        Cell("f", 20, 19, 0, 10)
    with pytest.raises(ValueError):
        Cell("f", 15, 19, 10, 0)
    with pytest.raises(ValueError):
        Cell("x", 15, 19, 0, 10)


def test_frame_sibling_count_matches_tally(survey):
    tab = tally(survey, make_cells())
    expected = np.zeros(len(survey.respondents), int)
    for s in survey.siblings:
        i = survey.index[s.resp_id]
        expected[i] += is_frame_member(s, survey.frame, survey.respondents[i].interview)
    np.testing.assert_array_equal(tab.y_F, expected)
    assert tab.y_F.sum() == expected.sum()


@settings(max_examples=50, deadline=None)
@given(dob=st.integers(0, 1200), gap=st.integers(1, 1300))
def test_completed_age_is_floor(dob, gap):
    from sibhist.data import completed_age
    assert completed_age(dob, dob + gap) == gap // 12
