import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clicksuggest.errors import AnnotationError
from clicksuggest.evaluation import (WORKSHEET_HEADER, AnnotationRecord, aggregate, correlation_pct,
                                     read_annotations, render_worksheet, sample_eval_queries)
from clicksuggest.suggest import Kind


def _records(scores, queries=("q",)):
    return [AnnotationRecord(queries[i % len(queries)], f"s{i}", f"a{i % 4}", s) for i, s in enumerate(scores)]


def test_all_fours_is_eighty():
    assert aggregate(_records([4] * 20), Kind.EXISTING).correlation_pct == 80


def test_published_means():
    existing = aggregate(_records([4] * 98 + [3] * 2), Kind.EXISTING)
    absent = aggregate(_records([4] * 21 + [3] * 79), Kind.ABSENT)
    assert (existing.mean_score, existing.correlation_pct) == (3.98, 79)
    assert (absent.mean_score, absent.correlation_pct) == (3.21, 64)


def test_bounds():
    assert correlation_pct(5 * 7, 7) == 100 and correlation_pct(7, 7) == 20


def test_out_of_range_score_rejected():
    with pytest.raises(AnnotationError, match="record 1"):
        aggregate(_records([3, 6]), Kind.ABSENT)
    with pytest.raises(AnnotationError):
        aggregate(_records([0]), Kind.ABSENT)


def test_empty_input_rejected():
    with pytest.raises(AnnotationError):
        aggregate([], Kind.EXISTING)


def test_summary_lines():
    lines = aggregate(_records([5, 4], queries=("a", "b")), Kind.ABSENT).as_lines()
    assert "eval\tabsent\tn_queries\t2" in lines and "eval\tabsent\tcorrelation_pct\t90" in lines


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_percentage_properties(scores, rnd):
    s = aggregate(_records(scores), Kind.EXISTING)
    assert 20 <= s.correlation_pct <= 100
    assert s.correlation_pct <= s.mean_score * 20 < s.correlation_pct + 1
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    relabelled = [AnnotationRecord(f"x{i}", "y", "z", v) for i, v in enumerate(shuffled)]
    assert aggregate(relabelled, Kind.EXISTING).correlation_pct == s.correlation_pct
    if min(scores) < 5:
        bumped = list(scores)
        bumped[scores.index(min(scores))] += 1
        assert aggregate(_records(bumped), Kind.EXISTING).correlation_pct >= s.correlation_pct


def test_read_annotations():
    text = WORKSHEET_HEADER + "q\ts\tann\t3\n\nq\tt\tann\t5\n"
    recs = read_annotations(io.StringIO(text))
    assert [r.score for r in recs] == [3, 5] and recs[0].annotator_id == "ann"


@pytest.mark.parametrize("row", ["q\ts\tann\tx\n", "q\ts\t\t3\n", "q\ts\tann\t9\n", "q\ts\n"])
def test_read_annotations_errors(row):
    with pytest.raises(AnnotationError, match=":1:"):
        read_annotations(io.StringIO(row))


def test_sampling_is_seeded():
    existing, absent = [f"e{i}" for i in range(50)], [f"a{i}" for i in range(50)]
    a = sample_eval_queries(existing, absent, 10, seed=7)
    assert a == sample_eval_queries(list(reversed(existing)), absent, 10, seed=7)
    assert a != sample_eval_queries(existing, absent, 10, seed=8)
    assert len(set(a.existing)) == 10 and set(a.existing) <= set(existing) and not a.shortfall


def test_sampling_shortfall():
    s = sample_eval_queries(["e1", "e2"], [f"a{i}" for i in range(9)], 5, seed=0)
    assert sorted(s.existing) == ["e1", "e2"] and s.shortfall == {"existing": 3}
    assert len(s.absent) == 5


def test_worksheet_shape():
    entries = [("q1", [f"s{i}" for i in range(8)]), ("q2", ["t1", "t2"]), ("q3", [])]
    sheet = render_worksheet(entries, seed=1)
    assert sheet.startswith(WORKSHEET_HEADER)
    rows = [line.split("\t") for line in sheet.splitlines() if not line.startswith("#")]
    assert all(len(r) == 4 and r[2] == r[3] == "" for r in rows)
    assert sorted(r[1] for r in rows if r[0] == "q1") == [f"s{i}" for i in range(5)]
    assert sorted(r[1] for r in rows if r[0] == "q2") == ["t1", "t2"]
    assert render_worksheet(entries, seed=1) == sheet
    orders = {tuple(r[1] for r in (line.split("\t") for line in render_worksheet(entries, seed=s).splitlines()
                                   if line.startswith("q1\t"))) for s in range(10)}
    assert len(orders) > 1


def test_worksheet_round_trips_through_reader():
    sheet = render_worksheet([("q", ["a", "b"])], seed=0)
    filled = "".join(line.replace("\t\t", "\tann\t", 1) + ("2" if not line.startswith("#") else "") + "\n"
                     for line in sheet.splitlines())
    recs = read_annotations(io.StringIO(filled))
    assert sorted(r.suggestion for r in recs) == ["a", "b"]
