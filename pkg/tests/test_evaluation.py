from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from regkg.evaluation import EvalReport, evaluate_spans, format_table, percent
from regkg.tagger import SpanTag
from regkg.taxonomy import TagType


def span(start, end, ttype=TagType.ENT, para="p"):
    return SpanTag(para, start, end, ttype, "x" * (end - start))


def test_identity_is_perfect():
    gold = [span(0, 3), span(5, 9)]
    r = evaluate_spans(gold, gold)[TagType.ENT]
    assert (percent(r.precision), percent(r.recall), percent(r.f1)) == (100.0, 100.0, 100.0)


def test_two_of_three():
    gold = [span(0, 3), span(5, 9)]
    pred = gold + [span(20, 22)]
    r = evaluate_spans(gold, pred, "exact")[TagType.ENT]
    assert (r.tp, r.fp, r.fn) == (2, 1, 0)
    assert (percent(r.precision), percent(r.recall), percent(r.f1)) == (66.67, 100.0, 80.0)


def test_empty_prediction():
    r = evaluate_spans([span(0, 3)], [])[TagType.ENT]
    assert r.precision is None
    assert r.recall == 0 and r.f1 == 0
    assert r.to_dict()["precision_defined"] is False


def test_overlap_mode_consumes_gold_once():
    gold = [span(0, 10)]
    pred = [span(0, 4), span(5, 9)]
    r = evaluate_spans(gold, pred, "overlap")[TagType.ENT]
    assert (r.tp, r.fp, r.fn) == (1, 1, 0)
    assert evaluate_spans(gold, pred, "exact")[TagType.ENT].tp == 0


def test_overlap_finds_a_maximum_matching():
    # plain greedy would pair p0 with g0 and strand g1
    gold = [span(0, 5), span(4, 6)]
    pred = [span(3, 5), span(0, 1)]
    assert evaluate_spans(gold, pred)[TagType.ENT].tp == 2


def test_types_and_paragraphs_do_not_mix():
    gold = [span(0, 3, TagType.ENT, "p"), span(0, 3, TagType.MIT, "p")]
    pred = [span(0, 3, TagType.ENT, "q"), span(0, 3, TagType.RISK, "p")]
    out = evaluate_spans(gold, pred)
    assert set(out) == {TagType.ENT, TagType.MIT, TagType.RISK}
    assert out[TagType.ENT].tp == 0
    assert out[TagType.ENT].dataset_length == 2
    assert out[TagType.MIT].dataset_length == 1  # RISK_MIT group sees paragraph p only


def test_half_up_rounding():
    assert percent(Fraction(1, 8)) == 12.5
    assert percent(Fraction(2, 3)) == 66.67
    assert percent(Fraction(1, 3)) == 33.33
    assert percent(Fraction(5, 80000)) == 0.01  # exactly .5 of a hundredth rounds up
    assert percent(None) is None


def test_table_layout():
    text = format_table([EvalReport(TagType.MIT, 2, 1, 0, 4), EvalReport(TagType.DEF, 0, 0, 1, 1)])
    lines = text.splitlines()
    assert lines[0].split() == ["Tag", "Dataset", "length", "Precision", "Recall", "F1", "Model"]
    assert lines[1].split() == ["MIT", "4", "66.67", "100.00", "80.00", "RISK_MIT"]
    assert lines[2].split() == ["DEF", "1", "n/a", "0.00", "0.00", "DEF"]


spans_st = st.lists(st.builds(lambda s, l, t, p: span(s, s + l, t, p), st.integers(0, 30), st.integers(1, 6),
                              st.sampled_from([TagType.ENT, TagType.MIT]), st.sampled_from(["p", "q"])),
                    max_size=10)


@given(spans_st, spans_st, st.sampled_from(["exact", "overlap"]))
def test_swapping_sides_swaps_precision_and_recall(gold, pred, mode):
    a, b = evaluate_spans(gold, pred, mode), evaluate_spans(pred, gold, mode)
    assert set(a) == set(b)
    for t in a:
        assert a[t].precision == b[t].recall and a[t].recall == b[t].precision
        p, r = a[t].precision, a[t].recall
        if p is not None and r is not None and p + r > 0:
            assert a[t].f1 == 2 * p * r / (p + r)
