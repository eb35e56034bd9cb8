import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regkg.corpus import Paragraph, sentence_split
from regkg.coref import (
    CorefRule,
    Enrichment,
    apply,
    enriched_regions,
    load_rules,
    parse_rules,
    resolve,
    to_enriched,
    to_original,
)
from regkg.errors import FormatError, IntegrityError
from regkg.taxonomy import TagType
from regkg.text import tokenize

RULES = load_rules()


def para(text, ordinal=0, doc="d", pid=None):
    return Paragraph(pid or f"{doc}:{ordinal}", doc, ordinal, 0, text)


def enrich(p, context=()):
    return apply(resolve(p, list(context), RULES), p.text)


def naive_apply(replacements, text):
    # splice right to left so earlier offsets stay valid
    for start, end, original, new in sorted(replacements, reverse=True):
        assert text[start:end] == original
        text = text[:start] + new + text[end:]
    return text


def test_pronoun_resolves_into_previous_paragraph():
    prev = para("An Authorised Person must register.", 0)
    cur = para("It must also notify the Regulator.", 1)
    assert enrich(cur, [prev]) == "An Authorised Person must also notify the Regulator."


def test_no_pronouns_is_a_no_op():
    p = para("A firm must keep records.")
    assert resolve(p, [], RULES).replacements == ()
    assert enrich(p) == p.text


def test_plural_agreement():
    assert enrich(para("The firm and the client agree. They sign.")) == (
        "The firm and the client agree. The firm and the client sign.")


def test_other_documents_are_ignored():
    prev = para("An Authorised Person must register.", 0, doc="other")
    assert resolve(para("It acts.", 1), [prev], RULES).replacements == ()


def test_window_zero_stays_inside_the_paragraph():
    rules = [CorefRule("it", frozenset({TagType.ENT}), 0)]
    prev = para("An Authorised Person must register.", 0)
    assert resolve(para("It acts.", 1), [prev], rules).replacements == ()


def test_apply_examples():
    assert apply(Enrichment("p"), "It acts.") == "It acts."
    assert apply(Enrichment("p", ((0, 2, "It", "The firm"),)), "It acts.") == "The firm acts."


def test_apply_rejects_bad_replacements():
    with pytest.raises(IntegrityError):
        apply(Enrichment("p", ((0, 20, "It", "x"),)), "It acts.")
    with pytest.raises(IntegrityError):
        apply(Enrichment("p", ((0, 2, "It", "x"), (1, 3, "t ", "y"))), "It acts.")
    with pytest.raises(IntegrityError):
        apply(Enrichment("p", ((0, 2, "He", "x"),)), "It acts.")


def test_rule_parsing():
    rules = parse_rules(["# header", "", "It => ENT|PROD, 2", "such person => np"])
    assert rules[0] == CorefRule("it", frozenset({TagType.ENT, TagType.PROD}), 2)
    assert rules[1].antecedent_filter == frozenset() and rules[1].search_window == 3
    with pytest.raises(FormatError):
        parse_rules(["it ENT"])
    with pytest.raises(FormatError):
        CorefRule("it", search_window=-1)


def test_enrichment_record_round_trip():
    e = Enrichment("p", ((0, 2, "It", "The firm"),))
    assert Enrichment.from_dict(e.to_dict()) == e


@st.composite
def spliced(draw):
    text = draw(st.text(alphabet="abc .", min_size=1, max_size=40))
    cuts = sorted(draw(st.sets(st.integers(0, len(text)), max_size=8)))
    reps = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        if a < b:
            reps.append((a, b, text[a:b], draw(st.text(alphabet="XY", max_size=5))))
    return text, Enrichment("p", tuple(reps))


@given(spliced())
def test_apply_matches_naive_splice(case):
    text, e = case
    assert apply(e, text) == naive_apply(e.replacements, text)


@given(spliced(), st.data())
def test_offsets_outside_substitutions_round_trip(case, data):
    text, e = case
    out = apply(e, text)
    for (s, t), (_, _, _, new) in zip(enriched_regions(e), e.replacements):
        assert out[s:t] == new
    start = data.draw(st.integers(0, len(out)))
    end = data.draw(st.integers(start, len(out)))
    back = to_original(e, start, end)
    if back is not None:
        assert text[back[0]:back[1]] == out[start:end]
        assert to_enriched(e, *back) == (start, end)


SENTENCE_WORDS = ["It", "it", "They", "the firm", "a fund", "An Authorised Person", "must", "sell", "and",
                  "the client", "such person", "."]


@given(st.lists(st.sampled_from(SENTENCE_WORDS), min_size=1, max_size=20),
       st.lists(st.sampled_from(SENTENCE_WORDS), max_size=12))
@settings(max_examples=150)
def test_resolution_preserves_sentences_and_content(words, ctx_words):
    p = para(" ".join(words), 1)
    prev = para(" ".join(ctx_words) or "x", 0)
    e = resolve(p, [prev], RULES)
    assert e == resolve(p, [prev], RULES)
    out = apply(e, p.text)
    assert len(sentence_split(out)) == len(sentence_split(p.text))
    replaced = sum(len(tokenize(orig)) for _, _, orig, _ in e.replacements)
    assert len(tokenize(out)) >= len(tokenize(p.text)) - replaced


def test_resolution_is_order_independent_across_paragraphs():
    rng = random.Random(3)
    paras = [para(t, i) for i, t in enumerate(
        ["A firm must act.", "It must report.", "The client and the firm agree.", "They sign it."])]
    expected = [resolve(p, paras[:i], RULES) for i, p in enumerate(paras)]
    order = list(range(len(paras)))
    rng.shuffle(order)
    assert [resolve(paras[i], paras[:i], RULES) for i in sorted(order)] == expected
