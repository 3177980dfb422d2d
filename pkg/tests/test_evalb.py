"""Tests for EVALB-style bracket scoring."""
import pytest

from common.errors import DataError, YieldMismatchError
from treebank.evalb import bracket_score
from treebank.trees import parse_bracketed


def trees(text):
    return parse_bracketed(text)


def test_identical_trees_score_100():
    gold = trees("(S (NP a b) (VP c (NP d)))\n(X x)")
    score = bracket_score(gold, gold)
    assert score.f1 == 100.0
    assert score.matched == 5


def test_flat_prediction_recall():
    """Only the root matches: recall 1/(k+1)."""
    gold = trees("(S (NP a b) (VP c (NP d)))")
    pred = trees("(S a b c d)")
    score = bracket_score(gold, pred)
    assert score.recall == pytest.approx(25.0)
    assert score.precision == pytest.approx(100.0)
    assert score.f1 == pytest.approx(40.0)


def test_hand_counted_three_sentences():
    gold = trees("(S (NP a b) (VP c))\n(S (NP a) (VP b))\n(S (NP a b) (VP c d))")
    pred = trees("(S (NP a) (VP b c))\n(S (NP a) (VP b))\n(S (VP a b) (NP c d))")
    labeled = bracket_score(gold, pred, labeled=True)
    assert (labeled.matched, labeled.gold_brackets, labeled.predicted_brackets) == (5, 9, 9)
    assert labeled.f1 == pytest.approx(500 / 9)
    unlabeled = bracket_score(gold, pred, labeled=False)
    assert unlabeled.matched == 7
    assert unlabeled.f1 == pytest.approx(700 / 9)


def test_precision_recall_swap_under_exchange():
    gold = trees("(S (NP a b) (VP c (NP d)))\n(S (NP a) (VP b))")
    pred = trees("(S (NP a b c) d)\n(S a b)")
    forward = bracket_score(gold, pred)
    backward = bracket_score(pred, gold)
    assert forward.precision == pytest.approx(backward.recall)
    assert forward.recall == pytest.approx(backward.precision)
    assert forward.f1 == pytest.approx(backward.f1)


def test_exclude_preterminals():
    gold = trees("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))")
    pred = trees("(S (NP (DT the) (NN dog)) (VP (NN barks)))")
    assert bracket_score(gold, pred).f1 < 100.0
    assert bracket_score(gold, pred, exclude_preterminals=True).f1 == 100.0


def test_yield_mismatch_names_sentence():
    gold = trees("(S a)\n(S b c)")
    pred = trees("(S a)\n(S b d)")
    with pytest.raises(YieldMismatchError) as info:
        bracket_score(gold, pred)
    assert info.value.index == 1


def test_sentence_count_mismatch():
    with pytest.raises(DataError):
        bracket_score(trees("(S a)"), [])
