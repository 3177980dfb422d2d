"""Tests for head-rule and attention-based dependency conversion."""
import pytest

from common.errors import AlignmentError, ConfigError, DataError
from conftest import synthetic_treebank
from core.compose import AttentionRecord
from treebank.dependencies import (
    DependencyGraph,
    HeadRuleTable,
    attention_heads,
    corpus_uas,
    head_rule_heads,
    uas,
    write_dependencies,
)
from treebank.trees import parse_bracketed

SIMPLE_RULES = """
S  right VP
VP left  *
NP right *
"""


def test_head_rules_hand_percolation():
    [tree] = parse_bracketed("(S (NP a) (VP b))")
    graph = head_rule_heads(tree, HeadRuleTable.parse(SIMPLE_RULES))
    assert graph.heads == (2, 0)
    assert graph.is_tree()


def test_single_terminal_tree_attaches_to_root():
    [tree] = parse_bracketed("(X a)")
    assert head_rule_heads(tree, HeadRuleTable()).heads == (0,)


def test_priority_tie_goes_to_first_in_scan_direction():
    table = HeadRuleTable.parse("NP right NP\nVP left NP")
    assert table.head_child("NP", ["NP", "NP", None]) == 1
    assert table.head_child("VP", [None, "NP", "NP"]) == 1


def test_unknown_parent_uses_default_direction():
    table = HeadRuleTable.parse("* right")
    assert table.head_child("FOO", ["A", "B", "C"]) == 2
    assert HeadRuleTable().head_child("FOO", ["A", "B"]) == 0


def test_terminal_children_match_only_wildcard():
    table = HeadRuleTable.parse("NP left NN")
    assert table.head_child("NP", [None, None]) == 0
    table = HeadRuleTable.parse("NP right NN")
    assert table.head_child("NP", [None, None]) == 1


def test_tagged_terminal_children_match_their_tag():
    table = HeadRuleTable.parse("VP left VBZ,NP")
    assert table.head_child("VP", ["VBZ", "NP"]) == 0
    assert table.head_child("VP", [None, "NP"]) == 1


def test_bad_rule_lines_rejected():
    with pytest.raises(ConfigError):
        HeadRuleTable.parse("NP sideways NN")
    with pytest.raises(ConfigError):
        HeadRuleTable.parse("NP")


def test_collins_table_on_tagged_tree():
    [tree] = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ sees) (NP (DT a) (NN cat))))", collapse_preterminals=True)
    graph = head_rule_heads(tree, HeadRuleTable.load())
    assert graph.heads == (2, 3, 0, 5, 3)


def test_collins_table_finds_verb_and_preposition_heads():
    text = "(S (NP (DT the) (NN dog)) (VP (VBZ sees) (NP (DT a) (NN cat))) (PP (IN in) (NP (DT the) (NN park))))"
    [tree] = parse_bracketed(text, collapse_preterminals=True)
    graph = head_rule_heads(tree, HeadRuleTable.load())
    assert graph.heads == (2, 3, 0, 5, 3, 3, 8, 6)
    assert graph.is_tree()


def test_untagged_words_fall_back_to_wildcard_rules():
    [tree] = parse_bracketed("(S (NP the dog) (VP sees (NP a cat)))")
    graph = head_rule_heads(tree, HeadRuleTable.load())
    assert graph.heads == (2, 5, 5, 5, 0)


def test_collins_table_always_single_rooted():
    rules = HeadRuleTable.load()
    for tree in synthetic_treebank(100, seed=5):
        assert head_rule_heads(tree, rules).is_tree()


def test_attention_heads_picks_most_attended_child(apple_tree):
    records = [
        AttentionRecord("S", ["NP", "VP"], [0.3, 0.7]),
        AttentionRecord("NP", ["Apple", ",", "Compaq", "and", "IBM"], [0.62, 0.02, 0.1, 0.01, 0.25]),
        AttentionRecord("VP", ["fell"], [1.0]),
    ]
    graph = attention_heads(apple_tree, records)
    assert graph.heads == (6, 1, 1, 1, 1, 0)
    assert graph.is_tree()


def test_attention_tie_goes_leftmost():
    [tree] = parse_bracketed("(S a b)")
    assert attention_heads(tree, [AttentionRecord("S", ["a", "b"], [0.5, 0.5])]).heads == (0, 1)


def test_attention_misalignment_raises(apple_tree):
    with pytest.raises(AlignmentError):
        attention_heads(apple_tree, [AttentionRecord("S", ["NP", "VP"], [0.3, 0.7])])
    wrong_label = [
        AttentionRecord("NP", ["NP", "VP"], [0.3, 0.7]),
        AttentionRecord("NP", list("abcde"), [0.2] * 5),
        AttentionRecord("VP", ["fell"], [1.0]),
    ]
    with pytest.raises(AlignmentError):
        attention_heads(apple_tree, wrong_label)
    wrong_arity = [
        AttentionRecord("S", ["NP", "VP"], [0.3, 0.7]),
        AttentionRecord("NP", list("abcd"), [0.25] * 4),
        AttentionRecord("VP", ["fell"], [1.0]),
    ]
    with pytest.raises(AlignmentError):
        attention_heads(apple_tree, wrong_arity)


def test_uas_counts():
    gold = DependencyGraph(("a", "b", ",", "c", "d"), (2, 0, 2, 2, 4))
    assert uas(gold, gold) == 1.0
    half = DependencyGraph(("a", "b", ",", "c", "d"), (2, 0, 1, 1, 1))
    assert uas(half, gold, punct={","}) == 0.5
    assert uas(half, gold, punct={","}) == uas(gold, half, punct={","})
    differ = DependencyGraph(("a", "b", ",", "c", "d"), (3, 3, 0, 3, 3))
    assert uas(differ, gold, punct={","}) == 0.0


def test_uas_token_mismatch():
    with pytest.raises(DataError):
        uas(DependencyGraph(("a",), (0,)), DependencyGraph(("b",), (0,)))


def test_corpus_uas_pools_tokens():
    gold = [DependencyGraph(("a", "b"), (2, 0)), DependencyGraph(("c", "d", "e"), (0, 1, 1))]
    pred = [DependencyGraph(("a", "b"), (0, 1)), DependencyGraph(("c", "d", "e"), (0, 1, 2))]
    assert corpus_uas(pred, gold) == pytest.approx(2 / 5)


def test_is_tree_rejects_cycles_and_multiple_roots():
    assert not DependencyGraph(("a", "b"), (0, 0)).is_tree()
    assert not DependencyGraph(("a", "b", "c"), (0, 3, 2)).is_tree()


def test_write_dependencies(tmp_path):
    path = tmp_path / "deps.txt"
    write_dependencies(path, [DependencyGraph(("a", "b"), (2, 0)), DependencyGraph(("c",), (0,))])
    assert path.read_text(encoding="utf-8") == "1\ta\t2\n2\tb\t0\n\n1\tc\t0\n\n"
