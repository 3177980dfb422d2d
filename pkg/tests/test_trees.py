"""Tests for the bracketed tree reader/writer and label stripping."""
import pytest
from hypothesis import given, settings

from common.errors import DataError, TreeParseError
from conftest import tree_strategy
from treebank.evalb import bracket_score
from treebank.trees import (
    PLACEHOLDER_LABEL,
    Nonterminal,
    Terminal,
    normalize_label,
    parse_bracketed,
    read_trees,
    strip_labels,
    write_trees,
)


def test_parse_simple_tree():
    """Structural reading of a small tree."""
    [tree] = parse_bracketed("(S (NP a) (VP b))")
    assert tree == Nonterminal("S", (Nonterminal("NP", (Terminal("a"),)), Nonterminal("VP", (Terminal("b"),))))
    assert tree.leaves() == ["a", "b"]
    assert tree.length == 2


def test_single_nonterminal_tree():
    [tree] = parse_bracketed("(X x)")
    assert tree.label == "X"
    assert tree.children == (Terminal("x"),)


def test_multiple_trees_in_order():
    trees = parse_bracketed("(S a)\n(NP b c)\n\n(VP d)")
    assert [t.label for t in trees] == ["S", "NP", "VP"]


def test_spans_partition_parent():
    [tree] = parse_bracketed("(S (NP a b) (VP c (NP d)))")
    assert tree.constituents() == [("S", 0, 4), ("NP", 0, 2), ("VP", 2, 4), ("NP", 3, 4)]
    assert tree.child_spans() == [(0, 2), (2, 4)]


@pytest.mark.parametrize(
    "text",
    ["((S (NP a))", "(S (NP a)", "(S a))", "()", "(S (NP))", "word (S a)"],
)
def test_malformed_input_raises(text):
    with pytest.raises(TreeParseError):
        parse_bracketed(text)


def test_parse_error_reports_line_and_column():
    with pytest.raises(TreeParseError) as info:
        parse_bracketed("(S a)\n(NP b))")
    assert info.value.line == 2
    assert info.value.column == 7


def test_ptb_normalization():
    """Outer bracket, function tags and empty elements are removed."""
    text = "( (S (NP-SBJ-1 (-NONE- *T*)) (VP (VBD fell)) (. .)) )"
    [tree] = parse_bracketed(text)
    assert tree.to_bracketed() == "(S (VP (VBD fell)) (. .))"


def test_collapse_preterminals():
    [tree] = parse_bracketed("( (S (NP (DT the) (NN dog)) (VP (VBZ barks))) )", collapse_preterminals=True)
    assert tree.to_bracketed() == "(S (NP the dog) (VP barks))"


def test_collapse_keeps_root():
    [tree] = parse_bracketed("(X x)", collapse_preterminals=True)
    assert tree == Nonterminal("X", (Terminal("x"),))


def test_collapse_keeps_pos_tags():
    [tree] = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))", collapse_preterminals=True)
    assert tree.tags() == ["DT", "NN", "VBZ"]
    assert tree.to_bracketed(tags=True) == "(S (NP (DT the) (NN dog)) (VP (VBZ barks)))"
    assert Terminal("dog", tag="NN") == Terminal("dog")


def test_collapsed_trees_survive_a_write_and_read(tmp_path):
    """Trees written by the toolkit read back unchanged; collapsing happens once at ingestion."""
    text = "(S (NP (NN cat)) (VP (VBZ runs)))\n(S (NP (DT a) (NN dog)) (VP (VBZ sees) (NP (NN man))))"
    trees = parse_bracketed(text, collapse_preterminals=True)
    path = tmp_path / "prepared.trees"
    write_trees(path, trees)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "(S (NP cat) (VP runs))"
    assert read_trees(path) == trees
    assert read_trees(path)[0].constituents() == trees[0].constituents()

    tagged = tmp_path / "prepared.tagged.trees"
    write_trees(tagged, trees, tags=True)
    again = read_trees(tagged, collapse_preterminals=True)
    assert again == trees
    assert [t.tags() for t in again] == [t.tags() for t in trees]


def test_tree_emptied_by_trace_removal_is_skipped():
    assert parse_bracketed("(S (-NONE- *))\n(S a)") == [Nonterminal("S", (Terminal("a"),))]


def test_normalize_label():
    assert normalize_label("NP-SBJ-1") == "NP"
    assert normalize_label("S=2") == "S"
    assert normalize_label("-LRB-") == "-LRB-"


def test_nonterminal_needs_children():
    with pytest.raises(DataError):
        Nonterminal("S", ())


def test_strip_labels():
    [tree] = parse_bracketed("(S (NP a) (VP b))")
    assert strip_labels(tree).to_bracketed() == "(X (X a) (X b))"
    assert strip_labels(Terminal("a")) == Terminal("a")


def test_read_write_file(tmp_path):
    trees = parse_bracketed("(S (NP a) (VP b))\n(X x)")
    path = tmp_path / "out.trees"
    write_trees(path, trees)
    assert path.read_text(encoding="utf-8") == "(S (NP a) (VP b))\n(X x)\n"
    assert read_trees(path) == trees


@given(tree_strategy())
@settings(max_examples=100, deadline=None)
def test_serialization_round_trip(tree):
    assert parse_bracketed(tree.to_bracketed()) == [tree]


@given(tree_strategy())
@settings(max_examples=100, deadline=None)
def test_strip_labels_properties(tree):
    stripped = strip_labels(tree)
    assert strip_labels(stripped) == stripped
    assert stripped.leaves() == tree.leaves()
    assert all(label == PLACEHOLDER_LABEL for label, _, _ in stripped.constituents())
    assert [c[1:] for c in stripped.constituents()] == [c[1:] for c in tree.constituents()]
    assert bracket_score([tree], [stripped], labeled=False).f1 == 100.0
