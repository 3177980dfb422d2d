"""Overlap between attention-derived heads and static head-rule conversions."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import torch

from common.errors import DataError
from core.compose import AttentionRecord
from core.model import RNNG
from treebank.dependencies import DependencyGraph, HeadRuleTable, attention_heads, corpus_uas, head_rule_heads
from treebank.trees import Nonterminal

logger = logging.getLogger(__name__)


@dataclass
class HeadOverlap:
    uas: float
    attention_graphs: List[DependencyGraph] = field(default_factory=list)
    rule_graphs: List[DependencyGraph] = field(default_factory=list)

    @property
    def single_rooted(self) -> bool:
        return all(g.is_tree() for g in self.attention_graphs + self.rule_graphs)


def attention_records(tree: Nonterminal, model: RNNG) -> List[AttentionRecord]:
    """Force-decode `tree` and return its attention records in pre-order."""
    with torch.no_grad():
        records = model.score_tree(tree).final_state.ordered_records()
    missing = [r.label for r in records if r.attention is None]
    if missing:
        raise DataError("Model composition produces no attention; a gated-attention model is required")
    return [r.attention for r in records]


def _has_tags(tree: Nonterminal) -> bool:
    return any(tag is not None for tag in tree.tags())


def head_overlap_from_records(
    trees: Sequence[Nonterminal],
    records: Sequence[Sequence[AttentionRecord]],
    rules: HeadRuleTable,
    punct: Optional[Iterable[str]] = None,
    rule_trees: Optional[Sequence[Nonterminal]] = None,
) -> HeadOverlap:
    """`rule_trees`, when given, are the POS-tagged gold trees the head rules run on."""
    rule_trees = trees if rule_trees is None else rule_trees
    if len(trees) != len(records):
        raise DataError(f"{len(trees)} trees but attention records for {len(records)} sentences")
    if len(rule_trees) != len(trees):
        raise DataError(f"{len(trees)} trees but {len(rule_trees)} head-rule trees")
    if rule_trees and not any(_has_tags(t) for t in rule_trees):
        logger.warning("Head-rule trees carry no POS tags; terminal children will match only '*'")
    attention = [attention_heads(tree, recs) for tree, recs in zip(trees, records)]
    ruled = [head_rule_heads(tree, rules) for tree in rule_trees]
    score = corpus_uas(attention, ruled, punct)
    logger.info(f"Attention vs head-rule overlap over {len(trees)} sentences: UAS {score:.4f}")
    return HeadOverlap(score, attention, ruled)


def head_overlap(
    trees: Sequence[Nonterminal],
    model: RNNG,
    rules: HeadRuleTable,
    punct: Optional[Iterable[str]] = None,
    rule_trees: Optional[Sequence[Nonterminal]] = None,
) -> HeadOverlap:
    """UAS between the model's dynamic heads and the rule table's heads on the same trees."""
    return head_overlap_from_records(trees, [attention_records(t, model) for t in trees], rules, punct, rule_trees)
