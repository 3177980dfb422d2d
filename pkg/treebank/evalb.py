"""EVALB-convention bracket scoring over (label, span) multisets."""

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from common.errors import DataError, YieldMismatchError
from treebank.trees import Nonterminal, Terminal


@dataclass(frozen=True)
class BracketScore:
    precision: float
    recall: float
    f1: float
    matched: int
    gold_brackets: int
    predicted_brackets: int


def _brackets(tree: Nonterminal, labeled: bool, exclude_preterminals: bool) -> Counter:
    brackets = Counter()
    for node, start, end in tree.nodes_with_spans():
        is_preterminal = len(node.children) == 1 and isinstance(node.children[0], Terminal)
        if exclude_preterminals and is_preterminal and node is not tree:
            continue
        brackets[(node.label if labeled else None, start, end)] += 1
    return brackets


def bracket_score(
    gold: Sequence[Nonterminal],
    pred: Sequence[Nonterminal],
    labeled: bool = True,
    exclude_preterminals: bool = False,
) -> BracketScore:
    """Corpus-level bracket precision/recall/F1 in percent.

    The root span counts. Preterminal layers are normally removed by the reader;
    `exclude_preterminals` skips them for trees that still carry POS tags.
    """
    if len(gold) != len(pred):
        raise DataError(f"Gold has {len(gold)} sentences but prediction has {len(pred)}")

    matched = gold_total = pred_total = 0
    for index, (g, p) in enumerate(zip(gold, pred)):
        if g.leaves() != p.leaves():
            raise YieldMismatchError(index, f"{' '.join(g.leaves())!r} vs {' '.join(p.leaves())!r}")
        g_brackets = _brackets(g, labeled, exclude_preterminals)
        p_brackets = _brackets(p, labeled, exclude_preterminals)
        matched += sum((g_brackets & p_brackets).values())
        gold_total += sum(g_brackets.values())
        pred_total += sum(p_brackets.values())

    precision = 100.0 * matched / pred_total if pred_total else 0.0
    recall = 100.0 * matched / gold_total if gold_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return BracketScore(precision, recall, f1, matched, gold_total, pred_total)
