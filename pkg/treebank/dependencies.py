"""
Constituency-to-dependency conversion.

Two head-finding strategies share the same percolation: static head-rule tables
(Collins-style, loaded from text config) and attention weights recorded at each
composition, where the most-attended child heads the constituent.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Set, Tuple

import networkx as nx

from common.errors import AlignmentError, ConfigError, DataError
from common.schemas import PTB_PUNCTUATION
from treebank.trees import AnyTree, Nonterminal, Terminal

logger = logging.getLogger(__name__)

DEFAULT_HEAD_RULES = Path(__file__).resolve().parent.parent / "config" / "collins_head_rules.txt"

LEFT = "left"
RIGHT = "right"
WILDCARD = "*"


@dataclass(frozen=True)
class DependencyGraph:
    """heads[i] is the 1-based head of token i+1; 0 is the artificial root."""
    tokens: Tuple[str, ...]
    heads: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "heads", tuple(self.heads))
        if len(self.tokens) != len(self.heads):
            raise DataError("Dependency graph needs one head per token")

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.tokens) + 1))
        graph.add_edges_from((head, dep) for dep, head in enumerate(self.heads, start=1))
        return graph

    def is_tree(self) -> bool:
        """Exactly one token attached to root and no cycles."""
        if sum(1 for h in self.heads if h == 0) != 1:
            return False
        if any(h < 0 or h > len(self.tokens) for h in self.heads):
            return False
        return nx.is_arborescence(self.to_networkx())

    def to_lines(self) -> List[str]:
        return [f"{i}\t{word}\t{head}" for i, (word, head) in enumerate(zip(self.tokens, self.heads), start=1)]


@dataclass(frozen=True)
class HeadRule:
    direction: str
    priorities: Tuple[str, ...]


@dataclass
class HeadRuleTable:
    """parent label -> ordered head rules; lookup falls back to the default direction."""
    rules: Dict[str, List[HeadRule]] = field(default_factory=dict)
    default_direction: str = LEFT

    def add(self, parent: str, direction: str, priorities: Sequence[str]):
        if direction not in (LEFT, RIGHT):
            raise ConfigError(f"Head rule direction must be left or right, got '{direction}'")
        self.rules.setdefault(parent, []).append(HeadRule(direction, tuple(priorities)))

    def head_child(self, parent: str, child_labels: Sequence[Optional[str]]) -> int:
        """Index of the head child; a terminal child is labelled by its POS tag, or None when untagged."""
        rules = self.rules.get(parent)
        if not rules:
            return _first_in_direction(len(child_labels), self.default_direction)
        for rule in rules:
            order = _scan_order(len(child_labels), rule.direction)
            for priority in rule.priorities:
                for index in order:
                    label = child_labels[index]
                    if priority == WILDCARD or (label is not None and label == priority):
                        return index
        return _first_in_direction(len(child_labels), rules[0].direction)

    @classmethod
    def parse(cls, text: str) -> "HeadRuleTable":
        """One rule per line: `PARENT direction label,label,...`; `*` as parent sets the default."""
        table = cls()
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 2)
            if len(parts) < 2:
                raise ConfigError(f"Head rule line {number} needs a parent and a direction: {raw!r}")
            parent, direction = parts[0], parts[1].lower()
            priorities = parts[2].replace(",", " ").split() if len(parts) == 3 else []
            if parent == WILDCARD:
                if direction not in (LEFT, RIGHT):
                    raise ConfigError(f"Head rule line {number}: bad default direction '{direction}'")
                table.default_direction = direction
                continue
            table.add(parent, direction, priorities)
        return table

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "HeadRuleTable":
        path = Path(path) if path is not None else DEFAULT_HEAD_RULES
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read head rules {path}: {e}") from e
        table = cls.parse(text)
        logger.debug(f"Loaded head rules for {len(table.rules)} parents from {path}")
        return table


def _scan_order(n: int, direction: str) -> List[int]:
    return list(range(n)) if direction == LEFT else list(range(n - 1, -1, -1))


def _first_in_direction(n: int, direction: str) -> int:
    return 0 if direction == LEFT else n - 1


def _percolate(tree: Nonterminal, choose_head) -> DependencyGraph:
    """Shared percolation: choose_head(node, preorder_index) -> head child index."""
    tokens = tree.leaves()
    heads = [0] * len(tokens)
    counter = [0]

    def visit(node: AnyTree, start: int) -> int:
        if isinstance(node, Terminal):
            return start + 1
        preorder = counter[0]
        counter[0] += 1
        lexical = []
        offset = start
        for child in node.children:
            lexical.append(visit(child, offset))
            offset += child.length
        head_index = choose_head(node, preorder)
        head = lexical[head_index]
        for index, dependent in enumerate(lexical):
            if index != head_index:
                heads[dependent - 1] = head
        return head

    root_head = visit(tree, 0)
    heads[root_head - 1] = 0
    return DependencyGraph(tuple(tokens), tuple(heads))


def _child_label(child: AnyTree) -> Optional[str]:
    return child.label if isinstance(child, Nonterminal) else child.tag


def head_rule_heads(tree: Nonterminal, rules: HeadRuleTable) -> DependencyGraph:
    """Collins-style percolation with a static head-rule table."""
    return _percolate(
        tree,
        lambda node, _: rules.head_child(node.label, [_child_label(c) for c in node.children]),
    )


class HasAttention(Protocol):
    label: str
    weights: Sequence[float]


def _argmax_leftmost(weights: Sequence[float]) -> int:
    best = 0
    for index, weight in enumerate(weights):
        if weight > weights[best]:
            best = index
    return best


def attention_heads(tree: Nonterminal, records: Sequence[HasAttention]) -> DependencyGraph:
    """Dynamic head rule: the most-attended child heads each constituent.

    `records` must hold one entry per nonterminal in pre-order.
    """
    nodes = [node for node, _, _ in tree.nodes_with_spans()]
    if len(records) != len(nodes):
        raise AlignmentError(f"{len(records)} attention records for {len(nodes)} constituents")
    for index, (node, record) in enumerate(zip(nodes, records)):
        if record.label != node.label:
            raise AlignmentError(f"Record {index} is for {record.label} but constituent is {node.label}")
        if len(record.weights) != len(node.children):
            raise AlignmentError(
                f"Record {index} has {len(record.weights)} weights for {len(node.children)} children"
            )
    return _percolate(tree, lambda node, preorder: _argmax_leftmost(records[preorder].weights))


def uas(pred: DependencyGraph, gold: DependencyGraph, punct: Optional[Iterable[str]] = None) -> float:
    """Fraction of non-punctuation tokens whose head matches; 0.0 if none are scorable."""
    matched, total = _attachment_counts(pred, gold, set(PTB_PUNCTUATION if punct is None else punct))
    return matched / total if total else 0.0


def corpus_uas(
    preds: Sequence[DependencyGraph],
    golds: Sequence[DependencyGraph],
    punct: Optional[Iterable[str]] = None,
) -> float:
    if len(preds) != len(golds):
        raise DataError(f"{len(preds)} predicted graphs but {len(golds)} gold graphs")
    punct_set = set(PTB_PUNCTUATION if punct is None else punct)
    matched = total = 0
    for pred, gold in zip(preds, golds):
        m, t = _attachment_counts(pred, gold, punct_set)
        matched += m
        total += t
    return matched / total if total else 0.0


def _attachment_counts(pred: DependencyGraph, gold: DependencyGraph, punct: Set[str]) -> Tuple[int, int]:
    if pred.tokens != gold.tokens:
        raise DataError(f"Token sequences differ: {' '.join(pred.tokens)!r} vs {' '.join(gold.tokens)!r}")
    matched = total = 0
    for token, p, g in zip(gold.tokens, pred.heads, gold.heads):
        if token in punct:
            continue
        total += 1
        matched += int(p == g)
    return matched, total


def write_dependencies(path: Path, graphs: Iterable[DependencyGraph]):
    """Tab-separated `index word head` lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as f:
        for graph in graphs:
            f.write("\n".join(graph.to_lines()) + "\n\n")
