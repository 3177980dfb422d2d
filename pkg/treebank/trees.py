"""
Phrase-structure trees and the PTB-style bracketed reader/writer.

Trees are immutable: a Nonterminal holds a label and an ordered tuple of children,
a Terminal holds a word. Spans are half-open token intervals derived from leaf counts.
"""

import bisect
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

from common.errors import DataError, TreeParseError

logger = logging.getLogger(__name__)

PLACEHOLDER_LABEL = "X"
EMPTY_ELEMENT = "-NONE-"

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


class Constituent(NamedTuple):
    label: str
    start: int
    end: int


class Tree:
    """Common base of Terminal and Nonterminal."""

    is_terminal = False

    @property
    def length(self) -> int:
        raise NotImplementedError

    def leaves(self) -> List[str]:
        raise NotImplementedError

    def to_bracketed(self, tags: bool = False) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_bracketed()


@dataclass(frozen=True)
class Terminal(Tree):
    """A word; `tag` keeps the POS label of a collapsed preterminal and is ignored by equality."""
    word: str
    tag: Optional[str] = field(default=None, compare=False)
    is_terminal = True

    @property
    def length(self) -> int:
        return 1

    def leaves(self) -> List[str]:
        return [self.word]

    def to_bracketed(self, tags: bool = False) -> str:
        if tags and self.tag is not None:
            return f"({self.tag} {self.word})"
        return self.word


@dataclass(frozen=True)
class Nonterminal(Tree):
    label: str
    children: Tuple[Tree, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise DataError(f"Nonterminal {self.label} must have at least one child")

    @cached_property
    def length(self) -> int:
        return sum(child.length for child in self.children)

    def leaves(self) -> List[str]:
        words: List[str] = []
        for child in self.children:
            words.extend(child.leaves())
        return words

    def tags(self) -> List[Optional[str]]:
        """POS tag of every word in order; None for words that were never tagged."""
        result: List[Optional[str]] = []
        for child in self.children:
            result.extend([child.tag] if isinstance(child, Terminal) else child.tags())
        return result

    def nodes_with_spans(self, start: int = 0) -> Iterator[Tuple["Nonterminal", int, int]]:
        """Yield (node, start, end) for every nonterminal in pre-order."""
        yield self, start, start + self.length
        offset = start
        for child in self.children:
            if isinstance(child, Nonterminal):
                yield from child.nodes_with_spans(offset)
            offset += child.length

    def constituents(self) -> List[Constituent]:
        return [Constituent(node.label, s, e) for node, s, e in self.nodes_with_spans()]

    def child_spans(self, start: int = 0) -> List[Tuple[int, int]]:
        spans = []
        offset = start
        for child in self.children:
            spans.append((offset, offset + child.length))
            offset += child.length
        return spans

    def count_nonterminals(self) -> int:
        return sum(1 for _ in self.nodes_with_spans())

    def to_bracketed(self, tags: bool = False) -> str:
        return "(" + self.label + " " + " ".join(child.to_bracketed(tags) for child in self.children) + ")"


AnyTree = Union[Terminal, Nonterminal]


def normalize_label(label: str) -> str:
    """Drop function tags and co-indices: NP-SBJ-1 -> NP, S=2 -> S; -LRB- stays."""
    if label.startswith("-") and label.endswith("-"):
        return label
    head = re.split(r"[-=]", label, maxsplit=1)[0]
    return head or label


def _remove_empty_elements(node: AnyTree) -> Optional[AnyTree]:
    if isinstance(node, Terminal):
        return node
    if node.label == EMPTY_ELEMENT:
        return None
    kept = [c for c in (_remove_empty_elements(child) for child in node.children) if c is not None]
    if not kept:
        return None
    return Nonterminal(node.label, tuple(kept))


def _collapse_preterminals(node: Nonterminal, is_root: bool = True) -> AnyTree:
    if not is_root and len(node.children) == 1 and isinstance(node.children[0], Terminal):
        return Terminal(node.children[0].word, tag=node.label)
    return Nonterminal(
        node.label,
        tuple(
            _collapse_preterminals(child, is_root=False) if isinstance(child, Nonterminal) else child
            for child in node.children
        ),
    )


class _Position:
    """Maps character offsets to 1-based (line, column)."""

    def __init__(self, text: str):
        self.line_starts = [0] + [m.end() for m in re.finditer(r"\n", text)]

    def __call__(self, offset: int) -> Tuple[int, int]:
        line = bisect.bisect_right(self.line_starts, offset) - 1
        return line + 1, offset - self.line_starts[line] + 1


def parse_bracketed(
    text: str,
    collapse_preterminals: bool = False,
    normalize_labels: bool = True,
) -> List[Nonterminal]:
    """Read every balanced-parenthesis tree in `text`, in order.

    Empty elements (-NONE-) and constituents emptied by their removal are deleted.
    With `collapse_preterminals`, non-root nodes dominating exactly one word become
    that word, tagged with the removed label, so the model generates words directly.
    Collapsing is an ingestion step for raw treebanks: trees the toolkit writes
    already have it applied and must be read back without it.
    """
    position = _Position(text)
    trees: List[Nonterminal] = []
    # Each frame: [label or None, children, offset of its "("]
    frames: List[list] = []
    expect_label = False

    for match in _TOKEN.finditer(text):
        token, offset = match.group(), match.start()
        if token == "(":
            frames.append([None, [], offset])
            expect_label = True
        elif token == ")":
            if not frames:
                raise TreeParseError("Unbalanced parentheses: unexpected ')'", *position(offset))
            label, children, start = frames.pop()
            expect_label = False
            if label is None and not children:
                raise TreeParseError("Empty constituent '()'", *position(start))
            if label is not None and not children:
                raise TreeParseError(f"Nonterminal '{label}' has zero children", *position(start))
            if label is None:
                # PTB files wrap each tree in an unlabeled bracket
                if len(children) != 1 or isinstance(children[0], Terminal):
                    raise TreeParseError("Unlabeled bracket must wrap exactly one tree", *position(start))
                node = children[0]
            else:
                node = Nonterminal(normalize_label(label) if normalize_labels else label, tuple(children))
            if frames:
                frames[-1][1].append(node)
            else:
                trees.append(node)
        else:
            if not frames:
                raise TreeParseError(f"Token '{token}' outside any bracket", *position(offset))
            if expect_label:
                frames[-1][0] = token
                expect_label = False
            else:
                frames[-1][1].append(Terminal(token))

    if frames:
        raise TreeParseError("Unbalanced parentheses: unclosed '('", *position(frames[-1][2]))

    result: List[Nonterminal] = []
    for index, tree in enumerate(trees):
        cleaned = _remove_empty_elements(tree)
        if cleaned is None or isinstance(cleaned, Terminal):
            logger.warning(f"Tree {index} is empty after removing empty elements; skipped")
            continue
        if collapse_preterminals:
            cleaned = _collapse_preterminals(cleaned)
        result.append(cleaned)
    return result


def read_trees(path: Path, collapse_preterminals: bool = False) -> List[Nonterminal]:
    """Read a one-tree-per-line (or free-form) bracketed file."""
    with open(path, encoding="utf-8") as f:
        trees = parse_bracketed(f.read(), collapse_preterminals=collapse_preterminals)
    logger.info(f"Read {len(trees)} trees from {path}")
    return trees


def write_trees(path: Path, trees: Iterable[Tree], tags: bool = False):
    """One tree per line; with `tags`, collapsed words are written under their POS label again."""
    with open(path, "w", encoding="utf-8") as f:
        for tree in trees:
            f.write(tree.to_bracketed(tags) + "\n")


def strip_labels(tree: AnyTree) -> AnyTree:
    """Replace every nonterminal label by the placeholder X; structure unchanged."""
    if isinstance(tree, Terminal):
        return tree
    return Nonterminal(PLACEHOLDER_LABEL, tuple(strip_labels(child) for child in tree.children))
