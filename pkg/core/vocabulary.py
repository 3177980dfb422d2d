"""Word, nonterminal and action-class vocabularies with unknown-word handling."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

from common.errors import VocabularyMismatchError
from treebank.oracle import Action, ActionKind
from treebank.trees import Nonterminal

logger = logging.getLogger(__name__)

UNK = "<UNK>"

_SUFFIXES = ("ing", "ion", "est", "ity", "ed", "ly", "er", "al", "s", "y")


def unk_signature(word: str) -> str:
    """Coarse unknown-word class from shape and suffix, e.g. <UNK-CAPS-s>."""
    parts = ["<UNK"]
    if word[:1].isupper():
        parts.append("CAPS")
    elif any(ch.islower() for ch in word):
        parts.append("LC")
    if any(ch.isdigit() for ch in word):
        parts.append("NUM")
    if "-" in word:
        parts.append("DASH")
    lower = word.lower()
    if len(word) > 3:
        for suffix in _SUFFIXES:
            if lower.endswith(suffix):
                parts.append(suffix)
                break
    return "-".join(parts) + ">"


@dataclass
class Vocabulary:
    """Dense id bijections; UNK is always word 0.

    Action classes: one per nonterminal (NT(X)), then GEN/SHIFT, then REDUCE.
    """
    words: List[str]
    nonterminals: List[str]
    unk_threshold: int = 1
    unk_classes: bool = False
    _word_ids: Dict[str, int] = field(init=False, repr=False)
    _nt_ids: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.words or self.words[0] != UNK:
            self.words = [UNK] + [w for w in self.words if w != UNK]
        self._word_ids = {w: i for i, w in enumerate(self.words)}
        self._nt_ids = {nt: i for i, nt in enumerate(self.nonterminals)}

    @classmethod
    def from_trees(cls, trees: Iterable[Nonterminal], unk_threshold: int = 1, unk_classes: bool = False) -> "Vocabulary":
        trees = list(trees)
        counts = Counter(word for tree in trees for word in tree.leaves())
        kept = sorted(w for w, c in counts.items() if c > unk_threshold)
        if unk_classes:
            kept += sorted({unk_signature(w) for w, c in counts.items() if c <= unk_threshold} - set(kept))
        labels = sorted({node.label for tree in trees for node, _, _ in tree.nodes_with_spans()})
        vocab = cls([UNK] + kept, labels, unk_threshold, unk_classes)
        logger.info(
            f"Vocabulary: {len(vocab.words)} words ({len(counts) - len(kept)} types mapped to UNK), "
            f"{len(labels)} nonterminals"
        )
        return vocab

    @property
    def num_words(self) -> int:
        return len(self.words)

    @property
    def num_nonterminals(self) -> int:
        return len(self.nonterminals)

    @property
    def num_action_classes(self) -> int:
        return len(self.nonterminals) + 2

    @property
    def terminal_class(self) -> int:
        return len(self.nonterminals)

    @property
    def reduce_class(self) -> int:
        return len(self.nonterminals) + 1

    def word_id(self, word: str) -> int:
        if word in self._word_ids:
            return self._word_ids[word]
        if self.unk_classes:
            return self._word_ids.get(unk_signature(word), 0)
        return 0

    def nonterminal_id(self, label: str) -> int:
        try:
            return self._nt_ids[label]
        except KeyError:
            raise VocabularyMismatchError(label, "unknown nonterminal") from None

    def action_class(self, action: Action) -> int:
        if action.kind == ActionKind.NT:
            return self.nonterminal_id(action.symbol)
        if action.kind == ActionKind.REDUCE:
            return self.reduce_class
        return self.terminal_class

    def check_compatible(self, other: "Vocabulary"):
        """Proposal and joint models must agree on the nonterminal inventory."""
        for label in sorted(set(self.nonterminals) ^ set(other.nonterminals)):
            raise VocabularyMismatchError(label, "nonterminal present in only one checkpoint")

    def to_dict(self) -> dict:
        return {
            "words": list(self.words),
            "nonterminals": list(self.nonterminals),
            "unk_threshold": self.unk_threshold,
            "unk_classes": self.unk_classes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(data["words"], data["nonterminals"], data.get("unk_threshold", 1), data.get("unk_classes", False))
