"""
Algorithmic state of the top-down transition system and its legality rules.

States are immutable; applying an action builds a new state that shares the
unchanged prefixes of the old one, so many trajectories can branch from a prefix.
"""

from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple, Union

import torch

from common.errors import IllegalActionError
from common.schemas import Limits, Mode
from core.compose import AttentionRecord
from core.nncore import LSTMState
from treebank.oracle import Action, ActionKind
from treebank.trees import AnyTree, Nonterminal, Terminal


@dataclass(frozen=True, eq=False)
class OpenNT:
    label: str
    vector: torch.Tensor
    preorder: int
    start: int

    def __str__(self) -> str:
        return f"({self.label}"


@dataclass(frozen=True, eq=False)
class Completed:
    """A terminal or a closed constituent; `vector` is what the composition produced."""
    vector: torch.Tensor
    subtree: AnyTree
    start: int

    def __str__(self) -> str:
        return self.subtree.to_bracketed()


StackEntry = Union[OpenNT, Completed]


@dataclass(frozen=True, eq=False)
class ReduceRecord:
    """What one REDUCE produced; `preorder` aligns it with the finished tree."""
    preorder: int
    label: str
    start: int
    end: int
    vector: torch.Tensor
    attention: Optional[AttentionRecord] = None


@dataclass(frozen=True, eq=False)
class ParserState:
    """Stack, buffer and history plus their incremental recurrent encodings.

    `words` is the input sentence in discriminative mode and the terminals generated
    so far in generative mode. Encodings of disabled structures stay empty.
    """
    mode: Mode
    words: Tuple[str, ...] = ()
    stack: Tuple[StackEntry, ...] = ()
    stack_states: Tuple[LSTMState, ...] = ()
    buffer_states: Tuple[LSTMState, ...] = ()
    history: Tuple[Action, ...] = ()
    history_state: Optional[LSTMState] = None
    position: int = 0
    open_nts: int = 0
    nt_count: int = 0
    records: Tuple[ReduceRecord, ...] = ()

    @property
    def buffer_nonempty(self) -> bool:
        return self.mode == Mode.DISCRIMINATIVE and self.position < len(self.words)

    def buffer_top(self) -> Optional[torch.Tensor]:
        if not self.buffer_states:
            return None
        if self.mode == Mode.DISCRIMINATIVE:
            return self.buffer_states[len(self.words) - self.position][0]
        return self.buffer_states[-1][0]

    def stack_top(self) -> Optional[torch.Tensor]:
        return self.stack_states[-1][0] if self.stack_states else None

    def history_top(self) -> Optional[torch.Tensor]:
        return self.history_state[0] if self.history_state is not None else None

    def tree(self) -> Nonterminal:
        if not is_final(self):
            raise IllegalActionError("State is not final; no tree yet", len(self.history), self.describe())
        return self.stack[0].subtree

    def ordered_records(self):
        """REDUCE records in pre-order of the constituents they closed."""
        return sorted(self.records, key=lambda r: r.preorder)

    def describe(self) -> str:
        stack = " ".join(str(e) for e in self.stack) or "<empty>"
        return (
            f"mode={self.mode.value} stack=[{stack}] open={self.open_nts} "
            f"position={self.position}/{len(self.words)} actions={len(self.history)}"
        )


def is_final(state: ParserState) -> bool:
    return (
        len(state.stack) == 1
        and isinstance(state.stack[0], Completed)
        and isinstance(state.stack[0].subtree, Nonterminal)
        and state.open_nts == 0
        and not state.buffer_nonempty
    )


def legal_actions(state: ParserState, limits: Limits) -> FrozenSet[ActionKind]:
    """Kinds of actions allowed next; empty means a dead end (limits exhausted)."""
    if is_final(state):
        raise IllegalActionError("No actions are legal in a final state", len(state.history), state.describe())
    disc = state.mode == Mode.DISCRIMINATIVE
    legal = set()
    if state.open_nts < limits.max_open_nts and (not disc or state.buffer_nonempty):
        legal.add(ActionKind.NT)
    if state.open_nts >= 1:
        if disc and state.buffer_nonempty:
            legal.add(ActionKind.SHIFT)
        elif not disc and state.position < limits.max_length:
            legal.add(ActionKind.GEN)
    if (
        state.stack
        and not isinstance(state.stack[-1], OpenNT)
        and state.open_nts >= 1
        and not (state.open_nts == 1 and state.buffer_nonempty)
    ):
        legal.add(ActionKind.REDUCE)
    return frozenset(legal)


def descriptor(subtree: AnyTree) -> str:
    """How a child is shown in attention records: its word, or its label."""
    return subtree.word if isinstance(subtree, Terminal) else subtree.label
