"""
Top-down transition oracles: tree -> action sequence and back.

Generative sequences use NT(X), GEN(w), REDUCE; discriminative ones use NT(X), SHIFT, REDUCE
with the words supplied separately.
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

from common.errors import DataError, IllegalActionError
from common.schemas import Mode
from treebank.trees import AnyTree, Nonterminal, Terminal


class ActionKind(str, Enum):
    NT = "NT"
    GEN = "GEN"
    SHIFT = "SHIFT"
    REDUCE = "REDUCE"


_ACTION = re.compile(r"^(NT|GEN)\((.+)\)$")


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    symbol: Optional[str] = None

    @classmethod
    def nt(cls, label: str) -> "Action":
        return cls(ActionKind.NT, label)

    @classmethod
    def gen(cls, word: str) -> "Action":
        return cls(ActionKind.GEN, word)

    @classmethod
    def parse(cls, token: str) -> "Action":
        if token in (ActionKind.SHIFT.value, ActionKind.REDUCE.value):
            return cls(ActionKind(token))
        match = _ACTION.match(token)
        if not match:
            raise DataError(f"Unrecognized action '{token}'")
        return cls(ActionKind(match.group(1)), match.group(2))

    def __str__(self) -> str:
        if self.symbol is None:
            return self.kind.value
        return f"{self.kind.value}({self.symbol})"


SHIFT = Action(ActionKind.SHIFT)
REDUCE = Action(ActionKind.REDUCE)


def tree_to_oracle(tree: AnyTree, mode: Mode = Mode.GENERATIVE) -> List[Action]:
    """The unique top-down, left-to-right derivation of `tree`."""
    actions: List[Action] = []

    def visit(node: AnyTree):
        if isinstance(node, Terminal):
            actions.append(Action.gen(node.word) if mode == Mode.GENERATIVE else SHIFT)
            return
        actions.append(Action.nt(node.label))
        for child in node.children:
            visit(child)
        actions.append(REDUCE)

    visit(tree)
    return actions


def actions_to_tree(actions: Sequence[Action], words: Optional[Sequence[str]] = None) -> Nonterminal:
    """Rebuild the tree an action sequence derives.

    SHIFT takes its word from `words`; GEN carries its own. Structural errors name
    the offending action index.
    """
    kinds = {a.kind for a in actions}
    if ActionKind.GEN in kinds and ActionKind.SHIFT in kinds:
        raise IllegalActionError("GEN and SHIFT cannot appear in the same sequence")
    if ActionKind.SHIFT in kinds and words is None:
        raise IllegalActionError("Discriminative sequence needs the sentence words")

    frames: List[list] = []
    result: Optional[Nonterminal] = None
    position = 0

    for index, action in enumerate(actions):
        if result is not None:
            raise IllegalActionError("Action after the root constituent closed", index)
        if action.kind == ActionKind.NT:
            frames.append([action.symbol, []])
        elif action.kind in (ActionKind.GEN, ActionKind.SHIFT):
            if not frames:
                raise IllegalActionError(f"{action} with no open constituent", index)
            if action.kind == ActionKind.SHIFT:
                if position >= len(words):
                    raise IllegalActionError("SHIFT with an empty buffer", index)
                word = words[position]
            else:
                word = action.symbol
            position += 1
            frames[-1][1].append(Terminal(word))
        else:
            if not frames:
                raise IllegalActionError("REDUCE with no open constituent", index)
            label, children = frames.pop()
            if not children:
                raise IllegalActionError(f"REDUCE with zero children under {label}", index)
            node = Nonterminal(label, tuple(children))
            if frames:
                frames[-1][1].append(node)
            else:
                result = node

    if frames:
        raise IllegalActionError(f"{len(frames)} trailing open constituents", len(actions))
    if result is None:
        raise IllegalActionError("Empty action sequence", 0)
    if words is not None and ActionKind.SHIFT in kinds and position != len(words):
        raise IllegalActionError(f"Only {position} of {len(words)} words shifted", len(actions))
    return result


def format_oracle(actions: Sequence[Action]) -> str:
    return " ".join(str(a) for a in actions)


def parse_oracle(line: str) -> List[Action]:
    return [Action.parse(token) for token in line.split()]
