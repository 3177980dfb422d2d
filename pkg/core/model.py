"""
Recurrent neural network grammar: parameters plus the neural side of the transition system.

One class serves both the generative model p(x, y) and the discriminative model
q(y | x); the mode decides whether terminals are generated (GEN) or shifted from an
input buffer (SHIFT).
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from common.errors import DataError, IllegalActionError, TruncatedSampleError
from common.schemas import Composition, ModelConfig, Mode
from core.compose import BiLSTMComposition, CompositionInputs, GatedAttentionComposition
from core.nncore import LSTMState, check_finite, init_parameters, initial_state, lstm_step
from core.transition import (
    Completed,
    OpenNT,
    ParserState,
    ReduceRecord,
    descriptor,
    is_final,
    legal_actions,
)
from core.vocabulary import Vocabulary
from treebank.oracle import REDUCE, SHIFT, Action, ActionKind, tree_to_oracle
from treebank.trees import Nonterminal, Terminal

logger = logging.getLogger(__name__)


class ActionDistribution:
    """Masked log-probabilities over action classes, plus p(word | GEN) when generating."""

    def __init__(
        self,
        vocab: Vocabulary,
        legal: FrozenSet[ActionKind],
        class_logprobs: torch.Tensor,
        word_logprobs: Optional[torch.Tensor] = None,
    ):
        self.vocab = vocab
        self.legal = legal
        self.class_logprobs = class_logprobs
        self.word_logprobs = word_logprobs

    def logprob(self, action: Action) -> torch.Tensor:
        if action.kind not in self.legal:
            return torch.tensor(-math.inf, dtype=self.class_logprobs.dtype)
        lp = self.class_logprobs[self.vocab.action_class(action)]
        if action.kind == ActionKind.GEN:
            lp = lp + self.word_logprobs[self.vocab.word_id(action.symbol)]
        return lp

    def class_action(self, index: int, terminal: Action) -> Action:
        if index == self.vocab.reduce_class:
            return REDUCE
        if index == self.vocab.terminal_class:
            return terminal
        return Action.nt(self.vocab.nonterminals[index])


@dataclass
class SequenceScore:
    total: torch.Tensor
    steps: List[float]
    final_state: ParserState


@dataclass
class SampleResult:
    actions: List[Action]
    logprob: float
    final_state: ParserState

    @property
    def tree(self) -> Nonterminal:
        return self.final_state.tree()


@dataclass
class Enumeration:
    """Every complete derivation with its log-probability, plus mass that never finished."""
    derivations: List[Tuple[Tuple[Action, ...], float]]
    lost_mass: float

    @property
    def total_probability(self) -> float:
        return math.fsum(math.exp(lp) for _, lp in self.derivations)

    def log_total(self) -> float:
        return torch.logsumexp(torch.tensor([lp for _, lp in self.derivations], dtype=torch.float64), 0).item()


class RNNG(nn.Module):
    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        D, H = config.word_dim, config.hidden_dim
        ablation = config.ablation

        self.word_embedding = nn.Embedding(vocab.num_words, D)
        self.nt_embedding = nn.Embedding(vocab.num_nonterminals, D)
        self.action_embedding = nn.Embedding(vocab.num_action_classes, D)
        self.stack_lstm = nn.LSTMCell(D, H) if ablation.use_stack else None
        self.buffer_lstm = nn.LSTMCell(D, H) if ablation.use_buffer else None
        self.history_lstm = nn.LSTMCell(D, H) if ablation.use_history else None
        self.summary = nn.Linear(ablation.enabled_count * H, H)
        self.action_output = nn.Linear(H, vocab.num_action_classes)
        self.word_output = nn.Linear(H, vocab.num_words) if config.mode == Mode.GENERATIVE else None
        if config.composition == Composition.GATED_ATTENTION:
            self.composer = GatedAttentionComposition(vocab.num_nonterminals, D, H, config.query_dim)
        else:
            self.composer = BiLSTMComposition(vocab.num_nonterminals, D)

        self.double()
        init_parameters(self, config.forget_bias)

    @property
    def mode(self) -> Mode:
        return self.config.mode

    @property
    def limits(self):
        return self.config.limits

    # --- state encoding -------------------------------------------------

    def _push(self, states: Tuple[LSTMState, ...], vector: torch.Tensor) -> Tuple[LSTMState, ...]:
        if not states:
            return states
        return states + (lstm_step(self.stack_lstm, vector, states[-1]),)

    def initial_state(self, words: Optional[Sequence[str]] = None) -> ParserState:
        if self.mode == Mode.DISCRIMINATIVE:
            if not words:
                raise DataError("The discriminative model needs a nonempty sentence")
            words = tuple(words)
            buffer_states: Tuple[LSTMState, ...] = ()
            if self.buffer_lstm is not None:
                state = initial_state(self.buffer_lstm)
                states = [state]
                # states[r] encodes the last r words, read right to left
                for word in reversed(words):
                    state = lstm_step(self.buffer_lstm, self._word_vector(word), state)
                    states.append(state)
                buffer_states = tuple(states)
        else:
            words = ()
            buffer_states = (initial_state(self.buffer_lstm),) if self.buffer_lstm is not None else ()
        return ParserState(
            mode=self.mode,
            words=words,
            stack_states=(initial_state(self.stack_lstm),) if self.stack_lstm is not None else (),
            buffer_states=buffer_states,
            history_state=initial_state(self.history_lstm) if self.history_lstm is not None else None,
        )

    def _word_vector(self, word: str) -> torch.Tensor:
        return self.word_embedding.weight[self.vocab.word_id(word)]

    def state_summary(self, state: ParserState) -> torch.Tensor:
        """u = relu(W [enabled top states] + b); disabled structures are absent, not zeroed."""
        parts = [
            top for top in (state.stack_top(), state.buffer_top(), state.history_top()) if top is not None
        ]
        return torch.relu(self.summary(torch.cat(parts, dim=-1))).reshape(-1)

    def action_logprobs(self, u: torch.Tensor, legal: FrozenSet[ActionKind]) -> ActionDistribution:
        if not legal:
            raise DataError("Cannot normalize over an empty set of legal actions")
        vocab = self.vocab
        mask = torch.zeros(vocab.num_action_classes, dtype=torch.bool)
        if ActionKind.NT in legal:
            mask[: vocab.num_nonterminals] = True
        if ActionKind.GEN in legal or ActionKind.SHIFT in legal:
            mask[vocab.terminal_class] = True
        if ActionKind.REDUCE in legal:
            mask[vocab.reduce_class] = True
        logits = self.action_output(u).masked_fill(~mask, -math.inf)
        word_logprobs = None
        if self.word_output is not None and ActionKind.GEN in legal:
            word_logprobs = F.log_softmax(self.word_output(u), dim=0)
        return ActionDistribution(vocab, legal, F.log_softmax(logits, dim=0), word_logprobs)

    # --- transitions ----------------------------------------------------

    def apply_action(self, state: ParserState, action: Action, u: Optional[torch.Tensor] = None) -> ParserState:
        """Successor state; `u` is the summary of `state`, recomputed when omitted."""
        legal = legal_actions(state, self.limits)
        if action.kind not in legal:
            raise IllegalActionError(f"{action} is not legal here", len(state.history), state.describe())

        history_state = state.history_state
        if self.history_lstm is not None:
            action_vector = self.action_embedding.weight[self.vocab.action_class(action)]
            history_state = lstm_step(self.history_lstm, action_vector, history_state)
        common = dict(history=state.history + (action,), history_state=history_state)

        if action.kind == ActionKind.NT:
            vector = self.nt_embedding.weight[self.vocab.nonterminal_id(action.symbol)]
            entry = OpenNT(action.symbol, vector, state.nt_count, state.position)
            return replace(
                state,
                stack=state.stack + (entry,),
                stack_states=self._push(state.stack_states, vector),
                open_nts=state.open_nts + 1,
                nt_count=state.nt_count + 1,
                **common,
            )

        if action.kind in (ActionKind.GEN, ActionKind.SHIFT):
            word = action.symbol if action.kind == ActionKind.GEN else state.words[state.position]
            vector = self._word_vector(word)
            entry = Completed(vector, Terminal(word), state.position)
            words, buffer_states = state.words, state.buffer_states
            if self.mode == Mode.GENERATIVE:
                words = words + (word,)
                if buffer_states:
                    buffer_states = buffer_states + (lstm_step(self.buffer_lstm, vector, buffer_states[-1]),)
            return replace(
                state,
                words=words,
                buffer_states=buffer_states,
                stack=state.stack + (entry,),
                stack_states=self._push(state.stack_states, vector),
                position=state.position + 1,
                **common,
            )

        open_index = max(i for i, e in enumerate(state.stack) if isinstance(e, OpenNT))
        opened = state.stack[open_index]
        children = state.stack[open_index + 1:]
        if u is None:
            u = self.state_summary(state)
        inputs = CompositionInputs(
            label=opened.label,
            label_id=self.vocab.nonterminal_id(opened.label),
            children=[child.vector for child in children],
            descriptors=[descriptor(child.subtree) for child in children],
            u=u,
        )
        vector, attention = self.composer(inputs)
        subtree = Nonterminal(opened.label, tuple(child.subtree for child in children))
        record = ReduceRecord(opened.preorder, opened.label, opened.start, state.position, vector.detach(), attention)
        stack_states = state.stack_states[: open_index + 1] if state.stack_states else ()
        return replace(
            state,
            stack=state.stack[:open_index] + (Completed(vector, subtree, opened.start),),
            stack_states=self._push(stack_states, vector),
            open_nts=state.open_nts - 1,
            records=state.records + (record,),
            **common,
        )

    def _step(self, state: ParserState, action: Action, index: int):
        if is_final(state):
            raise IllegalActionError("Action after the derivation finished", index)
        legal = legal_actions(state, self.limits)
        if action.kind not in legal:
            raise IllegalActionError(f"{action} is not legal here", index, state.describe())
        u = self.state_summary(state)
        lp = self.action_logprobs(u, legal).logprob(action)
        return lp, self.apply_action(state, action, u=u)

    def sequence_logprob(self, actions: Sequence[Action], words: Optional[Sequence[str]] = None) -> SequenceScore:
        """sum_t log p(a_t | a_<t): log p(x, y) when generative, log q(y | x) when discriminative."""
        state = self.initial_state(words)
        total = torch.zeros((), dtype=torch.float64)
        steps: List[float] = []
        for index, action in enumerate(actions):
            lp, state = self._step(state, action, index)
            total = total + lp
            steps.append(lp.item())
        if not is_final(state):
            raise IllegalActionError("Sequence ends before the derivation is complete", len(actions), state.describe())
        check_finite(total, "sequence log-probability")
        return SequenceScore(total, steps, state)

    def score_tree(self, tree: Nonterminal) -> SequenceScore:
        """Forced pass over the oracle of `tree` in this model's mode."""
        if self.mode == Mode.GENERATIVE:
            return self.sequence_logprob(tree_to_oracle(tree, Mode.GENERATIVE))
        return self.sequence_logprob(tree_to_oracle(tree, Mode.DISCRIMINATIVE), tree.leaves())

    # --- sampling and enumeration ---------------------------------------

    def sample_sequence(self, rng: np.random.Generator, words: Optional[Sequence[str]] = None) -> SampleResult:
        """Ancestral sample until the state is final."""
        actions: List[Action] = []
        total = 0.0
        with torch.no_grad():
            state = self.initial_state(words)
            while not is_final(state):
                if len(actions) >= self.limits.max_actions:
                    raise TruncatedSampleError(f"Sample exceeded {self.limits.max_actions} actions")
                legal = legal_actions(state, self.limits)
                if not legal:
                    raise TruncatedSampleError(f"Sample reached a dead end: {state.describe()}")
                u = self.state_summary(state)
                dist = self.action_logprobs(u, legal)
                index = _draw(rng, dist.class_logprobs)
                terminal = SHIFT
                if index == self.vocab.terminal_class and self.mode == Mode.GENERATIVE:
                    terminal = Action.gen(self.vocab.words[_draw(rng, dist.word_logprobs)])
                action = dist.class_action(index, terminal)
                total += dist.logprob(action).item()
                state = self.apply_action(state, action, u=u)
                actions.append(action)
        return SampleResult(actions, total, state)

    def enumerate_derivations(self, words: Optional[Sequence[str]] = None) -> Enumeration:
        """Depth-first enumeration of every complete derivation under the limits.

        Discriminative models enumerate the trees over `words`. Generative models
        enumerate everything when `words` is None, otherwise only derivations
        yielding exactly `words` (lost mass is then not meaningful).
        """
        target = tuple(words) if words is not None else None
        derivations: List[Tuple[Tuple[Action, ...], float]] = []
        lost = 0.0
        with torch.no_grad():
            pending = [(self.initial_state(words if self.mode == Mode.DISCRIMINATIVE else None), (), 0.0)]
            while pending:
                state, actions, logprob = pending.pop()
                if is_final(state):
                    if target is None or state.words == target:
                        derivations.append((actions, logprob))
                    continue
                legal = legal_actions(state, self.limits)
                if not legal or len(actions) >= self.limits.max_actions:
                    lost += math.exp(logprob)
                    continue
                u = self.state_summary(state)
                dist = self.action_logprobs(u, legal)
                for action in self._expansions(state, legal, target):
                    lp = dist.logprob(action).item()
                    if lp == -math.inf:
                        continue
                    pending.append((self.apply_action(state, action, u=u), actions + (action,), logprob + lp))
        derivations.reverse()
        return Enumeration(derivations, lost)

    def _expansions(self, state: ParserState, legal, target) -> List[Action]:
        actions: List[Action] = []
        if ActionKind.NT in legal:
            actions.extend(Action.nt(label) for label in self.vocab.nonterminals)
        if ActionKind.SHIFT in legal:
            actions.append(SHIFT)
        if ActionKind.GEN in legal:
            if target is None:
                actions.extend(Action.gen(word) for word in self.vocab.words)
            elif state.position < len(target):
                actions.append(Action.gen(target[state.position]))
        if ActionKind.REDUCE in legal:
            closes_root = state.open_nts == 1
            if not (target is not None and closes_root and state.position < len(target)):
                actions.append(REDUCE)
        return actions

    def predict_next(self, state: ParserState) -> Action:
        """Most probable next action (argmax class, then argmax word)."""
        with torch.no_grad():
            legal = legal_actions(state, self.limits)
            dist = self.action_logprobs(self.state_summary(state), legal)
            index = int(torch.argmax(dist.class_logprobs).item())
            terminal = SHIFT
            if index == self.vocab.terminal_class and self.mode == Mode.GENERATIVE:
                terminal = Action.gen(self.vocab.words[int(torch.argmax(dist.word_logprobs).item())])
            return dist.class_action(index, terminal)


def _draw(rng: np.random.Generator, logprobs: torch.Tensor) -> int:
    probs = logprobs.detach().exp().numpy()
    probs = probs / probs.sum()
    return int(rng.choice(len(probs), p=probs))
