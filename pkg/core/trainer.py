"""Per-sentence SGD training on oracle action sequences."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch

from common.schemas import Mode, TrainerConfig
from core.model import RNNG
from core.nncore import accumulate_gradients, make_optimizer, sgd_step
from treebank.oracle import ActionKind, tree_to_oracle
from treebank.trees import Nonterminal

logger = logging.getLogger(__name__)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    lr: float
    elapsed: float
    accuracy: Optional[float] = None

    def to_line(self) -> str:
        """The fixed training-log form `epoch loss lr elapsed`."""
        return f"{self.epoch} {self.loss:.6f} {self.lr:.6f} {self.elapsed:.2f}"


@dataclass
class TrainingResult:
    model: RNNG
    history: List[EpochStats] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [stats.loss for stats in self.history]


def _oracle(tree: Nonterminal, mode: Mode):
    if mode == Mode.GENERATIVE:
        return tree_to_oracle(tree, Mode.GENERATIVE), None
    return tree_to_oracle(tree, Mode.DISCRIMINATIVE), tree.leaves()


def train(
    trees: Sequence[Nonterminal],
    model: RNNG,
    config: TrainerConfig,
    on_epoch: Optional[Callable[[EpochStats], None]] = None,
) -> TrainingResult:
    """Maximize the summed oracle log-likelihood with one SGD update per sentence.

    The epoch loss is the summed negative log-likelihood over the corpus. Shuffling
    uses a generator seeded from `config.seed`.
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(model, config)
    oracles = [_oracle(tree, model.mode) for tree in trees]
    result = TrainingResult(model)

    model.train()
    for epoch in range(config.epochs):
        start = time.time()
        total = 0.0
        rate = config.rate(epoch)
        for index in rng.permutation(len(oracles)):
            actions, words = oracles[index]
            optimizer.zero_grad()
            loss = -model.sequence_logprob(actions, words).total
            accumulate_gradients(loss, model)
            rate = sgd_step(optimizer, config, epoch)
            total += loss.item()
        stats = EpochStats(epoch, total, rate, time.time() - start)
        if config.report_accuracy:
            stats.accuracy = oracle_accuracy(model, trees)
        logger.info(stats.to_line())
        result.history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    model.eval()
    return result


def oracle_accuracy(model: RNNG, trees: Sequence[Nonterminal]) -> float:
    """Fraction of oracle actions the model ranks first when fed the gold prefix."""
    correct = total = 0
    with torch.no_grad():
        for tree in trees:
            actions, words = _oracle(tree, model.mode)
            state = model.initial_state(words)
            for action in actions:
                correct += int(_same_action(model, model.predict_next(state), action))
                total += 1
                state = model.apply_action(state, action)
    return correct / total if total else 0.0


def corpus_loss(model: RNNG, trees: Sequence[Nonterminal]) -> float:
    """Summed negative oracle log-likelihood without updating anything."""
    with torch.no_grad():
        return -sum(model.score_tree(tree).total.item() for tree in trees)


def _same_action(model: RNNG, predicted, gold) -> bool:
    if predicted.kind != gold.kind:
        return False
    if gold.kind == ActionKind.GEN:
        return model.vocab.word_id(predicted.symbol) == model.vocab.word_id(gold.symbol)
    return predicted.symbol == gold.symbol
