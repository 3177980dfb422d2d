"""
Importance-sampling inference with the discriminative model as proposal.

Trees are drawn from q(y | x), rescored under the generative p(x, y), and used both
for MAP parsing (argmax of p(x, y) over the draws) and for the marginal estimate
p(x) ~ (1/N) sum_i p(x, y_i) / q(y_i | x).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch

from common.errors import DataError, TruncatedSampleError
from common.schemas import Mode
from common.utils import bump_count
from core.model import RNNG
from core.transition import ReduceRecord
from treebank.oracle import tree_to_oracle
from treebank.trees import Nonterminal

logger = logging.getLogger(__name__)

RETRY_FACTOR = 10


@dataclass
class WeightedSample:
    tree: Nonterminal
    log_q: float
    log_p: Optional[float] = None
    records: List[ReduceRecord] = field(default_factory=list, repr=False)

    @property
    def log_weight(self) -> float:
        if self.log_p is None:
            raise DataError("Joint score not filled; run score_joint first")
        return self.log_p - self.log_q


@dataclass
class ParseResult:
    words: List[str]
    tree: Nonterminal
    samples: List[WeightedSample]
    records: List[ReduceRecord]

    @property
    def distinct_parses(self) -> int:
        return len({s.tree for s in self.samples})


@dataclass
class PerplexityReport:
    perplexity: float
    total_loglik: float
    tokens: int
    sentence_logliks: List[float]
    token_convention: str = "words"


def sentence_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per sentence so results do not depend on scheduling."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def propose(
    words: Sequence[str],
    proposal: RNNG,
    num_samples: int,
    rng: np.random.Generator,
    retry_factor: int = RETRY_FACTOR,
) -> List[WeightedSample]:
    """Draw `num_samples` trees over `words` from q(y | x); truncated draws are retried."""
    if num_samples < 1:
        raise DataError("num_samples must be at least 1")
    if proposal.mode != Mode.DISCRIMINATIVE:
        raise DataError("The proposal must be a discriminative model")
    samples: List[WeightedSample] = []
    failures = 0
    cap = retry_factor * num_samples
    while len(samples) < num_samples:
        try:
            result = proposal.sample_sequence(rng, words)
        except TruncatedSampleError as e:
            failures += 1
            logger.warning(f"Discarded truncated proposal sample ({failures}/{cap}): {e}")
            if failures >= cap:
                raise TruncatedSampleError(f"Gave up after {failures} truncated proposal samples") from e
            continue
        samples.append(WeightedSample(result.tree, result.logprob))
    bump_count('samples', len(samples))
    return samples


def score_joint(samples: Sequence[WeightedSample], model: RNNG) -> List[WeightedSample]:
    """Fill log p(x, y) from the generative oracle of each sampled tree."""
    if model.mode != Mode.GENERATIVE:
        raise DataError("Joint scoring needs a generative model")
    with torch.no_grad():
        for sample in samples:
            score = model.sequence_logprob(tree_to_oracle(sample.tree, Mode.GENERATIVE))
            sample.log_p = score.total.item()
            sample.records = score.final_state.ordered_records()
            bump_count('reductions', len(sample.records))
    return list(samples)


def map_parse(samples: Sequence[WeightedSample]) -> WeightedSample:
    """Sample with the largest log p(x, y); the first one wins ties."""
    if not samples:
        raise DataError("Cannot pick a parse from an empty sample set")
    best = samples[0]
    for sample in samples[1:]:
        if sample.log_p > best.log_p:
            best = sample
    return best


def marginal_loglik(samples: Sequence[WeightedSample]) -> float:
    """log((1/N) sum_i exp(log p_i - log q_i)) over the raw draws, duplicates included."""
    if not samples:
        raise DataError("Cannot estimate p(x) from an empty sample set")
    log_weights = torch.tensor([s.log_weight for s in samples], dtype=torch.float64)
    return (torch.logsumexp(log_weights, dim=0) - math.log(len(samples))).item()


def parse_sentence(
    words: Sequence[str],
    proposal: RNNG,
    model: RNNG,
    num_samples: int,
    rng: np.random.Generator,
) -> ParseResult:
    samples = score_joint(propose(words, proposal, num_samples, rng), model)
    best = map_parse(samples)
    bump_count('sentences')
    return ParseResult(list(words), best.tree, samples, best.records)


def parse_corpus(
    sentences: Sequence[Sequence[str]],
    proposal: RNNG,
    model: RNNG,
    num_samples: int,
    seed: int = 0,
    workers: int = 1,
) -> List[ParseResult]:
    """Parse every sentence with its own RNG stream; `workers` threads share the read-only models."""
    def run(index: int) -> ParseResult:
        return parse_sentence(sentences[index], proposal, model, num_samples, sentence_rng(seed, index))

    if workers <= 1:
        return [run(i) for i in range(len(sentences))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sentences))))


def corpus_perplexity(
    sentences: Sequence[Sequence[str]],
    proposal: RNNG,
    model: RNNG,
    num_samples: int,
    seed: int = 0,
    workers: int = 1,
) -> PerplexityReport:
    """exp(-sum log p^(x) / number of words); structural actions and EOS are not counted."""
    results = parse_corpus(sentences, proposal, model, num_samples, seed, workers)
    logliks = [marginal_loglik(result.samples) for result in results]
    return perplexity_from_logliks(logliks, [len(s) for s in sentences])


def perplexity_from_logliks(logliks: Sequence[float], lengths: Sequence[int]) -> PerplexityReport:
    tokens = sum(lengths)
    if tokens == 0:
        raise DataError("Perplexity needs at least one token")
    total = math.fsum(logliks)
    return PerplexityReport(math.exp(-total / tokens), total, tokens, list(logliks))
