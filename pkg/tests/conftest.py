"""Shared fixtures: a seeded toy treebank and tiny model factories."""
import sys
from pathlib import Path

import numpy as np
import pytest
import torch
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent))

from common.schemas import AblationConfig, Composition, Limits, ModelConfig, Mode
from core.model import RNNG
from core.vocabulary import Vocabulary
from treebank.trees import Nonterminal, Terminal, parse_bracketed

DETERMINERS = ["the", "a"]
NOUNS = ["dog", "cat", "man"]
VERBS = ["sees", "runs"]


def _noun_phrase(rng: np.random.Generator) -> Nonterminal:
    noun = Terminal(str(rng.choice(NOUNS)), tag="NN")
    if rng.random() < 0.6:
        return Nonterminal("NP", (Terminal(str(rng.choice(DETERMINERS)), tag="DT"), noun))
    return Nonterminal("NP", (noun,))


def synthetic_treebank(n: int, seed: int = 0):
    """Trees of S -> NP VP, NP -> (D) N, VP -> V (NP) with preterminals collapsed into word tags."""
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n):
        verb = Terminal(str(rng.choice(VERBS)), tag="VBZ")
        if rng.random() < 0.5:
            vp = Nonterminal("VP", (verb, _noun_phrase(rng)))
        else:
            vp = Nonterminal("VP", (verb,))
        trees.append(Nonterminal("S", (_noun_phrase(rng), vp)))
    return trees


def make_model(
    mode: Mode,
    vocab: Vocabulary,
    composition: Composition = Composition.BILSTM,
    ablation: str = "full",
    limits: Limits = None,
    dims=(4, 5, 3),
    seed: int = 0,
) -> RNNG:
    torch.manual_seed(seed)
    config = ModelConfig(
        mode=mode,
        composition=composition,
        ablation=AblationConfig.from_name(ablation),
        word_dim=dims[0],
        hidden_dim=dims[1],
        query_dim=dims[2],
        limits=limits or Limits(),
    )
    return RNNG(config, vocab)


@pytest.fixture
def toy_trees():
    return synthetic_treebank(20, seed=1)


@pytest.fixture
def toy_vocab(toy_trees):
    return Vocabulary.from_trees(toy_trees, unk_threshold=0)


@pytest.fixture
def apple_tree():
    return parse_bracketed("(S (NP Apple , Compaq and IBM) (VP fell))")[0]


@pytest.fixture
def tiny_vocab():
    """Two nonterminals, three words: small enough to enumerate."""
    return Vocabulary(["<UNK>", "a", "b", "c"], ["S", "NP"], unk_threshold=0)


@pytest.fixture
def tiny_limits():
    return Limits(max_open_nts=2, max_length=3, max_actions=12)


def tree_strategy(labels=("S", "NP", "VP", "PP"), words=("a", "b", "the", "dog", "runs")):
    """Hypothesis strategy for well-formed trees rooted in a nonterminal."""
    terminals = st.sampled_from(words).map(Terminal)

    def extend(children):
        return st.builds(
            lambda label, kids: Nonterminal(label, tuple(kids)),
            st.sampled_from(labels),
            st.lists(children, min_size=1, max_size=3),
        )

    return st.builds(
        lambda label, kids: Nonterminal(label, tuple(kids)),
        st.sampled_from(labels),
        st.lists(st.recursive(terminals, extend, max_leaves=8), min_size=1, max_size=3),
    )
