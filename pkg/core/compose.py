"""
Composition functions run on REDUCE.

BiLSTMComposition reads the label and the children in both directions and projects
the two final states. GatedAttentionComposition attends over the children with a
query built from the parser state and the label, then gates the attended content
against a label embedding:

    a = softmax([c_1 ... c_k]^T V [u; o_nt])
    m = sum_i a_i c_i
    g = sigmoid(W1 t_nt + W2 m + b)
    c = g * t_nt + (1 - g) * m
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from common.errors import DataError
from core.nncore import lstm_encode

PERPLEXITY_FLOOR = 1e-12


@dataclass
class CompositionInputs:
    label: str
    label_id: int
    children: Sequence[torch.Tensor]
    descriptors: Sequence[str]
    u: torch.Tensor

    def __post_init__(self):
        if len(self.children) == 0:
            raise DataError(f"Composition of {self.label} needs at least one child")
        if len(self.descriptors) != len(self.children):
            raise DataError("One descriptor per child is required")


@dataclass
class AttentionRecord:
    """Attention over one constituent's children, captured at its REDUCE."""
    label: str
    descriptors: List[str]
    weights: List[float]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def perplexity(self) -> float:
        return attention_perplexity(self.weights)

    @property
    def entropy(self) -> float:
        return math.log(self.perplexity)

    def to_line(self) -> str:
        """`label TAB descriptor:weight TAB ...` with 4-decimal weights."""
        pairs = "\t".join(f"{d}:{w:.4f}" for d, w in zip(self.descriptors, self.weights))
        return f"{self.label}\t{pairs}"

    @classmethod
    def from_line(cls, line: str) -> "AttentionRecord":
        fields = line.rstrip("\n").split("\t")
        if len(fields) < 2:
            raise DataError(f"Malformed attention record line: {line!r}")
        descriptors, weights = [], []
        for pair in fields[1:]:
            descriptor, sep, weight = pair.rpartition(":")
            if not sep:
                raise DataError(f"Malformed attention pair {pair!r}")
            descriptors.append(descriptor)
            weights.append(float(weight))
        return cls(fields[0], descriptors, weights)

    def render(self) -> str:
        """Display form: `Apple (0.62) , (0.02) Compaq (0.1)`."""
        return " ".join(f"{d} ({w:.2f})" for d, w in zip(self.descriptors, self.weights))


def attention_perplexity(weights) -> float:
    """exp of the natural-log entropy, with 0 ln 0 = 0."""
    a = np.asarray(weights, dtype=np.float64)
    entropy = -float(np.sum(a * np.log(np.maximum(a, PERPLEXITY_FLOOR))))
    return math.exp(entropy)


def attention_weights(children: torch.Tensor, V: torch.Tensor, u: torch.Tensor, o_nt: torch.Tensor) -> torch.Tensor:
    """softmax over children of c_i^T V [u; o_nt]; `children` is (k, D)."""
    if V.shape != (children.shape[1], u.shape[0] + o_nt.shape[0]):
        raise DataError(f"Attention matrix shape {tuple(V.shape)} does not fit children/query widths")
    query = torch.cat([u, o_nt])
    return torch.softmax(children @ (V @ query), dim=0)


def gated_combination(
    children: torch.Tensor,
    a: torch.Tensor,
    t_nt: torch.Tensor,
    W1: torch.Tensor,
    W2: torch.Tensor,
    b: torch.Tensor,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Returns (c, g) for the attended content m = a^T children."""
    m = a @ children
    g = torch.sigmoid(W1 @ t_nt + W2 @ m + b)
    return g * t_nt + (1 - g) * m, g


class BiLSTMComposition(nn.Module):
    def __init__(self, num_nonterminals: int, dim: int):
        super().__init__()
        self.label_embedding = nn.Embedding(num_nonterminals, dim)
        self.forward_cell = nn.LSTMCell(dim, dim)
        self.backward_cell = nn.LSTMCell(dim, dim)
        self.project = nn.Linear(2 * dim, dim)

    def forward(self, inputs: CompositionInputs) -> Tuple[torch.Tensor, Optional[AttentionRecord]]:
        return compose_bilstm(self, inputs), None


def compose_bilstm(module: BiLSTMComposition, inputs: CompositionInputs) -> torch.Tensor:
    """Both directions start from the label, then read the children in their order."""
    label = module.label_embedding.weight[inputs.label_id]
    children = list(inputs.children)
    h_forward = lstm_encode(module.forward_cell, [label] + children)[-1]
    h_backward = lstm_encode(module.backward_cell, [label] + children[::-1])[-1]
    return torch.tanh(module.project(torch.cat([h_forward, h_backward])))


class GatedAttentionComposition(nn.Module):
    def __init__(self, num_nonterminals: int, dim: int, state_dim: int, query_dim: int):
        super().__init__()
        self.query_embedding = nn.Embedding(num_nonterminals, query_dim)  # o_nt
        self.gate_embedding = nn.Embedding(num_nonterminals, dim)  # t_nt
        self.attention = nn.Parameter(torch.empty(dim, state_dim + query_dim))  # V
        self.gate_label = nn.Linear(dim, dim, bias=False)  # W1
        self.gate_content = nn.Linear(dim, dim)  # W2, b
        nn.init.xavier_uniform_(self.attention)

    def attention_weights(self, inputs: CompositionInputs) -> torch.Tensor:
        return attention_weights(
            torch.stack(list(inputs.children)),
            self.attention,
            inputs.u,
            self.query_embedding.weight[inputs.label_id],
        )

    def forward(self, inputs: CompositionInputs) -> Tuple[torch.Tensor, AttentionRecord]:
        return compose_gated_attention(self, inputs)


def compose_gated_attention(
    module: GatedAttentionComposition, inputs: CompositionInputs
) -> Tuple[torch.Tensor, AttentionRecord]:
    children = torch.stack(list(inputs.children))
    a = module.attention_weights(inputs)
    c, _ = gated_combination(
        children,
        a,
        module.gate_embedding.weight[inputs.label_id],
        module.gate_label.weight,
        module.gate_content.weight,
        module.gate_content.bias,
    )
    record = AttentionRecord(inputs.label, list(inputs.descriptors), a.detach().tolist())
    return c, record
