"""Attention perplexity per nonterminal category and highest-entropy composition listings."""

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from core.compose import AttentionRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelPerplexity:
    label: str
    learned: float
    uniform: float
    count: int


def perplexity_by_label(records: Iterable[AttentionRecord]) -> Dict[str, LabelPerplexity]:
    """Mean learned vs. uniform perplexity per label, over records with at least two children.

    The uniform baseline of a record with k children is exactly k.
    """
    learned = defaultdict(list)
    uniform = defaultdict(list)
    for record in records:
        if record.size < 2:
            continue
        learned[record.label].append(record.perplexity)
        uniform[record.label].append(float(record.size))
    table = {}
    for label in sorted(learned):
        values = learned[label]
        table[label] = LabelPerplexity(
            label,
            sum(values) / len(values),
            sum(uniform[label]) / len(uniform[label]),
            len(values),
        )
    return table


def top_entropy_samples(records: Iterable[AttentionRecord], label: str, k: int) -> List[AttentionRecord]:
    """The k records of `label` with the highest attention entropy, highest first."""
    matching = [r for r in records if r.label == label]
    return sorted(matching, key=lambda r: r.entropy, reverse=True)[:k]


def render_samples(records: Sequence[AttentionRecord]) -> List[str]:
    return [f"{r.label}\t{r.render()}" for r in records]


def write_perplexity_table(path: Path, table: Dict[str, LabelPerplexity]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["label", "learned_perplexity", "uniform_perplexity", "count"])
        for row in table.values():
            writer.writerow([row.label, f"{row.learned:.4f}", f"{row.uniform:.4f}", row.count])


def write_perplexity_chart(path: Path, table: Dict[str, LabelPerplexity]):
    """Bar-chart-ready CSV: label, learned, uniform."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label", "learned", "uniform"])
        for row in table.values():
            writer.writerow([row.label, f"{row.learned:.4f}", f"{row.uniform:.4f}"])


def write_attention_sidecar(path: Path, sentences: Iterable[Sequence[AttentionRecord]]):
    """One line per REDUCE in pre-order; a blank line closes each sentence."""
    with open(path, "w", encoding="utf-8") as f:
        for records in sentences:
            for record in records:
                f.write(record.to_line() + "\n")
            f.write("\n")


def read_attention_sidecar(path: Path) -> List[List[AttentionRecord]]:
    sentences: List[List[AttentionRecord]] = []
    current: List[AttentionRecord] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                sentences.append(current)
                current = []
                continue
            current.append(AttentionRecord.from_line(line))
    if current:
        sentences.append(current)
    logger.info(f"Read attention records for {len(sentences)} sentences from {path}")
    return sentences
