"""
Composed phrase vectors: export, a principal-component projection for quick
looks, and cluster purity against gold categories.
"""

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import torch

from common.errors import DataError
from core.model import RNNG
from treebank.trees import Nonterminal

logger = logging.getLogger(__name__)

UNMATCHED = "∅"
RANK_TOLERANCE = 1e-10


@dataclass
class PhraseVector:
    sentence: int
    label: str
    gold_label: str
    start: int
    end: int
    preview: str
    vector: np.ndarray


@dataclass
class Projection:
    coordinates: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    rank_deficient: bool = False


def surface_preview(words: Sequence[str]) -> str:
    """First and last word plus length: `the ... dog (3)`."""
    if len(words) == 1:
        return f"{words[0]} (1)"
    return f"{words[0]} ... {words[-1]} ({len(words)})"


def _gold_spans(tree: Nonterminal) -> Dict[tuple, str]:
    spans: Dict[tuple, str] = {}
    for node, start, end in tree.nodes_with_spans():
        # outermost constituent of a unary chain names the span
        spans.setdefault((start, end), node.label)
    return spans


def export_phrase_vectors(
    trees: Sequence[Nonterminal],
    model: RNNG,
    gold_trees: Optional[Sequence[Nonterminal]] = None,
    label_filter: Optional[Iterable[str]] = None,
) -> List[PhraseVector]:
    """One row per composed constituent, in sentence order then pre-order.

    With `gold_trees`, each constituent takes the gold label of the constituent
    with exactly the same span, or UNMATCHED. Without them the model's own label
    is used. `label_filter` keeps only rows whose gold label is in the set.
    """
    if gold_trees is not None and len(gold_trees) != len(trees):
        raise DataError(f"{len(trees)} trees but {len(gold_trees)} gold trees")
    keep = set(label_filter) if label_filter is not None else None
    rows: List[PhraseVector] = []
    with torch.no_grad():
        for index, tree in enumerate(trees):
            words = tree.leaves()
            spans = _gold_spans(gold_trees[index]) if gold_trees is not None else None
            for record in model.score_tree(tree).final_state.ordered_records():
                gold = record.label if spans is None else spans.get((record.start, record.end), UNMATCHED)
                if keep is not None and gold not in keep:
                    continue
                rows.append(
                    PhraseVector(
                        index,
                        record.label,
                        gold,
                        record.start,
                        record.end,
                        surface_preview(words[record.start:record.end]),
                        record.vector.reshape(-1).numpy().copy(),
                    )
                )
    logger.info(f"Exported {len(rows)} phrase vectors from {len(trees)} trees")
    return rows


def write_phrase_vectors(path: Path, rows: Sequence[PhraseVector]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["sentence", "label", "gold_label", "start", "end", "preview", "vector"])
        for row in rows:
            vector = " ".join(repr(float(x)) for x in row.vector)
            writer.writerow([row.sentence, row.label, row.gold_label, row.start, row.end, row.preview, vector])


def read_phrase_vectors(path: Path) -> List[PhraseVector]:
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        for record in csv.DictReader(f, delimiter="\t"):
            rows.append(
                PhraseVector(
                    int(record["sentence"]),
                    record["label"],
                    record["gold_label"],
                    int(record["start"]),
                    int(record["end"]),
                    record["preview"],
                    np.array([float(x) for x in record["vector"].split()], dtype=np.float64),
                )
            )
    return rows


def project_2d(vectors) -> Projection:
    """Mean-centred projection onto the top two principal directions.

    Each component is signed so its first nonzero loading is positive. When the
    centred data has rank below two, the second coordinate is zero.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("project_2d needs at least two vectors")
    centred = X - X.mean(axis=0)
    eigenvalues, eigenvectors = np.linalg.eigh(centred.T @ centred)
    order = np.argsort(eigenvalues)[::-1][:2]
    values = np.clip(eigenvalues[order], 0.0, None)
    components = eigenvectors[:, order].T.copy()
    for component in components:
        nonzero = np.flatnonzero(np.abs(component) > RANK_TOLERANCE)
        if nonzero.size and component[nonzero[0]] < 0:
            component *= -1
    coordinates = centred @ components.T
    if coordinates.shape[1] < 2:
        coordinates = np.hstack([coordinates, np.zeros((X.shape[0], 1))])
        values = np.append(values, 0.0)
        components = np.vstack([components, np.zeros(X.shape[1])])

    scale = max(values[0], 1.0)
    deficient = bool(values[1] <= RANK_TOLERANCE * scale)
    if deficient:
        logger.warning("Phrase vectors span fewer than two dimensions; second coordinate set to zero")
        coordinates[:, 1] = 0.0
    return Projection(coordinates, components, values / max(X.shape[0] - 1, 1), deficient)


def cluster_purity(coordinates, labels: Sequence[str]) -> float:
    """Share of points whose nearest gold-label centroid is their own label; UNMATCHED rows are skipped."""
    points = np.asarray(coordinates, dtype=np.float64)
    groups = defaultdict(list)
    for index, label in enumerate(labels):
        if label != UNMATCHED:
            groups[label].append(index)
    if not groups:
        return 0.0
    names = sorted(groups)
    centroids = np.stack([points[groups[name]].mean(axis=0) for name in names])
    correct = total = 0
    for name in names:
        for index in groups[name]:
            distances = np.linalg.norm(centroids - points[index], axis=1)
            correct += int(names[int(np.argmin(distances))] == name)
            total += 1
    return correct / total


def write_projection(path: Path, rows: Sequence[PhraseVector], projection: Projection):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["gold_label", "preview", "x", "y"])
        for row, (x, y) in zip(rows, projection.coordinates):
            writer.writerow([row.gold_label, row.preview, f"{x:.6f}", f"{y:.6f}"])
