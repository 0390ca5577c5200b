"""Seeded synthetic corpora whose surface cues encode the gold trees.

Each boundary between adjacent EDUs corresponds to exactly one internal
node of a binary tree. The generator writes a depth cue for that node as
the last token of the EDU left of the boundary, and a relation cue as the
first token of the EDU right of it. Within any span, the boundary whose
node sits shallowest is the correct split, so a pointer decoder can learn
the structure from the cues; the relation cue likewise determines the
node's label. Ablating the markers removes the signal, which is useful
for checking that training actually exploits it.
"""

from __future__ import annotations

import collections
from typing import Optional

import numpy as np

from rstparse.core import Document, Internal, Leaf, Tree
from rstparse.fileio import CorpusRecord

SYNTHETIC_LABELS = (
    ("Elaboration", "NS"),
    ("Attribution", "SN"),
    ("Joint", "NN"),
    ("Contrast", "NN"),
)

_PAD_LEFT = "mark-none-l"
_PAD_RIGHT = "mark-none-r"


def _random_structure(i: int, j: int, rng: np.random.Generator) -> Tree:
    if i == j:
        return Leaf(i)
    k = int(rng.integers(i, j))
    relation, nuclearity = SYNTHETIC_LABELS[int(rng.integers(len(SYNTHETIC_LABELS)))]
    return Internal(
        nuclearity,
        relation,
        _random_structure(i, k, rng),
        _random_structure(k + 1, j, rng),
    )


def _boundary_cues(tree: Tree) -> dict[int, tuple[int, int]]:
    """Per boundary k: (depth of its node, label index), breadth-first depths."""
    cues: dict[int, tuple[int, int]] = {}
    queue = collections.deque([(tree, 0)])
    while queue:
        node, depth = queue.popleft()
        if isinstance(node, Leaf):
            continue
        k = _rightmost(node.left)
        label_idx = SYNTHETIC_LABELS.index((node.relation, node.nuclearity))
        cues[k] = (depth, label_idx)
        queue.append((node.left, depth + 1))
        queue.append((node.right, depth + 1))
    return cues


def _rightmost(node: Tree) -> int:
    while isinstance(node, Internal):
        node = node.right
    return node.edu


def generate_synthetic(
    n_docs: int,
    m_range: tuple[int, int] = (3, 6),
    vocab: int = 30,
    seed: int = 0,
    markers: bool = True,
) -> list[CorpusRecord]:
    """Build n_docs random documents with gold trees and learnable cues.

    ``markers=False`` produces the ablated twin: same documents and trees,
    cue tokens replaced by constant padding.
    """
    lo, hi = m_range
    if not 2 <= lo <= hi <= 12:
        raise ValueError(f"m_range must lie within [2, 12], got {m_range}")
    rng = np.random.default_rng(seed)
    records = []
    for d in range(n_docs):
        m = int(rng.integers(lo, hi + 1))
        tree = _random_structure(1, m, rng)
        cues = _boundary_cues(tree)
        tokens: list[str] = []
        breaks: list[int] = []
        for edu in range(1, m + 1):
            if edu > 1 and markers:
                _, label_idx = cues[edu - 1]
                tokens.append(f"mark-rel-{label_idx}")
            else:
                tokens.append(_PAD_LEFT)
            for _ in range(int(rng.integers(1, 3))):
                tokens.append(f"w{int(rng.integers(vocab))}")
            if edu < m and markers:
                depth, _ = cues[edu]
                tokens.append(f"mark-depth-{depth}")
            else:
                tokens.append(_PAD_RIGHT)
            breaks.append(len(tokens) - 1)
        doc = Document(f"synth-{seed}-{d:04d}", tuple(tokens), tuple(breaks))
        records.append(CorpusRecord(doc, tree))
    return records
