"""Breadth-first top-down span splitting with pointer attention.

The decoder keeps a FIFO queue of spans still to split, initialized with
the whole document. Popping a span advances a unidirectional GRU on the
span's representation (the mean of its EDU vectors) and scores each
candidate split position by the dot product of the new hidden state with
that position's EDU representation. A split after EDU u produces sub-spans
[i,u] and [u+1,j]; sub-spans of two or more EDUs join the tail of the
queue, left child first, so a parent layer is fully processed before any
of its children.

Candidate positions are u in [i, j-1]: a split after the last EDU would
leave an empty right sub-span. Ties break toward the smaller u.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rstparse import kernel as K
from rstparse.classifier import Classifier, Label
from rstparse.config import RunConfig
from rstparse.core import Internal, Leaf, Tree
from rstparse.encoder import EduEncoding
from rstparse.kernel import ParameterStore, Var


def span_vector(e: Var, i: int, j: int) -> Var:
    """Mean of EDU representations i..j (1-based, inclusive)."""
    m = e.value.shape[0]
    if not 1 <= i <= j <= m:
        raise IndexError(f"span [{i},{j}] out of range for {m} EDUs")
    return K.mean_rows(e, i - 1, j)


@dataclass
class DecoderState:
    """Recurrent state plus the FIFO queue of spans awaiting a split."""

    h: Var
    pending: collections.deque = field(default_factory=collections.deque)


@dataclass
class SplitDecision:
    """One pointer decision over a span."""

    span: tuple[int, int]
    split: int
    log_prob: float
    distribution: np.ndarray  # probabilities over candidates i..j-1
    log_probs: np.ndarray


class Decoder:
    """Owns the decoder parameters: the state projection and the GRU."""

    def __init__(self, cfg: RunConfig, store: ParameterStore):
        self.cfg = cfg
        self.init_w = store.add("dec.init.w", (2 * cfg.hidden_dim, cfg.edu_dim))
        self.init_b = store.add("dec.init.b", (cfg.edu_dim,), init="zeros")
        self.gru = store.add_gru("dec.gru", cfg.edu_dim, cfg.edu_dim)

    def init_hidden(self, doc_summary: Var) -> Var:
        return K.linear(doc_summary, self.init_w, self.init_b)

    def init_state(self, enc: EduEncoding) -> DecoderState:
        state = DecoderState(h=self.init_hidden(enc.doc_summary))
        if enc.m >= 2:
            state.pending.append((1, enc.m))
        return state

    def advance(
        self,
        h: Var,
        enc: EduEncoding,
        i: int,
        j: int,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        dropout: float = 0.0,
    ) -> tuple[Var, Var]:
        """One GRU step on span [i,j]; returns (new state, split log-probs).

        The log-probs cover candidates u = i..j-1 in order.
        """
        x = span_vector(enc.e, i, j)
        if training and dropout > 0.0:
            x = K.dropout(x, dropout, training=True, rng=rng)
        h_new = K.gru_cell(x, h, self.gru)
        candidates = K.rows(enc.e, i - 1, j - 1)  # EDUs i..j-1
        scores = K.matmul(candidates, h_new)
        return h_new, K.log_softmax(scores)


def split_distribution(
    decoder: Decoder, state: DecoderState, span: tuple[int, int], enc: EduEncoding
) -> tuple[SplitDecision, DecoderState]:
    """Advance the state over one span and describe the split distribution."""
    i, j = span
    if j <= i:
        raise ValueError(f"span [{i},{j}] has nothing to split")
    h_new, log_probs = decoder.advance(state.h, enc, i, j)
    lp = log_probs.value
    best = int(np.argmax(lp))
    decision = SplitDecision(
        span=(i, j),
        split=i + best,
        log_prob=float(lp[best]),
        distribution=np.exp(lp),
        log_probs=lp.copy(),
    )
    return decision, DecoderState(h=h_new, pending=state.pending)


@dataclass
class ParseResult:
    """A finished parse with its accumulated log-scores."""

    tree: Tree
    split_log_prob: float
    label_log_prob: float
    total_log_prob: float
    normalized_score: float
    decode_order: list[tuple[int, int, int]]  # (i, j, k) per decision


def parse_greedy(enc: EduEncoding, decoder: Decoder, classifier: Classifier) -> ParseResult:
    """Greedy breadth-first parse: argmax split, then argmax label."""
    m = enc.m
    if m == 1:
        return ParseResult(Leaf(1), 0.0, 0.0, 0.0, 0.0, [])

    h = decoder.init_hidden(enc.doc_summary)
    queue: collections.deque[tuple[int, int]] = collections.deque([(1, m)])
    decisions: dict[tuple[int, int], tuple[int, Label]] = {}
    total = 0.0
    split_total = 0.0
    label_total = 0.0
    order: list[tuple[int, int, int]] = []

    while queue:
        i, j = queue.popleft()
        h, log_probs = decoder.advance(h, enc, i, j)
        lp = log_probs.value
        best = int(np.argmax(lp))
        k = i + best
        label_lp = classifier.log_probs(
            span_vector(enc.e, i, k), span_vector(enc.e, k + 1, j)
        ).value
        label_idx = int(np.argmax(label_lp))
        total += float(lp[best])
        total += float(label_lp[label_idx])
        split_total += float(lp[best])
        label_total += float(label_lp[label_idx])
        decisions[(i, j)] = (k, classifier.space.label(label_idx))
        order.append((i, j, k))
        if k - i >= 1:
            queue.append((i, k))
        if j - (k + 1) >= 1:
            queue.append((k + 1, j))

    def build(i: int, j: int) -> Tree:
        if i == j:
            return Leaf(i)
        k, (relation, nuclearity) = decisions[(i, j)]
        return Internal(nuclearity, relation, build(i, k), build(k + 1, j))

    tree = build(1, m)
    return ParseResult(
        tree=tree,
        split_log_prob=split_total,
        label_log_prob=label_total,
        total_log_prob=total,
        normalized_score=total / (m - 1),
        decode_order=order,
    )
