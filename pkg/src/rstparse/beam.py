"""Layer-wise beam search over tree layers, plus an exhaustive oracle.

Hypotheses are whole layers of span sets. Each surviving candidate expands
every splittable span of its current layer: candidate splits are ranked by
split log-probability (ties toward the smaller position) and each carries
its best label, scored log P_split + log P_label. Per-span lists combine
into at most K sub-span sets per candidate; the global pool then keeps the
K candidates with the best cumulative score normalized by the number of
split decisions made so far. Candidates that run out of splittable spans
keep competing with their final normalized scores until every survivor is
finished.

With K = 1 the search degenerates exactly to the greedy parse: the same
argmax split, the same argmax label, the same score arithmetic in the same
order. The exhaustive oracle replays the breadth-first decoder along every
binary tree over m EDUs (m <= 8) and maximizes the same normalized score,
which pins down what the beam should find when K covers the search space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from rstparse.classifier import Classifier
from rstparse.core import Internal, Leaf, Tree
from rstparse.decoder import Decoder, ParseResult, span_vector
from rstparse.encoder import EduEncoding
from rstparse.kernel import Var

_ORACLE_MAX_EDUS = 8


@dataclass(frozen=True)
class BeamCandidate:
    """One layer-wise hypothesis."""

    history: tuple[tuple[int, int, int], ...]  # (i, j, k) in decode order
    labels: tuple[int, ...]  # label index per decision, same order
    pending: tuple[tuple[int, int], ...]  # spans of the next layer
    h: Var
    score: float  # cumulative log P_split + log P_label
    split_score: float
    label_score: float

    @property
    def split_count(self) -> int:
        return len(self.history)

    def normalized(self) -> float:
        return self.score / self.split_count if self.history else 0.0

    def sort_key(self) -> tuple:
        return (-self.normalized(), tuple(k for _, _, k in self.history))


@dataclass(frozen=True)
class _SpanChoice:
    """One (split, best label) option for a span within a layer."""

    split: int
    label: int
    split_lp: float
    label_lp: float

    @property
    def pair_score(self) -> float:
        return self.split_lp + self.label_lp


def _span_choices(
    enc: EduEncoding,
    classifier: Classifier,
    log_probs: np.ndarray,
    i: int,
    j: int,
    k_best: int,
) -> list[_SpanChoice]:
    """Top-k_best splits of [i,j] by split log-prob, each with its best label."""
    order = sorted(range(j - i), key=lambda u: (-log_probs[u], u))[:k_best]
    choices = []
    for u in order:
        k = i + u
        label_lp = classifier.log_probs(
            span_vector(enc.e, i, k), span_vector(enc.e, k + 1, j)
        ).value
        best = int(np.argmax(label_lp))
        choices.append(
            _SpanChoice(
                split=k, label=best,
                split_lp=float(log_probs[u]), label_lp=float(label_lp[best]),
            )
        )
    return choices


def combine_within_candidate(
    per_span: list[list[_SpanChoice]], k_best: int
) -> list[tuple[_SpanChoice, ...]]:
    """Cartesian combination of per-span choices pruned to the k_best sets.

    Ranking is by summed pair score; ties resolve toward lexicographically
    smaller split-position tuples.
    """
    combos: list[tuple[float, tuple[_SpanChoice, ...]]] = [(0.0, ())]
    for choices in per_span:
        expanded = [
            (total + c.pair_score, picked + (c,))
            for total, picked in combos
            for c in choices
        ]
        expanded.sort(key=lambda item: (-item[0], tuple(c.split for c in item[1])))
        combos = expanded[:k_best]
    return [picked for _, picked in combos]


def _expand(
    cand: BeamCandidate,
    enc: EduEncoding,
    decoder: Decoder,
    classifier: Classifier,
    beam_size: int,
) -> list[BeamCandidate]:
    """All surviving expansions of one candidate's current layer."""
    h = cand.h
    per_span: list[list[_SpanChoice]] = []
    for i, j in cand.pending:
        h, log_probs = decoder.advance(h, enc, i, j)
        per_span.append(_span_choices(enc, classifier, log_probs.value, i, j, beam_size))

    out = []
    for picked in combine_within_candidate(per_span, beam_size):
        history = cand.history
        labels = cand.labels
        score = cand.score
        split_score = cand.split_score
        label_score = cand.label_score
        next_pending: list[tuple[int, int]] = []
        for (i, j), choice in zip(cand.pending, picked):
            k = choice.split
            history = history + ((i, j, k),)
            labels = labels + (choice.label,)
            score += choice.split_lp
            score += choice.label_lp
            split_score += choice.split_lp
            label_score += choice.label_lp
            if k - i >= 1:
                next_pending.append((i, k))
            if j - (k + 1) >= 1:
                next_pending.append((k + 1, j))
        out.append(
            BeamCandidate(
                history=history,
                labels=labels,
                pending=tuple(next_pending),
                h=h,
                score=score,
                split_score=split_score,
                label_score=label_score,
            )
        )
    return out


def _result_from_candidate(
    cand: BeamCandidate, classifier: Classifier, m: int
) -> ParseResult:
    decisions = {
        (i, j): (k, classifier.space.label(label))
        for (i, j, k), label in zip(cand.history, cand.labels)
    }

    def build(i: int, j: int) -> Tree:
        if i == j:
            return Leaf(i)
        k, (relation, nuclearity) = decisions[(i, j)]
        return Internal(nuclearity, relation, build(i, k), build(k + 1, j))

    return ParseResult(
        tree=build(1, m),
        split_log_prob=cand.split_score,
        label_log_prob=cand.label_score,
        total_log_prob=cand.score,
        normalized_score=cand.normalized(),
        decode_order=[(i, j, k) for i, j, k in cand.history],
    )


def parse_beam(
    enc: EduEncoding, decoder: Decoder, classifier: Classifier, beam_size: int
) -> ParseResult:
    """Layer-wise beam search; beam_size=1 reproduces the greedy parse."""
    if beam_size < 1:
        raise ValueError(f"beam size must be >= 1, got {beam_size}")
    m = enc.m
    if m == 1:
        return ParseResult(Leaf(1), 0.0, 0.0, 0.0, 0.0, [])

    start = BeamCandidate(
        history=(), labels=(), pending=((1, m),),
        h=decoder.init_hidden(enc.doc_summary),
        score=0.0, split_score=0.0, label_score=0.0,
    )
    candidates = [start]
    while any(c.pending for c in candidates):
        pool: list[BeamCandidate] = []
        for cand in candidates:
            if not cand.pending:
                pool.append(cand)
            else:
                pool.extend(_expand(cand, enc, decoder, classifier, beam_size))
        pool.sort(key=BeamCandidate.sort_key)
        candidates = pool[:beam_size]

    best = min(candidates, key=BeamCandidate.sort_key)
    return _result_from_candidate(best, classifier, m)


# ---------------------------------------------------------------------------
# exhaustive oracle


def enumerate_structures(i: int, j: int) -> list:
    """Every binary structure over EDUs i..j as nested (k, left, right)."""
    if i == j:
        return [("leaf", i)]
    out = []
    for k in range(i, j):
        for left in enumerate_structures(i, k):
            for right in enumerate_structures(k + 1, j):
                out.append((k, left, right))
    return out


def _replay_structure(
    structure, enc: EduEncoding, decoder: Decoder, classifier: Classifier
) -> BeamCandidate:
    """Breadth-first forced decode along one structure."""
    h = decoder.init_hidden(enc.doc_summary)
    queue: list = [structure]
    history: tuple[tuple[int, int, int], ...] = ()
    labels: tuple[int, ...] = ()
    score = split_score = label_score = 0.0
    while queue:
        node = queue.pop(0)
        if node[0] == "leaf":
            continue
        k, left, right = node
        i = _structure_span(left)[0]
        j = _structure_span(right)[1]
        h, log_probs = decoder.advance(h, enc, i, j)
        lp = float(log_probs.value[k - i])
        label_lp = classifier.log_probs(
            span_vector(enc.e, i, k), span_vector(enc.e, k + 1, j)
        ).value
        best = int(np.argmax(label_lp))
        history = history + ((i, j, k),)
        labels = labels + (best,)
        score += lp
        score += float(label_lp[best])
        split_score += lp
        label_score += float(label_lp[best])
        if left[0] != "leaf":
            queue.append(left)
        if right[0] != "leaf":
            queue.append(right)
    return BeamCandidate(
        history, labels, (), h, score, split_score, label_score
    )


def _structure_span(structure) -> tuple[int, int]:
    node = structure
    while node[0] != "leaf":
        node = node[1]
    lo = node[1]
    node = structure
    while node[0] != "leaf":
        node = node[2]
    return lo, node[1]


def oracle_best(
    enc: EduEncoding, decoder: Decoder, classifier: Classifier
) -> ParseResult:
    """Best tree by exhaustive enumeration; only feasible for small m."""
    m = enc.m
    if m > _ORACLE_MAX_EDUS:
        raise ValueError(
            f"oracle enumeration limited to m <= {_ORACLE_MAX_EDUS}, got {m}"
        )
    if m == 1:
        return ParseResult(Leaf(1), 0.0, 0.0, 0.0, 0.0, [])
    replayed = [
        _replay_structure(s, enc, decoder, classifier)
        for s in enumerate_structures(1, m)
    ]
    best = min(replayed, key=BeamCandidate.sort_key)
    return _result_from_candidate(best, classifier, m)
