"""Bi-affine nuclearity-relation classification over split sub-span pairs.

A label is a (relation, nuclearity) pair; the ordered label space is either
the full cross-product of the 18 relation classes with NS/SN/NN or the set
observed in a training corpus. Left and right span vectors go through
separate ELU-activated projections and a bi-affine form produces one logit
per label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from rstparse import kernel as K
from rstparse.config import RunConfig
from rstparse.core import (
    NUCLEARITIES,
    RELATION_CLASSES_18,
    DiscourseError,
    Tree,
    iter_internal,
)
from rstparse.kernel import ParameterStore, Var


class LabelSpaceError(DiscourseError):
    """A gold label is missing from the configured label space."""


Label = tuple[str, str]  # (relation, nuclearity)


def format_label(label: Label) -> str:
    return f"{label[0]}-{label[1]}"


def parse_label(text: str) -> Label:
    relation, _, nuclearity = text.rpartition("-")
    return relation, nuclearity


class LabelSpace:
    """Deterministically ordered nuclearity-relation label inventory."""

    def __init__(self, labels: Iterable[Label]):
        self.labels = tuple(sorted(set(labels)))
        if not self.labels:
            raise LabelSpaceError("label space is empty")
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def full(cls, relations: tuple[str, ...] = RELATION_CLASSES_18) -> "LabelSpace":
        return cls((rel, nuc) for rel in relations for nuc in NUCLEARITIES)

    @classmethod
    def observed(cls, gold_trees: Iterable[Tree]) -> "LabelSpace":
        labels = set()
        for tree in gold_trees:
            for node in iter_internal(tree):
                labels.add((node.relation, node.nuclearity))
        return cls(labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LabelSpaceError(
                f"label {format_label(label)!r} not in the label space "
                f"({len(self.labels)} labels)"
            ) from None

    def label(self, index: int) -> Label:
        return self.labels[index]

    def to_strings(self) -> list[str]:
        return [format_label(lb) for lb in self.labels]

    @classmethod
    def from_strings(cls, texts: Iterable[str]) -> "LabelSpace":
        return cls(parse_label(t) for t in texts)


@dataclass
class LabelDistribution:
    """Log-probabilities over the label space for one split."""

    log_probs: np.ndarray
    space: LabelSpace

    @property
    def best(self) -> int:
        return int(np.argmax(self.log_probs))

    def best_label(self) -> Label:
        return self.space.label(self.best)


class Classifier:
    """Owns the classifier parameters and scores sub-span pairs."""

    def __init__(self, cfg: RunConfig, store: ParameterStore, space: LabelSpace):
        self.space = space
        d = cfg.latent_dim
        r = len(space)
        self.u1 = store.add("cls.u1", (cfg.edu_dim, d))
        self.u1b = store.add("cls.u1b", (d,), init="zeros")
        self.u2 = store.add("cls.u2", (cfg.edu_dim, d))
        self.u2b = store.add("cls.u2b", (d,), init="zeros")
        self.wl = store.add("cls.wl", (d, r))
        self.wr = store.add("cls.wr", (d, r))
        self.wlr = store.add("cls.wlr", (d, d, r))
        self.b = store.add("cls.b", (r,), init="zeros")

    def log_probs(self, e_left: Var, e_right: Var) -> Var:
        """On-tape label log-probabilities for a (left, right) span pair."""
        latent_l = K.elu(K.linear(e_left, self.u1, self.u1b))
        latent_r = K.elu(K.linear(e_right, self.u2, self.u2b))
        logits = K.biaffine(latent_l, latent_r, self.wl, self.wr, self.wlr, self.b)
        return K.log_softmax(logits)

    def classify(self, e_left: Var, e_right: Var) -> LabelDistribution:
        return LabelDistribution(self.log_probs(e_left, e_right).value, self.space)
