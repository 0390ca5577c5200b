"""Shared builders for tests: random trees, documents, and tiny models."""

from __future__ import annotations

import numpy as np
import pytest

from rstparse.classifier import LabelSpace
from rstparse.config import RunConfig
from rstparse.core import Document, Internal, Leaf
from rstparse.model import ParserModel

TEST_LABELS = (
    ("Attribution", "SN"),
    ("Cause", "SN"),
    ("Contrast", "NN"),
    ("Elaboration", "NS"),
    ("Joint", "NN"),
)


def make_tree(i: int, j: int, rng: np.random.Generator):
    """Random labeled binary tree over EDUs i..j."""
    if i == j:
        return Leaf(i)
    k = int(rng.integers(i, j))
    relation, nuclearity = TEST_LABELS[int(rng.integers(len(TEST_LABELS)))]
    return Internal(nuclearity, relation, make_tree(i, k, rng), make_tree(k + 1, j, rng))


def make_doc(doc_id: str, m: int, rng: np.random.Generator, tokens_per_edu=(1, 4)):
    tokens: list[str] = []
    breaks: list[int] = []
    for _ in range(m):
        for _ in range(int(rng.integers(*tokens_per_edu))):
            tokens.append(f"w{int(rng.integers(40))}")
        breaks.append(len(tokens) - 1)
    return Document(doc_id, tuple(tokens), tuple(breaks))


def figure_tree():
    """The running 5-EDU example: internal spans {1:5, 1:3, 1:2, 4:5}."""
    return Internal(
        "NN",
        "Joint",
        Internal(
            "NS",
            "Attribution",
            Internal("NN", "Joint", Leaf(1), Leaf(2)),
            Leaf(3),
        ),
        Internal("NS", "Attribution", Leaf(4), Leaf(5)),
    )


def tiny_config(**overrides) -> RunConfig:
    base = dict(
        token_dim=6,
        hidden_dim=4,
        latent_dim=5,
        hash_buckets=64,
        dropout=0.0,
        weight_decay=0.0,
        seed=0,
    )
    base.update(overrides)
    return RunConfig(**base)


def tiny_model(seed: int = 0, labels=TEST_LABELS, **config_overrides) -> ParserModel:
    cfg = tiny_config(seed=seed, **config_overrides)
    return ParserModel(cfg, LabelSpace(labels))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
