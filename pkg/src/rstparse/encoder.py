"""Hierarchical encoder: token embeddings to fused per-EDU representations.

The stages are (1) a token embedding provider, (2) EDU-level aggregation of
token vectors, (3) a document-level bidirectional GRU over the EDU
sequence, and (4) fusion of EDU-boundary token vectors into the
context-aware representations through one shared linear layer. Boundary
fusion happens after document-level encoding by default; the before-encoder
variant is exposed for ablation.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from rstparse import kernel as K
from rstparse.config import RunConfig
from rstparse.core import Document
from rstparse.fileio import EmbeddingFile, EmbeddingFileError
from rstparse.kernel import ParameterStore, Var


def token_bucket(token: str, n_buckets: int) -> int:
    """Stable vocabulary hash; independent of the process hash seed."""
    return zlib.crc32(token.encode("utf-8")) % n_buckets


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, doc: Document) -> Var: ...


class HashEmbeddingProvider:
    """Trainable lookup table over a hash-bucketed vocabulary."""

    def __init__(self, store: ParameterStore, n_buckets: int, dim: int):
        self.dim = dim
        self.n_buckets = n_buckets
        self.table = store.add("embed.table", (n_buckets, dim))

    def embed(self, doc: Document) -> Var:
        ids = [token_bucket(t, self.n_buckets) for t in doc.tokens]
        return K.gather_rows(self.table, ids)


class PrecomputedEmbeddingProvider:
    """Frozen per-token vectors loaded from an embedding file."""

    def __init__(self, table: EmbeddingFile):
        self.dim = table.dim
        self._table = table

    def embed(self, doc: Document) -> Var:
        block = self._table.vectors(doc.doc_id)
        if block.shape[0] != doc.n_tokens:
            raise EmbeddingFileError(
                f"document {doc.doc_id!r}: embedding file has {block.shape[0]} "
                f"token vectors, corpus has {doc.n_tokens} tokens"
            )
        return K.const(block.astype(np.float64))


@dataclass
class EduEncoding:
    """Per-EDU vector stack plus the document summary."""

    c: Var  # (m, dim_c) EDU aggregates
    v: Var  # (m, 2*hidden) context-aware representations
    g: Optional[Var]  # (m, dim_g) boundary vectors, None when ablated away
    e: Var  # (m, edu_dim) fused representations
    doc_summary: Var  # (2*hidden,)

    @property
    def m(self) -> int:
        return self.e.value.shape[0]


class Encoder:
    """Owns the encoder parameters and runs documents through the stack."""

    def __init__(self, cfg: RunConfig, store: ParameterStore, provider: EmbeddingProvider):
        self.cfg = cfg
        self.provider = provider
        dim_c = provider.dim
        self.dim_c = dim_c
        self.dim_g = {"both": 2 * dim_c, "left": dim_c, "right": dim_c, "none": 0}[
            cfg.boundary
        ]

        if cfg.aggregation == "self-attentive":
            self.agg_query = store.add("agg.query", (dim_c,), init="zeros")
        elif cfg.aggregation == "gru-attentive":
            self.agg_gru = store.add_gru("agg.gru", dim_c, cfg.attn_hidden)
            self.agg_score = store.add("agg.score", (cfg.attn_hidden,), init="zeros")

        if cfg.boundary_stage == "before" and self.dim_g > 0:
            self.pre_fuse_w = store.add("fuse_pre.w", (dim_c + self.dim_g, dim_c))
            self.pre_fuse_b = store.add("fuse_pre.b", (dim_c,), init="zeros")

        self.layers = []
        in_dim = dim_c
        for layer in range(cfg.encoder_layers):
            fw = store.add_gru(f"enc{layer}.fw", in_dim, cfg.hidden_dim)
            bw = store.add_gru(f"enc{layer}.bw", in_dim, cfg.hidden_dim)
            self.layers.append((fw, bw))
            in_dim = 2 * cfg.hidden_dim

        fuse_in = 2 * cfg.hidden_dim
        if cfg.boundary_stage == "after":
            fuse_in += self.dim_g
        self.fuse_w = store.add("fuse.w", (fuse_in, cfg.edu_dim))
        self.fuse_b = store.add("fuse.b", (cfg.edu_dim,), init="zeros")

    # -- stages ----------------------------------------------------------

    def aggregate(self, tokens: Var, doc: Document) -> list[Var]:
        """One vector per EDU from that EDU's token rows; weights sum to 1."""
        out = []
        for edu in range(1, doc.n_edus + 1):
            first, last = doc.edu_token_span(edu)
            if self.cfg.aggregation == "average":
                out.append(K.mean_rows(tokens, first, last + 1))
                continue
            block = K.rows(tokens, first, last + 1)
            if self.cfg.aggregation == "self-attentive":
                scores = K.matmul(block, self.agg_query)
            else:  # gru-attentive
                steps = [K.row(block, t) for t in range(last + 1 - first)]
                states = K.gru_sequence(steps, self.agg_gru)
                scores = K.matmul(K.stack_rows(states), self.agg_score)
            weights = K.exp(K.log_softmax(scores))
            out.append(K.matmul(weights, block))
        return out

    def boundary_vectors(self, tokens: Var, doc: Document) -> Optional[list[Var]]:
        if self.cfg.boundary == "none":
            return None
        out = []
        for edu in range(1, doc.n_edus + 1):
            first, last = doc.edu_token_span(edu)
            if self.cfg.boundary == "both":
                out.append(K.concat([K.row(tokens, first), K.row(tokens, last)]))
            elif self.cfg.boundary == "left":
                out.append(K.row(tokens, first))
            else:
                out.append(K.row(tokens, last))
        return out

    def encode_document(self, c_list: list[Var]) -> tuple[list[Var], Var]:
        xs = c_list
        summary = None
        for fw, bw in self.layers:
            xs, summary = K.bi_gru(xs, fw, bw)
        return xs, summary

    def fuse(self, v_i: Var, g_i: Optional[Var]) -> Var:
        parts = [v_i] if g_i is None else [v_i, g_i]
        return K.linear(K.concat(parts) if len(parts) > 1 else v_i,
                        self.fuse_w, self.fuse_b)

    # -- full pass -------------------------------------------------------

    def run(
        self,
        doc: Document,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        dropout: float = 0.0,
    ) -> EduEncoding:
        tokens = self.provider.embed(doc)
        c_list = self.aggregate(tokens, doc)
        g_list = self.boundary_vectors(tokens, doc)

        if self.cfg.boundary_stage == "before" and g_list is not None:
            enc_in = [
                K.linear(K.concat([c, g]), self.pre_fuse_w, self.pre_fuse_b)
                for c, g in zip(c_list, g_list)
            ]
            v_list, summary = self.encode_document(enc_in)
            e_list = [self.fuse(v, None) for v in v_list]
        else:
            v_list, summary = self.encode_document(c_list)
            if g_list is None:
                e_list = [self.fuse(v, None) for v in v_list]
            else:
                e_list = [self.fuse(v, g) for v, g in zip(v_list, g_list)]

        e = K.stack_rows(e_list)
        if training and dropout > 0.0:
            e = K.dropout(e, dropout, training=True, rng=rng)
        return EduEncoding(
            c=K.stack_rows(c_list),
            v=K.stack_rows(v_list),
            g=K.stack_rows(g_list) if g_list is not None else None,
            e=e,
            doc_summary=summary,
        )
