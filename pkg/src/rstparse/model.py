"""Full parser model: encoder + decoder + classifier over one parameter store.

Parameter creation order is fixed (embedding, aggregation, document
encoder, fusion, decoder, classifier) so a seed fully determines the
initialization. Checkpoints store the resolved config, its hash, and the
label space alongside the tensors; loading rebuilds the same model.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from rstparse.classifier import Classifier, LabelSpace
from rstparse.config import RunConfig
from rstparse.core import Document
from rstparse.decoder import Decoder, ParseResult, parse_greedy
from rstparse.encoder import (
    EduEncoding,
    Encoder,
    HashEmbeddingProvider,
    PrecomputedEmbeddingProvider,
)
from rstparse.fileio import EmbeddingFile
from rstparse.kernel import ParameterStore, load_checkpoint, save_checkpoint


class ParserModel:
    def __init__(
        self,
        cfg: RunConfig,
        label_space: LabelSpace,
        embeddings: Optional[EmbeddingFile] = None,
        seed: Optional[int] = None,
    ):
        self.cfg = cfg
        self.store = ParameterStore(cfg.seed if seed is None else seed)
        if cfg.embedding_mode == "hash":
            provider = HashEmbeddingProvider(self.store, cfg.hash_buckets, cfg.token_dim)
        else:
            if embeddings is None:
                raise ValueError("precomputed embedding mode needs an EmbeddingFile")
            provider = PrecomputedEmbeddingProvider(embeddings)
        self.provider = provider
        self.encoder = Encoder(cfg, self.store, provider)
        self.decoder = Decoder(cfg, self.store)
        self.classifier = Classifier(cfg, self.store, label_space)

    @property
    def label_space(self) -> LabelSpace:
        return self.classifier.space

    def encode(
        self,
        doc: Document,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> EduEncoding:
        dropout = self.cfg.dropout if training else 0.0
        return self.encoder.run(doc, training=training, rng=rng, dropout=dropout)

    def parse(self, doc: Document) -> ParseResult:
        return parse_greedy(self.encode(doc), self.decoder, self.classifier)

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.hash(),
            "label_space": self.label_space.to_strings(),
        }
        save_checkpoint(path, self.store, meta)

    @classmethod
    def load(cls, path, embeddings: Optional[EmbeddingFile] = None) -> "ParserModel":
        tensors, meta = load_checkpoint(path)
        cfg = RunConfig.from_dict(meta["config"], where=f"{path}: config")
        space = LabelSpace.from_strings(meta["label_space"])
        model = cls(cfg, space, embeddings=embeddings)
        for name, var in model.store.items():
            if name not in tensors:
                raise ValueError(f"{path}: checkpoint missing tensor {name!r}")
            if tensors[name].shape != var.value.shape:
                raise ValueError(
                    f"{path}: tensor {name!r} has shape {tensors[name].shape}, "
                    f"model expects {var.value.shape}"
                )
            var.value = tensors[name]
        return model
