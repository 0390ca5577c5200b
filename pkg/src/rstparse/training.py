"""Joint teacher-forced training of split and label objectives.

The structure loss replays the decoder breadth-first along the gold tree,
forcing every gold split, and sums the negative log-probability of each
forced decision. The label loss sums negative log-probabilities of the
gold nuclearity-relation labels over gold sub-span pairs. The optimizer
minimizes their sum plus a quadratic penalty on all parameters; the batch
gradient is the mean over the batch's documents.
"""

from __future__ import annotations

import collections
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rstparse import kernel as K
from rstparse.classifier import LabelSpace
from rstparse.config import RunConfig
from rstparse.core import Document, Tree, bfs_internal, span, split_point
from rstparse.decoder import span_vector
from rstparse.encoder import EduEncoding
from rstparse.fileio import CorpusRecord, EmbeddingFile
from rstparse.kernel import AdamState, NonFiniteError, Var, adam_step, backward
from rstparse.metrics import score_original
from rstparse.model import ParserModel


@dataclass
class LossBreakdown:
    """Structure, label, and penalty components of the objective."""

    l_s: float
    l_l: float
    l_reg: float

    @property
    def total(self) -> float:
        return self.l_s + self.l_l + self.l_reg


def structure_loss(
    enc: EduEncoding,
    gold: Tree,
    model: ParserModel,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Var:
    """Sum of forced-split negative log-probs, breadth-first over the gold tree."""
    loss = K.const(0.0)
    h = model.decoder.init_hidden(enc.doc_summary)
    dropout = model.cfg.dropout if training else 0.0
    queue = collections.deque([gold])
    while queue:
        node = queue.popleft()
        if not hasattr(node, "left"):
            continue
        i, j = span(node)
        k = split_point(node)
        h, log_probs = model.decoder.advance(
            h, enc, i, j, training=training, rng=rng, dropout=dropout
        )
        loss = K.sub(loss, K.pick(log_probs, k - i))
        queue.append(node.left)
        queue.append(node.right)
    return loss


def label_loss(enc: EduEncoding, gold: Tree, model: ParserModel) -> Var:
    """Sum of gold-label negative log-probs over gold sub-span pairs."""
    loss = K.const(0.0)
    for node in bfs_internal(gold):
        i, j = span(node)
        k = split_point(node)
        idx = model.label_space.index((node.relation, node.nuclearity))
        log_probs = model.classifier.log_probs(
            span_vector(enc.e, i, k), span_vector(enc.e, k + 1, j)
        )
        loss = K.sub(loss, K.pick(log_probs, idx))
    return loss


def document_loss(
    model: ParserModel,
    doc: Document,
    gold: Tree,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Var, float, float]:
    """On-tape L_s + L_l for one document, plus the two values."""
    enc = model.encode(doc, training=training, rng=rng)
    l_s = structure_loss(enc, gold, model, training=training, rng=rng)
    l_l = label_loss(enc, gold, model)
    return K.add(l_s, l_l), float(l_s.value), float(l_l.value)


@dataclass
class EpochRecord:
    epoch: int
    l_s: float
    l_l: float
    l_reg: float
    total: float
    val_full_f1: Optional[float] = None

    def to_json(self) -> str:
        obj = {
            "epoch": self.epoch,
            "l_s": self.l_s,
            "l_l": self.l_l,
            "l_reg": self.l_reg,
            "total": self.total,
        }
        if self.val_full_f1 is not None:
            obj["val_full_f1"] = self.val_full_f1
        return json.dumps(obj)


@dataclass
class TrainResult:
    model: ParserModel
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None


def _validation_full_f1(model: ParserModel, corpus: list[CorpusRecord]) -> float:
    pairs = []
    for record in corpus:
        if record.gold_tree is None:
            continue
        result = model.parse(record.document)
        pairs.append((result.tree, record.gold_tree))
    if not pairs:
        return 0.0
    return score_original(pairs).f1["Full"]


def train(
    corpus: list[CorpusRecord],
    cfg: RunConfig,
    val_corpus: Optional[list[CorpusRecord]] = None,
    embeddings: Optional[EmbeddingFile] = None,
    log_stream=None,
) -> TrainResult:
    """Mini-batch Adam training; deterministic under the config seed.

    Epoch records carry corpus-summed L_s and L_l at the parameter values
    used for each forward pass, the end-of-epoch penalty term, and the
    validation Full F1 when a validation corpus is given. The returned
    model carries the best-validation parameters (the final ones when no
    validation corpus is supplied).
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    for record in corpus:
        if record.gold_tree is None:
            raise ValueError(f"document {record.doc_id!r} has no gold tree")

    if cfg.label_mode == "full":
        space = LabelSpace.full()
    else:
        space = LabelSpace.observed(r.gold_tree for r in corpus)
    model = ParserModel(cfg, space, embeddings=embeddings)
    optimizer = AdamState(
        model.store,
        learning_rate=cfg.learning_rate,
        weight_decay=cfg.weight_decay,
    )
    rng = np.random.default_rng(cfg.seed)

    result = TrainResult(model=model)
    best_f1 = -1.0
    best_params: Optional[dict[str, np.ndarray]] = None

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(corpus))
        epoch_ls = 0.0
        epoch_ll = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [corpus[idx] for idx in order[start : start + cfg.batch_size]]
            model.store.zero_grad()
            batch_loss = K.const(0.0)
            for record in batch:
                doc_loss, ls, ll = document_loss(
                    model, record.document, record.gold_tree, training=True, rng=rng
                )
                if not np.isfinite(doc_loss.value):
                    raise NonFiniteError(
                        f"non-finite loss at epoch {epoch}, document {record.doc_id!r}"
                    )
                batch_loss = K.add(batch_loss, doc_loss)
                epoch_ls += ls
                epoch_ll += ll
            backward(K.scale(batch_loss, 1.0 / len(batch)))
            adam_step(model.store, optimizer)

        l_reg = cfg.weight_decay * model.store.squared_norm()
        entry = EpochRecord(
            epoch=epoch,
            l_s=epoch_ls,
            l_l=epoch_ll,
            l_reg=l_reg,
            total=epoch_ls + epoch_ll + l_reg,
        )
        if val_corpus:
            entry.val_full_f1 = _validation_full_f1(model, val_corpus)
            if entry.val_full_f1 > best_f1:
                best_f1 = entry.val_full_f1
                best_params = {n: v.value.copy() for n, v in model.store.items()}
                result.best_epoch = epoch
        result.log.append(entry)
        if log_stream is not None:
            log_stream.write(entry.to_json() + "\n")

    if best_params is not None:
        for name, var in model.store.items():
            var.value = best_params[name]
    else:
        result.best_epoch = cfg.epochs
    return result
