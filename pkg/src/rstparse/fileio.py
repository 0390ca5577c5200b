"""Readers and writers for the toolkit's on-disk formats.

Three formats live here:

* corpus: newline-delimited JSON, one record per line with fields
  ``doc_id``, ``tokens``, ``edu_breaks``, and optional ``gold_tree``;
* tree: a nested JSON object, ``{"span": [i, j], "nuclearity": ...,
  "relation": ..., "children": [...]}`` with leaves ``{"edu": k}``;
* EMB1: a little-endian binary table of per-token float32 vectors,
  ``b"EMB1"``, u32 dim, then records of {u32 id_len, id bytes,
  u32 n_tokens, n_tokens*dim float32 values}.

Readers reject any input that would construct an invariant-violating
Document or tree. All round-trips are bit-exact.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rstparse.core import (
    Document,
    DiscourseError,
    Internal,
    Leaf,
    Tree,
    span,
    validate_tree,
)


class CorpusFormatError(DiscourseError):
    """A corpus record violates the schema; names the field and line."""


class TreeFormatError(DiscourseError):
    """A serialized tree object violates the schema."""


class EmbeddingFileError(DiscourseError):
    """An EMB1 file is corrupt, truncated, or contains non-finite values."""


@dataclass(frozen=True)
class CorpusRecord:
    """One document plus its optional gold tree."""

    document: Document
    gold_tree: Optional[Tree] = None

    @property
    def doc_id(self) -> str:
        return self.document.doc_id


# ---------------------------------------------------------------------------
# tree objects


def tree_to_obj(tree: Tree) -> dict:
    """Nested-object form of a tree; inverse of tree_from_obj."""
    if isinstance(tree, Leaf):
        return {"edu": tree.edu}
    i, j = span(tree)
    return {
        "span": [i, j],
        "nuclearity": tree.nuclearity,
        "relation": tree.relation,
        "children": [tree_to_obj(tree.left), tree_to_obj(tree.right)],
    }


def tree_from_obj(obj, where: str = "tree") -> Tree:
    if not isinstance(obj, dict):
        raise TreeFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    if "edu" in obj:
        edu = obj["edu"]
        if not isinstance(edu, int) or edu < 1:
            raise TreeFormatError(f"{where}: leaf 'edu' must be a positive integer")
        return Leaf(edu)
    for key in ("span", "nuclearity", "relation", "children"):
        if key not in obj:
            raise TreeFormatError(f"{where}: missing field {key!r}")
    children = obj["children"]
    if not isinstance(children, list) or len(children) != 2:
        raise TreeFormatError(f"{where}: 'children' must be a 2-element list")
    node = Internal(
        nuclearity=obj["nuclearity"],
        relation=obj["relation"],
        left=tree_from_obj(children[0], where),
        right=tree_from_obj(children[1], where),
    )
    i, j = span(node)
    if list(obj["span"]) != [i, j]:
        raise TreeFormatError(
            f"{where}: stored span {obj['span']} does not match children span [{i},{j}]"
        )
    return node


def write_tree(tree: Tree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree_to_obj(tree), fh)
        fh.write("\n")


def read_tree(path) -> Tree:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return tree_from_obj(obj, where=str(path))


# ---------------------------------------------------------------------------
# corpus records (newline-delimited JSON)


def _record_to_obj(record: CorpusRecord) -> dict:
    doc = record.document
    obj = {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "edu_breaks": list(doc.edu_breaks),
    }
    if record.gold_tree is not None:
        obj["gold_tree"] = tree_to_obj(record.gold_tree)
    return obj


def _record_from_obj(obj: dict, where: str) -> CorpusRecord:
    for field, kind in (("doc_id", str), ("tokens", list), ("edu_breaks", list)):
        if field not in obj:
            raise CorpusFormatError(f"{where}: missing field {field!r}")
        if not isinstance(obj[field], kind):
            raise CorpusFormatError(
                f"{where}: field {field!r} must be {kind.__name__}"
            )
    if not all(isinstance(t, str) for t in obj["tokens"]):
        raise CorpusFormatError(f"{where}: field 'tokens' must contain strings")
    if not all(isinstance(b, int) for b in obj["edu_breaks"]):
        raise CorpusFormatError(f"{where}: field 'edu_breaks' must contain integers")
    try:
        doc = Document(obj["doc_id"], tuple(obj["tokens"]), tuple(obj["edu_breaks"]))
    except ValueError as exc:
        raise CorpusFormatError(f"{where}: field 'edu_breaks': {exc}") from exc
    gold = None
    if obj.get("gold_tree") is not None:
        gold = tree_from_obj(obj["gold_tree"], where=f"{where}: field 'gold_tree'")
        violation = validate_tree(gold, doc.n_edus)
        if violation is not None:
            raise CorpusFormatError(f"{where}: field 'gold_tree': {violation}")
    unknown = set(obj) - {"doc_id", "tokens", "edu_breaks", "gold_tree"}
    if unknown:
        raise CorpusFormatError(f"{where}: unknown field {sorted(unknown)[0]!r}")
    return CorpusRecord(doc, gold)


def write_corpus(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(_record_to_obj(record), ensure_ascii=False))
            fh.write("\n")


def read_corpus(path) -> list[CorpusRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{where}: expected an object per line")
            records.append(_record_from_obj(obj, where))
    return records


# ---------------------------------------------------------------------------
# parse output (one tree per document, newline-delimited)


def write_parses(parses, path) -> None:
    """Write ``(doc_id, tree, score)`` triples as newline-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, tree, score in parses:
            obj = {"doc_id": doc_id, "score": score, "tree": tree_to_obj(tree)}
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


def read_parses(path) -> list[tuple[str, Tree, float]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TreeFormatError(f"{where}: invalid JSON: {exc}") from exc
            for field in ("doc_id", "tree"):
                if field not in obj:
                    raise TreeFormatError(f"{where}: missing field {field!r}")
            tree = tree_from_obj(obj["tree"], where=where)
            out.append((obj["doc_id"], tree, float(obj.get("score", 0.0))))
    return out


# ---------------------------------------------------------------------------
# EMB1 precomputed-embedding files

_MAGIC = b"EMB1"


class EmbeddingFile:
    """An immutable table of per-token vectors keyed by document id."""

    def __init__(self, dim: int, blocks: dict[str, np.ndarray]):
        self.dim = dim
        self._blocks = blocks

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(self._blocks)

    def vectors(self, doc_id: str) -> np.ndarray:
        """The (n_tokens, dim) float32 block for one document."""
        try:
            return self._blocks[doc_id]
        except KeyError:
            raise EmbeddingFileError(f"document {doc_id!r} not in embedding file") from None


def write_embeddings(path, dim: int, docs) -> None:
    """Write ``(doc_id, values)`` pairs; values is an (n_tokens, dim) array."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", dim))
        for doc_id, values in docs:
            values = np.ascontiguousarray(values, dtype="<f4")
            if values.ndim != 2 or values.shape[1] != dim:
                raise EmbeddingFileError(
                    f"{doc_id}: values must be (n_tokens, {dim}), got {values.shape}"
                )
            ident = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<I", values.shape[0]))
            fh.write(values.tobytes())


def read_embeddings(path) -> EmbeddingFile:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic {data[:4]!r}, expected {_MAGIC!r}")
    if len(data) < 8:
        raise EmbeddingFileError(f"{path}: truncated header")
    (dim,) = struct.unpack_from("<I", data, 4)
    if dim == 0:
        raise EmbeddingFileError(f"{path}: vector width must be positive")
    pos = 8
    blocks: dict[str, np.ndarray] = {}
    while pos < len(data):
        if pos + 4 > len(data):
            raise EmbeddingFileError(f"{path}: truncated record at byte {pos}")
        (id_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + id_len + 4 > len(data):
            raise EmbeddingFileError(f"{path}: truncated record at byte {pos}")
        doc_id = data[pos : pos + id_len].decode("utf-8")
        pos += id_len
        (n_tokens,) = struct.unpack_from("<I", data, pos)
        pos += 4
        nbytes = n_tokens * dim * 4
        if pos + nbytes > len(data):
            raise EmbeddingFileError(
                f"{path}: truncated values for document {doc_id!r}"
            )
        block = np.frombuffer(data, dtype="<f4", count=n_tokens * dim, offset=pos)
        pos += nbytes
        block = block.reshape(n_tokens, dim)
        if not np.all(np.isfinite(block)):
            raise EmbeddingFileError(
                f"{path}: non-finite value in document {doc_id!r}"
            )
        blocks[doc_id] = block
    return EmbeddingFile(dim, blocks)
