"""Document-level RST discourse parsing toolkit.

Builds labeled binary discourse trees over gold-segmented documents via a
hierarchical encoder, a breadth-first top-down span-splitting decoder, and a
bi-affine nuclearity-relation classifier, with greedy and layer-wise beam
inference and Parseval-style evaluation.
"""

from rstparse.core import (
    Document,
    Internal,
    Leaf,
    RelationMap,
    binarize,
    default_relation_map,
    validate_tree,
)
from rstparse.fileio import (
    read_corpus,
    read_embeddings,
    read_tree,
    write_corpus,
    write_embeddings,
    write_tree,
)

__all__ = [
    "Document",
    "Leaf",
    "Internal",
    "RelationMap",
    "default_relation_map",
    "binarize",
    "validate_tree",
    "read_corpus",
    "write_corpus",
    "read_embeddings",
    "write_embeddings",
    "read_tree",
    "write_tree",
]

__version__ = "0.1.0"
