"""Micro-averaged F1 under two labeled-constituent conventions.

Original Parseval counts internal nodes only, each as its span with the
node's own nuclearity pattern (NS/SN/NN) and relation. The all-node
convention additionally counts leaves, labels every non-root node with its
role relative to its parent (N or S), and assigns relations to-parent: the
satellite of a mononuclear attachment carries the relation, the nucleus
carries "span", and both children of a multinuclear node carry the shared
relation. Under the all-node convention the Span cell includes the root
and the leaves; Nuclearity / Relation / Full exclude the root, which has
no parent to relate to.

Cells nest (Full matches are NS matches are Span matches), so
Full <= min(NS, R) <= max(NS, R) <= S on any corpus. With binary trees on
both sides the predicted and gold counts coincide, making precision,
recall, and F1 equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from rstparse.core import DiscourseError, Internal, Leaf, Tree, span, split_point

CELLS = ("S", "NS", "R", "Full")


class AlignmentError(DiscourseError):
    """Predicted and gold trees do not align (doc ids or EDU counts)."""


@dataclass
class ConventionScores:
    """Matched/predicted/gold counts and micro-F1 per cell."""

    matched: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CELLS})
    predicted: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CELLS})
    gold: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CELLS})

    def merge(self, other: "ConventionScores") -> "ConventionScores":
        merged = ConventionScores()
        for cell in CELLS:
            merged.matched[cell] = self.matched[cell] + other.matched[cell]
            merged.predicted[cell] = self.predicted[cell] + other.predicted[cell]
            merged.gold[cell] = self.gold[cell] + other.gold[cell]
        return merged

    @property
    def f1(self) -> dict[str, float]:
        out = {}
        for cell in CELLS:
            m, p, g = self.matched[cell], self.predicted[cell], self.gold[cell]
            if p == 0 and g == 0:
                out[cell] = 1.0
            elif m == 0:
                out[cell] = 0.0
            else:
                precision = m / p
                recall = m / g
                out[cell] = 2 * precision * recall / (precision + recall)
        return out


def _original_constituents(tree: Tree) -> list[tuple]:
    """(span, nuclearity, relation) for every internal node."""
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            i, j = span(node)
            out.append(((i, j), node.nuclearity, node.relation))
            stack.append(node.left)
            stack.append(node.right)
    return out


def _allnode_constituents(tree: Tree) -> list[tuple]:
    """(span, role, rel2par, is_root) for every node, role relative to parent."""
    out = []

    def visit(node: Tree, role: Optional[str], rel2par: Optional[str]):
        i, j = span(node) if isinstance(node, Internal) else (node.edu, node.edu)
        out.append(((i, j), role, rel2par, role is None))
        if isinstance(node, Leaf):
            return
        if node.nuclearity == "NS":
            visit(node.left, "N", "span")
            visit(node.right, "S", node.relation)
        elif node.nuclearity == "SN":
            visit(node.left, "S", node.relation)
            visit(node.right, "N", "span")
        else:
            visit(node.left, "N", node.relation)
            visit(node.right, "N", node.relation)

    visit(tree, None, None)
    return out


def _check_pair(pred: Tree, gold: Tree, doc_id: str = "?") -> None:
    pm = span(pred)[1] if isinstance(pred, Internal) else pred.edu
    gm = span(gold)[1] if isinstance(gold, Internal) else gold.edu
    if pm != gm:
        raise AlignmentError(
            f"document {doc_id!r}: predicted tree covers {pm} EDUs, gold {gm}"
        )


def score_original(pairs: Iterable[tuple[Tree, Tree]]) -> ConventionScores:
    """Micro F1 over internal-node constituents (labeled attachments)."""
    scores = ConventionScores()
    for pred, gold in pairs:
        _check_pair(pred, gold)
        pred_nodes = _original_constituents(pred)
        gold_nodes = _original_constituents(gold)
        cells = {
            "S": lambda sp, nuc, rel: (sp,),
            "NS": lambda sp, nuc, rel: (sp, nuc),
            "R": lambda sp, nuc, rel: (sp, rel),
            "Full": lambda sp, nuc, rel: (sp, nuc, rel),
        }
        for cell, key in cells.items():
            pset = {key(*n) for n in pred_nodes}
            gset = {key(*n) for n in gold_nodes}
            scores.matched[cell] += len(pset & gset)
            scores.predicted[cell] += len(pset)
            scores.gold[cell] += len(gset)
    return scores


def score_rst_parseval(pairs: Iterable[tuple[Tree, Tree]]) -> ConventionScores:
    """Micro F1 over all-node constituents with to-parent labels."""
    scores = ConventionScores()
    for pred, gold in pairs:
        _check_pair(pred, gold)
        pred_nodes = _allnode_constituents(pred)
        gold_nodes = _allnode_constituents(gold)
        for cell in CELLS:
            if cell == "S":
                pset = {sp for sp, role, rel, root in pred_nodes}
                gset = {sp for sp, role, rel, root in gold_nodes}
            elif cell == "NS":
                pset = {(sp, role) for sp, role, rel, root in pred_nodes if not root}
                gset = {(sp, role) for sp, role, rel, root in gold_nodes if not root}
            elif cell == "R":
                pset = {(sp, rel) for sp, role, rel, root in pred_nodes if not root}
                gset = {(sp, rel) for sp, role, rel, root in gold_nodes if not root}
            else:
                pset = {
                    (sp, role, rel) for sp, role, rel, root in pred_nodes if not root
                }
                gset = {
                    (sp, role, rel) for sp, role, rel, root in gold_nodes if not root
                }
            scores.matched[cell] += len(pset & gset)
            scores.predicted[cell] += len(pset)
            scores.gold[cell] += len(gset)
    return scores


def top_split_accuracy(pairs: Iterable[tuple[Tree, Tree]]) -> float:
    """Fraction of multi-EDU documents whose root split matches gold."""
    total = 0
    correct = 0
    for pred, gold in pairs:
        if isinstance(gold, Leaf) or isinstance(pred, Leaf):
            continue
        _check_pair(pred, gold)
        total += 1
        if split_point(pred) == split_point(gold):
            correct += 1
    return correct / total if total else 0.0


@dataclass
class ScoreReport:
    """Both conventions plus top-layer split accuracy."""

    original: ConventionScores
    rst_parseval: ConventionScores
    top_split: float
    config_hash: Optional[str] = None

    def to_dict(self) -> dict:
        obj = {
            "original_parseval": {
                "f1": self.original.f1,
                "matched": self.original.matched,
                "predicted": self.original.predicted,
                "gold": self.original.gold,
            },
            "rst_parseval": {
                "f1": self.rst_parseval.f1,
                "matched": self.rst_parseval.matched,
                "predicted": self.rst_parseval.predicted,
                "gold": self.rst_parseval.gold,
            },
            "top_split_accuracy": self.top_split,
        }
        if self.config_hash is not None:
            obj["config_hash"] = self.config_hash
        return obj

    def to_table(self) -> str:
        """Aligned text table, scores as percentages to one decimal."""
        lines = []
        header = f"{'Convention':<20}" + "".join(f"{c:>8}" for c in CELLS)
        lines.append(header)
        lines.append("-" * len(header))
        for name, conv in (
            ("RST Parseval", self.rst_parseval),
            ("Original Parseval", self.original),
        ):
            f1 = conv.f1
            lines.append(
                f"{name:<20}" + "".join(f"{100 * f1[c]:>8.1f}" for c in CELLS)
            )
        lines.append(f"{'Top-split accuracy':<20}{self.top_split:>8.3f}")
        return "\n".join(lines)


def evaluate_pairs(
    pairs: list[tuple[Tree, Tree]], config_hash: Optional[str] = None
) -> ScoreReport:
    return ScoreReport(
        original=score_original(pairs),
        rst_parseval=score_rst_parseval(pairs),
        top_split=top_split_accuracy(pairs),
        config_hash=config_hash,
    )


def align_by_doc_id(
    predicted: list[tuple[str, Tree]], gold: list[tuple[str, Tree]]
) -> list[tuple[Tree, Tree]]:
    """Pair predicted and gold trees by document id; order follows gold."""
    pred_map: dict[str, Tree] = {}
    for doc_id, tree in predicted:
        if doc_id in pred_map:
            raise AlignmentError(f"duplicate predicted tree for document {doc_id!r}")
        pred_map[doc_id] = tree
    pairs = []
    for doc_id, gold_tree in gold:
        if doc_id not in pred_map:
            raise AlignmentError(f"no predicted tree for document {doc_id!r}")
        _check_pair(pred_map[doc_id], gold_tree, doc_id)
        pairs.append((pred_map[doc_id], gold_tree))
    return pairs
