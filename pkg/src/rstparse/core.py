"""Core domain types: documents, discourse trees, and relation mapping.

EDU indices are 1-based everywhere (a document with m EDUs has leaves 1..m);
token indices are 0-based. All types are immutable after construction and
safe to share across concurrent parsing jobs.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass
from importlib import resources
from typing import Iterator, Optional, Union


class DiscourseError(Exception):
    """Base class for domain errors raised by this package."""


class TreeStructureError(DiscourseError):
    """A raw or binary tree violates a structural invariant."""


class UnmappedLabelError(DiscourseError):
    """A fine-grained relation label has no entry in the mapping table."""

    def __init__(self, label: str):
        super().__init__(f"unmapped relation label: {label!r}")
        self.label = label


NUCLEARITIES = ("NS", "SN", "NN")

# The 18 coarse relation classes of the standard RST-DT evaluation setup.
RELATION_CLASSES_18 = (
    "Attribution",
    "Background",
    "Cause",
    "Comparison",
    "Condition",
    "Contrast",
    "Elaboration",
    "Enablement",
    "Evaluation",
    "Explanation",
    "Joint",
    "Manner-Means",
    "Same-Unit",
    "Summary",
    "Temporal",
    "Textual-Organization",
    "Topic-Change",
    "Topic-Comment",
)


@dataclass(frozen=True)
class Document:
    """A tokenized document with gold EDU segmentation.

    ``edu_breaks[i]`` is the 0-based index of the last token of EDU ``i+1``;
    the sequence is strictly increasing and its final entry is ``n - 1``.
    """

    doc_id: str
    tokens: tuple[str, ...]
    edu_breaks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "edu_breaks", tuple(int(b) for b in self.edu_breaks))
        if not self.tokens:
            raise ValueError(f"{self.doc_id}: document has no tokens")
        if not self.edu_breaks:
            raise ValueError(f"{self.doc_id}: document has no EDU breaks")
        prev = -1
        for b in self.edu_breaks:
            if b <= prev:
                raise ValueError(
                    f"{self.doc_id}: edu_breaks must be strictly increasing, "
                    f"got {b} after {prev}"
                )
            prev = b
        if self.edu_breaks[-1] != len(self.tokens) - 1:
            raise ValueError(
                f"{self.doc_id}: last EDU break {self.edu_breaks[-1]} does not "
                f"end the document of {len(self.tokens)} tokens"
            )

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    @property
    def n_edus(self) -> int:
        return len(self.edu_breaks)

    def edu_token_span(self, edu: int) -> tuple[int, int]:
        """Inclusive 0-based token range ``(first, last)`` of a 1-based EDU."""
        if not 1 <= edu <= self.n_edus:
            raise IndexError(f"EDU index {edu} out of range 1..{self.n_edus}")
        first = 0 if edu == 1 else self.edu_breaks[edu - 2] + 1
        return first, self.edu_breaks[edu - 1]

    def edu_tokens(self, edu: int) -> tuple[str, ...]:
        first, last = self.edu_token_span(edu)
        return self.tokens[first : last + 1]

    def edu_text(self, edu: int) -> str:
        return " ".join(self.edu_tokens(edu))


@dataclass(frozen=True)
class Leaf:
    """A discourse-tree leaf: one EDU, 1-based."""

    edu: int


@dataclass(frozen=True)
class Internal:
    """A binary discourse-tree node joining two adjacent sub-spans.

    ``nuclearity`` is one of NS / SN / NN; ``relation`` is a coarse relation
    class. Mononuclear nodes store the satellite-side relation; NN nodes
    carry the shared multinuclear relation.
    """

    nuclearity: str
    relation: str
    left: "Tree"
    right: "Tree"


Tree = Union[Leaf, Internal]


def span(tree: Tree) -> tuple[int, int]:
    """Inclusive 1-based EDU span covered by a (sub)tree."""
    node = tree
    lo = node
    while isinstance(lo, Internal):
        lo = lo.left
    hi = node
    while isinstance(hi, Internal):
        hi = hi.right
    return lo.edu, hi.edu


def split_point(node: Internal) -> int:
    """The EDU index k after which the node splits: left covers [i,k]."""
    return span(node.left)[1]


def iter_leaves(tree: Tree) -> Iterator[Leaf]:
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            yield node
        else:
            stack.append(node.right)
            stack.append(node.left)


def iter_internal(tree: Tree) -> Iterator[Internal]:
    """Pre-order traversal of internal nodes."""
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            yield node
            stack.append(node.right)
            stack.append(node.left)


def bfs_internal(tree: Tree) -> list[Internal]:
    """Internal nodes in breadth-first order, left sibling first."""
    out = []
    queue = collections.deque([tree])
    while queue:
        node = queue.popleft()
        if isinstance(node, Internal):
            out.append(node)
            queue.append(node.left)
            queue.append(node.right)
    return out


def n_internal(tree: Tree) -> int:
    return sum(1 for _ in iter_internal(tree))


def validate_tree(tree: Tree, m: int) -> Optional[str]:
    """Check all binary-tree invariants for a document of m EDUs.

    Returns None when the tree is valid, otherwise a description of the
    first violated invariant including the offending span.
    """
    if m < 1:
        return f"EDU count must be positive, got {m}"

    def walk(node: Tree) -> tuple[int, int] | str:
        if isinstance(node, Leaf):
            if not 1 <= node.edu <= m:
                return f"leaf EDU index {node.edu} out of range 1..{m}"
            return node.edu, node.edu
        if node.nuclearity not in NUCLEARITIES:
            got = node.nuclearity
            return f"unknown nuclearity {got!r} at span {span(node)}"
        left = walk(node.left)
        if isinstance(left, str):
            return left
        right = walk(node.right)
        if isinstance(right, str):
            return right
        i, k = left
        a, j = right
        if k >= j:
            return f"split must satisfy k < j: span [{i},{j}] with split k={k}"
        if a != k + 1:
            return (
                f"children of span [{i},{j}] are not contiguous: "
                f"left ends at {k}, right starts at {a}"
            )
        return i, j

    result = walk(tree)
    if isinstance(result, str):
        return result
    i, j = result
    if (i, j) != (1, m):
        return f"root covers [{i},{j}], expected [1,{m}]"
    count = n_internal(tree)
    if count != m - 1:
        return f"tree over {m} EDUs has {count} internal nodes, expected {m - 1}"
    return None


@dataclass(frozen=True)
class RawNode:
    """A node of a possibly non-binary constituency as read from a treebank.

    ``role`` is the node's role relative to its parent ("Nucleus",
    "Satellite", or "Root"); ``relation`` is its rel2par label ("span" for
    nuclei of mononuclear attachments, None for the root). Leaves carry a
    1-based ``edu`` index and optionally the raw EDU text.
    """

    role: str
    relation: Optional[str] = None
    children: tuple["RawNode", ...] = ()
    edu: Optional[int] = None
    text: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return self.edu is not None


def raw_from_tree(tree: Tree) -> RawNode:
    """Express a binary tree as a RawNode constituency (inverse of binarize)."""

    def convert(node: Tree, role: str, relation: Optional[str]) -> RawNode:
        if isinstance(node, Leaf):
            return RawNode(role=role, relation=relation, edu=node.edu)
        if node.nuclearity == "NN":
            roles = ("Nucleus", "Nucleus")
            rels = (node.relation, node.relation)
        elif node.nuclearity == "NS":
            roles = ("Nucleus", "Satellite")
            rels = ("span", node.relation)
        else:
            roles = ("Satellite", "Nucleus")
            rels = (node.relation, "span")
        children = (
            convert(node.left, roles[0], rels[0]),
            convert(node.right, roles[1], rels[1]),
        )
        return RawNode(role=role, relation=relation, children=children)

    return convert(tree, "Root", None)


def _pair_label(left: RawNode, right: RawNode) -> tuple[str, str]:
    """Attachment pattern and node relation for two sibling constituents."""
    lr, rr = left.role, right.role
    if lr == "Nucleus" and rr == "Satellite":
        return "NS", right.relation or ""
    if lr == "Satellite" and rr == "Nucleus":
        return "SN", left.relation or ""
    if lr == "Nucleus" and rr == "Nucleus":
        return "NN", left.relation or right.relation or ""
    raise TreeStructureError(
        f"sibling pair has no nucleus: roles {lr}/{rr}"
    )


def binarize(node: Union[RawNode, Tree]) -> Tree:
    """Convert a raw constituency into a binary discourse tree.

    Multinuclear k-ary nodes become right-leaning chains of NN nodes all
    carrying the original relation. Mixed k-ary nodes fold the rightmost
    pair first whenever that pair contains a nucleus, otherwise the
    leftmost, so satellites attach next to their nucleus. Already-binary
    trees come back unchanged.
    """
    if isinstance(node, (Leaf, Internal)):
        return binarize(raw_from_tree(node))

    if node.is_leaf:
        return Leaf(node.edu)
    if not node.children:
        raise TreeStructureError("internal raw node with no children")
    if len(node.children) == 1:
        return binarize(node.children[0])

    items: list[tuple[RawNode, Tree]] = [(c, binarize(c)) for c in node.children]
    while len(items) > 2:
        tail_pair = items[-2][0].role == "Nucleus" or items[-1][0].role == "Nucleus"
        pos = len(items) - 2 if tail_pair else 0
        (lraw, ltree), (rraw, rtree) = items[pos], items[pos + 1]
        nuc, rel = _pair_label(lraw, rraw)
        merged_tree = Internal(nuc, rel, ltree, rtree)
        head = lraw if lraw.role == "Nucleus" else rraw
        merged_raw = RawNode(role=head.role, relation=head.relation)
        items[pos : pos + 2] = [(merged_raw, merged_tree)]
    (lraw, ltree), (rraw, rtree) = items
    nuc, rel = _pair_label(lraw, rraw)
    return Internal(nuc, rel, ltree, rtree)


class RelationMap:
    """Mapping from fine-grained treebank relation labels to coarse classes.

    Loaded from a UTF-8 text file with one ``fine_label<TAB>class`` pair per
    line; ``#`` starts a comment. Lookup is case-insensitive on the fine
    label.
    """

    def __init__(self, pairs: dict[str, str]):
        self._table = {k.lower(): v for k, v in pairs.items()}

    @classmethod
    def load(cls, path) -> "RelationMap":
        pairs = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'fine<TAB>class', got {line!r}"
                    )
                fine, cls_name = parts[0].strip(), parts[1].strip()
                if fine.lower() in pairs and pairs[fine.lower()] != cls_name:
                    raise ValueError(
                        f"{path}:{lineno}: {fine!r} mapped to both "
                        f"{pairs[fine.lower()]!r} and {cls_name!r}"
                    )
                pairs[fine.lower()] = cls_name
        return cls(pairs)

    def map(self, fine_label: str) -> str:
        try:
            return self._table[fine_label.lower()]
        except KeyError:
            raise UnmappedLabelError(fine_label) from None

    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self._table.values())))

    def __contains__(self, fine_label: str) -> bool:
        return fine_label.lower() in self._table

    def __len__(self) -> int:
        return len(self._table)


def default_relation_map() -> RelationMap:
    """The bundled 18-class mapping for RST-DT fine-grained labels."""
    ref = resources.files("rstparse").joinpath("data/relation_map_18.tsv")
    with resources.as_file(ref) as path:
        return RelationMap.load(path)


def map_tree_relations(tree: Tree, relmap: RelationMap) -> Tree:
    """Rewrite every internal node's relation through the mapping table."""
    if isinstance(tree, Leaf):
        return tree
    return Internal(
        tree.nuclearity,
        relmap.map(tree.relation),
        map_tree_relations(tree.left, relmap),
        map_tree_relations(tree.right, relmap),
    )
