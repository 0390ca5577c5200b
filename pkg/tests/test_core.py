"""Domain types: documents, tree validation, binarization, relation mapping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rstparse.core import (
    Document,
    Internal,
    Leaf,
    RawNode,
    RelationMap,
    TreeStructureError,
    UnmappedLabelError,
    binarize,
    default_relation_map,
    iter_leaves,
    n_internal,
    raw_from_tree,
    span,
    split_point,
    validate_tree,
)

from conftest import figure_tree, make_tree


class TestDocument:
    def test_basic(self):
        doc = Document("d", ("a", "b", "c"), (0, 2))
        assert doc.n_tokens == 3
        assert doc.n_edus == 2
        assert doc.edu_tokens(1) == ("a",)
        assert doc.edu_tokens(2) == ("b", "c")
        assert doc.edu_token_span(2) == (1, 2)

    def test_breaks_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            Document("d", ("a", "b", "c"), (1, 1, 2))

    def test_breaks_must_end_document(self):
        with pytest.raises(ValueError, match="does not end the document"):
            Document("d", ("a", "b", "c"), (0, 1))

    def test_empty_document_rejected(self):
        with pytest.raises(ValueError, match="no tokens"):
            Document("d", (), ())


class TestValidateTree:
    def test_single_leaf(self):
        assert validate_tree(Leaf(1), 1) is None

    def test_figure_example(self):
        tree = figure_tree()
        assert validate_tree(tree, 5) is None
        assert [leaf.edu for leaf in iter_leaves(tree)] == [1, 2, 3, 4, 5]
        assert n_internal(tree) == 4
        assert split_point(tree) == 3

    def test_split_must_precede_span_end(self):
        # left child already covers the full span: k = 3 = j
        left = Internal("NN", "Joint", Internal("NN", "Joint", Leaf(1), Leaf(2)), Leaf(3))
        bad = Internal("NS", "Elaboration", left, Leaf(3))
        message = validate_tree(bad, 3)
        assert message is not None and "k < j" in message

    def test_non_contiguous_children(self):
        bad = Internal("NS", "Elaboration", Leaf(1), Leaf(3))
        message = validate_tree(bad, 3)
        assert message is not None and "not contiguous" in message

    def test_wrong_root_span(self):
        assert "root covers" in validate_tree(Internal("NN", "Joint", Leaf(1), Leaf(2)), 3)

    def test_leaf_out_of_range(self):
        assert "out of range" in validate_tree(Leaf(2), 1)

    def test_bad_nuclearity(self):
        bad = Internal("XX", "Joint", Leaf(1), Leaf(2))
        assert "nuclearity" in validate_tree(bad, 2)

    @given(m=st.integers(1, 10), seed=st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_random_trees_valid(self, m, seed):
        tree = make_tree(1, m, np.random.default_rng(seed))
        assert validate_tree(tree, m) is None
        assert n_internal(tree) == m - 1
        assert [leaf.edu for leaf in iter_leaves(tree)] == list(range(1, m + 1))


def _nn_raw(relation, *children):
    kids = tuple(
        RawNode(role="Nucleus", relation=relation, edu=c) if isinstance(c, int) else c
        for c in children
    )
    return RawNode(role="Root", relation=None, children=kids)


class TestBinarize:
    def test_binary_fixed_point(self):
        tree = figure_tree()
        assert binarize(tree) == tree

    def test_three_child_multinuclear(self):
        raw = _nn_raw("Joint", 1, 2, 3)
        tree = binarize(raw)
        assert tree == Internal(
            "NN", "Joint", Leaf(1), Internal("NN", "Joint", Leaf(2), Leaf(3))
        )
        assert split_point(tree) == 1

    def test_four_child_chain(self):
        raw = _nn_raw("List", 1, 2, 3, 4)
        tree = binarize(raw)
        assert n_internal(tree) == 3
        node = tree
        while isinstance(node, Internal):
            assert node.nuclearity == "NN"
            assert node.relation == "List"
            assert isinstance(node.left, Leaf)
            node = node.right

    def test_mixed_satellites_attach_to_nucleus(self):
        # [N, S, S]: both satellites hang off the nucleus side.
        raw = RawNode(
            role="Root",
            children=(
                RawNode(role="Nucleus", relation="span", edu=1),
                RawNode(role="Satellite", relation="elaboration-additional", edu=2),
                RawNode(role="Satellite", relation="example", edu=3),
            ),
        )
        tree = binarize(raw)
        assert validate_tree(tree, 3) is None
        assert tree.nuclearity == "NS"
        assert tree.relation == "example"
        assert tree.left == Internal(
            "NS", "elaboration-additional", Leaf(1), Leaf(2)
        )

    def test_satellite_nucleus_satellite(self):
        raw = RawNode(
            role="Root",
            children=(
                RawNode(role="Satellite", relation="background", edu=1),
                RawNode(role="Nucleus", relation="span", edu=2),
                RawNode(role="Satellite", relation="evidence", edu=3),
            ),
        )
        tree = binarize(raw)
        assert validate_tree(tree, 3) is None
        assert tree.nuclearity == "SN"
        assert tree.relation == "background"
        assert tree.right.nuclearity == "NS"
        assert tree.right.relation == "evidence"

    def test_all_satellite_pair_rejected(self):
        raw = RawNode(
            role="Root",
            children=(
                RawNode(role="Satellite", relation="background", edu=1),
                RawNode(role="Satellite", relation="evidence", edu=2),
            ),
        )
        with pytest.raises(TreeStructureError, match="no nucleus"):
            binarize(raw)

    @given(m=st.integers(1, 9), seed=st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_leaf_preserving(self, m, seed):
        tree = make_tree(1, m, np.random.default_rng(seed))
        once = binarize(tree)
        assert binarize(once) == once
        assert [l.edu for l in iter_leaves(once)] == list(range(1, m + 1))

    def test_multinuclear_flatten_preserves_maximal_span(self):
        raw = _nn_raw("Joint", 1, 2, 3, 4)
        tree = binarize(raw)
        assert span(tree) == (1, 4)
        assert validate_tree(tree, 4) is None

    def test_roundtrip_through_raw(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            tree = make_tree(1, int(rng.integers(1, 9)), rng)
            assert binarize(raw_from_tree(tree)) == tree


class TestRelationMap:
    def test_bundled_map(self):
        relmap = default_relation_map()
        assert len(relmap.classes()) == 18
        assert relmap.map("elaboration-additional") == "Elaboration"
        assert relmap.map("Contrast") == "Contrast"

    def test_case_insensitive(self):
        relmap = default_relation_map()
        assert relmap.map("ELABORATION-ADDITIONAL") == "Elaboration"
        assert relmap.map("List") == "Joint"

    def test_unknown_label_named(self):
        relmap = default_relation_map()
        with pytest.raises(UnmappedLabelError, match="nonexistent-rel"):
            relmap.map("nonexistent-rel")

    def test_load_with_comments(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("# comment\nfoo\tBar\n\nbaz\tBar  # trailing\n")
        relmap = RelationMap.load(path)
        assert relmap.map("FOO") == "Bar"
        assert relmap.map("baz") == "Bar"
        assert relmap.classes() == ("Bar",)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("foo Bar\n")
        with pytest.raises(ValueError, match="map.tsv:1"):
            RelationMap.load(path)
