"""Structure, classification, and constraint enumeration for latent trees."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from conftest import (
    caterpillar,
    inner_node_tree,
    observed_chain,
    random_latent_tree,
    star_tree,
)
from treegof.tree import (
    ChainEquality,
    DegenerateQuadEquality,
    LatentTree,
    SignInequality,
    SplitBound,
    SplitEquality,
    TreeError,
    TriangleBound,
    enumerate_constraints,
    parse_tree,
)


def test_rejects_unobserved_low_degree_node():
    with pytest.raises(TreeError, match="degree"):
        LatentTree([("a", "b"), ("b", "c")], ["a", "c"])


def test_rejects_cycle():
    edges = [("a", "b"), ("b", "c"), ("c", "a")]
    with pytest.raises(TreeError, match="not a tree"):
        LatentTree(edges, ["a", "b", "c"])


def test_rejects_disconnected():
    edges = [("a", "b"), ("c", "d"), ("e", "f")]
    with pytest.raises(TreeError):
        LatentTree(edges, ["a", "b", "c", "d", "e", "f"])


def test_rejects_self_loop_and_duplicate_edge():
    with pytest.raises(TreeError, match="self-loop"):
        LatentTree([("a", "a")], ["a"])
    with pytest.raises(TreeError, match="duplicate"):
        LatentTree([("a", "b"), ("b", "a")], ["a", "b"])


def test_rejects_repeated_observed_label():
    with pytest.raises(TreeError, match="repeats"):
        LatentTree([("a", "b")], ["a", "a"])


def test_path_edges_through_hub():
    t = star_tree(3)
    assert t.path_edges("x1", "x3") == (("x1", "h"), ("h", "x3"))
    assert t.path_edges("x1", "x1") == ()
    assert t.path_nodes("x2", "x3") == ("x2", "h", "x3")


def test_path_edges_along_chain():
    t = observed_chain(4)
    assert t.path_edges("1", "4") == (("1", "2"), ("2", "3"), ("3", "4"))
    assert t.path_edges("4", "2") == (("4", "3"), ("3", "2"))


def test_restrict_star_keeps_hub():
    t = star_tree(5)
    r = t.restrict(["x1", "x2", "x3"])
    assert set(r.edges) == {("h", "x1"), ("h", "x2"), ("h", "x3")}
    assert r.observed == ("x1", "x2", "x3")


def test_restrict_caterpillar_merges_hubs():
    r = caterpillar().restrict(["1", "3", "2"])
    assert set(r.edges) == {("1", "5"), ("3", "5"), ("2", "5")}
    assert r.observed == ("1", "3", "2")


def test_restrict_chain_to_endpoints_gives_single_edge():
    r = observed_chain(4).restrict(["1", "4"])
    assert r.edges == (("1", "4"),)
    assert r.observed == ("1", "4")


def test_restrict_rejects_bad_subsets():
    t = star_tree(4)
    with pytest.raises(TreeError, match="at least two"):
        t.restrict(["x1"])
    with pytest.raises(TreeError, match="not an observed"):
        t.restrict(["x1", "h"])
    with pytest.raises(TreeError, match="repeated"):
        t.restrict(["x1", "x1"])


def test_classify_triple_star_and_chain():
    star = star_tree(4)
    assert star.classify_triple(0, 1, 2).kind == "star"

    chain = observed_chain(3)
    tri = chain.classify_triple(0, 1, 2)
    assert tri.kind == "chain"
    assert tri.middle == 1

    # middle detection does not depend on argument order
    tri = chain.classify_triple(2, 0, 1)
    assert tri.kind == "chain"
    assert tri.middle == 1


def test_classify_triple_inner_observed_node():
    t = inner_node_tree()
    assert t.classify_triple(0, 1, 2).kind == "star"
    tri = t.classify_triple(0, 2, 3)
    assert tri.kind == "chain"
    assert tri.middle == 3


def test_classify_triple_rejects_duplicates_and_range():
    t = star_tree(4)
    with pytest.raises(TreeError, match="distinct"):
        t.classify_triple(0, 0, 1)
    with pytest.raises(TreeError, match="out of range"):
        t.classify_triple(0, 1, 7)


def test_classify_quadruple_star_is_degenerate():
    qc = star_tree(4).classify_quadruple(0, 1, 2, 3)
    assert qc.kind == "degenerate"
    assert qc.split is None


def test_classify_quadruple_caterpillar_split():
    qc = caterpillar().classify_quadruple(0, 1, 2, 3)
    assert qc.kind == "split"
    assert qc.split == ((0, 2), (1, 3))


def test_classify_quadruple_chain_split():
    qc = observed_chain(4).classify_quadruple(0, 1, 2, 3)
    assert qc.kind == "split"
    assert qc.split == ((0, 1), (2, 3))


def test_classified_split_matches_direct_path_check():
    rng = np.random.default_rng(20240811)
    for _ in range(25):
        t = random_latent_tree(rng, m_lo=4, m_hi=6)
        ids = t.observed
        for quad in itertools.combinations(range(t.m), 4):
            qc = t.classify_quadruple(*quad)
            p, q, r, s = quad
            empties = []
            for (a, b), (c, d) in (
                ((p, q), (r, s)),
                ((p, r), (q, s)),
                ((p, s), (q, r)),
            ):
                shared = t.path_edge_set(ids[a], ids[b]) & t.path_edge_set(
                    ids[c], ids[d]
                )
                if not shared:
                    empties.append(((a, b), (c, d)))
            if qc.kind == "degenerate":
                assert len(empties) == 3
            else:
                assert len(empties) == 1
                blocks = {frozenset(empties[0][0]), frozenset(empties[0][1])}
                assert {frozenset(b) for b in qc.split} == blocks


def test_classification_survives_restriction():
    rng = np.random.default_rng(7180)
    for _ in range(25):
        t = random_latent_tree(rng, m_lo=4, m_hi=6)
        ids = t.observed
        for quad in itertools.combinations(range(t.m), 4):
            sub = t.restrict([ids[i] for i in quad])
            orig = t.classify_quadruple(*quad)
            restr = sub.classify_quadruple(0, 1, 2, 3)
            assert restr.kind == orig.kind
            if orig.kind == "split":
                remap = {orig_i: new_i for new_i, orig_i in enumerate(quad)}
                mapped = {
                    frozenset(remap[i] for i in block) for block in orig.split
                }
                assert {frozenset(b) for b in restr.split} == mapped
        for tri in itertools.combinations(range(t.m), 3):
            sub = t.restrict([ids[i] for i in tri])
            orig = t.classify_triple(*tri)
            restr = sub.classify_triple(0, 1, 2)
            assert restr.kind == orig.kind
            if orig.kind == "chain":
                assert tri[restr.middle] == orig.middle


def test_chain_of_three_constraint_system():
    sys = enumerate_constraints(observed_chain(3))
    assert sys.equalities == (ChainEquality((0, 1, 2), 1),)
    assert sys.inequalities == (SignInequality((0, 1, 2)),)
    assert sys.n_equality_terms == 1
    assert sys.n_inequality_terms == 1


def test_observed_chain_four_constraint_system():
    sys = enumerate_constraints(observed_chain(4))
    assert [type(c) for c in sys.equalities] == [
        ChainEquality,
        SplitEquality,
        ChainEquality,
        ChainEquality,
        ChainEquality,
    ]
    assert [c.indices for c in sys.equalities] == [
        (0, 1, 2),
        (0, 1, 2, 3),
        (0, 1, 3),
        (0, 2, 3),
        (1, 2, 3),
    ]
    assert [c.middle for c in sys.equalities if isinstance(c, ChainEquality)] == [
        1,
        1,
        2,
        2,
    ]
    kinds = [c.kind for c in sys.inequalities]
    assert kinds == ["sign", "split-bound", "sign", "sign", "sign"]


def test_inner_node_tree_constraint_order():
    sys = enumerate_constraints(inner_node_tree())
    summary = [(c.kind, c.indices) for c in sys.equalities]
    assert summary == [
        ("split", (0, 1, 2, 3)),
        ("chain", (0, 2, 3)),
        ("chain", (1, 2, 3)),
    ]
    assert sys.equalities[0].blocks == ((0, 1), (2, 3))
    assert all(c.middle == 3 for c in sys.equalities[1:])

    detail = [
        (c.kind, c.indices, getattr(c, "pivot", None)) for c in sys.inequalities
    ]
    assert detail == [
        ("sign", (0, 1, 2), None),
        ("triangle-bound", (0, 1, 2), 1),
        ("triangle-bound", (0, 1, 2), 2),
        ("triangle-bound", (0, 1, 2), 0),
        ("split-bound", (0, 1, 2, 3), None),
        ("sign", (0, 1, 3), None),
        ("triangle-bound", (0, 1, 3), 1),
        ("triangle-bound", (0, 1, 3), 3),
        ("triangle-bound", (0, 1, 3), 0),
        ("sign", (0, 2, 3), None),
        ("sign", (1, 2, 3), None),
    ]


@pytest.mark.parametrize(
    "m,n_tetrads",
    [(4, 2), (5, 10), (8, 140), (20, 9690)],
)
def test_star_tetrad_counts(m, n_tetrads):
    sys = enumerate_constraints(star_tree(m))
    assert all(isinstance(c, DegenerateQuadEquality) for c in sys.equalities)
    assert sys.n_equality_terms == n_tetrads
    n_triples = m * (m - 1) * (m - 2) // 6
    assert sys.n_inequality_terms == 4 * n_triples


def test_enumerate_needs_three_observed():
    t = LatentTree([("a", "b")], ["a", "b"])
    with pytest.raises(TreeError, match="at least 3"):
        enumerate_constraints(t)


def test_chain_equality_residual_and_sign_value():
    sys = enumerate_constraints(observed_chain(3))
    cov = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])
    assert sys.equality_residuals(cov) == [pytest.approx(0.0, abs=1e-15)]
    assert sys.inequality_values(cov) == [pytest.approx(-0.09)]


def _star_cov(weights):
    w = np.asarray(weights, dtype=float)
    cov = np.outer(w, w)
    np.fill_diagonal(cov, 1.0)
    return cov


def test_degenerate_quad_residuals():
    cov = _star_cov([0.9, 0.8, 0.7, 0.6])
    quad = DegenerateQuadEquality((0, 1, 2, 3))
    assert quad.residuals(cov) == [
        pytest.approx(0.0, abs=1e-15),
        pytest.approx(0.0, abs=1e-15),
    ]
    bumped = cov.copy()
    bumped[0, 3] += 0.01
    bumped[3, 0] += 0.01
    r1, r2 = quad.residuals(bumped)
    assert r1 == pytest.approx(0.01 * 0.56)
    assert r2 == pytest.approx(0.0, abs=1e-15)


def test_triangle_bound_value():
    cov = _star_cov([0.9, 0.8, 0.7, 0.6])
    tb = TriangleBound((0, 1, 2), 1)
    assert tb.values(cov) == [pytest.approx(-0.23432976)]


def _caterpillar_cov(a, b, c, d, e):
    # observed order 1, 2, 3, 4; leaves 1, 3 under one hub, 2, 4 under
    # the other, hub-hub weight e
    cov = np.eye(4)
    cov[0, 1] = cov[1, 0] = a * e * b
    cov[0, 2] = cov[2, 0] = a * c
    cov[0, 3] = cov[3, 0] = a * e * d
    cov[1, 2] = cov[2, 1] = b * e * c
    cov[1, 3] = cov[3, 1] = b * d
    cov[2, 3] = cov[3, 2] = c * e * d
    return cov


def test_split_equality_and_bound_values():
    cov = _caterpillar_cov(0.9, 0.8, 0.7, 0.6, 0.5)
    sys = enumerate_constraints(caterpillar())
    splits = [c for c in sys.equalities if isinstance(c, SplitEquality)]
    assert len(splits) == 1
    assert splits[0].blocks == ((0, 2), (1, 3))
    assert splits[0].residuals(cov) == [pytest.approx(0.0, abs=1e-15)]

    bounds = [c for c in sys.inequalities if isinstance(c, SplitBound)]
    assert len(bounds) == 1
    assert bounds[0].values(cov) == [pytest.approx(-0.0857304)]


def test_polynomial_strings():
    assert ChainEquality((0, 1, 2), 1).polynomials() == ["s12*s23 - s22*s13"]
    assert DegenerateQuadEquality((0, 1, 2, 3)).polynomials() == [
        "s14*s23 - s13*s24",
        "s12*s34 - s13*s24",
    ]
    assert SplitEquality(((0, 1), (2, 3))).polynomials() == ["s13*s24 - s14*s23"]
    assert SignInequality((0, 1, 2)).polynomials() == ["-s12*s13*s23"]
    assert TriangleBound((0, 1, 2), 1).polynomials() == [
        "s12^2*s23^2 - s22^2*s13^2"
    ]
    assert SplitBound(((0, 1), (2, 3))).polynomials() == [
        "s13^2*s24^2 - s12^2*s34^2"
    ]


def test_scalar_rows_cover_both_sides():
    sys = enumerate_constraints(observed_chain(4))
    rows = list(sys.scalar_rows())
    assert len(rows) == sys.n_equality_terms + sys.n_inequality_terms
    sides = [r[0] for r in rows]
    assert sides == ["equality"] * 5 + ["inequality"] * 5


def test_parse_round_trip():
    text = """\
# two hubs with two leaves each
EDGE 1 5
EDGE 3 5

EDGE 2 6
EDGE 4 6
EDGE 5 6
OBS 1
OBS 2
OBS 3
OBS 4
"""
    t = parse_tree(text)
    ref = caterpillar()
    assert t.edges == ref.edges
    assert t.observed == ref.observed


def test_parse_reports_line_numbers():
    with pytest.raises(TreeError, match="line 2: EDGE needs exactly two"):
        parse_tree("EDGE a b\nEDGE a\nOBS a\n")
    with pytest.raises(TreeError, match="line 3: unknown directive 'NODE'"):
        parse_tree("EDGE a b\nOBS a\nNODE c\n")
    with pytest.raises(TreeError, match="line 4: duplicate OBS"):
        parse_tree("EDGE a b\nOBS a\nOBS b\nOBS a\n")
    with pytest.raises(TreeError, match="line 2: duplicate edge"):
        parse_tree("EDGE a b\nEDGE b a\n")


def test_parse_enforces_tree_invariants():
    with pytest.raises(TreeError, match="invariant"):
        parse_tree("EDGE a b\nEDGE b c\nOBS a\nOBS c\n")
