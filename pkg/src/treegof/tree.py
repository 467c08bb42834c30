"""Latent tree graphs and the covariance constraints they induce.

An undirected tree together with an ordered list of observed nodes.
Unobserved (latent) nodes must have degree at least three, so every leaf
and every degree-two node carries an observed variable.  Observed triples
classify as chains or stars, observed quadruples as split or degenerate
configurations, and those classes determine a system of polynomial
equality and inequality constraints that a covariance matrix satisfies
exactly when it arises from some Gaussian parameterization of the tree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import ClassVar, Optional

__all__ = [
    "TreeError",
    "LatentTree",
    "TripleClass",
    "QuadClass",
    "ChainEquality",
    "SplitEquality",
    "DegenerateQuadEquality",
    "SignInequality",
    "TriangleBound",
    "SplitBound",
    "ConstraintSystem",
    "enumerate_constraints",
    "parse_tree",
    "load_tree",
]


class TreeError(ValueError):
    """Malformed tree structure or tree file."""


def _norm_edge(a, b):
    return (a, b) if str(a) <= str(b) else (b, a)


def _edge_sort_key(e):
    return (str(e[0]), str(e[1]))


class LatentTree:
    """Undirected tree with an ordered observed-node labeling.

    Parameters
    ----------
    edges : iterable of (id, id)
        Unordered node pairs.  Ids may be any hashable; the file parser
        produces strings.
    observed : sequence of ids
        Observed nodes in variable order; position ``k`` in this sequence
        is variable ``k`` everywhere downstream (data columns, constraint
        indices).

    Raises
    ------
    TreeError
        If the graph is not a tree, an unobserved node has degree below
        three, or the observed labeling repeats a node.
    """

    def __init__(self, edges, observed):
        edge_list = []
        seen = set()
        adj: dict = {}
        for a, b in edges:
            if a == b:
                raise TreeError(f"self-loop at node {a!r}")
            e = _norm_edge(a, b)
            if e in seen:
                raise TreeError(f"duplicate edge {e!r}")
            seen.add(e)
            edge_list.append(e)
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        observed = tuple(observed)
        if len(set(observed)) != len(observed):
            raise TreeError("observed labeling repeats a node")
        nodes = set(adj)
        nodes.update(observed)
        if not nodes:
            raise TreeError("empty tree")
        for v in observed:
            adj.setdefault(v, [])
        if len(edge_list) != len(nodes) - 1:
            raise TreeError(
                f"{len(edge_list)} edges for {len(nodes)} nodes is not a tree"
            )
        start = next(iter(nodes))
        reached = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in reached:
                    reached.add(w)
                    stack.append(w)
        if reached != nodes:
            raise TreeError("graph is not connected")
        obs_set = frozenset(observed)
        for v in nodes:
            if len(adj[v]) <= 2 and v not in obs_set:
                raise TreeError(
                    f"unobserved node {v!r} has degree {len(adj[v])}, needs >= 3"
                )
        self._adj = {v: tuple(ws) for v, ws in adj.items()}
        self.edges = tuple(sorted(edge_list, key=_edge_sort_key))
        self.observed = observed
        self.nodes = frozenset(nodes)
        self._paths: dict = {}

    @property
    def m(self) -> int:
        return len(self.observed)

    def degree(self, v) -> int:
        return len(self._adj[v])

    def neighbors(self, v) -> tuple:
        return self._adj[v]

    def path_nodes(self, a, b) -> tuple:
        """Nodes along the unique simple path from ``a`` to ``b``, inclusive."""
        if a not in self.nodes:
            raise TreeError(f"unknown node {a!r}")
        if b not in self.nodes:
            raise TreeError(f"unknown node {b!r}")
        if a == b:
            return (a,)
        cached = self._paths.get((a, b))
        if cached is not None:
            return cached
        parent = {a: None}
        queue = [a]
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            if v == b:
                break
            for w in self._adj[v]:
                if w not in parent:
                    parent[w] = v
                    queue.append(w)
        path = [b]
        while path[-1] != a:
            path.append(parent[path[-1]])
        path.reverse()
        out = tuple(path)
        self._paths[(a, b)] = out
        self._paths[(b, a)] = tuple(reversed(out))
        return out

    def path_edges(self, a, b) -> tuple:
        """Edges along the path from ``a`` to ``b``, oriented in walk order.

        Empty when ``a == b``.
        """
        p = self.path_nodes(a, b)
        return tuple(zip(p, p[1:]))

    def path_edge_set(self, a, b) -> frozenset:
        """Path edges as normalized pairs, for intersection tests."""
        return frozenset(_norm_edge(u, v) for u, v in self.path_edges(a, b))

    def restrict(self, subset) -> "LatentTree":
        """Minimal subtree spanning ``subset`` with outside degree-two
        nodes suppressed.

        Parameters
        ----------
        subset : sequence of observed node ids
            Becomes the observed order of the result.
        """
        subset = tuple(subset)
        if len(subset) < 2:
            raise TreeError("restriction needs at least two nodes")
        if len(set(subset)) != len(subset):
            raise TreeError("repeated node in restriction subset")
        obs_set = set(self.observed)
        for v in subset:
            if v not in obs_set:
                raise TreeError(f"{v!r} is not an observed node")
        keep = set(subset[:1])
        for v in subset[1:]:
            keep.update(self.path_nodes(subset[0], v))
        adjs = {v: {w for w in self._adj[v] if w in keep} for v in keep}
        members = set(subset)
        for v in sorted(keep, key=str):
            if v in members or v not in adjs:
                continue
            nb = adjs[v]
            if len(nb) == 2:
                x, y = sorted(nb, key=str)
                adjs[x].discard(v)
                adjs[y].discard(v)
                adjs[x].add(y)
                adjs[y].add(x)
                del adjs[v]
        edges = set()
        for v, ws in adjs.items():
            for w in ws:
                edges.add(_norm_edge(v, w))
        return LatentTree(sorted(edges, key=_edge_sort_key), subset)

    def _obs_id(self, i):
        if not isinstance(i, int) or not 0 <= i < self.m:
            raise TreeError(f"observed index {i!r} out of range 0..{self.m - 1}")
        return self.observed[i]

    def classify_triple(self, p: int, q: int, r: int) -> "TripleClass":
        """Classify the restriction to three observed variables.

        Indices are positions in the observed order.  Returns a chain with
        its middle variable when one of the three nodes lies on the path
        between the other two, otherwise a star.
        """
        if len({p, q, r}) != 3:
            raise TreeError("triple indices must be distinct")
        ids = [self._obs_id(i) for i in (p, q, r)]
        for mid_pos, (a, b) in ((0, (1, 2)), (1, (0, 2)), (2, (0, 1))):
            inner = self.path_nodes(ids[a], ids[b])[1:-1]
            if ids[mid_pos] in inner:
                return TripleClass("chain", (p, q, r)[mid_pos])
        return TripleClass("star", None)

    def classify_quadruple(self, p: int, q: int, r: int, s: int) -> "QuadClass":
        """Classify the restriction to four observed variables.

        Exactly one of the three pair-of-pairs path intersections is empty
        for a split configuration; all three are empty for a degenerate
        one.  No other case can occur in a tree.
        """
        if len({p, q, r, s}) != 4:
            raise TreeError("quadruple indices must be distinct")
        pairings = (((p, q), (r, s)), ((p, r), (q, s)), ((p, s), (q, r)))
        empty = []
        for (a, b), (c, d) in pairings:
            e1 = self.path_edge_set(self._obs_id(a), self._obs_id(b))
            e2 = self.path_edge_set(self._obs_id(c), self._obs_id(d))
            if not e1 & e2:
                empty.append(((a, b), (c, d)))
        if len(empty) == 3:
            return QuadClass("degenerate", None)
        if len(empty) == 1:
            return QuadClass("split", _norm_split(*empty[0]))
        raise TreeError(
            "quadruple path pairings gave %d empty intersections; "
            "a tree admits one or three" % len(empty)
        )


def _norm_split(block1, block2):
    b1 = tuple(sorted(block1))
    b2 = tuple(sorted(block2))
    return (b1, b2) if b1[0] < b2[0] else (b2, b1)


@dataclass(frozen=True)
class TripleClass:
    kind: str  # "star" or "chain"
    middle: Optional[int]


@dataclass(frozen=True)
class QuadClass:
    kind: str  # "split" or "degenerate"
    split: Optional[tuple]


def _sym(i: int, j: int) -> str:
    a, b = (i, j) if i <= j else (j, i)
    a += 1
    b += 1
    if a < 10 and b < 10:
        return f"s{a}{b}"
    return f"s{a}_{b}"


@dataclass(frozen=True)
class ChainEquality:
    """Along an observed chain a - mid - b, the product of the two hop
    covariances equals the middle variance times the end-to-end covariance.
    """

    indices: tuple
    middle: int
    kind: ClassVar[str] = "chain"

    @property
    def outer(self) -> tuple:
        return tuple(i for i in self.indices if i != self.middle)

    def column_pairs(self):
        a, b = self.outer
        return [((a, self.middle), (self.middle, b))]

    def residuals(self, cov):
        a, b = self.outer
        mid = self.middle
        return [cov[a, mid] * cov[mid, b] - cov[mid, mid] * cov[a, b]]

    def polynomials(self):
        a, b = self.outer
        mid = self.middle
        return [
            f"{_sym(a, mid)}*{_sym(mid, b)} - {_sym(mid, mid)}*{_sym(a, b)}"
        ]


@dataclass(frozen=True)
class SplitEquality:
    """The two cross covariance products across a quadruple split agree."""

    blocks: tuple  # ((a, b), (c, d)) with blocks sorted, min-first

    kind: ClassVar[str] = "split"

    @property
    def indices(self) -> tuple:
        (a, b), (c, d) = self.blocks
        return tuple(sorted((a, b, c, d)))

    def column_pairs(self):
        (a, b), (c, d) = self.blocks
        return [((a, c), (b, d))]

    def residuals(self, cov):
        (a, b), (c, d) = self.blocks
        return [cov[a, c] * cov[b, d] - cov[a, d] * cov[b, c]]

    def polynomials(self):
        (a, b), (c, d) = self.blocks
        return [f"{_sym(a, c)}*{_sym(b, d)} - {_sym(a, d)}*{_sym(b, c)}"]


@dataclass(frozen=True)
class DegenerateQuadEquality:
    """Both independent 2x2 covariance minors of a degenerate quadruple
    vanish.  Expands to two scalar tetrad constraints.
    """

    indices: tuple  # (p, q, r, s) sorted

    kind: ClassVar[str] = "tetrad"

    def column_pairs(self):
        p, q, r, s = self.indices
        return [((p, s), (q, r)), ((p, q), (s, r))]

    def residuals(self, cov):
        p, q, r, s = self.indices
        return [
            cov[p, s] * cov[q, r] - cov[p, r] * cov[q, s],
            cov[p, q] * cov[s, r] - cov[p, r] * cov[q, s],
        ]

    def polynomials(self):
        p, q, r, s = self.indices
        return [
            f"{_sym(p, s)}*{_sym(q, r)} - {_sym(p, r)}*{_sym(q, s)}",
            f"{_sym(p, q)}*{_sym(r, s)} - {_sym(p, r)}*{_sym(q, s)}",
        ]


@dataclass(frozen=True)
class SignInequality:
    """The product of the three covariances of any triple is nonnegative.

    Stored in less-than form: ``-s_pq*s_pr*s_qr <= 0``.
    """

    indices: tuple  # (p, q, r) sorted

    kind: ClassVar[str] = "sign"

    def monomial_triple(self) -> tuple:
        return self.indices

    def values(self, cov):
        p, q, r = self.indices
        return [-(cov[p, q] * cov[p, r] * cov[q, r])]

    def polynomials(self):
        p, q, r = self.indices
        return [f"-{_sym(p, q)}*{_sym(p, r)}*{_sym(q, r)}"]


@dataclass(frozen=True)
class TriangleBound:
    """Squared two-hop covariance product through a pivot is bounded by the
    pivot variance squared times the squared direct covariance.

    Emitted for star triples only; on a chain the middle pivot holds with
    equality and the other two follow from it.
    """

    indices: tuple  # (p, q, r) sorted
    pivot: int

    kind: ClassVar[str] = "triangle-bound"

    def values(self, cov):
        a, b = (i for i in self.indices if i != self.pivot)
        piv = self.pivot
        return [
            cov[a, piv] ** 2 * cov[piv, b] ** 2
            - cov[piv, piv] ** 2 * cov[a, b] ** 2
        ]

    def polynomials(self):
        a, b = (i for i in self.indices if i != self.pivot)
        piv = self.pivot
        return [
            f"{_sym(a, piv)}^2*{_sym(piv, b)}^2"
            f" - {_sym(piv, piv)}^2*{_sym(a, b)}^2"
        ]


@dataclass(frozen=True)
class SplitBound:
    """Squared cross products across a split are bounded by the squared
    within-block products."""

    blocks: tuple

    kind: ClassVar[str] = "split-bound"

    @property
    def indices(self) -> tuple:
        (a, b), (c, d) = self.blocks
        return tuple(sorted((a, b, c, d)))

    def values(self, cov):
        (a, b), (c, d) = self.blocks
        return [
            cov[a, c] ** 2 * cov[b, d] ** 2
            - cov[a, b] ** 2 * cov[c, d] ** 2
        ]

    def polynomials(self):
        (a, b), (c, d) = self.blocks
        return [
            f"{_sym(a, c)}^2*{_sym(b, d)}^2"
            f" - {_sym(a, b)}^2*{_sym(c, d)}^2"
        ]


_EQ_RANK = {"chain": 0, "split": 1, "tetrad": 2}
_INEQ_RANK = {"sign": 0, "triangle-bound": 1, "split-bound": 2}


@dataclass(frozen=True)
class ConstraintSystem:
    """Complete constraint lists for one latent tree, in canonical order.

    Ordering is lexicographic over the sorted variable-index tuples with
    ties broken by constraint kind; one constraint object may expand to
    several scalar terms (a degenerate quadruple carries two tetrads).
    """

    m: int
    equalities: tuple
    inequalities: tuple

    def equality_residuals(self, cov) -> list:
        out = []
        for c in self.equalities:
            out.extend(c.residuals(cov))
        return out

    def inequality_values(self, cov) -> list:
        """Less-than forms; each entry should be <= 0 on-model."""
        out = []
        for c in self.inequalities:
            out.extend(c.values(cov))
        return out

    def equality_column_pairs(self) -> list:
        """(rows, cols) index pairs of the difference estimator columns."""
        out = []
        for c in self.equalities:
            out.extend(c.column_pairs())
        return out

    def sign_triples(self) -> list:
        return [c.monomial_triple() for c in self.inequalities if c.kind == "sign"]

    @property
    def n_equality_terms(self) -> int:
        return len(self.equality_column_pairs())

    @property
    def n_inequality_terms(self) -> int:
        return sum(len(c.polynomials()) for c in self.inequalities)

    def scalar_rows(self):
        """(side, kind, indices, polynomial) per scalar term, for listings."""
        for c in self.equalities:
            for poly in c.polynomials():
                yield ("equality", c.kind, c.indices, poly)
        for c in self.inequalities:
            for poly in c.polynomials():
                yield ("inequality", c.kind, c.indices, poly)


def enumerate_constraints(tree: LatentTree) -> ConstraintSystem:
    """Build the full constraint system for a latent tree.

    Every triple contributes a sign constraint; star triples add the three
    pivot bounds; chain triples add the chain equality instead.  Every
    quadruple contributes either the split equality plus its bound or, in
    the degenerate case, two tetrad equalities.

    Raises
    ------
    TreeError
        If fewer than three observed variables.
    """
    m = tree.m
    if m < 3:
        raise TreeError("constraint enumeration needs at least 3 observed nodes")
    eqs = []
    ineqs = []
    for p, q, r in itertools.combinations(range(m), 3):
        tri = tree.classify_triple(p, q, r)
        ineqs.append(SignInequality((p, q, r)))
        if tri.kind == "chain":
            eqs.append(ChainEquality((p, q, r), tri.middle))
        else:
            for piv in (q, r, p):
                ineqs.append(TriangleBound((p, q, r), piv))
    if m >= 4:
        for quad in itertools.combinations(range(m), 4):
            qc = tree.classify_quadruple(*quad)
            if qc.kind == "split":
                eqs.append(SplitEquality(qc.split))
                ineqs.append(SplitBound(qc.split))
            else:
                eqs.append(DegenerateQuadEquality(quad))
    eqs.sort(key=lambda c: (c.indices, _EQ_RANK[c.kind]))
    ineqs.sort(key=lambda c: (c.indices, _INEQ_RANK[c.kind]))
    return ConstraintSystem(m, tuple(eqs), tuple(ineqs))


def parse_tree(text: str) -> LatentTree:
    """Parse the line-oriented tree format.

    Lines are ``EDGE <id> <id>`` or ``OBS <id>`` (one per observed node,
    order significant); ``#`` starts a comment line; blank lines are
    ignored.  Raises TreeError with a line number on malformed input.
    """
    edges = []
    seen_edges = set()
    observed = []
    seen_obs = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "EDGE":
            if len(tokens) != 3:
                raise TreeError(f"line {lineno}: EDGE needs exactly two node ids")
            a, b = tokens[1], tokens[2]
            if a == b:
                raise TreeError(f"line {lineno}: self-loop at {a!r}")
            e = _norm_edge(a, b)
            if e in seen_edges:
                raise TreeError(f"line {lineno}: duplicate edge {a!r} {b!r}")
            seen_edges.add(e)
            edges.append((a, b))
        elif tokens[0] == "OBS":
            if len(tokens) != 2:
                raise TreeError(f"line {lineno}: OBS needs exactly one node id")
            v = tokens[1]
            if v in seen_obs:
                raise TreeError(f"line {lineno}: duplicate OBS {v!r}")
            seen_obs.add(v)
            observed.append(v)
        else:
            raise TreeError(f"line {lineno}: unknown directive {tokens[0]!r}")
    try:
        return LatentTree(edges, observed)
    except TreeError as exc:
        raise TreeError(f"tree invariant violated: {exc}") from exc


def load_tree(path) -> LatentTree:
    """Read a tree file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tree(fh.read())
