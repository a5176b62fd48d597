"""Weighted forests and the random correction coefficients built from them.

A weighted forest ``F`` with odd edge weights ``s_e`` indexes the statistic

    w(F) = N^{-theta(F)} sum_{distinct x_1..x_|V|} prod_e w(h_{x_u x_v}; s_e),
    w(h; s) = h^{s+1} - 1(s = 1)/N,

where ``theta`` counts connected components.  The coefficient ``a_{2l}`` of
the correction polynomial is a linear combination of such statistics with
total weight ``sum_e (s_e + 1) = 2l``.

The sum over injective vertex assignments is evaluated by Möbius inversion on
the partition lattice: for every set partition of the vertices the
unrestricted sum over the quotient graph is an einsum contraction, weighted by
``prod_B (-1)^{|B|-1} (|B|-1)!``.  For the forests used here (at most four
vertices) this costs at most ``O(N^3)`` per partition.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidForest, TooManyVertices
from .polynomial import CorrectionPolynomial

__all__ = [
    "WeightedForest",
    "ForestTerm",
    "forest_weight",
    "build_correction",
    "default_terms",
    "BUILTIN_FORESTS",
    "terms_from_json",
    "terms_to_json",
    "load_terms",
    "set_partitions",
]

MAX_VERTICES = 4


@dataclass(frozen=True)
class WeightedForest:
    """Vertices ``0..vertex_count-1`` and edges ``(u, v, s)`` with odd ``s >= 1``."""

    vertex_count: int
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        n = int(self.vertex_count)
        if n < 1:
            raise InvalidForest("a forest needs at least one vertex")
        edges = tuple((int(u), int(v), int(s)) for u, v, s in self.edges)
        seen = set()
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v, s in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidForest(f"edge ({u}, {v}) references a missing vertex")
            if u == v:
                raise InvalidForest("self-loops are not allowed")
            if s < 1 or s % 2 == 0:
                raise InvalidForest(f"edge weight {s} is not an odd positive integer")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InvalidForest(f"multi-edge between {key}")
            seen.add(key)
            ru, rv = find(u), find(v)
            if ru == rv:
                raise InvalidForest("edges contain a cycle")
            parent[ru] = rv
        object.__setattr__(self, "vertex_count", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_theta", len({find(x) for x in range(n)}))

    @property
    def theta(self) -> int:
        """Number of connected components, isolated vertices included."""
        return self._theta

    @property
    def total_weight(self) -> int:
        """``sum_e (s_e + 1)``: the power ``2l`` of ``m`` this forest feeds."""
        return sum(s + 1 for _, _, s in self.edges)

    @classmethod
    def single_edge(cls, s: int) -> "WeightedForest":
        return cls(2, ((0, 1, s),))


@dataclass(frozen=True)
class ForestTerm:
    forest: WeightedForest
    coefficient: float = 1.0

    def __post_init__(self):
        if self.forest.total_weight % 2:
            raise InvalidForest("total weight must be even")
        object.__setattr__(self, "coefficient", float(self.coefficient))


BUILTIN_FORESTS: dict[str, WeightedForest] = {
    "edge_1": WeightedForest.single_edge(1),
    "edge_3": WeightedForest.single_edge(3),
    "edge_5": WeightedForest.single_edge(5),
    "path_1_1": WeightedForest(3, ((0, 1, 1), (1, 2, 1))),
    "path_1_3": WeightedForest(3, ((0, 1, 1), (1, 2, 3))),
    "pair_1_1": WeightedForest(4, ((0, 1, 1), (2, 3, 1))),
    "edge_1_plus_vertex": WeightedForest(3, ((0, 1, 1),)),
    "star_1_1_1": WeightedForest(4, ((0, 1, 1), (0, 2, 1), (0, 3, 1))),
    "path_1_1_1": WeightedForest(4, ((0, 1, 1), (1, 2, 1), (2, 3, 1))),
}


def default_terms() -> list[ForestTerm]:
    """``a_2`` from the weight-1 edge and ``a_4`` from the weight-3 edge, both with coefficient 1."""
    return [ForestTerm(BUILTIN_FORESTS["edge_1"], 1.0), ForestTerm(BUILTIN_FORESTS["edge_3"], 1.0)]


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _int_power(h: np.ndarray, n: int) -> np.ndarray:
    # repeated squaring; much faster than the generic float pow for large arrays
    out, base = None, h
    while n:
        if n & 1:
            out = base if out is None else out * base
        n >>= 1
        if n:
            base = base * base
    return out


def _edge_matrix(h: np.ndarray, s: int) -> np.ndarray:
    w = _int_power(h, s + 1)
    if s == 1:
        w = w - 1.0 / h.shape[0]
    return w


def _unrestricted_sum(n_blocks: int, block_of: list[int], edges, mats: dict[int, np.ndarray], N: int) -> float:
    letters = "abcdefghijklmnopqrstuvwxyz"
    pair_ops: dict[tuple[int, int], np.ndarray] = {}
    loop_ops: dict[int, np.ndarray] = defaultdict(lambda: None)
    for u, v, s in edges:
        bu, bv = block_of[u], block_of[v]
        m = mats[s]
        if bu == bv:
            d = np.diagonal(m)
            loop_ops[bu] = d if loop_ops[bu] is None else loop_ops[bu] * d
        else:
            key = (min(bu, bv), max(bu, bv))
            pair_ops[key] = m if key not in pair_ops else pair_ops[key] * m
    operands, subs = [], []
    used = set()
    for (a, b), m in pair_ops.items():
        operands.append(m)
        subs.append(letters[a] + letters[b])
        used.update((a, b))
    for b, d in loop_ops.items():
        if d is not None:
            operands.append(d)
            subs.append(letters[b])
            used.add(b)
    free = n_blocks - len(used)
    if not operands:
        return float(N) ** free
    val = np.einsum(",".join(subs) + "->", *operands, optimize="greedy")
    return float(val) * float(N) ** free


def forest_weight(F: WeightedForest, H, max_vertices: int = MAX_VERTICES) -> float:
    """Evaluate ``w(F)`` on the matrix ``H`` (a ``SymmetricMatrix`` or array)."""
    h = np.asarray(getattr(H, "entries", H), dtype=float)
    N = h.shape[0]
    if F.vertex_count > max_vertices:
        raise TooManyVertices(f"forest has {F.vertex_count} vertices; guard is {max_vertices}")
    if F.vertex_count > N:
        return 0.0
    mats = {s: _edge_matrix(h, s) for s in {s for _, _, s in F.edges}}
    total = 0.0
    for part in set_partitions(range(F.vertex_count)):
        block_of = [0] * F.vertex_count
        mobius = 1
        for b, block in enumerate(part):
            for x in block:
                block_of[x] = b
            mobius *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
        total += mobius * _unrestricted_sum(len(part), block_of, F.edges, mats, N)
    return total / float(N) ** F.theta


def build_correction(H, terms: Iterable[ForestTerm] | None = None, max_weight: int = 8) -> CorrectionPolynomial:
    """Correction polynomial ``Q`` whose ``a_2l`` sum the matching forest terms.

    With ``terms=None`` the default list from :func:`default_terms` is used.
    The perturbative-regime guard is not applied here; solvers check it.
    """
    terms = default_terms() if terms is None else list(terms)
    if not terms:
        raise ValueError("need at least one forest term")
    L = 1
    for term in terms:
        tw = term.forest.total_weight
        if tw > max_weight:
            raise InvalidForest(f"forest total weight {tw} exceeds max_weight {max_weight}")
        L = max(L, tw // 2)
    coeffs = [0.0] * L
    for term in terms:
        coeffs[term.forest.total_weight // 2 - 1] += term.coefficient * forest_weight(term.forest, H)
    return CorrectionPolynomial(tuple(coeffs))


def terms_from_json(data) -> list[ForestTerm]:
    """Parse ``[{"vertices": int, "edges": [[u, v, s], ...], "coeff": float}, ...]``."""
    if not isinstance(data, list):
        raise InvalidForest("forest term list must be a JSON array")
    out = []
    for i, item in enumerate(data):
        try:
            forest = WeightedForest(item["vertices"], tuple(tuple(e) for e in item["edges"]))
            out.append(ForestTerm(forest, item.get("coeff", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidForest(f"term {i}: {exc}") from exc
    return out


def terms_to_json(terms: Iterable[ForestTerm]) -> list[dict]:
    return [
        {"vertices": t.forest.vertex_count, "edges": [list(e) for e in t.forest.edges], "coeff": t.coefficient}
        for t in terms
    ]


def load_terms(path) -> list[ForestTerm]:
    return terms_from_json(json.loads(Path(path).read_text()))
