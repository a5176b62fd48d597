import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgelab import ensemble as ens
from edgelab.errors import InvalidForest, TooManyVertices
from edgelab.forests import (
    BUILTIN_FORESTS,
    ForestTerm,
    WeightedForest,
    build_correction,
    default_terms,
    forest_weight,
    load_terms,
    set_partitions,
    terms_from_json,
    terms_to_json,
)


def brute_force(F: WeightedForest, h, exact=False):
    """Nested enumeration over injective vertex assignments."""
    N = len(h)
    conv = (lambda v: Fraction(v)) if exact else float
    inv_n = Fraction(1, N) if exact else 1.0 / N
    h = [[conv(v) for v in row] for row in np.asarray(h)]
    total = conv(0)
    for xs in itertools.permutations(range(N), F.vertex_count):
        prod = conv(1)
        for u, v, s in F.edges:
            w = h[xs[u]][xs[v]] ** (s + 1)
            if s == 1:
                w -= inv_n
            prod *= w
        total += prod
    return total / (conv(N) ** F.theta if not exact else Fraction(N) ** F.theta)


def dyadic_matrix(N, seed):
    """Symmetric matrix with entries in (1/4)Z, so every partial sum is exact."""
    rng = np.random.default_rng(seed)
    a = rng.integers(-4, 5, size=(N, N)) / 4.0
    return np.triu(a) + np.triu(a, 1).T


def test_forest_validation():
    assert WeightedForest(3, ((0, 1, 1),)).theta == 2
    assert BUILTIN_FORESTS["pair_1_1"].theta == 2
    assert BUILTIN_FORESTS["path_1_3"].total_weight == 6
    for bad in [
        (2, ((0, 0, 1),)),
        (2, ((0, 1, 2),)),
        (2, ((0, 1, 1), (1, 0, 1))),
        (3, ((0, 1, 1), (1, 2, 1), (2, 0, 1))),
        (2, ((0, 5, 1),)),
    ]:
        with pytest.raises(InvalidForest):
            WeightedForest(*bad)
    with pytest.raises(TooManyVertices):
        forest_weight(WeightedForest(5, ((0, 1, 1),)), np.zeros((6, 6)))


def test_set_partitions_are_bell_numbers():
    assert [sum(1 for _ in set_partitions(range(n))) for n in range(6)] == [1, 1, 2, 5, 15, 52]


def test_single_edge_examples():
    h = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert forest_weight(BUILTIN_FORESTS["edge_1"], h) == 0.5
    assert forest_weight(BUILTIN_FORESTS["edge_3"], np.zeros((5, 5))) == 0.0


def test_path_matches_triple_loop():
    h = np.random.default_rng(3).normal(size=(4, 4))
    h = (h + h.T) / 2
    F = BUILTIN_FORESTS["path_1_1"]
    assert forest_weight(F, h) == pytest.approx(brute_force(F, h), rel=1e-13)


@pytest.mark.parametrize("name", sorted(BUILTIN_FORESTS))
@pytest.mark.parametrize("N", [2, 4, 8, 16])
def test_builtin_forests_exact_on_dyadic_input(name, N):
    F = BUILTIN_FORESTS[name]
    h = dyadic_matrix(N, seed=N)
    assert forest_weight(F, h) == brute_force(F, h)


@pytest.mark.parametrize("name", [n for n, F in sorted(BUILTIN_FORESTS.items()) if F.vertex_count <= 3])
def test_builtin_forests_against_rational_oracle_at_n30(name):
    F = BUILTIN_FORESTS[name]
    h = dyadic_matrix(30, seed=1)
    exact = brute_force(F, h, exact=True)
    assert forest_weight(F, h) == pytest.approx(float(exact), rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 4),
    st.data(),
    st.integers(2, 7),
)
def test_random_forests_match_brute_force(nv, data, N):
    perm = data.draw(st.permutations(range(nv)))
    edges = []
    for v in range(1, nv):
        if data.draw(st.booleans()):
            parent = data.draw(st.integers(0, v - 1))
            edges.append((perm[parent], perm[v], data.draw(st.sampled_from([1, 3, 5]))))
    F = WeightedForest(nv, tuple(edges))
    h = dyadic_matrix(N, seed=data.draw(st.integers(0, 1000)))
    got = forest_weight(F, h)
    want = float(brute_force(F, h, exact=True))
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_zero_matrix_correction():
    N = 7
    Q = build_correction(np.zeros((N, N)))
    assert Q[2] == pytest.approx(-(N - 1) / N, rel=1e-14)
    assert Q[4] == 0.0


def test_a2_has_mean_zero_on_er():
    N, q = 200, 200**0.3
    params = ens.EnsembleParams(N, q=q)
    a2 = np.array([build_correction(ens.sample(params, s))[2] for s in range(1000)])
    se = a2.std(ddof=1) / math.sqrt(a2.size)
    assert abs(a2.mean()) < 5 * se


def test_a2_closed_form():
    h = ens.sample(ens.EnsembleParams(50, q=3.0), 4).entries
    N = 50
    off = ~np.eye(N, dtype=bool)
    direct = np.sum(h[off] ** 2 - 1 / N) / N
    assert build_correction(h)[2] == pytest.approx(direct, rel=1e-12)


def test_term_json_round_trip(tmp_path):
    terms = default_terms() + [ForestTerm(BUILTIN_FORESTS["path_1_3"], -0.25)]
    data = terms_to_json(terms)
    assert terms_from_json(json.loads(json.dumps(data))) == terms
    p = tmp_path / "terms.json"
    p.write_text(json.dumps(data))
    assert load_terms(p) == terms
    with pytest.raises(InvalidForest):
        terms_from_json([{"vertices": 2}])
    Q = build_correction(dyadic_matrix(6, 0), terms)
    assert Q.L == 3


def test_max_weight_guard():
    with pytest.raises(InvalidForest):
        build_correction(np.zeros((3, 3)), [ForestTerm(WeightedForest.single_edge(9))])
