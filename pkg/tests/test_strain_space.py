import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martensite.strain_space import (
    DIAGONALS, NORMALS, NotInStrainSpaceError, SymStrain, VolumeFractions, ZeroDifferenceError,
    austenite_compatible_fractions, cyc, dependent_triple, diagonal, diagonals_orthogonal_to,
    dist_theta_to_K, dist_to_K, family_normals, martensite_strain, normals_orthogonal_to,
    oriented_triple, rank_one_connect, strain_of_theta, sym_product, theta_of_strain,
)


def test_variant_strains_trace_free():
    for i in (1, 2, 3):
        assert np.trace(martensite_strain(i).matrix) == 0.0
    assert np.array_equal(martensite_strain(1).diagonal, [-2, 1, 1])
    assert np.all(martensite_strain(0).matrix == 0)


def test_variant_index_rejected():
    with pytest.raises(ValueError):
        martensite_strain(4)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_rank_one_table(i):
    # e_{i+1} - e_i = 6 nu_k^+ (.) nu_k^- with k the remaining family
    k = cyc(i, 2)
    lhs = martensite_strain(cyc(i, 1)).matrix - martensite_strain(i).matrix
    npl, nmi = family_normals(k)
    assert np.abs(lhs - 6 * sym_product(npl.v, nmi.v)).max() <= 1e-12


def test_rank_one_connect_recovers_twin_normals():
    conns = rank_one_connect(martensite_strain(2), martensite_strain(1))
    assert len(conns) == 2
    got = {tuple(np.round(c.normal, 12)) for c in conns}
    want = {tuple(np.round(NORMALS["nu3+"].v, 12)), tuple(np.round(NORMALS["nu3-"].v, 12))}
    assert got == want
    D = martensite_strain(2).matrix - martensite_strain(1).matrix
    for c in conns:
        assert np.abs(c.reconstruct() - D).max() <= 1e-12


def test_rank_one_connect_zero_difference():
    with pytest.raises(ZeroDifferenceError):
        rank_one_connect(martensite_strain(1), martensite_strain(1))


def test_rank_one_connect_none_for_austenite_to_variant_mixture():
    # a full-rank trace-free difference with nonzero middle eigenvalue
    assert rank_one_connect(SymStrain.diag((1, 2, -3)), SymStrain.diag((0, 0, 0))) == ()


def test_rank_one_connect_rank_one_case():
    n = np.array([1.0, 2.0, 2.0]) / 3.0
    conns = rank_one_connect(np.outer(n, n) * 2.0, np.zeros((3, 3)))
    assert len(conns) == 1
    assert np.allclose(np.abs(conns[0].normal), n)


_sym = st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6)


def _mat(v):
    return np.array([[v[0], v[3], v[4]], [v[3], v[1], v[5]], [v[4], v[5], v[2]]])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_rank_one_connect_symmetric(a, n):
    a, n = np.array(a), np.array(n)
    if np.linalg.norm(n) < 1e-2 or np.linalg.norm(a) < 1e-2:
        return
    D = sym_product(a, n)
    if np.abs(D).max() < 1e-6:
        return
    ab = rank_one_connect(D, np.zeros((3, 3)))
    ba = rank_one_connect(np.zeros((3, 3)), D)
    assert len(ab) == len(ba) >= 1
    key = lambda cs: sorted(tuple(np.round(c.normal, 6)) for c in cs)
    assert key(ab) == key(ba)
    for c in ab:
        assert np.abs(c.reconstruct() - D).max() <= 1e-8 * max(1.0, np.abs(D).max())
        assert abs(np.linalg.norm(c.normal) - 1) < 1e-12


@pytest.mark.parametrize("i,j", [p for p in itertools.permutations((1, 2, 3), 2)])
def test_austenite_fractions(i, j):
    got = austenite_compatible_fractions(i, j)
    assert len(got) == 2
    assert abs(got[0] - 1 / 3) <= 1e-9 and abs(got[1] - 2 / 3) <= 1e-9


def test_austenite_fractions_rejects_equal():
    with pytest.raises(ValueError):
        austenite_compatible_fractions(2, 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_theta_strain_roundtrip(a, b):
    if a + b > 1:
        a, b = 1 - a, 1 - b
    t = (a, b, 1 - a - b)
    back = theta_of_strain(strain_of_theta(t)).theta
    assert np.allclose(back, t, atol=1e-9)


def test_not_in_S_is_reported():
    with pytest.raises(NotInStrainSpaceError, match="off-diagonal"):
        theta_of_strain(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0.0]]))
    with pytest.raises(NotInStrainSpaceError, match="trace"):
        theta_of_strain(SymStrain.diag((1, 1, 1)))


def test_strain_of_theta_requires_normalization():
    with pytest.raises(ValueError):
        strain_of_theta((0.5, 0.5, 0.5))


def test_K_tilde_membership():
    assert VolumeFractions((0.3, 0.7, 0.0)).in_K_tilde()
    assert not VolumeFractions((1 / 3, 1 / 3, 1 / 3)).in_K_tilde()


def test_dist_to_K_values():
    assert dist_to_K(martensite_strain(1)) == 0.0
    # austenite: distance of the centroid to an edge midpoint, times three
    assert math.isclose(dist_to_K(martensite_strain(0)), 3 * math.sqrt(1 / 6), rel_tol=1e-12)
    mid = 0.5 * (martensite_strain(1).matrix + martensite_strain(2).matrix)
    assert dist_to_K(mid) <= 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(-0.5, 1.5), st.floats(-0.5, 1.5))
def test_dist_theta_to_K_matches_brute_force(a, b, c):
    t = np.array([a, b, c])
    s = np.linspace(0, 1, 4001)
    best = math.inf
    for x, y in ((0, 1), (1, 2), (2, 0)):
        pts = np.zeros((s.size, 3))
        pts[:, x] = 1 - s
        pts[:, y] = s
        best = min(best, float(np.linalg.norm(pts - t, axis=1).min()))
    assert dist_theta_to_K(t) <= best + 1e-12
    assert dist_theta_to_K(t) >= best - 3e-4


def test_combinatorics():
    for nu in NORMALS.values():
        assert len(diagonals_orthogonal_to(nu)) == 2
    for d in DIAGONALS:
        for i in (1, 2, 3):
            assert sum(abs(nu.v @ d.v) < 1e-12 for nu in family_normals(i)) == 1


def test_dependent_triple_example():
    c, d, eps = dependent_triple(NORMALS["nu1+"], NORMALS["nu2+"])
    assert c.name == "nu3-" and d.name == "[11-1]" and eps == (1, -1, 1)


def test_dependent_triple_exhaustive():
    count = 0
    for i in (1, 2, 3):
        for a, b in itertools.product(family_normals(i), family_normals(cyc(i, 1))):
            c, d, eps = dependent_triple(a, b)
            assert c.family == cyc(i, -1)
            assert np.allclose(eps[0] * a.v + eps[1] * b.v + eps[2] * c.v, 0)
            for nu in (a, b, c):
                assert abs(nu.v @ d.v) < 1e-12
            count += 1
    assert count == 12
    with pytest.raises(ValueError):
        dependent_triple(NORMALS["nu1+"], NORMALS["nu1-"])


@pytest.mark.parametrize("d", DIAGONALS, ids=lambda d: d.name)
def test_oriented_triple_angles(d):
    nus, eps = oriented_triple(d)
    v = [e * nu.v for nu, e in zip(nus, eps)]
    assert np.allclose(sum(v), 0)
    for x, y in itertools.combinations(v, 2):
        assert math.isclose(x @ y, -0.5, abs_tol=1e-12)
    assert [nu.family for nu in normals_orthogonal_to(d)] == [1, 2, 3]


def test_diagonal_parsing():
    assert diagonal("[1-11]").vector == (1, -1, 1)
    assert diagonal((-1, -1, -1)).name == "[111]"
    with pytest.raises(ValueError):
        diagonal((1, 0, 1))
