import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martensite.fields import Grid, GridField, Profile1D
from martensite.intervals import IntervalSet
from martensite.rigidity import (
    HypothesisError, almost_affine_fit, bmo_modulus, interval_lemma_oracle, mollify_distance,
    propagate_extremum_2d, propagate_extremum_3d, surface_measure_bound, vmo_flag, worst_case_field,
)
from martensite.rigidity.extremum import line_polyhedron
from martensite.rigidity.lemmas import planar_triple, standard_triple
from martensite.strain_space import NORMALS, martensite_strain

SQ2 = math.sqrt(2)
SCALES = [0.1, 0.01, 0.001]


# ---------------------------------------------------------------- almost affine


def test_almost_affine_affine_input():
    g = 0.3 - 2.0 * np.linspace(0, 1, 41)
    fit = almost_affine_fit(g)
    assert fit.epsilon <= 1e-14 and fit.error <= 1e-14 and fit.holds


def test_almost_affine_square():
    t = np.linspace(0, 1, 101)
    fit = almost_affine_fit(t ** 2)
    assert math.isclose(fit.epsilon, 0.5, rel_tol=1e-12)
    assert fit.witness[1] == pytest.approx(0.5) and fit.witness[2] == pytest.approx(0.5)
    assert math.isclose(fit.error, 0.25, rel_tol=1e-12)
    assert np.allclose(fit(t), t)
    assert fit.holds


def test_almost_affine_small_step():
    s = 1e-3
    g = np.where(np.linspace(0, 1, 64) >= 0.37, s, 0.0)
    fit = almost_affine_fit(g)
    assert math.isclose(fit.epsilon, s, rel_tol=1e-12)
    assert fit.error <= 1.5 * math.sqrt(s * s) + 2 * s
    assert fit.holds


def test_almost_affine_rejects_short_input():
    with pytest.raises(ValueError):
        almost_affine_fit([0.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=40))
def test_almost_affine_bound_on_arbitrary_samples(g):
    assert almost_affine_fit(g).holds


# ---------------------------------------------------------------- oscillation


def test_bmo_constant_step_linear():
    c = Profile1D.constant(0.7, (-1, 1))
    assert max(bmo_modulus(c, SCALES).values) <= 1e-15
    step = Profile1D.indicator(IntervalSet(((0.0, 1.0),)), domain=(-1, 1))
    m = bmo_modulus(step, SCALES)
    assert np.allclose(m.values, 0.5, atol=1e-12)
    assert np.allclose(m.centers, 0.0)
    lin = bmo_modulus(Profile1D.linear(1.0, 0.0, (-1, 1)), SCALES)
    assert np.allclose(lin.values, np.array(SCALES) / 2, rtol=1e-9)


def test_bmo_errors():
    with pytest.raises(ValueError, match="empty"):
        bmo_modulus(Profile1D.constant(0.0, (-1, 1)), [])
    with pytest.raises(ValueError, match="subsamples"):
        bmo_modulus(Profile1D.constant(0.0, (-1, 1)), [0.1], subsamples=8)


def test_bmo_samples_match_profile():
    t = np.linspace(-1, 1, 20001)
    m = bmo_modulus((t, np.where(t >= 0, 1.0, 0.0)), SCALES)
    # an odd node count per window puts the jump off-centre by one node
    assert np.allclose(m.values, 0.5, atol=0.02)
    lin = bmo_modulus((t, 2 * t), SCALES)
    assert np.allclose(lin.values, SCALES, rtol=0.02)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=6, unique=True), st.floats(-0.8, 0.2),
       st.floats(0.3, 0.7))
def test_bmo_monotone_under_restriction(bps, lo, length):
    vals = np.arange(len(bps) + 1) % 2 * 1.0
    f = Profile1D.piecewise_constant(sorted(bps), vals, (-1, 1))
    full = bmo_modulus(f, [0.2, 0.05, 0.01])
    sub = bmo_modulus(f, [0.2, 0.05, 0.01], domain=(lo, lo + length))
    # sub-interval centres are a subset up to the centre raster; allow quadrature slack
    assert all(s <= v + 2.0 / 64 for s, v in zip(sub.values, full.values))


def test_vmo_flag_step_and_lipschitz():
    step = vmo_flag(bmo_modulus(Profile1D.indicator(IntervalSet(((0.0, 1.0),)), domain=(-1, 1)), SCALES))
    assert not step and abs(step.limit - 0.5) <= 0.02
    for k in (0.5, 3.0, 10.0):
        v = vmo_flag(bmo_modulus(Profile1D.interpolant([-1, 0, 1], [0, k / 10, -k / 10], (-1, 1)), SCALES))
        assert v.vmo and v.limit <= 0.05


def test_vmo_flag_needs_a_decade():
    with pytest.raises(ValueError):
        vmo_flag(bmo_modulus(Profile1D.constant(0.0, (-1, 1)), [0.1, 0.05, 0.02]))


def _spikes(width):
    c = 2.0 ** -np.arange(1, 12)
    w = width(c)
    return Profile1D.indicator(IntervalSet(tuple(zip(c, c + w))), domain=(-1, 1))


def test_vmo_spike_family():
    # width comparable to the scale: unit jumps stay visible
    assert not vmo_flag(bmo_modulus(_spikes(lambda c: 0.25 * c), SCALES))
    assert not vmo_flag(bmo_modulus(_spikes(lambda c: np.full_like(c, 1e-3)), SCALES))
    # far thinner than every scale: the finite-scale surrogate cannot see them
    v = vmo_flag(bmo_modulus(_spikes(lambda c: np.full_like(c, 1e-6)), SCALES, subsamples=4096))
    assert v.vmo


def test_mollify_distance():
    K = np.stack([martensite_strain(i).diagonal for i in (1, 2, 3)])
    edges = np.array([[K[0], K[1]], [K[1], K[2]], [K[2], K[0]]])
    t = np.linspace(-1, 1, 2001)
    const = np.broadcast_to(K[1], (t.size, 3))
    assert mollify_distance(t, const, edges, 0.01).sup == 0.0
    # K-valued step between e_2 and e_3: the window mean at the jump leaves the edge
    step = np.where((t >= 0)[:, None], K[2], K[1])
    gap = np.linalg.norm(K[2] - K[1])
    for delta in (0.2, 0.05, 0.01, 0.002):
        m = mollify_distance(t, step, K, delta)
        assert m.sup >= 0.4 * gap and abs(m.where) <= 2 * (t[1] - t[0])
    # continuous path along an edge: distance to the edge vanishes
    s = 0.5 + 0.5 * np.sin(3 * t)
    path = (1 - s)[:, None] * K[0] + s[:, None] * K[1]
    assert mollify_distance(t, path, edges, 0.01).sup <= 1e-12
    # against the vertices the same path decays with delta
    arc = np.cos(1.5 * t)[:, None] * np.array([1.0, 0, 0]) + np.sin(1.5 * t)[:, None] * np.array([0, 1.0, 0])
    circle = np.stack([np.cos(np.linspace(0, 2 * np.pi, 4001)), np.sin(np.linspace(0, 2 * np.pi, 4001)),
                       np.zeros(4001)], -1)
    d = [mollify_distance(t, arc, circle, delta).sup for delta in (0.1, 0.05, 0.025)]
    assert d[0] > d[1] > d[2] and d[2] <= 1e-3
    with pytest.raises(ValueError, match="spacing"):
        mollify_distance(t, step, K, 1e-4)
    with pytest.raises(ValueError, match="larger"):
        mollify_distance(t, step, K, 1.5)


# ---------------------------------------------------------------- extremum 2-D


def test_extremum_2d_trivial():
    z = np.zeros(11)
    r = propagate_extremum_2d(z, z, 0.0, 0.0)
    assert r.holds and r.slack == 0.0


def test_extremum_2d_cautionary_difference():
    # F(x, y) = x - y: zero on the diagonal, but the box lower bound fails
    t = np.linspace(-1, 1, 21)
    with pytest.raises(HypothesisError, match=">= c"):
        propagate_extremum_2d(t, -t, 0.0, 0.0)


def test_extremum_2d_box_hypothesis_rejected():
    t = np.linspace(0, 1, 11)
    with pytest.raises(HypothesisError, match="box"):
        propagate_extremum_2d(t, t, 0.0, 0.5, mode="box")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_extremum_2d_random(seed):
    rng = np.random.default_rng(seed)
    eps = 0.01
    f = rng.uniform(0, eps, 50)
    g = rng.uniform(0, eps, 50)
    f -= f.min()
    g -= g.min()
    scale = eps / max(np.max(f + g), 1e-300)
    f, g = f * min(1.0, scale), g * min(1.0, scale)
    r = propagate_extremum_2d(f, g, 0.0, eps)
    assert r.holds and r.slack >= -1e-12
    assert r.osc_f <= eps + 1e-12 and r.osc_g <= eps + 1e-12


# ---------------------------------------------------------------- extremum 3-D


@pytest.mark.parametrize("i", [1, 2, 3])
def test_polyhedron_vertices(i):
    P = line_polyhedron((0, 0, 0), i, (-1, 1))
    v = P.vertices()
    want = [SQ2 * np.eye(3)[i - 1], -SQ2 * np.eye(3)[i - 1]]
    for s in "+-":
        nu = NORMALS[f"nu{i}{s}"].v
        want += [2 * nu, -2 * nu]
    assert len(v) == 6
    for w in want:
        assert np.min(np.linalg.norm(v - w, axis=1)) <= 1e-9
    assert P.contains(P.interior_point())


def test_extremum_3d_zero_channel():
    g = Grid(17)
    z = GridField(g, np.zeros(g.shape))
    prof = {k: np.zeros(2 * g.n - 1) for k in NORMALS}
    r = propagate_extremum_3d(z, (0, 0, 0), 2, (-1, 1), 0.0, profiles=prof)
    assert r.holds and r.max_in_P == 0.0 and r.nodes_in_P > 0
    assert all(v["holds"] for v in r.almost_affine.values())


def test_extremum_3d_perturbed_field():
    g = Grid(17)
    eps = 0.01
    x = g.points()
    # affine profile sum in theta_1 for normals of families 2 and 3
    th = eps * 0.5 * (1 + x @ (NORMALS["nu2+"].v + NORMALS["nu3-"].v) / 2) / 2
    r = propagate_extremum_3d(GridField(g, th), (0, 0, 0), 1, (-0.5, 0.5), eps)
    assert r.holds and r.max_in_P <= 6 * eps
    up = propagate_extremum_3d(GridField(g, 1.0 - th), (0, 0, 0), 1, (-0.5, 0.5), eps, mode="upper")
    assert up.holds


def test_extremum_3d_hypothesis_failure():
    g = Grid(9)
    with pytest.raises(HypothesisError, match="line"):
        propagate_extremum_3d(GridField(g, np.full(g.shape, 0.5)), (0, 0, 0), 1, (-1, 1), 0.1)


def test_worst_case_field_regression():
    # largest attainable value at the nodes of P on this grid; the lemma's constant is 6
    f, ratio = worst_case_field(Grid(13), 1, 0.01, targets=16)
    assert 3.9 <= ratio <= 6.0 + 1e-9
    r = propagate_extremum_3d(f, (0, 0, 0), 1, (-0.5, 0.5), 0.01)
    assert r.holds
    with pytest.raises(ValueError, match="cube"):
        worst_case_field(Grid(9), 1, 0.01, interval=(-1.0, 1.0))


# ---------------------------------------------------------------- planar lemmas


def test_interval_lemma_symmetric_case():
    v = interval_lemma_oracle([IntervalSet(((-1.0, 0.0),))] * 3, 1.0)
    assert v.applicable and v.holds and v.orientation == "lower"
    assert np.allclose(v.x0, 0.0, atol=2e-3)


def test_interval_lemma_shifted_case():
    nus = standard_triple()
    x0 = np.linalg.solve(nus[:2], [0.1, -0.2])
    c = nus @ x0
    assert math.isclose(c[2], 0.1, abs_tol=1e-12)
    J = [IntervalSet(((-1.0, ci),)) for ci in c]
    v = interval_lemma_oracle(J, 1.0)
    assert v.applicable and v.holds
    assert np.allclose(v.x0, x0, atol=2e-3)


def test_interval_lemma_not_applicable():
    full = IntervalSet(((-2.0, 2.0),))
    assert not interval_lemma_oracle([full] * 3, 1.0).applicable
    with pytest.raises(ValueError, match="unit"):
        interval_lemma_oracle([full] * 3, 1.0, nus=np.array([[1.0, 0], [-1.0, 0], [0, 0.0]]))


def test_planar_triple_is_standard():
    from martensite.strain_space import DIAGONALS
    for d in DIAGONALS:
        nus = planar_triple(d)
        assert np.allclose(nus.sum(0), 0) and np.allclose(np.linalg.norm(nus, axis=1), 1)


def test_surface_measure_examples():
    u = IntervalSet(((0.0, 1.0),))
    b = surface_measure_bound(u, u)
    assert b.M.intervals == ((-2.0, 0.0),) and b.measure_M == 2.0 and b.holds
    b = surface_measure_bound(u, IntervalSet(((0.0, 1.0), (5.0, 6.0))))
    assert b.measure_M >= 3 and b.holds
    with pytest.raises(ValueError):
        surface_measure_bound(u, IntervalSet(()))


def _union(rng):
    pts = np.sort(rng.uniform(-3, 3, 2 * rng.integers(1, 4)))
    return IntervalSet(tuple(zip(pts[0::2], pts[1::2])))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_surface_measure_property(seed):
    rng = np.random.default_rng(seed)
    K1, K2 = _union(rng), _union(rng)
    if K1.measure == 0 or K2.measure == 0:
        return
    assert surface_measure_bound(K1, K2).holds
