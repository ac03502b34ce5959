import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martensite.fields import (
    AffineMap, Decomposition, Grid, GridField, Profile1D, eval_decomposition, hyperplane_trace,
    profile_from_json, sample_to_grid, trilinear,
)
from martensite.generators import build_checkerboard, build_second_order_laminate
from martensite.intervals import IntervalSet
from martensite.strain_space import NORMALS, NORMAL_ORDER
from martensite.tolerances import TOL_FIELD

R = math.sqrt(2)


def test_grid_basics():
    g = Grid(5, 1.0)
    assert g.h == 0.5 and g.shape == (5, 5, 5)
    assert np.allclose(g.axis, [-1, -0.5, 0, 0.5, 1])
    p = g.points()
    assert p[0, 0, 1].tolist() == [-0.5, -1.0, -1.0]  # x varies fastest
    with pytest.raises(ValueError):
        Grid(2)


@pytest.mark.parametrize("name", NORMAL_ORDER)
def test_level_index_matches_projection(name):
    g = Grid(7, 1.3)
    nu = NORMALS[name]
    t = g.level_values(nu)[g.level_index(nu)]
    assert np.allclose(t, g.points() @ nu.v, atol=1e-14)


def test_profile_evaluation_right_continuous():
    p = Profile1D.piecewise_constant([0.0], [1.0, 2.0], (-1, 1))
    assert p(0.0) == 2.0 and p(-1e-12) == 1.0
    with pytest.raises(ValueError, match="outside profile domain"):
        p(1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(-0.9, 0.9))
def test_profile_integral_is_antiderivative(vals, x):
    p = Profile1D.interpolant([-1.0, -0.3, 0.4, 1.0], vals, (-1.0, 1.0))
    from scipy.integrate import quad
    ref = quad(lambda s: float(p(s)), 0.0, x, points=[-0.3, 0.4], limit=200)[0]
    assert abs(float(p.integral(x)) - ref) < 1e-10


def test_profile_range_and_algebra():
    p = Profile1D.linear(2.0, 1.0, (-1, 1))
    assert p.range_bounds() == (-1.0, 3.0)
    q = Profile1D.indicator(IntervalSet(((0.0, 0.5),)), 3.0, domain=(-1, 1))
    assert q.range_bounds() == (0.0, 3.0)
    s = p + q
    assert s(0.25) == p(0.25) + 3.0
    assert (p - p).is_affine() and not q.is_affine()
    assert q.times_linear(1.0, 0.0)(0.25) == 0.75


@pytest.mark.parametrize("obj", [
    {"kind": "zero"}, {"kind": "constant", "value": 0.3}, {"kind": "linear", "slope": 2, "intercept": 1},
    {"kind": "step", "set": {"intervals": [[0, 0.5]]}, "value": 2},
    {"kind": "piecewise-constant", "breakpoints": [0.1], "values": [1, 2]},
    {"kind": "interpolant", "knots": [-1, 0, 1], "values": [0, 1, 0]},
])
def test_profile_json_roundtrip(obj):
    p = profile_from_json(obj, (-1, 1))
    q = profile_from_json(p.to_json())
    t = np.linspace(-1, 1, 41)
    assert np.array_equal(p(t), q(t))


def test_decomposition_requires_trace_free_affines():
    with pytest.raises(ValueError, match="sum to zero"):
        Decomposition({}, (AffineMap(1.0), AffineMap(), AffineMap()))


def _random_decomposition(seed):
    rng = np.random.default_rng(seed)
    prof = {}
    for k in NORMAL_ORDER:
        prof[k] = Profile1D.interpolant(np.linspace(-R, R, 5), rng.uniform(-0.2, 0.2, 5), (-R, R))
    g1 = AffineMap(rng.uniform(-1, 1), tuple(rng.uniform(-0.1, 0.1, 3)))
    g2 = AffineMap(rng.uniform(-1, 1), tuple(rng.uniform(-0.1, 0.1, 3)))
    return Decomposition(prof, (g1, g2, -(g1 + g2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_partition_of_unity(seed):
    d = _random_decomposition(seed)
    x = np.random.default_rng(seed).uniform(-1, 1, (200, 3))
    assert np.abs(eval_decomposition(d, x).sum(-1) - 1).max() <= TOL_FIELD


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(NORMAL_ORDER), st.floats(-2, 2), st.floats(-2, 2))
def test_gauge_invariance(seed, name, slope, icpt):
    d = _random_decomposition(seed)
    x = np.random.default_rng(seed + 1).uniform(-1, 1, (200, 3))
    assert np.abs(d.regauged(name, slope, icpt).theta(x) - d.theta(x)).max() <= TOL_FIELD


def test_sample_to_grid_is_nodal_evaluation():
    d = _random_decomposition(4)
    g = Grid(9)
    assert np.abs(sample_to_grid(d, g).data - d.theta(g.points())).max() <= 1e-14


def test_hand_evaluated_linear_profile():
    # f along (110)/sqrt2 equal to t; theta from the row signs at the 27 nodes
    d = Decomposition({"nu3+": Profile1D.linear(1.0, 0.0, (-R, R))})
    g = Grid(3)
    th = sample_to_grid(d, g).data
    t = g.points() @ NORMALS["nu3+"].v
    e = d.strain_diagonal(g.points())
    assert np.allclose(th, (1 - e) / 3)
    # nu3+ enters rows 1 and 2 with opposite signs
    assert np.allclose(np.abs(e[..., 0]), np.abs(t)) and np.allclose(e[..., 0], -e[..., 1])


def test_double_resolution_restriction_is_exact():
    d = _random_decomposition(7)
    a = sample_to_grid(d, Grid(9)).data
    b = sample_to_grid(d, Grid(17)).data[::2, ::2, ::2]
    assert np.abs(a - b).max() <= 1e-15


def test_gridfield_rejects_nan_with_node():
    g = Grid(3, dim=2)
    data = np.zeros((3, 3, 1))
    data[2, 1, 0] = np.nan
    with pytest.raises(ValueError, match=r"node \(1, 2\)"):
        GridField(g, data)


def test_subcube():
    g = Grid(9)
    f = GridField(g, g.points()[..., 0])
    s = f.subcube(5)
    assert s.grid.half_width == 0.5
    assert np.allclose(s.data[..., 0], s.grid.points()[..., 0])
    with pytest.raises(ValueError):
        f.subcube(4)


def test_trace_constant_and_checkerboard():
    const = Decomposition({})
    tr = hyperplane_trace(const, 0.1, "nu1+", n=9)
    assert np.allclose(tr.data, [1 / 3, 1 / 3, 1 / 3])
    cb = build_checkerboard(1, "nu2+", "nu3-", IntervalSet(((-0.3, 0.5),)), IntervalSet(((0.1, 2),)), 0.4, 0.6)
    exact = hyperplane_trace(cb.decomposition, 0.05, "nu1+", n=17)
    errs = []
    for n in (33, 65):
        f = cb.theta(Grid(n))
        approx = hyperplane_trace(f, 0.05, "nu1+", n=17, half_width=exact.grid.half_width)
        # interpolation smears the jumps over one cell; compare the fraction of mismatching samples
        errs.append(np.mean(np.abs(approx.data - exact.data).max(-1) > 1e-9))
    assert errs[1] < errs[0]


def test_trace_well_posed_and_rejected():
    lam = build_second_order_laminate(2, "nu2+", IntervalSet(((-0.3, 0.4),)), 0.2, 0.4)
    # theta_2 = a t + b is affine along nu2+: its trace on a plane with that normal is fine
    tr = hyperplane_trace(lam.decomposition, 0.2, "nu2+", n=9, components=(1,))
    assert np.allclose(tr.data, 0.2 * 0.2 + 0.4)
    with pytest.raises(ValueError, match="ill-posed trace"):
        hyperplane_trace(lam.decomposition, 0.2, "nu2+", n=9, components=(0,))


def test_trilinear_exact_for_affine():
    g = Grid(5)
    f = GridField(g, g.points() @ np.array([1.0, -2.0, 0.5]))
    x = np.random.default_rng(0).uniform(-1, 1, (50, 3))
    assert np.allclose(trilinear(f, x)[..., 0], x @ np.array([1.0, -2.0, 0.5]))
    with pytest.raises(ValueError):
        trilinear(f, np.array([[2.0, 0, 0]]))
