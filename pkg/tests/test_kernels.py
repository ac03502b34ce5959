import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martensite import _kernels_py as py
from martensite import kernels

cy = pytest.importorskip("martensite._kernels", reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND == "cython"
    assert kernels.aa_epsilon is cy.aa_epsilon
    assert kernels.face_tv is py.face_tv


def test_pure_python_switch():
    code = "import martensite.kernels as k; print(k.BACKEND, k.aa_epsilon.__module__)"
    env = dict(os.environ, MARTENSITE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "martensite._kernels_py"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=60))
def test_aa_epsilon_parity(g):
    a, b = py.aa_epsilon(np.array(g)), cy.aa_epsilon(np.array(g))
    assert a[0] == pytest.approx(b[0], abs=1e-12)


def test_aa_epsilon_square():
    t = np.linspace(0, 1, 51)
    for impl in (py, cy):
        eps, i, j, k = impl.aa_epsilon(t ** 2)
        assert eps == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_window_oscillation_parity(seed, k):
    v = np.random.default_rng(seed).normal(size=200)
    assert np.allclose(py.window_oscillation(v, k), cy.window_oscillation(v, k), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_face_jumps_parity(seed, wrap):
    c = np.random.default_rng(seed).integers(0, 2, (17, 23)).astype(np.int8)
    for a, b in zip(py.face_jumps_2d(c, wrap), cy.face_jumps_2d(c, wrap)):
        assert np.array_equal(np.asarray(a), np.asarray(b))


def test_face_tv_counts():
    c = np.zeros((4, 4, 4), np.int8)
    c[:, :, 2:] = 1
    assert py.face_tv(c).sum() == 16
