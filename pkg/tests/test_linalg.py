import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martensite.linalg import cubic_roots, eigh3


def _sym(v):
    return np.array([[v[0], v[3], v[4]], [v[3], v[1], v[5]], [v[4], v[5], v[2]]])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6))
def test_eigh3_matches_numpy(v):
    a = _sym(v)
    w, V = eigh3(a)
    ref = np.linalg.eigvalsh(a)
    scale = max(1.0, np.abs(ref).max())
    assert np.allclose(w, ref, atol=1e-9 * scale)
    assert np.allclose(V.T @ V, np.eye(3), atol=1e-8)
    assert np.abs(a @ V - V * w).max() <= 1e-7 * scale


@pytest.mark.parametrize("gap", [0.0, 1e-9, 1e-7, 1e-6, 1e-5, 1e-3])
def test_near_degenerate_spectrum(gap):
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = Q @ np.diag([1.0, 1.0 + gap, -2.0]) @ Q.T
    a = 0.5 * (a + a.T)
    w, V = eigh3(a)
    assert np.allclose(w, np.sort([1.0, 1.0 + gap, -2.0]), atol=1e-12)
    assert np.allclose(V.T @ V, np.eye(3), atol=1e-10)
    assert np.abs(a @ V - V * w).max() <= 1e-10


def test_diagonal_and_rank_one():
    w, V = eigh3(np.diag([3.0, -1.0, 2.0]))
    assert list(w) == [-1.0, 2.0, 3.0]
    n = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    # the trigonometric roots of a double root are only sqrt(eps) accurate; eigh3 falls back to Jacobi
    assert np.allclose(cubic_roots(np.outer(n, n)), [0, 0, 1], atol=1e-7)
    w, V = eigh3(np.outer(n, n))
    assert np.allclose(w, [0, 0, 1], atol=1e-15)
    assert np.allclose(np.abs(V[:, 2]), n, atol=1e-15)


def test_tiny_off_diagonal_does_not_overflow():
    a = np.diag([1.0, 1.0, 2.0])
    a[0, 1] = a[1, 0] = 1e-200
    with np.errstate(over="raise"):
        w, V = eigh3(a)
    assert np.allclose(w, [1, 1, 2])


def test_rejects_non_symmetric():
    with pytest.raises(ValueError):
        eigh3(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0.0]]))
