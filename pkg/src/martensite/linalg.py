"""Eigen-decomposition of symmetric 3x3 matrices.

The characteristic cubic is solved in closed form (trigonometric branch).
The eigenvector of the isolated root comes from a cross product of two rows;
the remaining pair is a 2x2 rotation in its orthogonal complement.  When two
roots come closer than ``EIG_GAP`` a cyclic Jacobi sweep takes over.
"""

import math

import numpy as np

from .tolerances import EIG_GAP


def _jacobi(a, tol=1e-15, max_sweeps=50):
    a = np.array(a, dtype=float)
    v = np.eye(3)
    for _ in range(max_sweeps):
        off = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
        if off <= tol * tol * max(1.0, np.sum(a * a)):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if abs(a[p, q]) < 1e-300:
                continue
            tau = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            if abs(tau) > 1e150:
                t = 0.5 / tau  # tau^2 would overflow
            else:
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def _null_vector(m):
    # the largest cross product of two rows spans the kernel of a rank-2 matrix
    rows = [m[0], m[1], m[2]]
    best = None
    best_norm = -1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        c = np.cross(rows[i], rows[j])
        nc = float(np.dot(c, c))
        if nc > best_norm:
            best, best_norm = c, nc
    return best / math.sqrt(best_norm)


def cubic_roots(a):
    """Eigenvalues of symmetric ``a`` in ascending order, closed form."""
    a = np.asarray(a, dtype=float)
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    if p1 == 0.0:
        return np.sort(np.diag(a).copy())
    q = np.trace(a) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = min(1.0, max(-1.0, np.linalg.det(b) / 2.0))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.array([lo, mid, hi])


def eigh3(a):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    Parameters
    ----------
    a : array_like, shape (3, 3)
        Symmetric matrix.
    """
    a = np.asarray(a, dtype=float)
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not symmetric")
    if a[0, 1] == 0.0 and a[0, 2] == 0.0 and a[1, 2] == 0.0:
        d = np.diag(a).copy()
        order = np.argsort(d, kind="stable")
        return d[order], np.eye(3)[:, order]
    w = cubic_roots(a)
    scale = max(1.0, float(np.max(np.abs(w))))
    if min(w[1] - w[0], w[2] - w[1]) < EIG_GAP * scale:
        return _jacobi(a)
    # only the isolated root has a well-conditioned null vector; the close pair
    # is resolved by a 2x2 rotation on its orthogonal complement
    k = 0 if w[1] - w[0] > w[2] - w[1] else 2
    vk = _null_vector(a - w[k] * np.eye(3))
    p = np.cross(vk, np.eye(3)[int(np.argmin(np.abs(vk)))])
    p /= np.linalg.norm(p)
    q = np.cross(vk, p)
    b11, b22, b12 = p @ a @ p, q @ a @ q, p @ a @ q
    ang = 0.5 * math.atan2(2.0 * b12, b11 - b22)
    c, s = math.cos(ang), math.sin(ang)
    u1, u2 = c * p + s * q, -s * p + c * q
    pair = sorted(((u1 @ a @ u1, u1), (u2 @ a @ u2, u2)), key=lambda t: t[0])
    ws = [float(vk @ a @ vk)] + [t[0] for t in pair] if k == 0 else [t[0] for t in pair] + [float(vk @ a @ vk)]
    vs = [vk] + [t[1] for t in pair] if k == 0 else [t[1] for t in pair] + [vk]
    return np.array(ws), np.column_stack(vs)
