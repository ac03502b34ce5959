"""Brute-force oracles for the two planar measure-theoretic lemmas.

Both live in a plane with three unit normals summing to zero, so that
``x . nu_3 = -x . nu_1 - x . nu_2``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..intervals import IntervalSet
from ..strain_space import SpaceDiagonal, diagonal, oriented_triple
from ..fields import plane_basis

RASTER = 2048


def standard_triple():
    """Unit vectors at 120 degrees in the plane."""
    ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    return np.column_stack([np.cos(ang), np.sin(ang)])


def planar_triple(d):
    """Oriented normals of a space diagonal expressed in a basis of the plane orthogonal to it."""
    d = diagonal(d) if not isinstance(d, SpaceDiagonal) else d
    (n1, n2, n3), eps = oriented_triple(d)
    t1, t2 = plane_basis(np.asarray(d.vector, dtype=float))
    return np.array([[e * nu.v @ t1, e * nu.v @ t2] for nu, e in zip((n1, n2, n3), eps)])


def _check_triple(nus):
    nus = np.asarray(nus, dtype=float)
    if nus.shape != (3, 2):
        raise ValueError("normal triple must be three planar vectors")
    if np.abs(nus.sum(axis=0)).max() > 1e-9 or np.abs(np.linalg.norm(nus, axis=1) - 1).max() > 1e-9:
        raise ValueError("normals must be unit vectors summing to zero")
    if abs(np.linalg.det(nus[:2])) < 1e-9:
        raise ValueError("degenerate normals: nu_1 and nu_2 are parallel")
    return nus


@dataclass
class IntervalVerdict:
    applicable: bool
    holds: bool = False
    orientation: str = ""
    x0: tuple = ()
    anchors: tuple = ()
    symmetric_difference: tuple = ()
    tolerance: float = 0.0
    diagnostic: dict = field(default_factory=dict)

    def to_json(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _raster(r, n):
    c = -r + (np.arange(n) + 0.5) * (2 * r / n)
    X, Y = np.meshgrid(c, c, indexing="xy")
    inside = X * X + Y * Y <= r * r
    return X[inside], Y[inside], (2 * r / n) ** 2


def interval_lemma_oracle(J, r, nus=None, raster=RASTER):
    """Check the interval lemma for sets ``J = (J1, J2, J3)`` on ``B(0, r)``.

    Assumptions, measured on a ``raster x raster`` grid of the disc: both sets
    ``{x . nu_i in J_i for all i}`` and ``{x . nu_i not in J_i for all i}`` are
    null up to ``tol`` cells, and ``0 < |J_k & [-r/2, r/2]| < r`` for
    ``k = 1, 2``.  Conclusion: ``J_i & [-r, r]`` equals ``[-r, x0 . nu_i]`` for
    all ``i`` or ``[x0 . nu_i, r]`` for all ``i``, up to two raster cells per
    boundary point.
    """
    nus = _check_triple(standard_triple() if nus is None else nus)
    J = [j if isinstance(j, IntervalSet) else IntervalSet(j) for j in J]
    if len(J) != 3:
        raise ValueError("three interval sets are required")
    cell = 2 * r / raster
    X, Y, area = _raster(r, raster)
    inJ = [J[k].contains(X * nus[k, 0] + Y * nus[k, 1]) for k in range(3)]
    all_in = float(np.count_nonzero(inJ[0] & inJ[1] & inJ[2])) * area
    all_out = float(np.count_nonzero(~inJ[0] & ~inJ[1] & ~inJ[2])) * area
    # a null set of the plane may still hit O(raster) cells along a line; allow a few lines' worth
    tol_meas = 4.0 * raster * area
    half = [J[k].clip(-r / 2, r / 2).measure for k in range(2)]
    diag = {"triple_in_measure": all_in, "triple_out_measure": all_out, "tol_meas": tol_meas,
            "half_measures": half}
    if all_in > tol_meas or all_out > tol_meas or not all(0 < m < r for m in half):
        return IntervalVerdict(False, diagnostic=diag)
    # 1-D rasterization of each J_i on [-r, r]
    t = -r + (np.arange(raster) + 0.5) * cell
    ind = [J[k].contains(t) for k in range(3)]
    best = None
    for side in ("lower", "upper"):
        anchors = [(-r + m * cell) if side == "lower" else (r - m * cell) for m in (x.sum() for x in ind)]
        x0, *_ = np.linalg.lstsq(nus, np.array(anchors), rcond=None)
        c = nus @ x0
        sd = []
        for k in range(3):
            ref = (t <= c[k]) if side == "lower" else (t >= c[k])
            sd.append(float(np.count_nonzero(ref != ind[k])) * cell)
        score = sum(sd)
        if best is None or score < best[0]:
            best = (score, side, x0, c, sd)
    _, side, x0, c, sd = best
    nb = [max(1, len(J[k].clip(-r, r).breakpoints)) for k in range(3)]
    ok = all(sd[k] <= 2 * cell * nb[k] + 1e-12 for k in range(3))
    diag["raster_cell"] = cell
    return IntervalVerdict(True, ok, side, tuple(map(float, x0)), tuple(map(float, c)), tuple(sd),
                           2 * cell, diag)


@dataclass
class SurfaceBound:
    M: IntervalSet
    measure_M: float
    measure_sum: float
    holds: bool


def surface_measure_bound(K1, K2, nus=None):
    """``M = -(K1 + K2)``: levels ``x . nu_3 = s`` meeting the product set in positive length.

    For finite interval unions the Minkowski sum is exact, and
    ``|M| >= |K1| + |K2|``.
    """
    _check_triple(standard_triple() if nus is None else nus)
    if not (K1.measure > 0 and K2.measure > 0):
        raise ValueError("both sets need positive measure")
    M = K1.minkowski_sum(K2).negate()
    mM, ms = M.measure, K1.measure + K2.measure
    return SurfaceBound(M, mM, ms, mM >= ms - 1e-12 * max(1.0, ms))
