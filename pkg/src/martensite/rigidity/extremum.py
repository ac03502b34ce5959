"""Propagation of near-extremal values from a line to a polyhedron.

In two dimensions: if ``f(x1) + g(x2) >= c`` everywhere and the sum is
within ``eps`` of ``c`` on the box (or on the diagonal), both functions are
within ``eps`` of their infima.  In three dimensions the same argument
applied to the four profiles of ``theta_i`` spreads a bound on a line
``x0 + sqrt2 t E_i`` to the polyhedron cut out by the slabs of their normals.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from ..fields import Decomposition, Grid, GridField, trilinear
from ..kernels import aa_epsilon
from ..strain_space import NORMALS, cyc, family_normals

_SQ2 = math.sqrt(2.0)


class HypothesisError(ValueError):
    """The input does not satisfy the lemma's hypotheses."""


# ---------------------------------------------------------------- 2-D


@dataclass
class Extremum2D:
    hypothesis: str
    slack: float
    inf_f: float
    inf_g: float
    osc_f: float
    osc_g: float
    holds: bool


def propagate_extremum_2d(f, g, c, epsilon, mode="diagonal", tol=1e-12):
    """Check the 2-D conclusion on samples ``f[k] = f(t_k)``, ``g[k] = g(t_k)``.

    ``mode='box'`` assumes ``f + g <= c + eps`` on the whole box, ``'diagonal'``
    only on ``x1 = x2``.  The lower bound ``f + g >= c`` is required on the box.
    """
    f = np.asarray(f, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    if mode not in ("box", "diagonal"):
        raise ValueError("mode must be 'box' or 'diagonal'")
    lo = f.min() + g.min()
    if lo < c - tol:
        raise HypothesisError(f"f(x1) + g(x2) >= c fails: minimum over the box is {lo:.6g} < c = {c:.6g}")
    if mode == "box":
        hi = f.max() + g.max()
    else:
        if f.size != g.size:
            raise ValueError("diagonal mode needs f and g on the same samples")
        hi = float(np.max(f + g))
    if hi > c + epsilon + tol:
        raise HypothesisError(f"{mode} hypothesis fails: sup of f + g is {hi:.6g} > c + eps = {c + epsilon:.6g}")
    osc_f = float(f.max() - f.min())
    osc_g = float(g.max() - g.min())
    gap = float(lo - c)
    worst = max(osc_f, osc_g, gap)
    return Extremum2D(mode, float(epsilon - worst), float(f.min()), float(g.min()), osc_f, osc_g,
                      worst <= epsilon + tol)


# ---------------------------------------------------------------- polyhedra


@dataclass
class Polyhedron:
    """Intersection of slabs ``lower <= n . x <= upper``."""

    slabs: tuple  # of (normal 3-vector, lower, upper)

    def halfspaces(self):
        # scipy convention: A x + b <= 0
        rows = []
        for n, lo, hi in self.slabs:
            n = np.asarray(n, dtype=float)
            rows.append(np.r_[n, -hi])
            rows.append(np.r_[-n, lo])
        return np.array(rows)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for n, lo, hi in self.slabs:
            s = x @ np.asarray(n, dtype=float)
            ok &= (s >= lo - tol) & (s <= hi + tol)
        return ok

    def interior_point(self):
        """Chebyshev centre by linear programming; ``None`` when the interior is empty."""
        from scipy.optimize import linprog

        H = self.halfspaces()
        A, b = H[:, :3], -H[:, 3]
        norms = np.linalg.norm(A, axis=1)
        res = linprog([0, 0, 0, -1], A_ub=np.column_stack([A, norms]), b_ub=b,
                      bounds=[(None, None)] * 3 + [(0, None)], method="highs")
        if res.status != 0 or res.x[3] <= 1e-12:
            return None
        return res.x[:3]

    def vertices(self):
        from scipy.spatial import HalfspaceIntersection

        x = self.interior_point()
        if x is None:
            raise ValueError("polyhedron has empty interior")
        hs = HalfspaceIntersection(self.halfspaces(), x)
        v = hs.intersections
        # merge duplicates produced by degenerate (more than three planes) vertices
        out = []
        for p in v:
            if not any(np.linalg.norm(p - q) < 1e-9 for q in out):
                out.append(p)
        return np.array(out)

    def to_json(self):
        return {"slabs": [[list(map(float, n)), float(lo), float(hi)] for n, lo, hi in self.slabs]}


def line_polyhedron(x0, i, interval):
    """Slabs ``nu . x in nu . l(I)`` for ``nu`` in ``N_{i+1}`` and ``N_{i-1}``, ``l(t) = x0 + sqrt2 t E_i``."""
    x0 = np.asarray(x0, dtype=float)
    t0, t1 = interval
    slabs = []
    for fam in (cyc(i, 1), cyc(i, -1)):
        for nu in family_normals(fam):
            base = float(nu.v @ x0)
            s = _SQ2 * nu.v[i - 1]
            a, b = sorted((base + s * t0, base + s * t1))
            slabs.append((tuple(nu.v), a, b))
    return Polyhedron(tuple(slabs))


# ---------------------------------------------------------------- 3-D


@dataclass
class Extremum3D:
    polyhedron: Polyhedron
    mode: str
    epsilon: float
    line_max: float
    max_in_P: float
    ratio: float
    nodes_in_P: int
    holds: bool
    snapped_x0: tuple
    almost_affine: dict = field(default_factory=dict)

    def to_json(self):
        return {"polyhedron": self.polyhedron.to_json(), "mode": self.mode, "epsilon": self.epsilon,
                "line_max": self.line_max, "max_in_P": self.max_in_P, "ratio": self.ratio,
                "nodes_in_P": self.nodes_in_P, "holds": self.holds, "x0": list(self.snapped_x0),
                "almost_affine": self.almost_affine}


def _line_nodes(grid, x0, i, interval):
    # snap x0 to the nearest node; nodes along E_i through it
    idx = np.clip(np.rint((np.asarray(x0, dtype=float) + grid.half_width) / grid.h), 0, grid.n - 1).astype(int)
    xs = grid.axis
    x0s = xs[idx]
    t = (xs - x0s[i - 1]) / _SQ2
    keep = (t >= interval[0] - 1e-12) & (t <= interval[1] + 1e-12)
    sl = [idx[2], idx[1], idx[0]]
    sl[2 - (i - 1)] = slice(None)
    return tuple(x0s), tuple(sl), keep


def propagate_extremum_3d(theta_i, x0, i, interval, epsilon, mode="lower", profiles=None):
    """Verify ``theta_i <= 6 eps`` (``mode='lower'``) or ``>= 1 - 6 eps`` on the polyhedron.

    Parameters
    ----------
    theta_i : GridField
        One channel of a volume-fraction field.
    x0, i, interval :
        The line ``x0 + sqrt2 t E_i``, ``t`` in ``interval``; ``x0`` is snapped
        to the nearest node and only nodes on the line are tested.
    profiles : dict, optional
        Strain profiles at the grid levels (as returned by recovery); when
        given, each profile of ``N_{i+1}`` and ``N_{i-1}`` is checked for the
        second-difference bound ``24 eps`` on the levels inside its slab.
    """
    if mode not in ("lower", "upper"):
        raise ValueError("mode must be 'lower' or 'upper'")
    grid = theta_i.grid
    data = theta_i.data[..., 0] if theta_i.data.ndim == 4 else theta_i.data
    x0s, sl, keep = _line_nodes(grid, x0, i, interval)
    line = data[sl][keep]
    if line.size == 0:
        raise HypothesisError("no grid nodes on the line segment")
    dev = line if mode == "lower" else 1.0 - line
    if dev.max() > epsilon + 1e-12:
        raise HypothesisError(f"hypothesis fails on the line: deviation {dev.max():.6g} > eps = {epsilon:.6g}")
    P = line_polyhedron(x0s, i, interval)
    inside = P.contains(grid.points())
    vals = (data if mode == "lower" else 1.0 - data)[inside]
    mx = float(vals.max()) if vals.size else 0.0
    ratio = mx / epsilon if epsilon > 0 else (0.0 if mx <= 1e-12 else math.inf)
    holds = mx <= 6.0 * epsilon + 1e-12
    aa = {}
    if profiles is not None:
        for fam in (cyc(i, 1), cyc(i, -1)):
            for nu in family_normals(fam):
                n, lo, hi = [s for s in P.slabs if np.allclose(s[0], nu.v)][0]
                tv = grid.level_values(nu)
                sel = (tv >= lo - 1e-12) & (tv <= hi + 1e-12)
                f = np.asarray(profiles[nu.name])[sel]
                e = aa_epsilon(f)[0] if f.size >= 3 else 0.0
                aa[nu.name] = {"second_difference": float(e), "bound": 24.0 * epsilon,
                               "holds": bool(e <= 24.0 * epsilon + 1e-12)}
        holds = holds and all(v["holds"] for v in aa.values())
    return Extremum3D(P, mode, float(epsilon), float(dev.max()), mx, float(ratio), int(inside.sum()), bool(holds),
                      x0s, aa)


def worst_case_field(grid, i, epsilon, interval=(-0.5, 0.5), targets=64, seed=0):
    """Profiles along ``N_{i+-1}`` maximizing ``theta_i`` in the polyhedron.

    Solves, for a few target nodes, the linear program: maximize ``theta_i``
    at the target subject to ``0 <= theta_i <= 1`` at every node of the cube
    and ``theta_i <= eps`` on the line through the centre.  Returns the best
    channel as a GridField together with the attained ratio to ``eps``.

    The constraints only bind on the cube, so ``P`` must lie inside it:
    otherwise the program can push ``theta_i`` to one near the vertices.
    """
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix, vstack

    names = [nu.name for fam in (cyc(i, 1), cyc(i, -1)) for nu in family_normals(fam)]
    L = 2 * grid.n - 1
    N = grid.n ** 3
    lev = [np.ascontiguousarray(grid.level_index(k)).ravel() for k in names]
    rows = np.repeat(np.arange(N), 4)
    cols = np.stack([a * L + lev[a] for a in range(4)], 1).ravel()
    A = csr_matrix((np.ones(4 * N), (rows, cols)), shape=(N, 4 * L))
    x0s, sl, keep = _line_nodes(grid, (0.0, 0.0, 0.0), i, interval)
    node_ids = np.arange(N).reshape(grid.shape)[sl][keep]
    P = line_polyhedron(x0s, i, interval)
    if np.abs(P.vertices()).max() > grid.half_width + 1e-12:
        raise ValueError("polyhedron leaves the sampled cube; shorten the interval")
    inside = np.flatnonzero(P.contains(grid.points()).ravel())
    rng = np.random.default_rng(seed)
    cand = rng.choice(inside, size=min(targets, inside.size), replace=False)
    A_ub = vstack([-A, A, A[node_ids]]).tocsr()
    b_ub = np.r_[np.zeros(N), np.ones(N), np.full(node_ids.size, epsilon)]
    best, best_x = -1.0, None
    for tgt in cand:
        res = linprog(-A[tgt].toarray().ravel(), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (4 * L),
                      method="highs")
        if res.status == 0 and -res.fun > best:
            best, best_x = -res.fun, res.x
    vals = (A @ best_x).reshape(grid.shape) if best_x is not None else np.zeros(grid.shape)
    vals = np.clip(vals, 0.0, 1.0)
    return GridField(grid, vals, (f"theta{i}",)), best / epsilon
