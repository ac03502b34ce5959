"""Saint-Venant wave equations and recovery of the strain decomposition.

Each volume fraction ``theta_i`` is a sum of profiles along four normals
plus an affine map.  Every such normal is orthogonal to one diagonal of a
suitable pair ``(d, d')``, so ``d . D (d' . D) theta_i = 0``; with integer
diagonals the mixed second difference uses exact node offsets.

Recovery solves the least-squares problem for the profile values at each
projection level and the affine maps, jointly over the three rows.  The
normal equations only depend on the grid, so their pseudo-inverse is cached.
"""

from dataclasses import dataclass
from functools import lru_cache
import itertools

import numpy as np

from .fields import AffineMap, Decomposition, Grid, GridField, Profile1D, row_sign
from .strain_space import DIAGONALS, NORMALS, NORMAL_ORDER, cyc

WAVE_TOL = 1e-6


class IncompatibleFieldError(ValueError):
    """A wave equation residual exceeds the tolerance."""

    def __init__(self, equation, value, tol):
        self.equation = equation
        self.value = value
        self.tol = tol
        super().__init__(f"incompatible field: wave equation {equation} ({EQUATIONS[equation - 1][0]}) "
                         f"has residual {value:.3g} > {tol:.3g}")


def _equations():
    out = []
    for i in (1, 2, 3):
        nus = [NORMALS[f"nu{f}{s}"] for f in (cyc(i, 1), cyc(i, -1)) for s in "+-"]
        for j, k in itertools.combinations(range(4), 2):
            a, b = DIAGONALS[j], DIAGONALS[k]
            if all(abs(nu.v @ a.v) < 1e-12 or abs(nu.v @ b.v) < 1e-12 for nu in nus):
                out.append((f"theta{i}: {a.name}.D {b.name}.D", i, a, b))
    return tuple(out)


EQUATIONS = _equations()


@dataclass
class WaveResiduals:
    fields: tuple
    maxnorms: tuple
    names: tuple

    @property
    def max(self):
        return max(self.maxnorms)

    def worst(self):
        k = int(np.argmax(self.maxnorms))
        return k + 1, self.maxnorms[k]


def _shift(data, n, off):
    # view of data[x + off] over nodes 2 .. n-3 in every axis; off in node units, (x, y, z) order
    sl = tuple(slice(2 + o, n - 2 + o) for o in off[::-1])
    return data[sl]


def wave_residuals(theta, grid=None):
    """Mixed second differences along diagonal pairs, normalized by ``(2h)^2``.

    Residuals live on the interior nodes at distance two from the boundary.
    """
    grid = grid or theta.grid
    if grid != theta.grid:
        raise ValueError("field and grid disagree")
    if grid.dim != 3 or grid.n < 5:
        raise ValueError("wave residuals need a 3-D grid with n >= 5")
    n, h = grid.n, grid.h
    inner = Grid(n - 4, grid.half_width - 2 * h)
    fields, norms = [], []
    for name, i, a, b in EQUATIONS:
        f = theta.data[..., i - 1]
        pa, pb = np.asarray(a.vector), np.asarray(b.vector)
        r = (_shift(f, n, pa + pb) - _shift(f, n, pa - pb) - _shift(f, n, pb - pa)
             + _shift(f, n, -pa - pb)) / (2 * h) ** 2
        fields.append(GridField(inner, r, (name,)))
        norms.append(float(np.max(np.abs(r))))
    return WaveResiduals(tuple(fields), tuple(norms), tuple(e[0] for e in EQUATIONS))


def check_compatible(theta, tol=WAVE_TOL):
    w = wave_residuals(theta)
    k, v = w.worst()
    if v > tol:
        raise IncompatibleFieldError(k, v, tol)
    return w


# ---------------------------------------------------------------- normal equations


_AFF_ROWS = {1: (1, 0, -1), 2: (0, 1, -1)}  # g_3 = -g_1 - g_2


def _signs():
    return np.array([[row_sign(r, NORMALS[k]) for r in (1, 2, 3)] for k in NORMAL_ORDER], dtype=float)


@lru_cache(maxsize=4)
def _basis(grid):
    pts = grid.points().reshape(-1, 3)
    return np.column_stack([np.ones(len(pts)), pts])


@lru_cache(maxsize=4)
def _levels(grid):
    return [np.ascontiguousarray(grid.level_index(k)).ravel() for k in NORMAL_ORDER]


def _gram(grid, w=None):
    L = 2 * grid.n - 1
    S = _signs()
    lev = _levels(grid)
    phi = _basis(grid)
    w = np.ones(phi.shape[0]) if w is None else w
    m = 6 * L + 8
    G = np.zeros((m, m))
    for a, b in itertools.combinations_with_replacement(range(6), 2):
        c = float(S[a] @ S[b])
        if c == 0.0:
            continue
        H = np.bincount(lev[a] * L + lev[b], weights=w, minlength=L * L).reshape(L, L)
        G[a * L:(a + 1) * L, b * L:(b + 1) * L] = c * H
        G[b * L:(b + 1) * L, a * L:(a + 1) * L] = c * H.T
    Phi = (phi * w[:, None]).T @ phi
    for j, cj in _AFF_ROWS.items():
        col = slice(6 * L + 4 * (j - 1), 6 * L + 4 * j)
        for a in range(6):
            c = float(S[a] @ cj)
            if c:
                M = np.column_stack([np.bincount(lev[a], weights=w * phi[:, q], minlength=L) for q in range(4)])
                G[a * L:(a + 1) * L, col] = c * M
                G[col, a * L:(a + 1) * L] = c * M.T
        for k, ck in _AFF_ROWS.items():
            G[col, 6 * L + 4 * (k - 1):6 * L + 4 * k] = float(np.dot(cj, ck)) * Phi
    return G


def _pinv(G):
    from scipy.linalg import eigh

    vals, vecs = eigh(G)
    keep = vals > 1e-10 * vals[-1]
    return (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T


@lru_cache(maxsize=4)
def _cached_pinv(n, half_width):
    return _pinv(_gram(Grid(n, half_width)))


def _rhs(grid, e, w=None):
    L = 2 * grid.n - 1
    S = _signs()
    lev = _levels(grid)
    phi = _basis(grid)
    e = e.reshape(-1, 3)
    if w is not None:
        e = e * w[:, None]
    out = np.zeros(6 * L + 8)
    for a in range(6):
        out[a * L:(a + 1) * L] = np.bincount(lev[a], weights=e @ S[a], minlength=L)
    for j, cj in _AFF_ROWS.items():
        out[6 * L + 4 * (j - 1):6 * L + 4 * j] = phi.T @ (e @ np.asarray(cj, dtype=float))
    return out


# ---------------------------------------------------------------- gauge


def level_profiles(d, grid):
    """Profile values at the projection levels of ``grid``, keyed by normal name."""
    out = {}
    for k in NORMAL_ORDER:
        t = np.clip(grid.level_values(k), -d.radius, d.radius)
        out[k] = np.asarray(d.profiles[k](t), dtype=float)
    return out


def parity_mode(grid, family):
    """Null direction ``((-1)^l, -s (-1)^l)`` of the pair ``nu_k^+, nu_k^-``.

    On the lattice, alternating profiles along the two normals of one family
    cancel at every node; no continuum counterpart exists.
    """
    L = 2 * grid.n - 1
    p = (-1.0) ** np.arange(L)
    lp = grid.level_index(f"nu{family}+")[(0,) * grid.dim]
    lm = grid.level_index(f"nu{family}-")[(0,) * grid.dim]
    return p, -p[lp] * p[lm] * p


def canonical_levels(F, grid):
    """Project level profiles onto the complement of the grid null space.

    Per family, the two profiles are made L2-orthogonal (uniform weights over
    levels) to ``{1, t}`` and to the parity mode jointly.  Returns the new
    profiles and the removed affine parts ``{name: (slope, intercept)}``.
    """
    out, removed = {}, {}
    for fam in (1, 2, 3):
        kp, km = f"nu{fam}+", f"nu{fam}-"
        tp, tm = grid.level_values(kp), grid.level_values(km)
        L = tp.size
        z = np.zeros(L)
        mp, mm = parity_mode(grid, fam)
        B = np.column_stack([np.r_[np.ones(L), z], np.r_[tp, z], np.r_[z, np.ones(L)], np.r_[z, tm],
                             np.r_[mp, mm]])
        y = np.r_[F[kp], F[km]]
        c, *_ = np.linalg.lstsq(B, y, rcond=None)
        r = y - B @ c
        out[kp], out[km] = r[:L], r[L:]
        removed[kp] = (c[1], c[0])
        removed[km] = (c[3], c[2])
    return out, removed


def _compensate(affines, removed):
    aff = list(affines)
    for k, (slope, icpt) in removed.items():
        nu = NORMALS[k]
        corr = AffineMap.along(nu, slope, icpt)
        for r in (1, 2, 3):
            s = row_sign(r, nu)
            if s:
                aff[r - 1] = aff[r - 1] + corr.scale(s)
    return aff


def _as_decomposition(F, affines, grid):
    R = grid.projection_radius
    prof = {k: Profile1D.interpolant(grid.level_values(k), F[k], (-R, R)) for k in NORMAL_ORDER}
    aff = list(affines)
    c = sum(g.constant for g in aff)
    gr = np.sum([g.gradient for g in aff], axis=0)
    aff[2] = AffineMap(aff[2].constant - c, tuple(np.asarray(aff[2].gradient) - gr))
    return Decomposition(prof, tuple(aff))


def canonical_gauge(d, grid):
    """Canonical representative of ``d`` as seen by the nodes of ``grid``.

    Profiles become piecewise-linear interpolants at the grid projections.
    """
    F = level_profiles(d, grid)
    Fc, removed = canonical_levels(F, grid)
    return _as_decomposition(Fc, _compensate(d.affines, removed), grid)


# ---------------------------------------------------------------- recovery


@dataclass
class Recovery:
    """Recovered decomposition and its nodal fit."""

    decomposition: Decomposition
    levels: dict
    residual: float
    residual_field: GridField
    masked: int = 0

    def residual_location(self):
        """Node (x, y, z index) and point of the largest reconstruction residual."""
        r = self.residual_field.data[..., 0]
        idx = np.unravel_index(int(np.argmax(r)), r.shape)
        g = self.residual_field.grid
        return idx[::-1], g.points()[idx].tolist()

    def residual_profile(self):
        """Largest residual by distance from the centre (shell index), for subcube reports."""
        r = self.residual_field.data[..., 0]
        n = r.shape[0]
        c = (n - 1) // 2
        idx = np.indices(r.shape)
        shell = np.max(np.abs(idx - c), axis=0)
        return np.array([float(r[shell == s].max()) for s in range(c + 1)])


def interface_mask(theta, tol_jump=10.0):
    """Nodes where one-sided difference quotients disagree by more than ``tol_jump * h``."""
    g = theta.grid
    h = g.h
    bad = np.zeros(g.shape, dtype=bool)
    for ax in range(3):
        d = np.diff(theta.data, axis=ax) / h
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        jump = np.max(np.abs(d[tuple(hi)] - d[tuple(lo)]), axis=-1) > tol_jump * h
        inner = [slice(None)] * 3
        inner[ax] = slice(1, -1)
        bad[tuple(inner)] |= jump
    return bad


def recover_decomposition(theta, grid=None, wave_tol=WAVE_TOL, mask_interfaces=False):
    """Least-squares decomposition of a sampled volume-fraction field.

    Parameters
    ----------
    theta : GridField
        Three channels on a 3-D grid.
    wave_tol : float or None
        Reject fields whose wave residuals exceed this; ``None`` skips the check.
    mask_interfaces : bool
        Drop nodes flagged by ``interface_mask`` from the fit.  Nodal samples of
        a compatible field are exact, so this is off by default.
    """
    grid = grid or theta.grid
    if grid != theta.grid:
        raise ValueError("field and grid disagree")
    if theta.nchannels != 3:
        raise ValueError("recovery needs a 3-channel volume-fraction field")
    if wave_tol is not None:
        check_compatible(theta, wave_tol)
    e = 1.0 - 3.0 * theta.data
    masked = 0
    if mask_interfaces:
        bad = interface_mask(theta)
        masked = int(bad.sum())
        w = (~bad).ravel().astype(float)
        x = _pinv(_gram(grid, w)) @ _rhs(grid, e, w)
    else:
        x = _cached_pinv(grid.n, grid.half_width) @ _rhs(grid, e)
    L = 2 * grid.n - 1
    F = {k: x[a * L:(a + 1) * L] for a, k in enumerate(NORMAL_ORDER)}
    p1, p2 = x[6 * L:6 * L + 4], x[6 * L + 4:6 * L + 8]
    aff = [AffineMap(p1[0], p1[1:]), AffineMap(p2[0], p2[1:]), AffineMap(-p1[0] - p2[0], -(p1[1:] + p2[1:]))]
    Fc, removed = canonical_levels(F, grid)
    aff = _compensate(aff, removed)
    # nodal reconstruction straight from the level values
    pts = grid.points()
    rec = np.stack([g(pts) for g in aff], axis=-1)
    for k in NORMAL_ORDER:
        v = Fc[k][grid.level_index(k)]
        for r in (1, 2, 3):
            s = row_sign(r, NORMALS[k])
            if s:
                rec[..., r - 1] += s * v
    res = np.max(np.abs((1.0 - rec) / 3.0 - theta.data), axis=-1)
    dec = _as_decomposition(Fc, aff, grid)
    return Recovery(dec, Fc, float(res.max()), GridField(grid, res, ("residual",)), masked)
