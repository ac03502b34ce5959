"""Sampled fields, one-dimensional profiles and the strain decomposition.

A compatible strain in S splits into six one-dimensional profiles, one per
twin normal, plus three affine maps:

    e_11 = F(101) + F(-101) - F(110) - F(1-10) + g_1
    e_22 = F(110) + F(1-10) - F(011) - F(01-1) + g_2
    e_33 = F(011) + F(01-1) - F(101) - F(-101) + g_3

so row ``r`` carries the normals of family ``r+1`` with a plus sign and
those of family ``r-1`` with a minus sign.  Volume fractions follow from
``theta_r = (1 - e_rr) / 3``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Callable, Optional

import numpy as np

from .intervals import IntervalSet
from .strain_space import NORMALS, NORMAL_ORDER, Normal, cyc, normal as _lookup
from .tolerances import TOL_FIELD

_SQ2 = math.sqrt(2.0)

# integer direction of each normal, i.e. sqrt(2) * nu
_INT = {k: tuple(int(round(c * _SQ2)) for c in nu.vector) for k, nu in NORMALS.items()}


def _as_normal(nu):
    return nu if isinstance(nu, Normal) else _lookup(nu)


def row_sign(r, nu):
    """Coefficient of profile ``nu`` in row ``r`` (1-based)."""
    nu = _as_normal(nu)
    if nu.family == cyc(r, 1):
        return 1
    if nu.family == cyc(r, -1):
        return -1
    return 0


# ---------------------------------------------------------------- grid


@dataclass(frozen=True)
class Grid:
    """Node-centred uniform grid on ``[-half_width, half_width]^dim``."""

    n: int
    half_width: float = 1.0
    dim: int = 3

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs n >= 3 samples per axis, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.dim not in (2, 3):
            raise ValueError("grid dimension must be 2 or 3")

    @property
    def h(self):
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def axis(self):
        return -self.half_width + self.h * np.arange(self.n)

    def points(self):
        """Node coordinates, shape ``shape + (dim,)`` with x varying fastest (read-only, cached)."""
        return _points(self)

    def indices(self):
        idx = np.indices(self.shape)
        return idx[::-1]  # (i_x, i_y, i_z)

    def level_index(self, nu):
        """Integer level of ``x . nu`` at every node, shifted to start at 0.

        Lattice shifts along directions orthogonal to ``nu`` keep this integer
        fixed, so values built from it are bitwise invariant along them.
        The array is cached and read-only.
        """
        return _level_index(self, _as_normal(nu).name)

    def level_values(self, nu):
        """``x . nu`` for level indices ``0 .. 2(n-1)``."""
        a = _INT[_as_normal(nu).name]
        base = -self.half_width * sum(a) + self.h * (self.n - 1) * sum(1 for c in a if c < 0) * -1
        # base is the projection of the node with level 0
        levels = np.arange(2 * self.n - 1)
        return (base + self.h * levels) / _SQ2

    @property
    def projection_radius(self):
        """Largest ``|x . nu|`` over the cube for any twin normal."""
        return _SQ2 * self.half_width


@lru_cache(maxsize=4)
def _points(grid):
    ax = grid.axis
    mesh = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    # mesh[0] varies along the slowest axis, which holds the last coordinate
    out = np.stack(mesh[::-1], axis=-1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=24)
def _level_index(grid, name):
    a = _INT[name]
    n = grid.n
    ax = np.arange(n)
    shape = [1] * grid.dim
    lev = np.zeros((1,) * grid.dim, dtype=np.intp)
    for k, c in enumerate(a[:grid.dim]):
        if c:
            sh = list(shape)
            sh[grid.dim - 1 - k] = n
            lev = lev + c * ax.reshape(sh)
    lev = np.broadcast_to(lev, grid.shape) + (n - 1) * sum(1 for c in a if c < 0)
    lev.setflags(write=False)
    return lev


# ---------------------------------------------------------------- profiles


class Profile1D:
    """Bounded one-dimensional profile, right-continuous at breakpoints.

    Piecewise kinds store absolute coefficients: on piece ``k`` the value is
    ``coef[k, 0] + coef[k, 1] * t``.  Piece ``k`` spans
    ``[breakpoints[k-1], breakpoints[k])``.
    """

    def __init__(self, breakpoints=(), coef=((0.0, 0.0),), domain=(-math.inf, math.inf),
                 kind=None, fn: Optional[Callable] = None, antiderivative: Optional[Callable] = None,
                 bound: Optional[tuple] = None):
        self.domain = (float(domain[0]), float(domain[1]))
        if not self.domain[0] < self.domain[1]:
            raise ValueError("empty profile domain")
        self.fn = fn
        if fn is not None:
            self.kind = "callable"
            self.breakpoints = np.array([], dtype=float)
            self.coef = np.zeros((1, 2))
            self._anti = antiderivative
            self._bound = bound
            return
        bp = np.asarray(breakpoints, dtype=float).ravel()
        if bp.size and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        coef = np.asarray(coef, dtype=float).reshape(-1, 2)
        if coef.shape[0] != bp.size + 1:
            raise ValueError(f"{bp.size} breakpoints need {bp.size + 1} pieces, got {coef.shape[0]}")
        if not np.all(np.isfinite(coef)):
            raise ValueError("profile coefficients must be finite")
        self.breakpoints = bp
        self.coef = coef
        if kind is None:
            kind = "piecewise-constant" if np.all(coef[:, 1] == 0) else "piecewise-linear"
        self.kind = kind
        self._cum = None

    # constructors
    @classmethod
    def zero(cls, domain=(-math.inf, math.inf)):
        return cls((), ((0.0, 0.0),), domain)

    @classmethod
    def constant(cls, c, domain=(-math.inf, math.inf)):
        return cls((), ((float(c), 0.0),), domain)

    @classmethod
    def linear(cls, slope, intercept=0.0, domain=(-math.inf, math.inf)):
        return cls((), ((float(intercept), float(slope)),), domain)

    @classmethod
    def piecewise_constant(cls, breakpoints, values, domain=(-math.inf, math.inf)):
        v = np.asarray(values, dtype=float)
        return cls(breakpoints, np.column_stack([v, np.zeros_like(v)]), domain)

    @classmethod
    def indicator(cls, s: IntervalSet, value=1.0, base=0.0, domain=None):
        """``base + value * chi_s``, breakpoints at the set's interior endpoints."""
        domain = s.bounds if domain is None else domain
        bp = sorted(set(p for p in s.breakpoints if domain[0] < p < domain[1]))
        mids = _piece_midpoints(bp, domain)
        vals = [base + value * float(s.contains(m)) for m in mids]
        return cls.piecewise_constant(bp, vals, domain)

    @classmethod
    def interpolant(cls, knots, values, domain=None):
        """Continuous piecewise-linear interpolant, constant beyond the end knots."""
        t = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if domain is None:
            domain = (t[0], t[-1]) if t.size > 1 else (-math.inf, math.inf)
        slopes = np.diff(v) / np.diff(t)
        coef = [(v[0], 0.0)]
        for k in range(t.size - 1):
            coef.append((v[k] - slopes[k] * t[k], slopes[k]))
        coef.append((v[-1], 0.0))
        return cls(t, coef, domain, kind="piecewise-linear")

    @classmethod
    def from_callable(cls, fn, domain, antiderivative=None, bound=None):
        return cls(fn=fn, domain=domain, antiderivative=antiderivative, bound=bound)

    # evaluation
    def _check(self, t):
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi):
            bad = t[(t < lo) | (t > hi)]
            raise ValueError(f"argument {float(bad.flat[0]):.6g} outside profile domain [{lo}, {hi}]")

    def piece_index(self, t):
        return np.searchsorted(self.breakpoints, t, side="right")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check(t)
        if self.fn is not None:
            return np.asarray(self.fn(t), dtype=float) * np.ones_like(t)
        k = self.piece_index(t)
        return self.coef[k, 0] + self.coef[k, 1] * t

    @property
    def anchor(self):
        lo, hi = self.domain
        return min(max(0.0, lo), hi)

    def integral(self, t):
        """Exact antiderivative vanishing at ``anchor`` (0 clipped to the domain)."""
        t = np.asarray(t, dtype=float)
        self._check(t)
        if self.fn is not None:
            if self._anti is not None:
                return np.asarray(self._anti(t), dtype=float) - float(self._anti(np.asarray(self.anchor)))
            from scipy.integrate import quad
            flat = [quad(lambda s: float(self.fn(np.asarray(s))), self.anchor, float(x))[0] for x in t.ravel()]
            return np.array(flat).reshape(t.shape)
        if self._cum is None:
            self._build_cum()
        k = self.piece_index(t)
        c, s = self.coef[k, 0], self.coef[k, 1]
        return c * t + 0.5 * s * t * t + self._cum[k]

    def _build_cum(self):
        c, s = self.coef[:, 0], self.coef[:, 1]
        G = lambda k, t: c[k] * t + 0.5 * s[k] * t * t
        C = np.zeros(len(c))
        for k, b in enumerate(self.breakpoints):
            C[k + 1] = C[k] + G(k, b) - G(k + 1, b)
        a = self.anchor
        ka = int(np.searchsorted(self.breakpoints, a, side="right"))
        C -= G(ka, a) + C[ka]
        self._cum = C

    def range_bounds(self, lo=None, hi=None):
        """Exact (min, max) over ``[lo, hi]`` intersected with the domain."""
        dlo, dhi = self.domain
        lo = dlo if lo is None else max(lo, dlo)
        hi = dhi if hi is None else min(hi, dhi)
        if self.fn is not None:
            if self._bound is not None:
                return tuple(self._bound)
            tt = np.linspace(lo, hi, 4097)
            v = self(tt)
            return float(v.min()), float(v.max())
        if not (math.isfinite(lo) and math.isfinite(hi)):
            if np.any(self.coef[[0, -1], 1] != 0):
                raise ValueError("unbounded linear piece on an infinite range")
        vals = []
        edges = [lo] + [b for b in self.breakpoints if lo < b < hi] + [hi]
        for a, b in zip(edges[:-1], edges[1:]):
            k = int(self.piece_index(np.asarray((a + b) / 2 if math.isfinite(a + b) else
                                                 (a + 1 if math.isfinite(a) else b - 1 if math.isfinite(b) else 0.0))))
            c, s = self.coef[k]
            for x in (a, b):
                vals.append(c if not math.isfinite(x) else c + s * x)
        return float(min(vals)), float(max(vals))

    # algebra
    def _binary(self, other, op):
        if self.fn is not None or other.fn is not None:
            f, g = self, other
            return Profile1D.from_callable(lambda t: op(f(t), g(t)), _meet(self.domain, other.domain))
        bp = np.union1d(self.breakpoints, other.breakpoints)
        dom = _meet(self.domain, other.domain)
        bp = bp[(bp > dom[0]) & (bp < dom[1])]
        mids = np.array(_piece_midpoints(list(bp), dom))
        a = self.coef[self.piece_index(mids)]
        b = other.coef[other.piece_index(mids)]
        return Profile1D(bp, op(a, b), dom)

    def __add__(self, other):
        if not isinstance(other, Profile1D):
            return self.add_affine(0.0, float(other))
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Profile1D):
            return self.add_affine(0.0, -float(other))
        return self._binary(other, lambda a, b: a - b)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, s):
        if self.fn is not None:
            f = self.fn
            return Profile1D.from_callable(lambda t: s * f(t), self.domain)
        return Profile1D(self.breakpoints, s * self.coef, self.domain, kind=self.kind)

    __mul__ = scale
    __rmul__ = scale

    def add_affine(self, slope, intercept):
        if self.fn is not None:
            f = self.fn
            return Profile1D.from_callable(lambda t: f(t) + slope * t + intercept, self.domain)
        coef = self.coef + np.array([intercept, slope])
        return Profile1D(self.breakpoints, coef, self.domain)

    def times_linear(self, slope, intercept):
        """Product with ``slope * t + intercept`` for piecewise-constant profiles."""
        if np.any(self.coef[:, 1] != 0):
            raise ValueError("product with a linear factor needs a piecewise-constant profile")
        c = self.coef[:, 0]
        return Profile1D(self.breakpoints, np.column_stack([c * intercept, c * slope]), self.domain)

    def restrict(self, domain):
        dom = _meet(self.domain, domain)
        if self.fn is not None:
            return Profile1D.from_callable(self.fn, dom, self._anti, self._bound)
        keep = (self.breakpoints > dom[0]) & (self.breakpoints < dom[1])
        mids = np.array(_piece_midpoints(list(self.breakpoints[keep]), dom))
        return Profile1D(self.breakpoints[keep], self.coef[self.piece_index(mids)], dom)

    def is_affine(self, tol=TOL_FIELD):
        if self.fn is not None:
            return False
        return bool(np.all(np.abs(self.coef - self.coef[0]) <= tol))

    def jumps(self):
        """Jump sizes ``f(b+) - f(b-)`` at the breakpoints."""
        b = self.breakpoints
        left = self.coef[:-1, 0] + self.coef[:-1, 1] * b
        right = self.coef[1:, 0] + self.coef[1:, 1] * b
        return right - left

    def to_json(self):
        if self.fn is not None:
            raise ValueError("callable profiles are not serializable")
        return {"kind": "piecewise-linear", "breakpoints": self.breakpoints.tolist(),
                "coefficients": self.coef.tolist(), "domain": [_enc(self.domain[0]), _enc(self.domain[1])]}

    def __repr__(self):
        return f"Profile1D({self.kind}, {self.breakpoints.size} breakpoints, domain={self.domain})"


def _enc(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _meet(d1, d2):
    d = (max(d1[0], d2[0]), min(d1[1], d2[1]))
    if not d[0] < d[1]:
        raise ValueError("profile domains do not overlap")
    return d


def _piece_midpoints(bp, domain):
    lo, hi = domain
    edges = [lo] + list(bp) + [hi]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if math.isfinite(a) and math.isfinite(b):
            out.append(0.5 * (a + b))
        elif math.isfinite(a):
            out.append(a + 1.0)
        elif math.isfinite(b):
            out.append(b - 1.0)
        else:
            out.append(0.0)
    return out


def profile_from_json(obj, domain=(-math.inf, math.inf)):
    """Build a profile from its JSON description."""
    kind = obj.get("kind")
    dom = tuple(float(x) for x in obj.get("domain", domain))
    if kind == "zero":
        return Profile1D.zero(dom)
    if kind == "constant":
        return Profile1D.constant(obj["value"], dom)
    if kind == "linear":
        return Profile1D.linear(obj["slope"], obj.get("intercept", 0.0), dom)
    if kind == "step":
        s = IntervalSet.from_json(obj["set"], bounds=[_enc(dom[0]), _enc(dom[1])])
        return Profile1D.indicator(s.with_bounds(dom), obj.get("value", 1.0), obj.get("base", 0.0), dom)
    if kind == "piecewise-constant":
        return Profile1D.piecewise_constant(obj["breakpoints"], obj["values"], dom)
    if kind == "piecewise-linear":
        return Profile1D(obj["breakpoints"], obj["coefficients"], dom)
    if kind == "interpolant":
        return Profile1D.interpolant(obj["knots"], obj["values"], dom if "domain" in obj else None)
    raise ValueError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------- affine maps and decompositions


@dataclass(frozen=True)
class AffineMap:
    """``x -> constant + gradient . x``."""

    constant: float = 0.0
    gradient: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        g = tuple(float(c) for c in self.gradient)
        if len(g) != 3 or not all(math.isfinite(c) for c in g + (self.constant,)):
            raise ValueError("affine map needs a finite constant and 3-vector gradient")
        object.__setattr__(self, "gradient", g)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.constant + x @ np.asarray(self.gradient)

    def __add__(self, other):
        return AffineMap(self.constant + other.constant,
                         tuple(np.add(self.gradient, other.gradient)))

    def __neg__(self):
        return AffineMap(-self.constant, tuple(-np.asarray(self.gradient)))

    def scale(self, s):
        return AffineMap(s * self.constant, tuple(s * np.asarray(self.gradient)))

    @classmethod
    def along(cls, nu, slope, intercept=0.0):
        """``x -> slope * (x . nu) + intercept``."""
        v = np.asarray(nu.v if isinstance(nu, Normal) else nu, dtype=float)
        return cls(intercept, tuple(slope * v))


class Decomposition:
    """Six strain profiles plus three affine maps.

    ``profiles`` maps normal names (``"nu1+"`` ...) to ``Profile1D``; missing
    entries are zero.  The rows obey the sign pattern in the module docstring.
    """

    def __init__(self, profiles=None, affines=(AffineMap(), AffineMap(), AffineMap()), domain_radius=None):
        profiles = dict(profiles or {})
        for k in profiles:
            _lookup(k)
        self.profiles = {k: profiles.get(k, Profile1D.zero()) for k in NORMAL_ORDER}
        if len(affines) != 3:
            raise ValueError("three affine maps are required")
        self.affines = tuple(affines)
        const = sum(g.constant for g in self.affines)
        grad = np.sum([g.gradient for g in self.affines], axis=0)
        if abs(const) > TOL_FIELD or np.max(np.abs(grad)) > TOL_FIELD:
            raise ValueError(f"affine maps must sum to zero (trace-free rows); got constant {const:.3g}, "
                             f"gradient {grad.tolist()}")
        self.domain_radius = domain_radius

    @property
    def radius(self):
        """Largest ``|x . nu|`` on which every profile is defined."""
        r = math.inf
        for p in self.profiles.values():
            r = min(r, -p.domain[0], p.domain[1])
        return r

    def strain_diagonal(self, x):
        """``(e_11, e_22, e_33)`` at points of shape ``(..., 3)``."""
        x = np.asarray(x, dtype=float)
        out = np.stack([g(x) for g in self.affines], axis=-1)
        for k, p in self.profiles.items():
            nu = NORMALS[k]
            if p.fn is None and p.is_affine(0.0) and p.coef[0, 0] == 0 and p.coef[0, 1] == 0:
                continue
            v = p(x @ nu.v)
            for r in (1, 2, 3):
                s = row_sign(r, nu)
                if s:
                    out[..., r - 1] += s * v
        return out

    def theta(self, x):
        return (1.0 - self.strain_diagonal(x)) / 3.0

    def nonzero_profiles(self):
        return [k for k, p in self.profiles.items()
                if not (p.fn is None and np.all(p.coef == 0))]

    def regauged(self, name, slope, intercept):
        """Add ``slope*t + intercept`` to one profile and compensate in the affines.

        The output strain is unchanged: that is the affine gauge freedom.
        """
        nu = NORMALS[name]
        profiles = dict(self.profiles)
        profiles[name] = profiles[name].add_affine(slope, intercept)
        aff = list(self.affines)
        corr = AffineMap.along(nu, slope, intercept)
        for r in (1, 2, 3):
            s = row_sign(r, nu)
            if s:
                aff[r - 1] = aff[r - 1] + (-corr if s > 0 else corr)
        return Decomposition(profiles, tuple(aff), self.domain_radius)

    def to_json(self):
        return {"profiles": {k: p.to_json() for k, p in self.profiles.items()},
                "affines": [{"constant": g.constant, "gradient": list(g.gradient)} for g in self.affines]}

    @classmethod
    def from_json(cls, obj):
        profiles = {k: profile_from_json(v) for k, v in obj.get("profiles", {}).items()}
        aff = tuple(AffineMap(a["constant"], a["gradient"]) for a in obj["affines"])
        return cls(profiles, aff)


def eval_decomposition(d, x):
    """Volume fractions of a decomposition at one point or an array of points."""
    x = np.asarray(x, dtype=float)
    return d.theta(x)


# ---------------------------------------------------------------- grid fields


class GridField:
    """Immutable sampled field: ``data.shape == grid.shape + (channels,)``."""

    def __init__(self, grid, data, channels=None, meta=None):
        data = np.asarray(data, dtype=float)
        if data.ndim == grid.dim:
            data = data[..., None]
        if data.shape[:-1] != grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid {grid.shape}")
        bad = ~np.isfinite(data)
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"non-finite value at node {node[:-1][::-1]} (x, y, z order), channel {node[-1]}")
        self.grid = grid
        self.data = data
        self.data.setflags(write=False)
        self.channels = tuple(channels) if channels else tuple(f"c{k}" for k in range(data.shape[-1]))
        if len(self.channels) != data.shape[-1]:
            raise ValueError("channel names do not match data")
        self.meta = dict(meta or {})

    @property
    def nchannels(self):
        return self.data.shape[-1]

    def channel(self, k):
        return self.data[..., k]

    def subcube(self, m):
        """Centred subcube with ``m`` nodes per axis (``n - m`` even)."""
        n = self.grid.n
        if (n - m) % 2 or m < 3 or m > n:
            raise ValueError("subcube size must keep the grid centred")
        o = (n - m) // 2
        sl = (slice(o, o + m),) * self.grid.dim
        g = Grid(m, self.grid.half_width * (m - 1) / (n - 1), self.grid.dim)
        return GridField(g, self.data[sl], self.channels, self.meta)


def theta_field(grid, theta, meta=None):
    return GridField(grid, theta, ("theta1", "theta2", "theta3"), meta)


def sample_to_grid(d, grid):
    """Nodal samples of ``theta`` for a decomposition.

    Each profile is evaluated once per projection level and gathered, so nodes
    on the same hyperplane ``x . nu = t`` receive bitwise identical values.
    """
    if grid.dim != 3:
        raise ValueError("decompositions are sampled on 3-D grids")
    if d.radius < grid.projection_radius - 1e-12:
        raise ValueError(f"grid cube needs profile domains covering |t| <= {grid.projection_radius:.6g}; "
                         f"decomposition covers {d.radius:.6g}")
    pts = grid.points()
    e = np.stack([g(pts) for g in d.affines], axis=-1)
    for k in d.nonzero_profiles():
        nu = NORMALS[k]
        t = np.clip(grid.level_values(nu), -d.radius, d.radius)
        vals = d.profiles[k](t)[grid.level_index(nu)]
        for r in (1, 2, 3):
            s = row_sign(r, nu)
            if s:
                e[..., r - 1] += s * vals
    return theta_field(grid, (1.0 - e) / 3.0)


def plane_basis(nu):
    """Orthonormal in-plane basis ``(t1, t2)`` for the plane with normal ``nu``."""
    v = np.asarray(nu.v if isinstance(nu, Normal) else nu, dtype=float)
    v = v / np.linalg.norm(v)
    ref = np.eye(3)[int(np.argmin(np.abs(v)))]
    t1 = np.cross(v, ref)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(v, t1)
    return t1, t2


def hyperplane_trace(f, alpha, nu, n=None, half_width=None, components=(0, 1, 2), grid=None):
    """Restriction to the plane ``H = {x . nu = alpha}`` on a 2-D grid.

    The plane is parametrized as ``alpha nu + s1 t1 + s2 t2`` with ``(s1, s2)``
    on a node-centred square grid.  Decomposition input is evaluated exactly;
    a profile along ``+-nu`` that is not affine would make the trace depend
    on a single point value of a bounded function, and is rejected.
    GridField input is trilinearly interpolated.
    """
    nu = _as_normal(nu)
    comps = tuple(components)
    if isinstance(f, Decomposition):
        for k in f.nonzero_profiles():
            other = NORMALS[k]
            if abs(abs(float(np.dot(other.v, nu.v))) - 1.0) > 1e-12:
                continue
            if f.profiles[k].is_affine():
                continue
            touched = [c for c in comps if row_sign(c + 1, other) != 0]
            if touched:
                raise ValueError(f"ill-posed trace: theta_{touched[0] + 1} has a non-affine profile along "
                                 f"{other.name}, which is constant on planes with normal {nu.name}")
        hw_src = f.radius / _SQ2 if math.isfinite(f.radius) else 1.0
    elif isinstance(f, GridField):
        hw_src = f.grid.half_width
    else:
        raise TypeError("trace source must be a Decomposition or GridField")
    if half_width is None:
        half_width = max(hw_src - abs(alpha), 0.0) / _SQ2
        if half_width <= 0:
            raise ValueError("plane misses the sampled cube")
    n = n or (f.grid.n if isinstance(f, GridField) else 65)
    g2 = Grid(n, half_width, 2)
    t1, t2 = plane_basis(nu)
    s = g2.points()
    x = alpha * nu.v + s[..., :1] * t1 + s[..., 1:2] * t2
    if isinstance(f, Decomposition):
        vals = f.theta(x)[..., list(comps)]
        names = tuple(f"theta{c + 1}" for c in comps)
    else:
        vals = trilinear(f, x)[..., list(comps)]
        names = tuple(f.channels[c] for c in comps)
    meta = {"plane_alpha": float(alpha), "plane_normal": nu.name, "t1": t1.tolist(), "t2": t2.tolist()}
    return GridField(g2, vals, names, meta)


def trilinear(f, x):
    """Trilinear interpolation of a 3-D field at points ``x`` (inside the cube)."""
    g = f.grid
    x = np.asarray(x, dtype=float)
    u = (x + g.half_width) / g.h
    if np.any(u < -1e-9) or np.any(u > g.n - 1 + 1e-9):
        raise ValueError("interpolation point outside the sampled cube")
    u = np.clip(u, 0.0, g.n - 1)
    i0 = np.minimum(np.floor(u).astype(int), g.n - 2)
    w = u - i0
    out = 0.0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                wt = ((w[..., 0] if dx else 1 - w[..., 0]) * (w[..., 1] if dy else 1 - w[..., 1])
                      * (w[..., 2] if dz else 1 - w[..., 2]))
                out = out + wt[..., None] * f.data[i0[..., 2] + dz, i0[..., 1] + dy, i0[..., 0] + dx]
    return out
