"""Exact volume-fraction fields and compatible displacements for each family.

Every family is written in the same normal form.  For a normal ``nu`` of
family ``k`` let ``P_nu`` be its term in ``theta_{k-1}`` and ``h_nu - P_nu``
its term in ``theta_{k+1}``, where ``h_nu`` must be affine in ``x . nu``.
With ``A_r`` the remaining affine part of ``theta_r`` the strain
decomposition has

    F_nu = -3 P_nu,     g_r = 1 - 3 A_r - 3 sum_{nu in N_{r-1}} h_nu(x . nu).

Displacements follow the same split: each profile ``F_nu(x . nu)``
contributes ``a_nu * int F_nu`` with ``a_nu (.) nu`` the diagonal sign
matrix of its rows, and the affine strain, being linear, integrates to a
quadratic field exactly.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np

from .fields import (AffineMap, Decomposition, Grid, GridField, Profile1D, profile_from_json,
                     row_sign, sample_to_grid, theta_field)
from .intervals import IntervalSet
from .strain_space import (NORMALS, family_normals, cyc, diagonal, normal, oriented_triple)
from .tolerances import TOL_ALG, TOL_FIELD

_SQ2 = math.sqrt(2.0)

FAMILIES = ("TwoVariant", "SecondOrderLaminate", "Checkerboard", "TripleIntersection", "AusteniteExample")


class RangeError(ValueError):
    """A configuration would leave the admissible range ``0 <= theta <= 1``."""


# ---------------------------------------------------------------- displacement


def profile_amplitude(nu):
    """Vector ``a`` with ``sym(a (x) nu) = diag(row signs of nu)``."""
    nu = NORMALS[nu] if isinstance(nu, str) else nu
    a = np.zeros(3)
    for k in range(3):
        if nu.vector[k] != 0:
            a[k] = row_sign(k + 1, nu) / nu.v[k]
    return a


class DisplacementField:
    """Closed-form or sampled displacement with its provenance.

    Closed-form fields carry ``u(x)`` and an analytic gradient ``grad(x)``;
    sampled fields wrap a 3-channel ``GridField``.
    """

    def __init__(self, u: Optional[Callable] = None, grad: Optional[Callable] = None,
                 field: Optional[GridField] = None, provenance=None):
        if (u is None) == (field is None):
            raise ValueError("give either a callable or a sampled field")
        self._u = u
        self._grad = grad
        self.field = field
        self.provenance = provenance

    @property
    def is_sampled(self):
        return self.field is not None

    def __call__(self, x):
        if self._u is None:
            raise ValueError("sampled displacement has no closed form")
        return self._u(np.asarray(x, dtype=float))

    def gradient(self, x):
        if self._grad is None:
            raise ValueError("displacement has no analytic gradient")
        return self._grad(np.asarray(x, dtype=float))

    def strain(self, x):
        g = self.gradient(x)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def sample(self, grid):
        if self.field is not None:
            if self.field.grid != grid:
                raise ValueError("sampled displacement lives on a different grid")
            return self.field
        return GridField(grid, self(grid.points()), ("u1", "u2", "u3"))


def displacement_from_decomposition(d, provenance=None):
    """Exact displacement whose strain is the decomposition's diagonal strain."""
    E = np.array([g.constant for g in d.affines])
    L = np.zeros((3, 3, 3))
    for r, g in enumerate(d.affines):
        L[r, r, :] = g.gradient
    # C_ijk = L_ijk + L_ikj - L_jki, symmetric in (j, k)
    C = L + np.einsum("ikj->ijk", L) - np.einsum("jki->ijk", L)
    terms = []
    for k in d.nonzero_profiles():
        nu = NORMALS[k]
        terms.append((nu.v, profile_amplitude(nu), d.profiles[k]))

    def u(x):
        out = x * E + 0.5 * np.einsum("ijk,...j,...k->...i", C, x, x)
        for v, a, p in terms:
            out = out + p.integral(x @ v)[..., None] * a
        return out

    def grad(x):
        out = np.broadcast_to(np.diag(E), x.shape[:-1] + (3, 3)) + np.einsum("ijk,...k->...ij", C, x)
        for v, a, p in terms:
            out = out + p(x @ v)[..., None, None] * np.outer(a, v)
        return out

    return DisplacementField(u, grad, provenance=provenance)


def symmetric_gradient(u, grid):
    """``e(u) = (Du + Du^T)/2`` by central differences, one-sided at the boundary.

    Channels: ``e11, e22, e33, e23, e13, e12``.
    """
    if grid.n < 3:
        raise ValueError("grid too small for finite differences")
    f = u.sample(grid) if isinstance(u, DisplacementField) else u
    if f.nchannels != grid.dim:
        raise ValueError("displacement needs one channel per dimension")
    D = np.empty(grid.shape + (grid.dim, grid.dim))
    for i in range(grid.dim):
        comp = f.data[..., i]
        for j in range(grid.dim):
            D[..., i, j] = np.gradient(comp, grid.h, axis=grid.dim - 1 - j, edge_order=1)
    e = 0.5 * (D + np.swapaxes(D, -1, -2))
    if grid.dim == 3:
        chans = np.stack([e[..., 0, 0], e[..., 1, 1], e[..., 2, 2], e[..., 1, 2], e[..., 0, 2], e[..., 0, 1]], -1)
        names = ("e11", "e22", "e33", "e23", "e13", "e12")
    else:
        chans = np.stack([e[..., 0, 0], e[..., 1, 1], e[..., 0, 1]], -1)
        names = ("e11", "e22", "e12")
    return GridField(grid, chans, names)


def strain_mismatch(strain6, theta):
    """Nodewise Frobenius norm of ``e(u) - sum theta_i e_i``."""
    e = strain6.data
    target = 1.0 - 3.0 * theta.data
    diag = e[..., :3] - target
    off = e[..., 3:]
    return np.sqrt(np.sum(diag ** 2, -1) + 2.0 * np.sum(off ** 2, -1))


# ---------------------------------------------------------------- normal-form assembly


def _assemble(P, H, A, radius):
    """Decomposition from the theta normal form, see the module docstring."""
    dom = (-radius, radius)
    profiles = {k: (-3.0 * p).restrict(dom) for k, p in P.items()}
    aff = []
    for r in (1, 2, 3):
        g = AffineMap(1.0) + A[r - 1].scale(-3.0)
        for k, (slope, icpt) in H.items():
            if NORMALS[k].family == cyc(r, -1):
                g = g + AffineMap.along(NORMALS[k], -3.0 * slope, -3.0 * icpt)
        aff.append(g)
    # cancel rounding so that the trace-free check is exact
    c = sum(g.constant for g in aff)
    grad = np.sum([g.gradient for g in aff], axis=0)
    aff[2] = AffineMap(aff[2].constant - c, tuple(np.asarray(aff[2].gradient) - grad))
    return Decomposition(profiles, tuple(aff))


def _radius(half_width):
    return _SQ2 * half_width


def _set_in(s, radius):
    return s.with_bounds((-radius, radius))


@dataclass
class Generated:
    """Output of a generator: decomposition, displacement and flags."""

    decomposition: Decomposition
    displacement: DisplacementField
    spec: "ConfigSpec"
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    def theta(self, grid):
        return sample_to_grid(self.decomposition, grid)


def build_two_variant(i, f_plus, f_minus, lam, half_width=1.0, spec=None):
    """``theta_i = 0``; ``theta_{i+1} = f+(nu_i^+ . x) + f-(nu_i^- . x) + lam x_i + 1``.

    Admissibility is checked by interval arithmetic: the three summands
    range independently, which over-approximates the true range and so never
    accepts an inadmissible field.
    """
    R = _radius(half_width)
    npl, nmi = family_normals(i)
    rp = f_plus.range_bounds(-R, R)
    rm = f_minus.range_bounds(-R, R)
    rl = (-abs(lam) * half_width, abs(lam) * half_width)
    lo = rp[0] + rm[0] + rl[0] + 1.0
    hi = rp[1] + rm[1] + rl[1] + 1.0
    if lo < -TOL_ALG or hi > 1.0 + TOL_ALG:
        which = "f_plus" if (rp[1] - rp[0]) >= (rm[1] - rm[0]) else "f_minus"
        raise RangeError(f"theta_{cyc(i, 1)} may leave [0, 1]: interval bound [{lo:.6g}, {hi:.6g}] "
                         f"(f_plus range {rp}, f_minus range {rm}, lambda*x_{i} range {rl}); "
                         f"offending profile {which}")
    P = {npl.name: -f_plus, nmi.name: -f_minus}
    H = {npl.name: (0.0, 0.0), nmi.name: (0.0, 0.0)}
    ei = np.eye(3)[i - 1]
    A = [AffineMap(), AffineMap(), AffineMap()]
    A[cyc(i, -1) - 1] = AffineMap(0.0, tuple(-lam * ei))
    A[cyc(i, 1) - 1] = AffineMap(1.0, tuple(lam * ei))
    d = _assemble(P, H, A, R)
    degenerate = f_plus.is_affine() and f_minus.is_affine() and lam == 0.0
    return Generated(d, displacement_from_decomposition(d, spec), spec, degenerate,
                     {"i": i, "lambda": lam})


def build_second_order_laminate(i, nu, A, a, b, half_width=1.0, spec=None):
    """``theta_i = a x.nu + b`` with the two twins switched by ``chi_A(x . nu)``.

    The rows are ``theta_{i-1} = (1 - a t - b) chi_{A^c}``,
    ``theta_{i+1} = (1 - a t - b) chi_A`` for ``t = x . nu`` so that the
    fractions sum to one.
    """
    nu = normal(nu) if isinstance(nu, str) else nu
    if nu.family != i:
        raise ValueError(f"laminate normal must lie in N_{i}, got {nu.name}")
    R = _radius(half_width)
    lo, hi = sorted((a * -R + b, a * R + b))
    if lo < -TOL_ALG or hi > 1.0 + TOL_ALG:
        raise RangeError(f"theta_{i} = a t + b ranges over [{lo:.6g}, {hi:.6g}] on |t| <= {R:.6g}")
    A = _set_in(A, R)
    ind_c = Profile1D.indicator(A.complement(), domain=(-R, R))
    P = {nu.name: ind_c.times_linear(-a, 1.0 - b)}
    H = {nu.name: (-a, 1.0 - b)}
    Aff = [AffineMap(), AffineMap(), AffineMap()]
    Aff[i - 1] = AffineMap.along(nu, a, b)
    d = _assemble(P, H, Aff, R)
    degenerate = a == 0.0 or A.measure in (0.0, 2 * R)
    return Generated(d, displacement_from_decomposition(d, spec), spec, degenerate,
                     {"i": i, "nu": nu.name, "a": a, "b": b})


def build_checkerboard(i, nu_p, nu_m, A, B, a, b, half_width=1.0, spec=None):
    """``theta_{i-1} = a chi_A(x.nu_p)``, ``theta_{i+1} = b chi_B(x.nu_m)``, ``a + b = 1``."""
    nu_p = normal(nu_p) if isinstance(nu_p, str) else nu_p
    nu_m = normal(nu_m) if isinstance(nu_m, str) else nu_m
    if nu_p.family != cyc(i, 1) or nu_m.family != cyc(i, -1):
        raise ValueError(f"checkerboard normals must lie in N_{cyc(i, 1)} and N_{cyc(i, -1)}")
    if a < -TOL_ALG or b < -TOL_ALG or abs(a + b - 1.0) > TOL_ALG:
        raise RangeError(f"checkerboard weights need a, b >= 0 and a + b = 1; got a={a}, b={b}")
    R = _radius(half_width)
    A = _set_in(A, R)
    B = _set_in(B, R)
    P = {nu_p.name: Profile1D.indicator(A, -a, domain=(-R, R)),
         nu_m.name: Profile1D.indicator(B, b, domain=(-R, R))}
    H = {nu_p.name: (0.0, 0.0), nu_m.name: (0.0, 0.0)}
    Aff = [AffineMap(), AffineMap(), AffineMap()]
    Aff[i - 1] = AffineMap(1.0)
    d = _assemble(P, H, Aff, R)
    trivial = lambda s: s.measure in (0.0, 2 * R)
    degenerate = a == 0.0 or b == 0.0 or trivial(A) or trivial(B)
    return Generated(d, displacement_from_decomposition(d, spec), spec, degenerate,
                     {"i": i, "nu_p": nu_p.name, "nu_m": nu_m.name, "a": a, "b": b})


def triple_sets(d, x0, orientation, radius):
    """Half-lines ``K_j`` in the coordinate ``t_j = x . nu_j`` of each profile."""
    (n1, n2, n3), eps = oriented_triple(d)
    x0 = np.asarray(x0, dtype=float)
    out = []
    for nu, e in zip((n1, n2, n3), eps):
        c = float(x0 @ (e * nu.v))  # anchor in the oriented coordinate
        # t~ = e t; t~ <= c  <=>  t <= c (e=+1)  or  t >= -c (e=-1)
        lower = (orientation == "lower") == (e > 0)
        s = IntervalSet.half_line(e * c, "lower" if lower else "upper", (-radius, radius))
        out.append((nu, e, c, s))
    return out


def build_triple_intersection(d, x0, orientation, a, b, half_width=1.0, spec=None):
    """Six-sector configuration around the axis ``x0 + R d``.

    With oriented normals ``nu~_j = eps_j nu_j`` summing to zero and
    half-lines ``K_j`` anchored at ``x0 . nu~_j``,

        theta_1 = (a t~_2 + b_2) chi_{K_2^c} + (a t~_3 + b_3) chi_{K_3}

    and cyclically.
    """
    if orientation not in ("lower", "upper"):
        raise ValueError("orientation must be 'lower' or 'upper' for all three sets")
    b = tuple(float(x) for x in b)
    if len(b) != 3 or abs(sum(b) - 1.0) > TOL_ALG:
        raise RangeError(f"triple intersection needs b_1 + b_2 + b_3 = 1, got {b}")
    d = diagonal(d)
    R = _radius(half_width)
    P, H = {}, {}
    for (nu, e, c, s), bj in zip(triple_sets(d, x0, orientation, R), b):
        ind_c = Profile1D.indicator(s.complement(), domain=(-R, R))
        P[nu.name] = ind_c.times_linear(a * e, bj)
        H[nu.name] = (a * e, bj)
    dec = _assemble(P, H, [AffineMap(), AffineMap(), AffineMap()], R)
    _check_range_numeric(dec, half_width)
    return Generated(dec, displacement_from_decomposition(dec, spec), spec, False,
                     {"d": d.name, "x0": list(map(float, x0)), "orientation": orientation, "a": a, "b": list(b)})


def _check_range_numeric(dec, half_width, n=33):
    th = sample_to_grid(dec, Grid(n, half_width)).data
    lo, hi = float(th.min()), float(th.max())
    if lo < -TOL_ALG or hi > 1.0 + TOL_ALG:
        raise RangeError(f"volume fractions leave [0, 1]: sampled range [{lo:.6g}, {hi:.6g}]")


def austenite_decomposition(chi1p, chi1m, chi3, half_width=1.0):
    """Decomposition of the three-dimensional austenite-compatible example.

    ``theta_1 = chi_3/3``, ``theta_2 = 1 - (chi_1+ + chi_1- + chi_3)/3``,
    ``theta_3 = (chi_1+ + chi_1-)/3`` with arguments ``x . nu_1^+``,
    ``x . nu_1^-`` and ``x . nu_3^+``.
    """
    R = _radius(half_width)
    for name, p in (("chi1p", chi1p), ("chi1m", chi1m), ("chi3", chi3)):
        if p.fn is not None or np.any(p.coef[:, 1] != 0) or not set(p.coef[:, 0]).issubset({0.0, 1.0}):
            raise ValueError(f"{name} must be an indicator (piecewise constant with values 0 and 1)")
    third = 1.0 / 3.0
    P = {"nu1+": chi1p.scale(third), "nu1-": chi1m.scale(third), "nu3+": chi3.scale(-third)}
    H = {k: (0.0, 0.0) for k in P}
    Aff = [AffineMap(), AffineMap(1.0), AffineMap()]
    return _assemble(P, H, Aff, R)


def austenite_displacement(chi1p, chi1m, chi3, spec=None):
    """Displacement built from antiderivatives ``F' = (sqrt2/3) chi``.

    The primitive field ``w = (F_3, x_2 - F_1+ - F_1- - F_3, F_1+ - F_1-)``
    has symmetric gradient ``diag(theta)``; the strain ``sum theta_i e_i``
    equals ``I - 3 diag(theta)``, so the returned field is ``u = x - 3 w``.
    """
    n1p, n1m, n3 = NORMALS["nu1+"].v, NORMALS["nu1-"].v, NORMALS["nu3+"].v
    c = _SQ2 / 3.0

    def w(x):
        F1p = c * chi1p.integral(x @ n1p)
        F1m = c * chi1m.integral(x @ n1m)
        F3 = c * chi3.integral(x @ n3)
        return np.stack([F3, x[..., 1] - F1p - F1m - F3, F1p - F1m], -1)

    def dw(x):
        g1p = (c * chi1p(x @ n1p))[..., None] * n1p
        g1m = (c * chi1m(x @ n1m))[..., None] * n1m
        g3 = (c * chi3(x @ n3))[..., None] * n3
        e2 = np.broadcast_to(np.eye(3)[1], g3.shape)
        return np.stack([g3, e2 - g1p - g1m - g3, g1p - g1m], -2)

    u = lambda x: x - 3.0 * w(x)
    du = lambda x: np.eye(3) - 3.0 * dw(x)
    return DisplacementField(u, du, provenance=spec)


def build_austenite_example(chi1p, chi1m, chi3, grid, spec=None):
    """Sampled volume fractions and displacement of the austenite example."""
    dec = austenite_decomposition(chi1p, chi1m, chi3, grid.half_width)
    return sample_to_grid(dec, grid), austenite_displacement(chi1p, chi1m, chi3, spec)


# ---------------------------------------------------------------- configuration specs


_PROFILE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zero", "constant", "linear", "step", "piecewise-constant", "piecewise-linear",
                          "interpolant"]},
    },
}
_NUM_OR_INF = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
_SET = {
    "type": "object",
    "required": ["intervals"],
    "properties": {
        "intervals": {"type": "array", "items": {"type": "array", "items": _NUM_OR_INF,
                                                 "minItems": 2, "maxItems": 2}},
    },
}
_NORMAL = {"enum": list(NORMALS)}
_COMMON = {"half_width": {"type": "number", "exclusiveMinimum": 0}, "family": {}}

SCHEMAS = {
    "TwoVariant": {
        "required": ["i", "f_plus", "f_minus", "lambda"],
        "properties": {"i": {"enum": [1, 2, 3]}, "f_plus": _PROFILE, "f_minus": _PROFILE,
                       "lambda": {"type": "number"}},
    },
    "SecondOrderLaminate": {
        "required": ["i", "nu", "A", "a", "b"],
        "properties": {"i": {"enum": [1, 2, 3]}, "nu": _NORMAL, "A": _SET, "a": {"type": "number"},
                       "b": {"type": "number"}},
    },
    "Checkerboard": {
        "required": ["i", "nu_p", "nu_m", "A", "B", "a", "b"],
        "properties": {"i": {"enum": [1, 2, 3]}, "nu_p": _NORMAL, "nu_m": _NORMAL, "A": _SET, "B": _SET,
                       "a": {"type": "number", "minimum": 0}, "b": {"type": "number", "minimum": 0}},
    },
    "TripleIntersection": {
        "required": ["d", "x0", "orientation", "a", "b"],
        "properties": {"d": {"enum": ["[111]", "[-111]", "[1-11]", "[11-1]"]},
                       "x0": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                       "orientation": {"enum": ["lower", "upper"]}, "a": {"type": "number"},
                       "b": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
    },
    "AusteniteExample": {
        "required": ["chi1p", "chi1m", "chi3"],
        "properties": {"chi1p": _SET, "chi1m": _SET, "chi3": _SET},
    },
}
for _s in SCHEMAS.values():
    _s["type"] = "object"
    _s["properties"].update(_COMMON)
    _s["additionalProperties"] = False


class SpecError(ValueError):
    """Schema violation, carrying a JSON path such as ``.params.a``."""

    def __init__(self, path, message):
        super().__init__(f"{path or '.'}: {message}")
        self.path = path or "."


def _path(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass
class ConfigSpec:
    """A generator configuration: ``family`` plus per-family parameters."""

    family: str
    params: dict
    half_width: float = 1.0

    @classmethod
    def from_json(cls, obj):
        import jsonschema

        if not isinstance(obj, dict):
            raise SpecError(".", "configuration must be a JSON object")
        fam = obj.get("family")
        if fam not in SCHEMAS:
            raise SpecError(".family", f"unknown family {fam!r}; expected one of {list(FAMILIES)}")
        validator = jsonschema.Draft202012Validator(SCHEMAS[fam])
        errors = sorted(validator.iter_errors(obj), key=lambda e: (len(e.absolute_path), e.message))
        if errors:
            e = errors[0]
            raise SpecError(_path(e.absolute_path), e.message)
        params = {k: v for k, v in obj.items() if k not in ("family", "half_width")}
        return cls(fam, params, float(obj.get("half_width", 1.0)))

    def to_json(self):
        out = {"family": self.family, **self.params}
        if self.half_width != 1.0:
            out["half_width"] = self.half_width
        return out

    def _set(self, key):
        R = _radius(self.half_width)
        try:
            s = IntervalSet.from_json(self.params[key])
        except ValueError as exc:
            raise SpecError(f".{key}", str(exc)) from None
        return s.with_bounds((-R, R))

    def build(self):
        """Run the generator for this spec."""
        p, hw = self.params, self.half_width
        R = _radius(hw)
        try:
            if self.family == "TwoVariant":
                fp = profile_from_json(p["f_plus"], (-R, R))
                fm = profile_from_json(p["f_minus"], (-R, R))
                return build_two_variant(p["i"], fp, fm, float(p["lambda"]), hw, self)
            if self.family == "SecondOrderLaminate":
                return build_second_order_laminate(p["i"], p["nu"], self._set("A"), float(p["a"]),
                                                   float(p["b"]), hw, self)
            if self.family == "Checkerboard":
                return build_checkerboard(p["i"], p["nu_p"], p["nu_m"], self._set("A"), self._set("B"),
                                          float(p["a"]), float(p["b"]), hw, self)
            if self.family == "TripleIntersection":
                return build_triple_intersection(p["d"], p["x0"], p["orientation"], float(p["a"]),
                                                 p["b"], hw, self)
            if self.family == "AusteniteExample":
                chis = [Profile1D.indicator(self._set(k), domain=(-R, R)) for k in ("chi1p", "chi1m", "chi3")]
                dec = austenite_decomposition(*chis, hw)
                return Generated(dec, austenite_displacement(*chis, self), self, False, {})
        except SpecError:
            raise
        except (RangeError, ValueError) as exc:
            raise SpecError(".", str(exc)) from None
        raise SpecError(".family", f"unknown family {self.family!r}")
