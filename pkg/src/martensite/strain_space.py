"""Exact algebra of the cubic-to-tetragonal strain space.

Strains live in the two-dimensional space ``S`` of diagonal, trace-free
3x3 matrices.  The three martensite variants ``e_1, e_2, e_3`` are the
vertices of an equilateral triangle in ``S``; the stress-free set ``K`` is
the boundary of that triangle.  In barycentric (volume-fraction)
coordinates ``theta`` the same set is ``K~``: nonnegative triples summing
to one with at least one zero entry.

Variant and family indices are 1-based throughout, as in the crystallographic
convention; ``e_0`` is austenite.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .linalg import eigh3
from .tolerances import TOL_ALG

_SQ2 = math.sqrt(2.0)

_VARIANTS = {
    0: (0.0, 0.0, 0.0),
    1: (-2.0, 1.0, 1.0),
    2: (1.0, -2.0, 1.0),
    3: (1.0, 1.0, -2.0),
}


class ZeroDifferenceError(ValueError):
    """Raised when both strains of a rank-one query coincide."""


class NotInStrainSpaceError(ValueError):
    """Raised for strains that are not diagonal and trace-free."""


def cyc(i, k):
    """Cyclic shift of a 1-based index in {1, 2, 3}."""
    return (i - 1 + k) % 3 + 1


@dataclass(frozen=True)
class SymStrain:
    """A symmetric 3x3 strain."""

    entries: tuple

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("strain must be 3x3")
        if not np.array_equal(m, m.T):
            raise ValueError("strain must be symmetric")
        object.__setattr__(self, "entries", tuple(map(tuple, m.tolist())))

    @classmethod
    def diag(cls, d):
        return cls(tuple(map(tuple, np.diag(np.asarray(d, dtype=float)).tolist())))

    @property
    def matrix(self):
        return np.array(self.entries)

    @property
    def diagonal(self):
        return np.diag(self.matrix).copy()

    def violations(self, tol=TOL_ALG):
        """Violated S-membership constraints, as readable strings."""
        m = self.matrix
        out = []
        off = max(abs(m[0, 1]), abs(m[0, 2]), abs(m[1, 2]))
        if off > tol:
            out.append(f"off-diagonal entry of magnitude {off:.3g} exceeds {tol:g}")
        tr = float(np.trace(m))
        if abs(tr) > tol:
            out.append(f"trace {tr:.3g} is not zero")
        return out

    def in_S(self, tol=TOL_ALG):
        return not self.violations(tol)

    def __add__(self, other):
        return SymStrain(self.matrix + other.matrix)

    def __sub__(self, other):
        return SymStrain(self.matrix - other.matrix)

    def __mul__(self, s):
        return SymStrain(float(s) * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VolumeFractions:
    """Barycentric triple of variant volume fractions."""

    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if len(self.theta) != 3:
            raise ValueError("volume fractions are a triple")

    @property
    def normalized(self):
        return abs(sum(self.theta) - 1.0) <= TOL_ALG

    def in_K_tilde(self, tol=TOL_ALG):
        t = self.theta
        return self.normalized and all(-tol <= x <= 1 + tol for x in t) and min(t) <= tol


@dataclass(frozen=True)
class Normal:
    """A twin-plane normal; ``family`` is the axis it is orthogonal to."""

    family: int
    sign: str
    vector: tuple

    @property
    def name(self):
        return f"nu{self.family}{self.sign}"

    @property
    def v(self):
        return np.array(self.vector)

    def __repr__(self):
        return f"Normal({self.name})"


@dataclass(frozen=True)
class SpaceDiagonal:
    """A cube space diagonal, stored as an integer vector."""

    vector: tuple

    @property
    def v(self):
        return np.array(self.vector, dtype=float)

    @property
    def name(self):
        return "[" + "".join("1" if c > 0 else "-1" for c in self.vector) + "]"

    def __repr__(self):
        return f"SpaceDiagonal({self.name})"


@dataclass(frozen=True)
class RankOneConnection:
    """``A - B = a (.) n`` with unit normal ``n``."""

    amplitude: tuple
    normal: tuple

    def reconstruct(self):
        return sym_product(self.amplitude, self.normal)


def _normal(family, sign, vec):
    v = np.array(vec, dtype=float) / _SQ2
    return Normal(family, sign, tuple(v.tolist()))


# listed as in the crystallographic tables: (011), (01-1), (101), (-101), (110), (1-10)
NORMALS = {
    "nu1+": _normal(1, "+", (0, 1, 1)),
    "nu1-": _normal(1, "-", (0, 1, -1)),
    "nu2+": _normal(2, "+", (1, 0, 1)),
    "nu2-": _normal(2, "-", (-1, 0, 1)),
    "nu3+": _normal(3, "+", (1, 1, 0)),
    "nu3-": _normal(3, "-", (1, -1, 0)),
}
NORMAL_ORDER = tuple(NORMALS)

DIAGONALS = (
    SpaceDiagonal((1, 1, 1)),
    SpaceDiagonal((-1, 1, 1)),
    SpaceDiagonal((1, -1, 1)),
    SpaceDiagonal((1, 1, -1)),
)


def normal(name):
    """Look up a normal by name, e.g. ``"nu2-"``."""
    try:
        return NORMALS[name]
    except KeyError:
        raise ValueError(f"unknown normal {name!r}; expected one of {list(NORMALS)}") from None


def family_normals(i):
    return NORMALS[f"nu{i}+"], NORMALS[f"nu{i}-"]


def diagonal(d):
    """Coerce a name like ``"[11-1]"`` or an integer triple to a ``SpaceDiagonal``."""
    if isinstance(d, SpaceDiagonal):
        return d
    if isinstance(d, str):
        s = d.strip("[]")
        vals, k = [], 0
        while k < len(s):
            if s[k] == "-":
                vals.append(-1)
                k += 2
            else:
                vals.append(1)
                k += 1
        d = vals
    t = tuple(int(c) for c in d)
    for cand in DIAGONALS:
        if cand.vector == t or tuple(-c for c in cand.vector) == t:
            return cand
    raise ValueError(f"not a space diagonal: {d!r}")


def sym_product(a, n):
    """``a (.) n = (a (x) n + n (x) a) / 2``."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    return 0.5 * (np.outer(a, n) + np.outer(n, a))


def martensite_strain(i):
    """Stress-free strain of variant ``i`` (0 is austenite)."""
    if i not in _VARIANTS:
        raise ValueError(f"variant index must be in 0..3, got {i!r}")
    return SymStrain.diag(_VARIANTS[i])


def _require_S(e):
    if not isinstance(e, SymStrain):
        e = SymStrain(np.asarray(e, dtype=float))
    bad = e.violations()
    if bad:
        raise NotInStrainSpaceError("strain not in S: " + "; ".join(bad))
    return e


def theta_of_strain(e):
    """Volume fractions ``theta_i = (1 - e_ii) / 3`` of a strain in S."""
    e = _require_S(e)
    return VolumeFractions(tuple((1.0 - e.diagonal) / 3.0))


def strain_of_theta(theta):
    """The mixture ``sum_i theta_i e_i``."""
    t = theta.theta if isinstance(theta, VolumeFractions) else tuple(theta)
    if abs(sum(t) - 1.0) > TOL_ALG:
        raise ValueError(f"volume fractions sum to {sum(t):.12g}, not 1")
    return SymStrain.diag(1.0 - 3.0 * np.asarray(t, dtype=float))


_VERTS = np.eye(3)


def dist_theta_to_K(theta):
    """Euclidean distance of barycentric points to the simplex boundary ``K~``.

    Vectorized over a trailing axis of length three.  The three edges are
    handled by exact point-to-segment projection.
    """
    t = np.asarray(theta, dtype=float)
    c = (t[..., 0], t[..., 1], t[..., 2])
    best = None
    for a, b, o in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        # projection onto the edge from vertex a to vertex b
        s = np.clip((c[b] - c[a] + 1.0) * 0.5, 0.0, 1.0)
        d2 = (c[a] - 1.0 + s) ** 2 + (c[b] - s) ** 2 + c[o] ** 2
        best = d2 if best is None else np.minimum(best, d2)
    return np.sqrt(best)


def dist_to_K(e):
    """Frobenius distance of a strain in S to ``K``.

    Because ``theta -> sum theta_i e_i`` scales Euclidean lengths in the
    plane ``sum theta = 1`` by exactly three, the distance is computed in
    barycentric coordinates and multiplied back.
    """
    e = _require_S(e)
    return 3.0 * float(dist_theta_to_K((1.0 - e.diagonal) / 3.0))


def _canonical(a, n):
    # first nonzero component of the normal positive
    for c in n:
        if abs(c) > 1e-12:
            if c < 0:
                a, n = -a, -n
            break
    return a + 0.0, n + 0.0


def rank_one_connect(A, B, tol=TOL_ALG):
    """All symmetric rank-one connections ``A - B = a (.) n``.

    Returns a tuple of zero, one or two ``RankOneConnection`` records.
    The matrix ``a (.) n`` has eigenvalues ``(a.n +- |a||n|)/2`` and 0, so a
    connection exists iff the middle eigenvalue of ``A - B`` vanishes; the
    two solutions ``n ~ sqrt(l1) v1 +- sqrt(-l3) v3`` swap roles with ``a``.
    """
    A = A.matrix if isinstance(A, SymStrain) else np.asarray(A, dtype=float)
    B = B.matrix if isinstance(B, SymStrain) else np.asarray(B, dtype=float)
    D = A - B
    D = 0.5 * (D + D.T)
    scale = float(np.max(np.abs(D)))
    if scale <= tol:
        raise ZeroDifferenceError("A and B coincide: zero difference, no interface normal is defined")
    w, v = eigh3(D)
    t = tol * max(1.0, scale)
    lo, mid, hi = w
    if abs(mid) > t:
        return ()
    if hi > t and lo < -t:
        out = []
        for kappa in (1.0, -1.0):
            n_raw = math.sqrt(hi) * v[:, 2] + kappa * math.sqrt(-lo) * v[:, 0]
            a_raw = math.sqrt(hi) * v[:, 2] - kappa * math.sqrt(-lo) * v[:, 0]
            nn = float(np.linalg.norm(n_raw))
            a, n = _canonical(a_raw * nn, n_raw / nn)
            out.append(RankOneConnection(tuple(a.tolist()), tuple(n.tolist())))
        out.sort(key=lambda c: tuple(-x for x in c.normal))
        return tuple(out)
    # rank one: D = lam v v^T
    k = 2 if hi > t else 0
    a, n = _canonical(w[k] * v[:, k], v[:, k].copy())
    return (RankOneConnection(tuple(a.tolist()), tuple(n.tolist())),)


def austenite_compatible_fractions(i, j):
    """Fractions ``lam`` with ``lam e_i + (1 - lam) e_j`` rank-one connected to 0.

    The mixture is diagonal and trace-free, so it is rank-one connected to
    austenite exactly when one diagonal entry vanishes.  Each entry is affine
    in ``lam``; its roots in [0, 1] are collected.
    """
    if i == j:
        raise ValueError("variant indices must differ")
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("variant indices must be in {1, 2, 3}")
    ei = martensite_strain(i).diagonal
    ej = martensite_strain(j).diagonal
    roots = []
    for k in range(3):
        slope = ei[k] - ej[k]
        if slope == 0.0:
            continue
        lam = -ej[k] / slope
        if -TOL_ALG <= lam <= 1 + TOL_ALG and all(abs(lam - r) > TOL_ALG for r in roots):
            roots.append(float(lam))
    return tuple(sorted(roots))


def normals_orthogonal_to(d):
    """The three normals (one per family) orthogonal to a space diagonal."""
    d = diagonal(d)
    out = []
    for i in (1, 2, 3):
        hits = [nu for nu in family_normals(i) if abs(float(np.dot(nu.v, d.v))) < TOL_ALG]
        assert len(hits) == 1
        out.append(hits[0])
    return tuple(out)


def diagonals_orthogonal_to(nu):
    """The two space diagonals orthogonal to a normal."""
    return tuple(d for d in DIAGONALS if abs(float(np.dot(nu.v, d.v))) < TOL_ALG)


def dependent_triple(nu_a, nu_b):
    """Complete two normals of distinct families to a linearly dependent triple.

    Returns ``(nu_c, d, signs)`` with ``d`` the unique space diagonal
    orthogonal to both inputs, ``nu_c`` the normal of the remaining family
    orthogonal to ``d``, and ``signs`` with ``sum eps_k nu_k = 0`` and
    ``eps_a = +1``.
    """
    if nu_a.family == nu_b.family:
        raise ValueError("normals of the same family do not form a dependent triple")
    common = [d for d in DIAGONALS if abs(float(np.dot(nu_a.v, d.v))) < TOL_ALG
              and abs(float(np.dot(nu_b.v, d.v))) < TOL_ALG]
    if len(common) != 1:
        raise ValueError(f"{nu_a.name} and {nu_b.name} share {len(common)} space diagonals")
    d = common[0]
    fam_c = ({1, 2, 3} - {nu_a.family, nu_b.family}).pop()
    nu_c = [nu for nu in family_normals(fam_c) if abs(float(np.dot(nu.v, d.v))) < TOL_ALG][0]
    for eb, ec in itertools.product((1, -1), repeat=2):
        if np.allclose(nu_a.v + eb * nu_b.v + ec * nu_c.v, 0.0, atol=TOL_ALG):
            return nu_c, d, (1, eb, ec)
    raise AssertionError("no sign combination closes the triple")


def oriented_triple(d):
    """Oriented normals ``(nu~_1, nu~_2, nu~_3)`` summing to zero for a diagonal.

    ``nu~_k = eps_k nu_k`` with ``nu_k`` the family-``k`` normal orthogonal to
    ``d`` and signs from ``dependent_triple(nu_1, nu_2)``.
    """
    n1, n2, n3 = normals_orthogonal_to(d)
    c, _, (e1, e2, e3) = dependent_triple(n1, n2)
    assert c == n3
    return (n1, n2, n3), (e1, e2, e3)
