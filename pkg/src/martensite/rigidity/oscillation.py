"""Mean oscillation at finite scales, the VMO surrogate and mollified distances."""

from dataclasses import dataclass, field
import math

import numpy as np

from ..fields import Profile1D
from ..kernels import window_oscillation
from ..tolerances import VMO_THRESHOLD

SUBSAMPLES = 64


@dataclass
class OscillationModulus:
    """Sup over centres of the mean oscillation, one value per scale."""

    scales: tuple
    values: tuple
    centers: tuple = ()

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise ValueError("oscillation values are nonnegative")

    def to_json(self):
        return {"scales": list(self.scales), "values": list(self.values), "centers": list(self.centers)}


def _ball_oscillation(f, centers, r, lo, hi, q):
    a = np.maximum(centers - r, lo)
    b = np.minimum(centers + r, hi)
    s = (np.arange(q) + 0.5) / q
    pts = a[:, None] + (b - a)[:, None] * s[None, :]
    v = f(pts)
    return np.mean(np.abs(v - v.mean(axis=1, keepdims=True)), axis=1)


def bmo_modulus(f, scales, domain=None, n_centers=513, subsamples=SUBSAMPLES):
    """Mean oscillation ``sup_x avg_{B(x,r) & U} |f - avg f|`` for each scale ``r``.

    ``f`` is a ``Profile1D`` (balls use composite midpoint quadrature with
    ``subsamples`` points; centres are a uniform grid plus the breakpoints)
    or a pair ``(t, values)`` of uniform samples read as midpoint-rule nodes.
    """
    scales = [float(r) for r in scales]
    if not scales:
        raise ValueError("empty scale list")
    if any(r <= 0 for r in scales):
        raise ValueError("scales must be positive")
    if subsamples < SUBSAMPLES:
        raise ValueError(f"at least {SUBSAMPLES} subsamples per ball")
    if isinstance(f, Profile1D):
        lo, hi = domain or f.domain
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("oscillation needs a bounded interval")
        centers = np.union1d(np.linspace(lo, hi, n_centers), [b for b in f.breakpoints if lo < b < hi])
        vals, where = [], []
        for r in scales:
            osc = _ball_oscillation(f, centers, r, lo, hi, subsamples)
            k = int(np.argmax(osc))
            vals.append(float(osc[k]))
            where.append(float(centers[k]))
        return OscillationModulus(tuple(scales), tuple(vals), tuple(where))
    t, v = (np.asarray(a, dtype=float) for a in f)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise ValueError("samples must be matching 1-D arrays")
    h = float(t[1] - t[0])
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        raise ValueError("samples must be uniformly spaced")
    vals, where = [], []
    for r in scales:
        k = int(round(r / h))
        tt, vv = t, v
        if 2 * k + 1 < subsamples:
            # refine by linear interpolation so that every ball holds enough nodes
            m = int(math.ceil(subsamples / max(2 * k + 1, 1)))
            tt = np.linspace(t[0], t[-1], (t.size - 1) * m + 1)
            vv = np.interp(tt, t, v)
            k = int(round(r / (tt[1] - tt[0])))
        osc = window_oscillation(vv, k)
        p = int(np.argmax(osc))
        vals.append(float(osc[p]))
        where.append(float(tt[p]))
    return OscillationModulus(tuple(scales), tuple(vals), tuple(where))


@dataclass
class VMOVerdict:
    vmo: bool
    limit: float
    threshold: float
    diagnostic: dict = field(default_factory=dict)

    def __bool__(self):
        return self.vmo


def vmo_flag(m, threshold=VMO_THRESHOLD):
    """Extrapolate the modulus to ``r -> 0`` and compare with ``threshold``.

    The limit is the intercept of a least-squares line through
    ``(r, modulus(r))``, clipped to the observed range.
    """
    r = np.asarray(m.scales, dtype=float)
    v = np.asarray(m.values, dtype=float)
    if r.size < 3:
        raise ValueError("need at least three scales")
    if r.max() / r.min() < 10.0 * (1 - 1e-12):
        raise ValueError("scales must span at least a decade")
    slope, icpt = np.polyfit(r, v, 1)
    limit = float(np.clip(icpt, 0.0, v.max()))
    diag = {"scales": r.tolist(), "values": v.tolist(), "fit_slope": float(slope), "fit_intercept": float(icpt)}
    return VMOVerdict(limit <= threshold, limit, threshold, diag)


def _dist_to_set(p, K):
    """Distance of points ``p`` (m, dim) to ``K``: an (k, dim) point set or (k, 2, dim) segments."""
    K = np.asarray(K, dtype=float)
    if K.ndim == 2:
        d = np.linalg.norm(p[:, None, :] - K[None, :, :], axis=-1)
        return d.min(axis=1)
    a, b = K[:, 0, :], K[:, 1, :]
    ab = b - a
    L2 = np.maximum(np.einsum("kd,kd->k", ab, ab), 1e-300)
    s = np.einsum("mkd,kd->mk", p[:, None, :] - a[None], ab) / L2
    s = np.clip(s, 0.0, 1.0)
    q = a[None] + s[..., None] * ab[None]
    return np.linalg.norm(p[:, None, :] - q, axis=-1).min(axis=1)


@dataclass
class MollifiedDistance:
    delta: float
    sup: float
    where: float
    profile: np.ndarray


def mollify_distance(t, values, K, delta):
    """``sup_x dist(f_delta(x), K)`` for the moving average over ``[x - delta, x + delta]``.

    Only centres whose window lies inside the sampled interval are used.
    ``values`` has shape (m,) or (m, dim).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    h = float(t[1] - t[0])
    if not delta > h:
        raise ValueError("delta must exceed the sample spacing")
    k = int(round(delta / h))
    if 2 * k + 1 > t.size:
        raise ValueError("averaging window larger than the domain")
    cs = np.vstack([np.zeros((1, v.shape[1])), np.cumsum(v, axis=0)])
    avg = (cs[2 * k + 1:] - cs[:-2 * k - 1]) / (2 * k + 1)
    centers = t[k:t.size - k]
    d = _dist_to_set(avg, K)
    p = int(np.argmax(d))
    return MollifiedDistance(float(delta), float(d[p]), float(centers[p]), d)
