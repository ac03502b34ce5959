"""Decision procedure for the four limit families.

The steps follow the structure of the rigidity argument: recover the
decomposition, look for a vanishing volume fraction (two-variant
configuration), otherwise find a space diagonal along which the field is
constant and fit the planar families from the most to the least rigid.
Fits are judged by the sup-norm misfit at the nodes against ``tol_fit``.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from ..compatibility import Recovery, WAVE_TOL, check_compatible, recover_decomposition
from ..fields import Profile1D
from ..intervals import IntervalSet
from ..strain_space import DIAGONALS, cyc, dist_theta_to_K, family_normals, normals_orthogonal_to, oriented_triple
from ..tolerances import TOL_FIELD, tol_fit as _tol_fit

FAMILY_ORDER = ("TwoVariant", "TripleIntersection", "Checkerboard", "SecondOrderLaminate")
UNCLASSIFIED = "unclassified"


@dataclass
class ClassificationResult:
    family: str
    params: dict = field(default_factory=dict)
    residual: float = float("inf")
    residuals: dict = field(default_factory=dict)
    tol_fit: float = 0.0
    degenerate: bool = False
    flags: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def classified(self):
        return self.family != UNCLASSIFIED

    def to_json(self):
        return {"family": self.family, "params": self.params, "residual": self.residual,
                "residuals": self.residuals, "tol_fit": self.tol_fit, "degenerate": self.degenerate,
                "flags": self.flags, "diagnostics": self.diagnostics}

    def dumps(self, **kw):
        return json.dumps(self.to_json(), default=_json_default, **kw)

    @classmethod
    def from_json(cls, obj):
        return cls(obj["family"], obj.get("params", {}), obj.get("residual", float("inf")),
                   obj.get("residuals", {}), obj.get("tol_fit", 0.0), obj.get("degenerate", False),
                   obj.get("flags", {}), obj.get("diagnostics", {}))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------- helpers


class _Ctx:
    """Per-field data shared by the family fits."""

    def __init__(self, theta, rec: Recovery, struct_tol):
        self.grid = theta.grid
        self.theta = theta.data
        self.rec = rec
        self.F = rec.levels
        self.struct_tol = struct_tol
        self.R = self.grid.projection_radius
        self.L = 2 * self.grid.n - 1

    def lev(self, nu):
        return self.grid.level_index(nu)

    def tv(self, nu):
        return self.grid.level_values(nu)

    def level_means(self, values, nu):
        lev = np.ascontiguousarray(self.lev(nu)).ravel()
        s = np.bincount(lev, weights=values.ravel(), minlength=self.L)
        c = np.bincount(lev, minlength=self.L)
        return s / np.maximum(c, 1), c

    def amplitude(self, nu):
        # sup of the canonical strain profile, in volume-fraction units
        return float(np.max(np.abs(self.F[nu.name]))) / 3.0

    def nonaffine(self, nu):
        return self.amplitude(nu) > self.struct_tol

    def misfit(self, recon):
        return float(np.max(np.abs(recon - self.theta)))


def _mask_to_set(mask, tv, R):
    """Union of level runs flagged in ``mask``; breakpoints midway between levels."""
    out = []
    k, L = 0, mask.size
    while k < L:
        if mask[k]:
            s = k
            while k + 1 < L and mask[k + 1]:
                k += 1
            a = -R if s == 0 else 0.5 * (tv[s - 1] + tv[s])
            b = R if k == L - 1 else 0.5 * (tv[k] + tv[k + 1])
            out.append((a, b))
        k += 1
    return IntervalSet(tuple(out), (-R, R))


def _lip_estimate(rec, grid):
    lip = 0.0
    for k, F in rec.levels.items():
        d = np.abs(np.diff(F)) / (grid.h / np.sqrt(2.0))
        lip = max(lip, float(np.percentile(d, 90)) / 3.0)
    for g in rec.decomposition.affines:
        lip = max(lip, float(np.linalg.norm(g.gradient)) / 3.0)
    return lip


def _shift_variation(data, d):
    n = data.shape[0]
    v = np.asarray(d.vector)
    a = [slice(max(0, -c), n - max(0, c)) for c in v[::-1]]
    b = [slice(max(0, c), n + min(0, c)) for c in v[::-1]]
    return float(np.max(np.abs(data[tuple(b)] - data[tuple(a)])))


# ---------------------------------------------------------------- family fits


def _fit_two_variant(ctx, i):
    grid = ctx.grid
    npl, nmi = family_normals(i)
    g = ctx.rec.decomposition.affines[cyc(i, 1) - 1]
    # (1 - g_{i+1}) / 3 = c0 + b . x, split along E_i, nu_i^+, nu_i^-
    c0 = (1.0 - g.constant) / 3.0
    b = -np.asarray(g.gradient) / 3.0
    lam = float(b[i - 1])
    fp = ctx.F[npl.name] / 3.0 + float(b @ npl.v) * ctx.tv(npl) + (c0 - 1.0)
    fm = ctx.F[nmi.name] / 3.0 + float(b @ nmi.v) * ctx.tv(nmi)
    x_i = grid.points()[..., i - 1]
    up = fp[ctx.lev(npl)] + fm[ctx.lev(nmi)] + lam * x_i + 1.0
    recon = np.zeros_like(ctx.theta)
    recon[..., cyc(i, 1) - 1] = up
    recon[..., cyc(i, -1) - 1] = 1.0 - up
    res = ctx.misfit(recon)
    R = ctx.R
    params = {"i": i, "lambda": lam,
              "f_plus": Profile1D.interpolant(ctx.tv(npl), fp, (-R, R)).to_json(),
              "f_minus": Profile1D.interpolant(ctx.tv(nmi), fm, (-R, R)).to_json()}
    degenerate = float(up.max() - up.min()) <= ctx.struct_tol
    return res, params, degenerate, {"f_plus_levels": fp, "f_minus_levels": fm}


def _fit_checkerboard(ctx, d, i):
    perp = {nu.family: nu for nu in normals_orthogonal_to(d)}
    nu_p, nu_m = perp[cyc(i, 1)], perp[cyc(i, -1)]
    th = ctx.theta
    mp, _ = ctx.level_means(th[..., cyc(i, -1) - 1], nu_p)
    mm, _ = ctx.level_means(th[..., cyc(i, 1) - 1], nu_m)
    a, b = float(mp.max()), float(mm.max())
    st = ctx.struct_tol
    A = mp > a / 2 if a > st else np.zeros(mp.size, bool)
    B = mm > b / 2 if b > st else np.zeros(mm.size, bool)
    if a <= st:
        a = 1.0 - b
    if b <= st:
        b = 1.0 - a
    recon = np.empty_like(th)
    tm1 = a * A[ctx.lev(nu_p)]
    tp1 = b * B[ctx.lev(nu_m)]
    recon[..., cyc(i, -1) - 1] = tm1
    recon[..., cyc(i, 1) - 1] = tp1
    recon[..., i - 1] = 1.0 - tm1 - tp1
    res = max(ctx.misfit(recon), abs(a + b - 1.0))
    Aset = _mask_to_set(A, ctx.tv(nu_p), ctx.R)
    Bset = _mask_to_set(B, ctx.tv(nu_m), ctx.R)
    trivial = lambda s: s.measure <= 0 or s.measure >= 2 * ctx.R
    degenerate = a <= st or b <= st or trivial(Aset) or trivial(Bset)
    params = {"i": i, "nu_p": nu_p.name, "nu_m": nu_m.name, "a": a, "b": b, "A": Aset.to_json(),
              "B": Bset.to_json(), "d": d.name}
    return res, params, degenerate


def _fit_laminate(ctx, d, i):
    nu = {n.family: n for n in normals_orthogonal_to(d)}[i]
    th = ctx.theta
    tv = ctx.tv(nu)
    m, cnt = ctx.level_means(th[..., i - 1], nu)
    w = np.sqrt(cnt.astype(float))
    a, b = np.linalg.lstsq(np.column_stack([tv, np.ones_like(tv)]) * w[:, None], m * w, rcond=None)[0]
    a, b = float(a), float(b)
    rest = 1.0 - a * tv - b
    up, _ = ctx.level_means(th[..., cyc(i, 1) - 1], nu)
    known = np.abs(rest) > ctx.struct_tol
    ratio = np.where(known, up / np.where(known, rest, 1.0), 0.0)
    A = ratio > 0.5
    # levels where theta_i = 1 carry no information about A; extend the neighbouring choice
    for k in range(1, A.size):
        if not known[k]:
            A[k] = A[k - 1]
    t = tv[ctx.lev(nu)]
    chi = A[ctx.lev(nu)]
    recon = np.empty_like(th)
    r = 1.0 - a * t - b
    recon[..., i - 1] = a * t + b
    recon[..., cyc(i, 1) - 1] = r * chi
    recon[..., cyc(i, -1) - 1] = r * ~chi
    res = ctx.misfit(recon)
    Aset = _mask_to_set(A, tv, ctx.R)
    degenerate = abs(a) <= ctx.struct_tol or Aset.measure <= 0 or Aset.measure >= 2 * ctx.R
    params = {"i": i, "nu": nu.name, "a": a, "b": b, "A": Aset.to_json(), "d": d.name}
    return res, params, degenerate


def _fit_triple(ctx, d):
    (n1, n2, n3), eps = oriented_triple(d)
    nus = (n1, n2, n3)
    lo, hi = [], []
    for nu, e in zip(nus, eps):
        F = ctx.F[nu.name]
        tv = ctx.tv(nu)
        k = int(np.argmax(np.abs(np.diff(F))))
        lo.append(min(e * tv[k], e * tv[k + 1]))
        hi.append(max(e * tv[k], e * tv[k + 1]))
    lo, hi = np.array(lo), np.array(hi)
    if not (lo.sum() < 0 < hi.sum()):
        return np.inf, {"reason": "jump positions are not concurrent"}, False
    # anchors in the open level gaps with zero sum, as the oriented normals sum to zero
    lam = -lo.sum() / (hi - lo).sum()
    c = lo + lam * (hi - lo)
    N = np.array([e * nu.v for nu, e in zip(nus, eps)])
    x0 = np.linalg.lstsq(N, c, rcond=None)[0]
    th = ctx.theta
    tt = [e * ctx.tv(nu)[ctx.lev(nu)] for nu, e in zip(nus, eps)]

    def columns(tt, K):
        # theta_r = (a t~_{r+1} + b_{r+1}) chi_{K_{r+1}^c} + (a t~_{r-1} + b_{r-1}) chi_{K_{r-1}}
        out = []
        for r in range(3):
            jp, jm = (r + 1) % 3, (r - 1) % 3
            Kc, Km = ~K[jp], K[jm]
            cb = [np.zeros(Kc.shape) for _ in range(3)]
            cb[jp] = cb[jp] + Kc
            cb[jm] = cb[jm] + Km
            out.append((tt[jp] * Kc + tt[jm] * Km, cb))
        return out

    def sets(tt, orient):
        return [(tt[j] <= c[j]) if orient == "lower" else (tt[j] >= c[j]) for j in range(3)]

    def recon(cols, a, bb):
        return np.stack([a * ca + bb[0] * cb[0] + bb[1] * cb[1] + bb[2] * cb[2] for ca, cb in cols], -1)

    sub = (slice(None, None, 2),) * 3
    ts, ths = [x[sub] for x in tt], th[sub]
    best = None
    for orient in ("lower", "upper"):
        cols = columns(ts, sets(ts, orient))
        # unknowns (a, b1, b2) with b3 = 1 - b1 - b2
        X = np.concatenate([np.stack([ca, cb[0] - cb[2], cb[1] - cb[2]], -1).reshape(-1, 3) for ca, cb in cols])
        y = np.concatenate([(ths[..., r] - cols[r][1][2]).ravel() for r in range(3)])
        a, b1, b2 = np.linalg.lstsq(X, y, rcond=None)[0]
        bb = np.array([b1, b2, 1.0 - b1 - b2])
        res = float(np.max(np.abs(recon(cols, a, bb) - ths)))
        if best is None or res < best[0]:
            best = (res, orient, float(a), bb)
    _, orient, a, bb = best
    res = ctx.misfit(recon(columns(tt, sets(tt, orient)), a, bb))
    params = {"d": d.name, "x0": x0.tolist(), "orientation": orient, "a": a, "b": bb.tolist(),
              "anchors": c.tolist()}
    return res, params, False


# ---------------------------------------------------------------- driver


def _inclusion_diagnostic(theta, tol):
    dist = 3.0 * dist_theta_to_K(theta.data)
    bad = dist > tol
    out = {"max_dist_to_K": float(dist.max()), "nodes_outside_K": int(bad.sum())}
    if bad.any():
        idx = np.argwhere(bad)[:10]
        pts = theta.grid.points()
        out["example_nodes"] = [{"node": [int(i) for i in ix[::-1]], "x": pts[tuple(ix)].tolist(),
                                 "theta": theta.data[tuple(ix)].tolist(), "dist_to_K": float(dist[tuple(ix)])}
                                for ix in idx]
    return out, bool(bad.any())


def classify(theta, grid=None, tol_field=TOL_FIELD, tol_fit=None, wave_tol=WAVE_TOL, subcube=True):
    """Classify a sampled volume-fraction field.

    Raises ``IncompatibleFieldError`` when a wave equation fails.  Fields
    outside ``K~`` are returned as unclassified with the offending nodes.
    """
    grid = grid or theta.grid
    if grid != theta.grid:
        raise ValueError("field and grid disagree")
    if theta.nchannels != 3 or grid.dim != 3:
        raise ValueError("classification needs a 3-channel field on a 3-D grid")
    incl, outside = _inclusion_diagnostic(theta, tol_field)
    if outside:
        result = ClassificationResult(UNCLASSIFIED, diagnostics={"reason": "differential inclusion violated",
                                                                 "inclusion": incl})
        if subcube:
            result.diagnostics["largest_subcube"] = _subcube_search(theta, tol_field, tol_fit, wave_tol)
        return result
    wave = check_compatible(theta, wave_tol if wave_tol is not None else np.inf)
    rec = recover_decomposition(theta, wave_tol=None)
    lip = _lip_estimate(rec, grid)
    tf = _tol_fit(grid.h, lip, tol_field) if tol_fit is None else float(tol_fit)
    struct_tol = max(1e3 * tol_field, 10.0 * rec.residual)
    ctx = _Ctx(theta, rec, struct_tol)
    residuals = {f: None for f in FAMILY_ORDER}
    diag = {"inclusion": incl, "wave_max": wave.max, "recovery_residual": rec.residual, "lip_estimate": lip,
            "struct_tol": struct_tol}

    def done(fam, res, params, degenerate, flags=None):
        return ClassificationResult(fam, params, float(res), residuals, tf, bool(degenerate), flags or {}, diag)

    # two-variant: some volume fraction vanishes identically
    zero = [i for i in (1, 2, 3) if float(np.max(np.abs(theta.data[..., i - 1]))) <= tf]
    if zero:
        zero.sort(key=lambda i: -float(theta.data[..., cyc(i, 1) - 1].mean()))
        best = None
        for i in zero:
            res, params, deg, _ = _fit_two_variant(ctx, i)
            if best is None or res < best[0]:
                best = (res, params, deg)
            if res <= tf:
                break
        residuals["TwoVariant"] = float(best[0])
        if best[0] <= tf:
            return done("TwoVariant", *best)

    # planarity: the diagonal with smallest variation under an integer lattice shift
    var = {d.name: _shift_variation(theta.data, d) for d in DIAGONALS}
    diag["planarity_variation"] = var
    dname = min(var, key=var.get)
    if var[dname] > tf:
        diag["reason"] = "not planar and no vanishing volume fraction"
        return _finish_unclassified(theta, residuals, tf, diag, subcube, tol_field, tol_fit, wave_tol)
    d = [x for x in DIAGONALS if x.name == dname][0]
    diag["diagonal"] = dname
    perp = normals_orthogonal_to(d)
    active = {nu.family: ctx.nonaffine(nu) for nu in perp}
    diag["active_families"] = [k for k, v in active.items() if v]

    if all(active.values()):
        res, params, deg = _fit_triple(ctx, d)
        residuals["TripleIntersection"] = float(res)
        if res <= tf:
            return done("TripleIntersection", res, params, deg)

    cand = []
    for i in (1, 2, 3):
        if not active[i]:
            cand.append(_fit_checkerboard(ctx, d, i))
    if cand:
        res, params, deg = min(cand, key=lambda t: t[0])
        residuals["Checkerboard"] = float(res)
        if res <= tf:
            return done("Checkerboard", res, params, deg)

    cand = []
    for i in (1, 2, 3):
        if active[i]:
            cand.append(_fit_laminate(ctx, d, i))
    if cand:
        res, params, deg = min(cand, key=lambda t: t[0])
        residuals["SecondOrderLaminate"] = float(res)
        if res <= tf:
            return done("SecondOrderLaminate", res, params, deg)

    diag["reason"] = "no family fits within tol_fit"
    return _finish_unclassified(theta, residuals, tf, diag, subcube, tol_field, tol_fit, wave_tol)


def _finish_unclassified(theta, residuals, tf, diag, subcube, tol_field, tol_fit, wave_tol):
    if subcube:
        diag["largest_subcube"] = _subcube_search(theta, tol_field, tol_fit, wave_tol)
    return ClassificationResult(UNCLASSIFIED, {}, float("inf"), residuals, tf, False, {}, diag)


def _subcube_search(theta, tol_field, tol_fit, wave_tol):
    """Largest centred subcube (from a coarse size ladder) on which one family fits."""
    n = theta.grid.n
    sizes = []
    for f in (0.875, 0.75, 0.625, 0.5, 0.375, 0.25, 0.125):
        m = n - 2 * int(round((n - 1) * (1 - f) / 2))
        if m >= 9 and m < n and m not in sizes:
            sizes.append(m)
    from ..compatibility import IncompatibleFieldError

    for m in sizes:
        sub = theta.subcube(m)
        try:
            r = classify(sub, tol_field=tol_field, tol_fit=tol_fit, wave_tol=wave_tol, subcube=False)
        except IncompatibleFieldError:
            continue
        if r.classified:
            return {"n": m, "half_width": sub.grid.half_width, "family": r.family, "residual": r.residual}
    return None
