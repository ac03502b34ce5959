"""Elastic and interfacial energy, laminates with branching, and scaling sweeps.

The energy of a displacement ``u`` and a phase partition ``chi`` is

    E_eta = eta^(-2/3) int |e(u) - sum chi_i e_i|^2 + eta^(1/3) sum_i |D chi_i|

with the perimeter measured by face counting.  The constructions live in a
two-dimensional slab, extruded by unit length: ``y = x . n`` runs across
the twin layers (``n`` the twin normal of variants 1 and 2), ``z = x . m``
runs away from the interface ``{z = 0}`` where the displacement must match
the macroscopic affine map.  Reported energies are per unit interface area.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import json
import math
import warnings

import numpy as np

from .fields import Grid
from .generators import DisplacementField
from .kernels import face_jumps_2d, face_tv
from .strain_space import NORMALS, dist_theta_to_K, martensite_strain

VARIANT_STRAINS = np.array([martensite_strain(i).matrix for i in (1, 2, 3)])
TWIN_NORMAL = NORMALS["nu3-"].v  # n: the variant-1/variant-2 lamination direction
INTERFACE_NORMAL = NORMALS["nu3+"].v  # m
EXTRUSION = np.cross(TWIN_NORMAL, INTERFACE_NORMAL)
# e_2 - e_1 = 6 m (.) n, so u = e_bar x + 6 m phi(y, z) is the twin displacement
SHEAR = 6.0
DEFAULT_ETAS = tuple(10.0 ** np.arange(-1.0, -4.01, -0.5))


class GridMismatchError(ValueError):
    pass


class ResolutionError(ValueError):
    """Finest twin period below four grid spacings."""


class InfeasibleError(ValueError):
    """No admissible construction for the requested parameters."""


class DegenerateFitError(ValueError):
    pass


# ---------------------------------------------------------------- grids and partitions


@dataclass(frozen=True)
class SlabGrid:
    """Tensor grid on ``[0, width) x [0, height]``: periodic in ``y``, graded toward ``z = 0``.

    ``z_j = height (j / (nz - 1))^grading``; ``grading = 1`` is uniform.
    """

    width: float
    ny: int = 512
    height: float = 32.0
    nz: int = 513
    grading: float = 3.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("slab needs positive width and height")
        if self.ny < 4 or self.nz < 3:
            raise ValueError("slab grid too small")
        if self.grading < 1:
            raise ValueError("grading exponent must be >= 1")

    dim = 2

    @property
    def shape(self):
        return (self.nz, self.ny)

    @property
    def hy(self):
        return self.width / self.ny

    @property
    def y(self):
        # cell-centred, so no node sits on a flat twin boundary
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def z(self):
        return self.height * (np.arange(self.nz) / (self.nz - 1)) ** self.grading

    @property
    def z_weights(self):
        z = self.z
        w = np.empty_like(z)
        w[1:-1] = 0.5 * (z[2:] - z[:-2])
        w[0] = 0.5 * (z[1] - z[0])
        w[-1] = 0.5 * (z[-1] - z[-2])
        return w

    def coordinates(self):
        Z, Y = np.meshgrid(self.z, self.y, indexing="ij")
        return Y, Z

    def points(self):
        Y, Z = self.coordinates()
        return Y[..., None] * TWIN_NORMAL + Z[..., None] * INTERFACE_NORMAL

    def weights(self):
        return self.z_weights[:, None] * np.full(self.ny, self.hy)[None, :]


def _points3(grid):
    if isinstance(grid, SlabGrid):
        return grid.points()
    p = grid.points()
    if grid.dim == 2:
        p = np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], -1)
    return p


def _weights(grid):
    if isinstance(grid, SlabGrid):
        return grid.weights()
    return np.full(grid.shape, grid.h ** grid.dim)


class Partition:
    """Phase indicators on a grid: three {0, 1} channels summing to one at every node."""

    def __init__(self, chi, grid):
        chi = np.asarray(chi)
        if chi.shape != tuple(grid.shape) + (3,):
            raise ValueError(f"partition shape {chi.shape} does not match grid {grid.shape} x 3")
        if not np.all((chi == 0) | (chi == 1)):
            raise ValueError("partition channels must be exact indicators with values 0 and 1")
        if not np.all(chi.sum(-1) == 1):
            raise ValueError("partition channels must sum to one at every node")
        self.chi = chi.astype(np.int8)
        self.chi.setflags(write=False)
        self.grid = grid

    @classmethod
    def from_labels(cls, labels, grid):
        """Variant labels 1, 2, 3 per node."""
        labels = np.asarray(labels)
        return cls(np.stack([labels == k for k in (1, 2, 3)], -1), grid)

    @classmethod
    def uniform(cls, variant, grid):
        return cls.from_labels(np.full(grid.shape, variant), grid)

    def volume_fractions(self):
        w = _weights(self.grid)
        return (self.chi * w[..., None]).sum(axis=tuple(range(self.chi.ndim - 1))) / w.sum()


@dataclass
class EnergyReport:
    eta: float
    elastic: float
    interfacial: float
    total: float
    grid: object
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.elastic < 0 or self.interfacial < 0:
            raise ValueError("energies are nonnegative")

    def to_json(self):
        g = self.grid
        grid = asdict(g) if isinstance(g, SlabGrid) else {"n": g.n, "half_width": g.half_width, "dim": g.dim}
        return {"eta": self.eta, "elastic": self.elastic, "interfacial": self.interfacial, "total": self.total,
                "grid": grid, "params": self.params}


# ---------------------------------------------------------------- energies


def _check_shared(grid, *objs):
    for o in objs:
        if o.grid != grid:
            raise GridMismatchError("partition and energy grid differ")


def misfit_density(u, chi, grid):
    """Nodewise ``|e(u) - sum chi_i e_i|_F^2``."""
    _check_shared(grid, chi)
    pts = _points3(grid)
    e = u.strain(pts)
    target = np.einsum("...k,kij->...ij", chi.chi.astype(float), VARIANT_STRAINS)
    d = e - target
    return np.einsum("...ij,...ij->...", d, d)


def elastic_energy(u, chi, eta, grid):
    """``eta^(-2/3) sum_nodes |e(u) - sum chi_i e_i|^2 w_node``.

    On a uniform grid ``w_node = h^dim`` (2-D grids carry unit extrusion);
    on a slab grid it is the tensor trapezoid weight.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    return float(eta ** (-2.0 / 3.0) * np.sum(misfit_density(u, chi, grid) * _weights(grid)))


def perimeter(chi, grid):
    """Face-counting total variation, summed over the three channels."""
    _check_shared(grid, chi)
    total = 0.0
    for k in range(3):
        c = chi.chi[..., k]
        if isinstance(grid, SlabGrid):
            along, between = face_jumps_2d(c, True)
            total += float(along @ grid.z_weights) + float(between.sum()) * grid.hy
        else:
            total += float(face_tv(c).sum()) * grid.h ** (grid.dim - 1)
    return total


def interfacial_energy(chi, eta, grid):
    """``eta^(1/3)`` times the face-counting perimeter of every phase."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not isinstance(chi, Partition):
        raise TypeError("interfacial energy needs a Partition of exact indicators")
    return float(eta ** (1.0 / 3.0) * perimeter(chi, grid))


def total_energy(u, chi, eta, grid, params=None, per_width=True):
    el = elastic_energy(u, chi, eta, grid)
    it = interfacial_energy(chi, eta, grid)
    s = 1.0 / grid.width if (per_width and isinstance(grid, SlabGrid)) else 1.0
    return EnergyReport(float(eta), el * s, it * s, (el + it) * s, grid, dict(params or {}))


# ---------------------------------------------------------------- constructions


@dataclass(frozen=True)
class SlabSpec:
    """Slab geometry and the free proportions of the branching cells.

    ``cell_aspect`` sets generation heights ``l_k = cell_aspect eta^(-1/2) w_k^(3/2)``
    for cell width ``w_k``; the default balances the elastic and interfacial
    cost of one cell.  ``cutoff`` scales the final layer ``l_c = cutoff w_N``
    in which the finest twin is blended into the affine boundary value; by
    default it is the balance value ``sqrt(2 theta (1 - theta))``.
    """

    height: float = 32.0
    ny: int = 512
    nz: int = 513
    grading: float = 3.0
    theta_star: float = 0.5
    cell_aspect: float = 0.25
    cutoff: float = None

    def cutoff_factor(self, theta):
        return self.cutoff if self.cutoff is not None else math.sqrt(2.0 * theta * (1.0 - theta))

    def grid(self, width):
        return SlabGrid(width, self.ny, self.height, self.nz, self.grading)

    @property
    def max_generations(self):
        # finest period p0 / 2^(G-1) must span at least 4 nodes of a one-cell grid
        return int(math.floor(math.log2(self.ny / 4))) + 1


class BranchedLaminate:
    """Twin of variants 1 and 2 refining by period halving toward ``z = 0``.

    Above the branching zone the twin is flat with period ``p0``.  Each
    generation ``k`` occupies a layer of height ``l_k`` in which a cell of
    width ``w_k = p0 / 2^k`` turns into two cells of width ``w_k / 2``: the
    minority band shrinks to half its width while a lens of the same phase
    opens in the middle of the majority band.  Every row keeps the volume
    fraction ``theta``, so ``phi(y) = int_0^y (chi_2 - theta)`` stays
    periodic and ``u`` is continuous.  Below the last generation a layer of
    height ``l_c`` scales ``phi`` linearly to zero.
    """

    def __init__(self, eta, p0, generations, theta_star=0.5, spec=SlabSpec()):
        if generations < 1 or int(generations) != generations:
            raise ValueError("generations must be a positive integer")
        if not 0.0 < theta_star < 1.0:
            raise ValueError("theta_star must lie in (0, 1)")
        if not (eta > 0 and p0 > 0):
            raise ValueError("eta and p0 must be positive")
        self.eta, self.p0, self.generations, self.theta_star, self.spec = float(eta), float(p0), int(
            generations), float(theta_star), spec
        self.sign = 1.0 if theta_star <= 0.5 else -1.0
        self.theta = min(theta_star, 1.0 - theta_star)  # band (minority) fraction
        self.widths = p0 / 2.0 ** np.arange(generations - 1)
        self.heights = spec.cell_aspect * eta ** -0.5 * self.widths ** 1.5
        self.w_final = p0 / 2.0 ** (generations - 1)
        self.l_cut = spec.cutoff_factor(self.theta) * self.w_final
        # layer k spans [bottom_k, top_k]; generation 0 is the highest
        tops = self.l_cut + np.cumsum(self.heights[::-1])[::-1]
        self.tops = tops
        self.bottoms = tops - self.heights
        self.z_top = float(tops[0]) if generations > 1 else self.l_cut
        if self.z_top > spec.height:
            raise InfeasibleError(f"construction needs height {self.z_top:.6g} > slab height {spec.height:.6g}")
        self.e_bar = VARIANT_STRAINS[0] + theta_star * (VARIANT_STRAINS[1] - VARIANT_STRAINS[0])

    @staticmethod
    def _flat(yc, w, th):
        chi = yc < th * w
        return chi, np.minimum(yc, th * w) - th * yc

    def fields(self, y, z):
        """Band indicator and ``phi, phi_y, phi_z`` at slab coordinates."""
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        th = self.theta
        chi = np.zeros(np.broadcast(y, z).shape, dtype=bool)
        y, z = np.broadcast_arrays(y, z)
        phi = np.zeros(chi.shape)
        phz = np.zeros(chi.shape)
        far = z >= self.z_top
        yc = np.mod(y[far], self.p0)
        chi[far], phi[far] = self._flat(yc, self.p0, th)
        for w, l, top, bot in zip(self.widths, self.heights, self.tops, self.bottoms):
            sel = (z >= bot) & (z < top)
            if not sel.any():
                continue
            yc = np.mod(y[sel], w)
            tau = (top - z[sel]) / l
            r1 = th * w * (1.0 - 0.5 * tau)
            c = 0.5 * w + 0.25 * th * w
            l2 = c - 0.25 * tau * th * w
            r2 = c + 0.25 * tau * th * w
            chi[sel] = (yc < r1) | ((yc >= l2) & (yc < r2))
            phi[sel] = np.minimum(yc, r1) + np.clip(yc, l2, r2) - l2 - th * yc
            dtau = -0.5 * th * w * (yc > r1) + 0.25 * th * w * ((yc >= l2) & (yc <= r2)) + 0.5 * th * w * (yc > r2)
            phz[sel] = -dtau / l
        cut = z < self.l_cut
        yc = np.mod(y[cut], self.w_final)
        cb, pb = self._flat(yc, self.w_final, th)
        s = z[cut] / self.l_cut
        chi[cut] = cb
        phi[cut] = s * pb
        phz[cut] = pb / self.l_cut
        phy = chi - th
        phy = np.where(cut, phy * np.where(cut, z / self.l_cut, 1.0), phy)
        return chi, self.sign * phi, self.sign * phy, self.sign * phz

    def chi2(self, y, z):
        band = self.fields(y, z)[0]
        return band if self.sign > 0 else ~band

    def displacement(self):
        n, m = TWIN_NORMAL, INTERFACE_NORMAL
        eb = self.e_bar

        def u(x):
            _, phi, _, _ = self.fields(x @ n, x @ m)
            return x @ eb.T + SHEAR * phi[..., None] * m

        def grad(x):
            _, _, py, pz = self.fields(x @ n, x @ m)
            dphi = py[..., None] * n + pz[..., None] * m
            return eb + SHEAR * m[:, None] * dphi[..., None, :]

        prov = {"construction": "branched" if self.generations > 1 else "laminate", "eta": self.eta,
                "p0": self.p0, "generations": self.generations, "theta_star": self.theta_star}
        return DisplacementField(u, grad, provenance=prov)

    def partition(self, grid):
        # same coordinates as the displacement sees, so both agree at ties
        pts = grid.points()
        c2 = self.chi2(pts @ TWIN_NORMAL, pts @ INTERFACE_NORMAL)
        labels = np.where(c2, 2, 1)
        return Partition.from_labels(labels, grid)


def _check_resolution(p0, generations, grid):
    ratio = grid.width / p0
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"slab width {grid.width:.6g} is not a multiple of the base period {p0:.6g}")
    w_final = p0 / 2.0 ** (generations - 1)
    if w_final < 4.0 * grid.hy * (1 - 1e-12):
        raise ResolutionError(f"finest period {w_final:.4g} is below 4h = {4 * grid.hy:.4g}; "
                              f"at most {int(math.floor(math.log2(p0 / (4 * grid.hy)))) + 1} generations fit")


def build_branched_laminate(eta, generations, theta_star=0.5, geometry=SlabSpec(), p0=None, grid=None):
    """Branched twin as ``(DisplacementField, Partition)`` on a slab grid.

    ``p0`` defaults to the balance ``(eta^(1/2) height)^(2/3)`` capped by the
    slab height; ``grid`` defaults to one base cell.  ``generations = 1`` is
    the plain laminate with a boundary layer.
    """
    if p0 is None:
        p0 = (eta ** 0.5 * geometry.height) ** (2.0 / 3.0)
        p0 = min(p0, _p_max(eta, generations, theta_star, geometry) * 0.5)
    grid = grid or geometry.grid(p0)
    _check_resolution(p0, generations, grid)
    c = BranchedLaminate(eta, p0, generations, theta_star, geometry)
    return c.displacement(), c.partition(grid)


def _p_max(eta, generations, theta_star, spec):
    """Largest base period whose construction fits under the slab height."""
    th = min(theta_star, 1 - theta_star)
    k = np.arange(generations - 1)
    a = spec.cell_aspect * eta ** -0.5 * float(np.sum(2.0 ** (-1.5 * k)))
    b = spec.cutoff_factor(th) / 2.0 ** (generations - 1)
    # a p^1.5 + b p = height, increasing in p
    lo, hi = 0.0, spec.height / b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if a * mid ** 1.5 + b * mid > spec.height:
            hi = mid
        else:
            lo = mid
    return lo


def construction_energy(eta, p0, generations, theta_star=0.5, spec=SlabSpec()):
    """Energy per unit interface area of the construction on its one-cell grid."""
    grid = spec.grid(p0)
    _check_resolution(p0, generations, grid)
    c = BranchedLaminate(eta, p0, generations, theta_star, spec)
    return total_energy(c.displacement(), c.partition(grid), eta, grid,
                        {"p0": p0, "generations": generations, "theta_star": theta_star})


# ---------------------------------------------------------------- optimization


def golden_section(f, lo, hi, tol=1e-3, max_iter=200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), evaluations)``."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    evals = [(c, fc), (d, fd)]
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
            evals.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
            evals.append((d, fd))
        it += 1
    x, fx = min(evals, key=lambda t: t[1])
    return x, fx, evals


@dataclass
class PeriodOptimum:
    p_star: float
    generations: int
    report: EnergyReport
    bracket: tuple
    at_boundary: bool
    certificate: dict


def _optimize_fixed(eta, generations, theta_star, spec, tol):
    p_hi = _p_max(eta, generations, theta_star, spec) * (1 - 1e-9)
    p_lo = p_hi * 1e-4
    cache = {}

    def f(lp):
        if lp not in cache:
            cache[lp] = construction_energy(eta, math.exp(lp), generations, theta_star, spec)
        return cache[lp].total

    lp, _, _ = golden_section(f, math.log(p_lo), math.log(p_hi), tol)
    rep = cache[lp]
    span = math.log(p_hi) - math.log(p_lo)
    at_boundary = min(lp - math.log(p_lo), math.log(p_hi) - lp) < 2 * tol + 1e-3 * span
    cert = {}
    for name, fac in (("half", 0.5), ("double", 2.0)):
        q = math.exp(lp) * fac
        cert[name] = construction_energy(eta, q, generations, theta_star, spec).total if q <= p_hi else None
    return PeriodOptimum(math.exp(lp), generations, rep, (p_lo, p_hi), at_boundary, cert)


def optimize_period(eta, construction="unbranched", geometry=SlabSpec(), generations=None, tol=1e-3):
    """Golden-section search over ``log p0``; for ``branched`` also an exhaustive search over generations.

    Returns ``(PeriodOptimum, EnergyReport)``.  Raises ``InfeasibleError`` when
    the search collapses onto an end of the feasible bracket.
    """
    if construction not in ("unbranched", "branched"):
        raise ValueError("construction must be 'unbranched' or 'branched'")
    if construction == "unbranched":
        gens = [1]
    else:
        gens = range(1, geometry.max_generations + 1) if generations is None else list(generations)
    best = None
    for g in gens:
        if g > geometry.max_generations:
            raise ResolutionError(f"{g} generations exceed the grid limit {geometry.max_generations}")
        opt = _optimize_fixed(eta, g, geometry.theta_star, geometry, tol)
        if best is None or opt.report.total < best.report.total:
            best = opt
    if best.at_boundary:
        raise InfeasibleError(f"period search collapsed onto the bracket end at p = {best.p_star:.4g} "
                              f"(bracket {best.bracket[0]:.4g}..{best.bracket[1]:.4g})")
    best.report.params.update({"p_star": best.p_star, "construction": construction})
    return best, best.report


@dataclass
class SweepResult:
    construction: str
    rows: list
    slope: float
    slope_ci: float
    intercept: float
    p_slope: float
    p_slope_ci: float
    skipped: list

    @property
    def energy_ratio(self):
        e = [r["total"] for r in self.rows]
        return max(e) / min(e)

    def summary(self):
        return {"construction": self.construction, "slope": self.slope, "slope_ci95": self.slope_ci,
                "intercept": self.intercept, "p_star_slope": self.p_slope, "p_star_slope_ci95": self.p_slope_ci,
                "energy_ratio": self.energy_ratio, "points": len(self.rows), "skipped": self.skipped}

    def write_csv(self, path):
        cols = ["eta", "p_star", "generations", "elastic", "interfacial", "total"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in cols})

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _fit(x, y):
    from scipy import stats

    r = stats.linregress(x, y)
    t = stats.t.ppf(0.975, len(x) - 2) if len(x) > 2 else math.inf
    return float(r.slope), float(r.intercept), float(t * r.stderr)


def scaling_sweep(etas=DEFAULT_ETAS, construction="unbranched", geometry=SlabSpec(), threads=1, tol=1e-3,
                  generations=None):
    """Optimal energy per eta and the least-squares exponent of ``E*(eta)``."""
    etas = [float(e) for e in etas]
    if len(etas) < 5:
        warnings.warn("fewer than five eta values; the exponent fit is poorly constrained")

    def one(eta):
        try:
            opt, rep = optimize_period(eta, construction, geometry, generations, tol)
            return {"eta": eta, "p_star": opt.p_star, "generations": opt.generations, "elastic": rep.elastic,
                    "interfacial": rep.interfacial, "total": rep.total}
        except (InfeasibleError, ResolutionError) as exc:
            warnings.warn(f"eta = {eta:.4g} skipped: {exc}")
            return {"eta": eta, "skipped": str(exc)}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, etas))
    else:
        out = [one(e) for e in etas]
    rows = [r for r in out if "skipped" not in r]
    skipped = [r for r in out if "skipped" in r]
    if len(rows) < 3:
        raise DegenerateFitError(f"only {len(rows)} successful sweep points; need at least 3 to fit an exponent")
    le = np.log([r["eta"] for r in rows])
    slope, icpt, ci = _fit(le, np.log([r["total"] for r in rows]))
    ps, _, pci = _fit(le, np.log([r["p_star"] for r in rows]))
    return SweepResult(construction, rows, slope, ci, icpt, ps, pci, skipped)


# ---------------------------------------------------------------- weak limits


def dist_to_K_matrix(M):
    """Frobenius distance of symmetric matrices (trailing 3x3) to the triangle boundary ``K``."""
    M = np.asarray(M, dtype=float)
    d = np.diagonal(M, axis1=-2, axis2=-1)
    tr = d.sum(-1)
    dev = d - tr[..., None] / 3.0
    off = M - np.einsum("...i,ij->...ij", d, np.eye(3))
    theta = (1.0 - dev) / 3.0
    inplane = 3.0 * dist_theta_to_K(theta)
    return np.sqrt(inplane ** 2 + tr ** 2 / 3.0 + np.einsum("...ij,...ij->...", off, off))


@dataclass
class WeakLimitTable:
    window: float
    rows: list
    decays: bool
    flagged: bool
    reason: str = ""

    def to_json(self):
        return asdict(self)


def _box_average(a, ky, kz):
    from scipy.ndimage import uniform_filter1d

    a = uniform_filter1d(a, 2 * ky + 1, axis=1, mode="wrap")
    a = uniform_filter1d(a, 2 * kz + 1, axis=0, mode="nearest")
    return a[kz:a.shape[0] - kz]


def weak_limit_check(sequence, window, grid, energies=None, tol=1e-9, slack=1.05):
    """Window averages along a sequence ``[(eta, u, chi), ...]`` of decreasing eta.

    Reports, per eta, the largest distance of the averaged strain to ``K``
    and the largest ``|<e(u)> - sum <chi_i> e_i|``.  The sequence decays when
    both are nonincreasing (up to ``slack``) and end at or below half their
    first value, or stay below ``tol``.
    """
    if not isinstance(grid, SlabGrid) or grid.grading != 1:
        raise ValueError("weak-limit averages need a uniform slab grid (grading 1)")
    hz = grid.height / (grid.nz - 1)
    ky, kz = int(round(window / grid.hy)), int(round(window / hz))
    if min(ky, kz) < 4:
        raise ValueError(f"window {window:.4g} smaller than 4h")
    if 2 * kz + 1 > grid.nz:
        raise ValueError("window taller than the slab")
    etas = [s[0] for s in sequence]
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta must decrease along the sequence")
    pts = grid.points()
    rows = []
    for k, (eta, u, chi) in enumerate(sequence):
        _check_shared(grid, chi)
        e = u.strain(pts)
        six = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
        avg = np.zeros((grid.nz - 2 * kz, grid.ny, 3, 3))
        for i, j in six:
            a = _box_average(e[..., i, j], ky, kz)
            avg[..., i, j] = a
            avg[..., j, i] = a
        c = np.stack([_box_average(chi.chi[..., q].astype(float), ky, kz) for q in range(3)], -1)
        mix = np.einsum("...k,kij->...ij", c, VARIANT_STRAINS)
        dK = float(dist_to_K_matrix(avg).max())
        mm = float(np.sqrt(np.einsum("...ij,...ij->...", avg - mix, avg - mix)).max())
        row = {"eta": float(eta), "dist_to_K": dK, "mismatch": mm}
        if energies is not None:
            row["energy"] = float(energies[k])
        rows.append(row)

    def decreasing(v):
        if max(v) <= tol:
            return True
        mono = all(b <= a * slack + tol for a, b in zip(v, v[1:]))
        return mono and v[-1] <= 0.5 * v[0] + tol

    dec = decreasing([r["dist_to_K"] for r in rows]) and decreasing([r["mismatch"] for r in rows])
    reason = "" if dec else "window averages do not decay along the sequence"
    if energies is not None and max(energies) > 10.0 * min(energies):
        reason = (reason + "; " if reason else "") + "reported energies are not bounded"
        dec = False
    return WeakLimitTable(float(window), rows, dec, not dec, reason)


def limit_sequence(etas, construction="branched", width=1.0, height=1.0, ny=1024, nz=257, theta_star=0.5,
                   cell_aspect=0.25):
    """Constructions on one shared uniform slab grid, periods snapped to divide the width.

    Returns ``(grid, [(eta, u, chi), ...], energies)``.
    """
    grid = SlabGrid(width, ny, height, nz, 1.0)
    coarse = SlabSpec(height=height, ny=128, nz=129, grading=3.0, theta_star=theta_star, cell_aspect=cell_aspect)
    seq, energies = [], []
    for eta in sorted(etas, reverse=True):
        opt, _ = optimize_period(eta, "branched" if construction == "branched" else "unbranched", coarse)
        p0 = width / max(1, round(width / opt.p_star))
        g = opt.generations
        while g > 1 and p0 / 2.0 ** (g - 1) < 4.0 * grid.hy:
            g -= 1
        spec = SlabSpec(height, ny, nz, 1.0, theta_star, cell_aspect)
        c = BranchedLaminate(eta, p0, g, theta_star, spec)
        u, chi = c.displacement(), c.partition(grid)
        seq.append((eta, u, chi))
        energies.append(total_energy(u, chi, eta, grid).total)
    return grid, seq, energies
