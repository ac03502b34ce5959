"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 unclassified, 4 incompatible
field, 5 infeasible experiment.
"""

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .compatibility import WAVE_TOL, IncompatibleFieldError, wave_residuals
from .fields import Grid, GridField
from .generators import SpecError, ConfigSpec, strain_mismatch, symmetric_gradient
from .io import FieldFormatError, STRAIN_CHANNELS, read_field, sample_displacement, write_field, write_manifest, \
    write_pgm_array
from .strain_space import dist_theta_to_K
from .tolerances import TOL_FIELD

EXIT_OK, EXIT_INPUT, EXIT_UNCLASSIFIED, EXIT_INCOMPATIBLE, EXIT_INFEASIBLE = 0, 2, 3, 4, 5

DEFAULTS = {
    "generate": {"grid": 65},
    "classify": {"tol": None, "tol_field": TOL_FIELD, "wave_tol": WAVE_TOL, "subcube": True},
    "energy-scan": {"construction": "unbranched", "etas": None, "height": 32.0, "ny": 512, "nz": 513,
                    "grading": 3.0, "theta_star": 0.5, "cell_aspect": 0.25, "cutoff": None},
    "verify": {"tol_field": TOL_FIELD, "wave_tol": WAVE_TOL},
}


class InputError(Exception):
    pass


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _effective(args, command):
    """Defaults, overridden by flags, overridden by the config file."""
    cfg = dict(DEFAULTS[command])
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if args.config:
        try:
            extra = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.config}: {exc}")
        if not isinstance(extra, dict):
            raise InputError(f"{args.config}: configuration must be a JSON object")
        unknown = set(extra) - set(cfg)
        if unknown:
            raise InputError(f"{args.config}: unknown keys {sorted(unknown)}")
        cfg.update(extra)
    cfg["seed"] = args.seed
    return cfg


def _read(path):
    try:
        return read_field(path)
    except FieldFormatError as exc:
        raise InputError(str(exc))
    except ValueError as exc:  # non-finite values, named by node
        raise InputError(f"{path}: {exc}")


# ---------------------------------------------------------------- generate


def cmd_generate(args):
    cfg = _effective(args, "generate")
    try:
        obj = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        return _fail(EXIT_INPUT, f"{args.spec}: {exc}")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_INPUT, f"{args.spec}: malformed JSON ({exc})")
    try:
        spec = ConfigSpec.from_json(obj)
        gen = spec.build()
        grid = Grid(int(cfg["grid"]), spec.half_width)
        theta = gen.theta(grid)
    except SpecError as exc:
        return _fail(EXIT_INPUT, f"schema violation at {exc.path}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"spec": spec.to_json(), "displacement": "u.json"}
    theta = GridField(grid, theta.data, theta.channels, meta)
    files = list(write_field(theta, out / "theta"))
    u = sample_displacement(gen.displacement, grid)
    files += write_field(GridField(grid, u.data, u.channels, {"spec": spec.to_json()}), out / "u")
    vals = theta.data
    if np.all((vals == 0) | (vals == 1)):
        files += write_field(GridField(grid, vals, ("chi1", "chi2", "chi3"), {"spec": spec.to_json()}),
                             out / "partition")
    sp = out / "spec.json"
    sp.write_text(json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n")
    files.append(sp)
    write_manifest(out, "generate", {**cfg, "spec": spec.to_json()}, grid, {"tol_field": TOL_FIELD},
                   outputs=files, extra={"degenerate": gen.degenerate})
    print(f"wrote {', '.join(p.name for p in files)} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- classify


def cmd_classify(args):
    from .rigidity.classify import classify

    cfg = _effective(args, "classify")
    theta = _read(args.field)
    if theta.nchannels != 3 or theta.grid.dim != 3:
        raise InputError(f"{args.field}: classification needs a 3-channel field on a 3-D grid")
    try:
        res = classify(theta, tol_field=cfg["tol_field"], tol_fit=cfg["tol"], wave_tol=cfg["wave_tol"],
                       subcube=cfg["subcube"])
    except IncompatibleFieldError as exc:
        k = exc.equation
        payload = {"family": "incompatible", "equation": _equations()[k - 1][0], "equation_index": k,
                   "residual": exc.value, "tol": exc.tol}
        print(json.dumps(payload, indent=2) if args.json else
              f"incompatible: wave equation {k} ({payload['equation']}) residual {exc.value:.3e} > {exc.tol:.1e}")
        return EXIT_INCOMPATIBLE
    if args.json:
        print(res.dumps(indent=2, sort_keys=True))
    else:
        print(f"family: {res.family}")
        if res.classified:
            print(f"residual: {res.residual:.3e} (tol_fit {res.tol_fit:.3e}){'  degenerate' if res.degenerate else ''}")
            for k, v in sorted(res.params.items()):
                if not isinstance(v, dict):
                    print(f"  {k}: {v}")
        else:
            d = res.diagnostics
            print(f"reason: {d.get('reason')}")
            inc = d.get("inclusion", {})
            print(f"max dist_to_K: {inc.get('max_dist_to_K', float('nan')):.3e} "
                  f"({inc.get('nodes_outside_K', 0)} nodes outside K)")
            for ex in inc.get("example_nodes", [])[:3]:
                print(f"  node {ex['node']} x={np.round(ex['x'], 4).tolist()} theta={np.round(ex['theta'], 4).tolist()}")
            if d.get("largest_subcube"):
                s = d["largest_subcube"]
                print(f"largest fitting subcube: n={s['n']} ({s['family']}, residual {s['residual']:.2e})")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        rp = Path(args.out) / "classification.json"
        rp.write_text(res.dumps(indent=2, sort_keys=True) + "\n")
        write_manifest(args.out, "classify", cfg, theta.grid, {"tol_fit": res.tol_fit}, inputs=[_hdr(args.field)],
                       outputs=[rp])
    return EXIT_OK if res.classified else EXIT_UNCLASSIFIED


def _equations():
    from .compatibility import EQUATIONS

    return EQUATIONS


def _hdr(path):
    p = Path(path)
    return p if p.suffix == ".json" else p.with_suffix(".json")


# ---------------------------------------------------------------- energy-scan


def _etas(text):
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eta list {text!r}")
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("eta values must be positive")
    return vals


def cmd_energy_scan(args):
    from . import energy as en

    cfg = _effective(args, "energy-scan")
    etas = cfg["etas"] if cfg["etas"] is not None else list(en.DEFAULT_ETAS)
    etas = [float(e) for e in etas]
    cfg["etas"] = etas
    try:
        spec = en.SlabSpec(float(cfg["height"]), int(cfg["ny"]), int(cfg["nz"]), float(cfg["grading"]),
                           float(cfg["theta_star"]), float(cfg["cell_aspect"]),
                           None if cfg["cutoff"] is None else float(cfg["cutoff"]))
    except (TypeError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            res = en.scaling_sweep(etas, cfg["construction"], spec, threads=args.threads)
        except en.DegenerateFitError as exc:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            return _fail(EXIT_INFEASIBLE, str(exc))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    res.write_csv(out)
    summary = Path(args.summary) if args.summary else out.with_suffix(".json")
    res.write_json(summary)
    files = [out, summary]
    if args.snapshots:
        snap = Path(args.snapshots)
        for r in res.rows:
            g = spec.grid(r["p_star"])
            c = en.BranchedLaminate(r["eta"], r["p_star"], r["generations"], spec.theta_star, spec)
            chi = c.partition(g)
            files.append(write_pgm_array(chi.chi[..., 1], snap / f"partition_eta{r['eta']:.3e}.pgm", "chi2"))
    write_manifest(out.parent, "energy-scan", cfg, None, {}, outputs=files)
    s = res.summary()
    print(f"{cfg['construction']}: slope {s['slope']:.4f} +- {s['slope_ci95']:.4f}, "
          f"p* slope {s['p_star_slope']:.4f}, energy ratio {s['energy_ratio']:.3f} over {s['points']} points")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _displacement_file(theta, field_path, explicit):
    if explicit:
        return explicit
    name = theta.meta.get("displacement")
    if name:
        p = _hdr(field_path).parent / name
        if p.exists():
            return p
    return None


def _strain_checks(theta, ufield, tol):
    grid = theta.grid
    if ufield.grid != grid:
        raise InputError("displacement and volume fractions live on different grids")
    out = {}
    names = list(ufield.channels)
    if tuple(names[3:9]) == STRAIN_CHANNELS:
        e = GridField(grid, ufield.data[..., 3:9], STRAIN_CHANNELS)
        mis = strain_mismatch(e, theta)
        out["strain_vs_theta"] = {"max": float(mis.max()), "tol": tol, "pass": bool(mis.max() <= tol)}
        # finite differences are exact for quadratic u: compare where the strain is locally affine
        fd = symmetric_gradient(GridField(grid, ufield.data[..., :3], ("u1", "u2", "u3")), grid).data
        ok = np.ones(grid.shape, dtype=bool)
        for ax in range(3):
            d2 = np.abs(np.diff(e.data, 2, axis=ax)).max(-1) > 1e-8
            sl = [slice(None)] * 3
            bad = np.zeros(grid.shape, dtype=bool)
            for s in (0, 1, 2):
                sl[ax] = slice(s, s + grid.n - 2)
                bad[tuple(sl)] |= d2
            ok &= ~bad
            edge = [slice(None)] * 3
            edge[ax] = [0, grid.n - 1]
            ok[tuple(edge)] = False
        diff = np.abs(fd - e.data).max(-1)
        mx = float(diff[ok].max()) if ok.any() else 0.0
        ftol = 1e-6 * max(1.0, float(np.abs(ufield.data[..., :3]).max()))
        out["finite_difference"] = {"max": mx, "tol": ftol, "nodes_checked": int(ok.sum()), "pass": mx <= ftol}
    else:
        mis = strain_mismatch(symmetric_gradient(ufield, grid), theta)
        out["strain_vs_theta"] = {"max": float(mis.max()), "tol": tol, "pass": bool(mis.max() <= tol),
                                  "note": "finite-difference strain"}
    return out


def cmd_verify(args):
    cfg = _effective(args, "verify")
    theta = _read(args.field)
    if theta.nchannels != 3:
        raise InputError(f"{args.field}: verification needs a 3-channel volume-fraction field")
    checks = {}
    dist = 3.0 * dist_theta_to_K(theta.data)
    worst = np.unravel_index(int(np.argmax(dist)), dist.shape)
    checks["inclusion"] = {"max_dist_to_K": float(dist.max()), "node": [int(i) for i in worst[::-1]],
                           "tol": cfg["tol_field"], "pass": bool(dist.max() <= cfg["tol_field"]),
                           "code": EXIT_UNCLASSIFIED}
    tr = np.abs(theta.data.sum(-1) - 1.0)
    checks["trace"] = {"max": float(tr.max()), "tol": cfg["tol_field"], "pass": bool(tr.max() <= cfg["tol_field"]),
                       "code": EXIT_UNCLASSIFIED}
    if theta.grid.dim == 3 and theta.grid.n >= 5:
        w = wave_residuals(theta)
        k, v = w.worst()
        checks["wave"] = {"max": float(v), "equation": w.names[k - 1], "equation_index": k,
                          "tol": cfg["wave_tol"], "pass": bool(v <= cfg["wave_tol"]), "code": EXIT_INCOMPATIBLE}
    up = _displacement_file(theta, args.field, args.displacement)
    if up is not None:
        uf = _read(up)
        for name, c in _strain_checks(theta, uf, 1e-8).items():
            checks[name] = {**c, "code": EXIT_INCOMPATIBLE}
    failed = {k: v["code"] for k, v in checks.items() if not v["pass"]}
    report = {"field": str(args.field), "checks": checks, "pass": not failed, "failed": failed}
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text + "\n")
        write_manifest(Path(args.report).parent, "verify", cfg, theta.grid,
                       {"tol_field": cfg["tol_field"], "wave_tol": cfg["wave_tol"]},
                       inputs=[_hdr(args.field)], outputs=[args.report])
    for k, v in checks.items():
        print(f"{k:18s} {'pass' if v['pass'] else 'FAIL'}  " +
              ", ".join(f"{a}={b:.3e}" if isinstance(b, float) else f"{a}={b}"
                        for a, b in v.items() if a not in ("pass", "code")))
    return max(failed.values()) if failed else EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser():
    p = argparse.ArgumentParser(prog="martensite", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (default: hardware count)")
    p.add_argument("--config", help="JSON file whose values override command-line flags")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a generator configuration")
    g.add_argument("spec", help="ConfigSpec JSON file")
    g.add_argument("--grid", type=int, help="nodes per axis (default 65)")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("classify", help="classify a volume-fraction field")
    c.add_argument("field", help="field header (.json)")
    c.add_argument("--tol", type=float, help="fit tolerance (default: derived from grid spacing)")
    c.add_argument("--tol-field", dest="tol_field", type=float, help=f"inclusion tolerance (default {TOL_FIELD})")
    c.add_argument("--wave-tol", dest="wave_tol", type=float, help=f"wave-residual tolerance (default {WAVE_TOL})")
    c.add_argument("--no-subcube", dest="subcube", action="store_false", default=None,
                   help="skip the subcube search for unclassified fields")
    c.add_argument("--json", action="store_true", help="print the result as JSON")
    c.add_argument("--out", help="directory for classification.json and manifest.json")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("energy-scan", help="optimal energy over an eta sweep")
    e.add_argument("--construction", choices=["unbranched", "branched"])
    e.add_argument("--etas", type=_etas, help="comma- or space-separated eta values (default 1e-1 .. 1e-4)")
    e.add_argument("--out", required=True, help="CSV output path")
    e.add_argument("--summary", help="JSON summary path (default: CSV path with .json)")
    e.add_argument("--snapshots", help="directory for PGM partition snapshots per eta")
    e.add_argument("--height", type=float)
    e.add_argument("--ny", type=int)
    e.add_argument("--nz", type=int)
    e.add_argument("--grading", type=float)
    e.add_argument("--theta-star", dest="theta_star", type=float)
    e.add_argument("--cell-aspect", dest="cell_aspect", type=float)
    e.add_argument("--cutoff", type=float, help="final-layer height over finest cell width (default: balance value)")
    e.set_defaults(func=cmd_energy_scan)

    v = sub.add_parser("verify", help="inclusion, trace, wave and strain checks")
    v.add_argument("field", help="field header (.json)")
    v.add_argument("--displacement", help="displacement field (default: the one named in the header)")
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--tol-field", dest="tol_field", type=float)
    v.add_argument("--wave-tol", dest="wave_tol", type=float)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
