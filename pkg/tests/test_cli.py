import json
import subprocess
import sys

import numpy as np
import pytest

from martensite.cli import main
from martensite.fields import Grid, GridField
from martensite.io import read_field, write_field

CB = {"family": "Checkerboard", "i": 1, "nu_p": "nu2+", "nu_m": "nu3-", "A": {"intervals": [[0.1, "inf"]]},
      "B": {"intervals": [[-0.2, 0.3]]}, "a": 0.4, "b": 0.6}
LAM = {"family": "SecondOrderLaminate", "i": 2, "nu": "nu2+", "A": {"intervals": [[-0.3, 0.4]]}, "a": 0.2, "b": 0.4}
AUS = {"family": "AusteniteExample", "chi1p": {"intervals": [[0.0, "inf"]]},
       "chi1m": {"intervals": [[0.1, "inf"]]}, "chi3": {"intervals": [[-0.2, "inf"]]}}


def _spec(tmp_path, obj, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _generate(tmp_path, obj, name, n=33):
    out = tmp_path / name
    assert main(["generate", _spec(tmp_path, obj, name + ".json"), "--grid", str(n), "--out", str(out)]) == 0
    return out


def test_generate_writes_outputs(tmp_path):
    out = _generate(tmp_path, CB, "cb")
    names = {p.name for p in out.iterdir()}
    assert {"theta.json", "theta.bin", "u.json", "u.bin", "spec.json", "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "generate" and man["grid"]["n"] == 33
    assert read_field(out / "u").nchannels == 9
    # fractional theta has no phase partition; a pure variant does
    assert not (out / "partition.json").exists()
    pure = _generate(tmp_path, dict(LAM, a=0.0, b=1.0), "pure", n=9)
    chi = read_field(pure / "partition")
    assert np.all(chi.data[..., 1] == 1.0)


def test_generate_is_reproducible(tmp_path):
    a = _generate(tmp_path, CB, "a")
    b = _generate(tmp_path, CB, "b")
    for f in ("theta.bin", "u.bin"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_generate_bad_spec(tmp_path, capsys):
    bad = dict(CB, family="Pentagon")
    assert main(["generate", _spec(tmp_path, bad), "--out", str(tmp_path / "o")]) == 2
    assert ".family" in capsys.readouterr().err
    p = tmp_path / "broken.json"
    p.write_text("{")
    assert main(["generate", str(p), "--out", str(tmp_path / "o")]) == 2
    assert main(["generate", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_classify_and_verify(tmp_path, capsys):
    out = _generate(tmp_path, CB, "cb", n=65)
    capsys.readouterr()
    assert main(["classify", str(out / "theta.json"), "--json", "--out", str(tmp_path / "cls")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["family"] == "Checkerboard"
    assert (tmp_path / "cls" / "classification.json").exists()
    rep = tmp_path / "verify.json"
    assert main(["verify", str(out / "theta.json"), "--report", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["pass"] and {"inclusion", "trace", "wave", "strain_vs_theta", "finite_difference"} <= set(r["checks"])


def test_classify_austenite_unclassified(tmp_path, capsys):
    out = _generate(tmp_path, AUS, "aus", n=17)
    code = main(["classify", str(out / "theta.json"), "--no-subcube"])
    assert code == 3
    text = capsys.readouterr().out
    assert "unclassified" in text and "nodes outside K" in text


def test_classify_incompatible(tmp_path, capsys):
    g = Grid(17)
    x = g.points()
    s = 0.5 + 0.4 * np.sin(3 * x[..., 0] * x[..., 1])
    write_field(GridField(g, np.stack([s, 1 - s, np.zeros(g.shape)], -1)), tmp_path / "bad")
    capsys.readouterr()
    assert main(["classify", str(tmp_path / "bad.json"), "--json"]) == 4
    payload = json.loads(capsys.readouterr().out)
    assert payload["family"] == "incompatible" and 1 <= payload["equation_index"] <= 6
    assert payload["equation"].startswith("theta")


def test_verify_noisy_field_reports_max_code(tmp_path):
    out = _generate(tmp_path, LAM, "lam")
    th = read_field(out / "theta")
    noisy = GridField(th.grid, th.data + 1e-2 * np.random.default_rng(0).standard_normal(th.data.shape), th.channels)
    write_field(noisy, tmp_path / "noisy")
    rep = tmp_path / "r.json"
    assert main(["verify", str(tmp_path / "noisy.json"), "--report", str(rep)]) == 4
    r = json.loads(rep.read_text())
    assert set(r["failed"]) >= {"inclusion", "trace", "wave"}


def test_nan_and_truncated_inputs(tmp_path, capsys):
    out = _generate(tmp_path, CB, "cb", n=9)
    raw = bytearray((out / "theta.bin").read_bytes())
    (out / "theta.bin").write_bytes(bytes(raw[:-8]))
    assert main(["classify", str(out / "theta.json")]) == 2
    assert "truncated" in capsys.readouterr().err
    data = np.zeros((9, 9, 9, 3))
    data[0, 1, 2, 0] = np.nan
    g = Grid(9)
    bad = tmp_path / "nan"
    write_field(GridField(g, np.zeros(g.shape + (3,))), bad)
    header = json.loads((tmp_path / "nan.json").read_text())
    del header["sha256"]
    (tmp_path / "nan.json").write_text(json.dumps(header))
    (tmp_path / "nan.bin").write_bytes(data.astype("<f8").tobytes())
    assert main(["verify", str(tmp_path / "nan.json")]) == 2
    assert "node (2, 1, 0)" in capsys.readouterr().err


def test_energy_scan(tmp_path):
    csv = tmp_path / "es" / "sweep.csv"
    code = main(["energy-scan", "--etas", "1e-1,1e-2,1e-3", "--ny", "64", "--nz", "65", "--out", str(csv),
                 "--snapshots", str(tmp_path / "es" / "snap")])
    assert code == 0
    assert csv.read_text().splitlines()[0] == "eta,p_star,generations,elastic,interfacial,total"
    s = json.loads(csv.with_suffix(".json").read_text())
    assert s["points"] == 3 and s["slope"] < 0
    assert len(list((tmp_path / "es" / "snap").glob("*.pgm"))) == 3
    assert (tmp_path / "es" / "manifest.json").exists()


def test_energy_scan_too_few_points(tmp_path):
    assert main(["energy-scan", "--etas", "1e-2", "--ny", "64", "--nz", "65", "--out",
                 str(tmp_path / "x.csv")]) == 5


def test_config_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": 9}))
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "generate", _spec(tmp_path, CB), "--grid", "17", "--out", str(out)]) == 0
    assert read_field(out / "theta").grid.n == 9
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["--config", str(cfg), "generate", _spec(tmp_path, CB), "--out", str(out)]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["classify"]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "martensite.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "martensite" in r.stdout


def test_energy_scan_cutoff_is_recorded(tmp_path):
    csv = tmp_path / "c" / "sweep.csv"
    assert main(["energy-scan", "--etas", "1e-1,1e-2,1e-3", "--ny", "64", "--nz", "65", "--cutoff", "0.5",
                 "--out", str(csv)]) == 0
    man = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert man["config"]["cutoff"] == 0.5
