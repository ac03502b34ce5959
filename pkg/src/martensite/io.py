"""Field files: a JSON header next to a raw little-endian float64 payload.

``write_field(f, "out/theta")`` produces ``out/theta.json`` and
``out/theta.bin``.  Payload order is C order over ``(z, y, x, channel)``
for 3-D grids, matching ``GridField.data``.
"""

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .fields import Grid, GridField

FORMAT = "martensite-gridfield"
FORMAT_VERSION = 1
STRAIN_CHANNELS = ("e11", "e22", "e33", "e23", "e13", "e12")


class FieldFormatError(ValueError):
    """Unreadable, truncated or inconsistent field file."""


def _stem(path):
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".bin") else p


def write_field(field, path):
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(field.data, dtype="<f8").tobytes()
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "grid": {"n": field.grid.n, "half_width": field.grid.half_width, "dim": field.grid.dim},
        "shape": list(field.data.shape),
        "channels": list(field.channels),
        "dtype": "float64",
        "byte_order": "little",
        "order": "C, axes (z, y, x, channel)" if field.grid.dim == 3 else "C, axes (y, x, channel)",
        "payload": stem.name + ".bin",
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": field.meta,
    }
    stem.with_suffix(".bin").write_bytes(payload)
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return stem.with_suffix(".json"), stem.with_suffix(".bin")


def read_field(path):
    stem = _stem(path)
    hp = stem.with_suffix(".json")
    try:
        header = json.loads(hp.read_text())
    except FileNotFoundError:
        raise FieldFormatError(f"{hp}: no such file")
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FieldFormatError(f"{hp}: malformed header ({exc})")
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise FieldFormatError(f"{hp}: not a {FORMAT} header")
    try:
        g = header["grid"]
        grid = Grid(int(g["n"]), float(g["half_width"]), int(g.get("dim", 3)))
        shape = tuple(int(s) for s in header["shape"])
        channels = header["channels"]
        bp = hp.parent / header["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FieldFormatError(f"{hp}: bad header field ({exc})")
    if header.get("byte_order", "little") != "little" or header.get("dtype", "float64") != "float64":
        raise FieldFormatError(f"{hp}: only little-endian float64 payloads are supported")
    if shape[:-1] != grid.shape or shape[-1] != len(channels):
        raise FieldFormatError(f"{hp}: shape {shape} does not match grid {grid.shape} and channels {channels}")
    try:
        raw = bp.read_bytes()
    except FileNotFoundError:
        raise FieldFormatError(f"{bp}: payload missing")
    want = 8 * int(np.prod(shape))
    if len(raw) != want:
        raise FieldFormatError(f"{bp}: payload has {len(raw)} bytes, expected {want} (truncated or corrupt)")
    if "sha256" in header and hashlib.sha256(raw).hexdigest() != header["sha256"]:
        raise FieldFormatError(f"{bp}: checksum mismatch")
    data = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    # GridField rejects non-finite values and names the node
    return GridField(grid, data, channels, header.get("meta"))


def _slice2d(field, axis, index):
    g = field.grid
    if g.dim == 2:
        return field.data, g.axis, g.axis
    index = (g.n - 1) // 2 if index is None else int(index)
    if not 0 <= index < g.n:
        raise ValueError(f"slice index {index} outside 0..{g.n - 1}")
    # data axes are (z, y, x); 'axis' is the physical axis held fixed (0 = x)
    sl = [slice(None)] * 3
    sl[2 - axis] = index
    return field.data[tuple(sl)], g.axis, g.axis


def write_csv_slice(field, path, axis=2, index=None):
    """Rows ``a, b, value...`` over the plane ``x_axis = const`` (``a`` the lower remaining axis)."""
    data, ax_a, ax_b = _slice2d(field, axis, index)
    B, A = np.meshgrid(ax_b, ax_a, indexing="ij")
    names = "xyz"
    rest = [names[k] for k in range(field.grid.dim) if k != axis] if field.grid.dim == 3 else ["x", "y"]
    cols = np.column_stack([A.ravel(), B.ravel(), data.reshape(-1, data.shape[-1])])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, cols, delimiter=",", header=",".join(rest + list(field.channels)), comments="", fmt="%.17g")
    return Path(path)


def write_pgm(field, path, channel=0, axis=2, index=None):
    """8-bit binary PGM of one channel on a slice, min-max normalized."""
    data, _, _ = _slice2d(field, axis, index)
    return write_pgm_array(data[..., channel], path, field.channels[channel])


def write_pgm_array(v, path, label="value"):
    """PGM of a 2-D array (first axis vertical, drawn bottom-up); the scaling goes in a comment."""
    v = np.asarray(v, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros(v.shape) if hi == lo else (v - lo) / (hi - lo)
    img = np.clip(np.rint(255 * scaled), 0, 255).astype(np.uint8)[::-1]  # first row is the top
    head = f"P5\n# min={lo!r} max={hi!r} channel={label}\n{img.shape[1]} {img.shape[0]}\n255\n"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(img.tobytes())
    return Path(path)


def read_pgm(path):
    """Pixels and the ``(min, max)`` recorded in the header comment."""
    raw = Path(path).read_bytes()
    tokens, comments, pos = [], {}, 0
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            for kv in line[1:].split():
                k, _, v = kv.partition("=")
                comments[k] = v
        else:
            tokens += line.split()
    if tokens[0] != "P5":
        raise FieldFormatError(f"{path}: not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return img, (float(comments.get("min", "nan")), float(comments.get("max", "nan")))


def sample_displacement(disp, grid):
    """Displacement and its strain at the nodes: channels ``u1, u2, u3`` then the six strain components.

    The strain comes from the closed-form gradient when available, so the
    file carries the exact ``e(u)`` even across interfaces.
    """
    u = disp.sample(grid)
    if disp.is_sampled:
        return u
    e = disp.strain(grid.points())
    six = np.stack([e[..., 0, 0], e[..., 1, 1], e[..., 2, 2], e[..., 1, 2], e[..., 0, 2], e[..., 0, 1]], -1)
    return GridField(grid, np.concatenate([u.data, six], -1), u.channels + STRAIN_CHANNELS, u.meta)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(directory, command, config, grid=None, tolerances=None, inputs=(), outputs=(), extra=None):
    """``manifest.json`` recording the effective configuration and file hashes."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    man = {
        "tool": "martensite",
        "version": __version__,
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "grid": None if grid is None else {"n": grid.n, "half_width": grid.half_width, "dim": grid.dim},
        "tolerances": tolerances or {},
        "inputs": {os.fspath(p): sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    if extra:
        man.update(extra)
    p = d / "manifest.json"
    p.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return p
