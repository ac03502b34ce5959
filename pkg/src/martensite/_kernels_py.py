"""Reference implementations of the hot loops (NumPy, no compilation)."""

import numpy as np


def aa_epsilon(g):
    """Largest ``|g[i+j+k] - g[i+j] - g[i+k] + g[i]|`` over index triples in range.

    Returns ``(eps, i, j, k)``; ties keep the first triple in (j, i, k) order
    with ``k >= j``.
    """
    g = np.ascontiguousarray(g, dtype=float)
    m = g.size
    best, arg = 0.0, (0, 0, 0)
    for j in range(m):
        span = m - j  # i + k <= m - 1 - j
        if span <= j:
            break
        i = np.arange(span)[:, None]
        k = np.arange(j, span)[None, :]
        ok = i + k < span
        ii, kk = np.broadcast_arrays(i, k)
        ii, kk = ii[ok], kk[ok]
        d = np.abs(g[ii + j + kk] - g[ii + j] - g[ii + kk] + g[ii])
        p = int(np.argmax(d))
        if d[p] > best:
            best, arg = float(d[p]), (int(ii[p]), j, int(kk[p]))
    return best, arg[0], arg[1], arg[2]


def window_oscillation(v, k):
    """Mean of ``|v - mean|`` over the window ``[c-k, c+k]`` (clipped) around every index."""
    v = np.ascontiguousarray(v, dtype=float)
    n = v.size
    out = np.empty(n)
    for c in range(n):
        w = v[max(0, c - k):min(n, c + k + 1)]
        out[c] = np.mean(np.abs(w - w.mean()))
    return out


def face_tv(chi, periodic=()):
    """Number of unit jumps of an integer array across each axis.

    ``periodic`` lists axes that wrap around.  Returns one count per axis.
    """
    chi = np.asarray(chi)
    out = []
    for ax in range(chi.ndim):
        d = np.abs(np.diff(chi, axis=ax)).sum()
        if ax in periodic:
            first = np.take(chi, 0, axis=ax).astype(np.int64)
            last = np.take(chi, -1, axis=ax).astype(np.int64)
            d += np.abs(first - last).sum()
        out.append(int(d))
    return np.array(out, dtype=np.int64)


def face_jumps_2d(chi, periodic_last=True):
    """Jump counts of a 2-D integer array, resolved by row.

    Returns ``(along_rows, between_rows)``: for each row the number of unit
    jumps along the last axis (wrapping when ``periodic_last``), and for each
    pair of consecutive rows the number of jumps between them.
    """
    chi = np.asarray(chi, dtype=np.int64)
    along = np.abs(np.diff(chi, axis=1)).sum(axis=1)
    if periodic_last:
        along = along + np.abs(chi[:, 0] - chi[:, -1])
    between = np.abs(np.diff(chi, axis=0)).sum(axis=1)
    return along.astype(np.int64), between.astype(np.int64)
