"""Almost-additive functions on [0, 1] are close to affine."""

from dataclasses import dataclass
import math

import numpy as np

from ..fields import AffineMap
from ..kernels import aa_epsilon


@dataclass
class AlmostAffineFit:
    affine: AffineMap  # gradient[0] is the slope in t; other components unused
    epsilon: float
    error: float
    bound: float
    witness: tuple

    @property
    def holds(self):
        return self.error <= self.bound + 1e-12 * max(1.0, self.bound)

    def __call__(self, t):
        return self.affine.constant + self.affine.gradient[0] * np.asarray(t, dtype=float)


def almost_affine_fit(g):
    """Affine interpolant of ``g(0), g(1)`` and the second-difference bound.

    ``g`` holds samples on the uniform grid ``t_k = k/(m-1)``.  ``epsilon`` is
    the largest ``|g(t+h+h') - g(t+h) - g(t+h') + g(t)|`` over grid triples
    and the certified bound is ``1.5 ||g - g(0)||^(1/2) eps^(1/2) + 2 eps``.
    """
    g = np.asarray(g, dtype=float).ravel()
    if g.size < 3:
        raise ValueError("need at least three samples")
    if not np.all(np.isfinite(g)):
        raise ValueError("samples must be finite")
    m = g.size
    eps, i, j, k = aa_epsilon(g)
    t = np.linspace(0.0, 1.0, m)
    slope = g[-1] - g[0]
    tilde = g[0] + t * slope
    err = float(np.max(np.abs(g - tilde)))
    sup0 = float(np.max(np.abs(g - g[0])))
    bound = 1.5 * math.sqrt(sup0 * eps) + 2.0 * eps
    h = 1.0 / (m - 1)
    return AlmostAffineFit(AffineMap(g[0], (slope, 0.0, 0.0)), eps, err, bound, (i * h, j * h, k * h))
