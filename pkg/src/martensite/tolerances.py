"""Module-level numerical tolerances shared across the package."""

#: absolute tolerance for exact-algebra assertions (quantities are O(1) rationals over sqrt(2))
TOL_ALG = 1e-9

#: absolute tolerance for sampled-field identities (partition of unity, inclusion checks)
TOL_FIELD = 1e-9

#: spectral gap below which the closed-form eigensolver hands over to Jacobi rotations
EIG_GAP = 1e-7

#: default decision threshold for the finite-scale VMO surrogate
VMO_THRESHOLD = 0.05


def tol_fit(h, lip=1.0, tol_field=TOL_FIELD):
    """Classifier acceptance tolerance ``max(10*tol_field, 5*h*Lip)``.

    ``lip`` is floored at one: interface positions are parameters whose
    resolution is the grid itself, so they carry a unit Lipschitz factor.
    """
    return max(10.0 * tol_field, 5.0 * h * max(1.0, float(lip)))
