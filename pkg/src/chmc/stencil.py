"""Finite-difference stencils on the cell-centered polar grid.

Nodes sit at ``theta_k = (k + 1/2) * pi / N``; there are no nodes on the
axis.  Values beyond the poles are filled by reflection: an axisymmetric
function continued through a pole satisfies ``f(-theta) = +-f(theta)`` and
``f(pi + theta) = +-f(pi - theta)``, where the sign is the function's
parity (``+1`` for scalars such as the profile, ``-1`` for quantities like
``sin(theta)`` that flip sign across the axis).
"""

import numpy as np

GHOSTS = 2


def theta_nodes(N):
    return (np.arange(N) + 0.5) * (np.pi / N)


def theta_padded(N, g=GHOSTS):
    """Node angles extended by ``g`` ghost cells on each side."""
    return (np.arange(-g, N + g) + 0.5) * (np.pi / N)


def pad(f, parity=1, g=GHOSTS):
    """Append reflected ghost values along the first axis."""
    f = np.asarray(f)
    lo = parity * f[:g][::-1]
    hi = parity * f[-g:][::-1]
    return np.concatenate([lo, f, hi], axis=0)


def d1(fp, dtheta, g=GHOSTS):
    """Fourth-order centered first derivative of a padded array."""
    n = fp.shape[0] - 2 * g
    fm2 = fp[g - 2:g - 2 + n]
    fm1 = fp[g - 1:g - 1 + n]
    fp1 = fp[g + 1:g + 1 + n]
    fp2 = fp[g + 2:g + 2 + n]
    return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * dtheta)


def d2(fp, dtheta, g=GHOSTS):
    """Second-order centered second derivative of a padded array."""
    n = fp.shape[0] - 2 * g
    fm1 = fp[g - 1:g - 1 + n]
    f0 = fp[g:g + n]
    fp1 = fp[g + 1:g + 1 + n]
    return (fp1 - 2.0 * f0 + fm1) / dtheta**2


def d2_4(fp, dtheta, g=GHOSTS):
    """Fourth-order centered second derivative of a padded array."""
    n = fp.shape[0] - 2 * g
    fm2 = fp[g - 2:g - 2 + n]
    fm1 = fp[g - 1:g - 1 + n]
    f0 = fp[g:g + n]
    fp1 = fp[g + 1:g + 1 + n]
    fp2 = fp[g + 2:g + 2 + n]
    return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * dtheta**2)


def deriv(f, dtheta, parity=1):
    """First derivative of nodal values with reflection ghosts."""
    return d1(pad(f, parity), dtheta)


def reflection_matrix(N, parity=1, g=1):
    """Matrix mapping N nodal values to the ``N + 2g`` padded vector."""
    P = np.zeros((N + 2 * g, N))
    P[g:g + N] = np.eye(N)
    for j in range(g):
        P[g - 1 - j, j] = parity
        P[g + N + j, N - 1 - j] = parity
    return P


def derivative_matrices(N, dtheta):
    """Second-order ``(D1, D2)`` matrices for even axisymmetric functions."""
    P = reflection_matrix(N, parity=1, g=1)
    lo = P[:-2]
    mid = P[1:-1]
    hi = P[2:]
    D1 = (hi - lo) / (2.0 * dtheta)
    D2 = (hi - 2.0 * mid + lo) / dtheta**2
    return D1, D2
