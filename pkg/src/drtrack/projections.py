"""Euclidean projections onto the feasible set of the dual problem.

The combined variable lives on a product set: weights on the unit
simplex, a free CVaR threshold, a free vector multiplier, and a
symmetric positive semidefinite matrix multiplier.  Projection onto
the product is blockwise.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .model import DualPoint

__all__ = ["project_simplex", "project_psd", "project_feasible"]


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the unit simplex.

    Uses the sort-and-threshold rule: the projection is
    ``max(v - theta, 0)`` where ``theta`` is the largest shift that
    keeps the positive part summing to one.  Runs in O(d log d).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise InvalidInputError(f"v must be a non-empty 1-d array, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise InvalidInputError("v contains non-finite entries")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.shape[0] + 1)
    support = u - cumulative / ranks > 0
    rho = int(np.nonzero(support)[0][-1])
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_psd(a) -> np.ndarray:
    """Projection of a square matrix onto the symmetric PSD cone.

    Symmetrises first, then zeroes out negative eigenvalues.  The
    result is exactly symmetric and has no negative eigenvalues beyond
    roundoff in the eigendecomposition.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"a must be a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError("a contains non-finite entries")
    sym = 0.5 * (a + a.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped = np.maximum(eigvals, 0.0)
    out = (eigvecs * clipped) @ eigvecs.T
    return 0.5 * (out + out.T)


def project_feasible(nu: DualPoint) -> DualPoint:
    """Blockwise projection of a combined variable onto the feasible set.

    Projects ``x`` onto the simplex and ``lam`` onto the PSD cone;
    ``alpha`` and ``q`` are unconstrained and pass through.
    """
    return DualPoint(
        x=project_simplex(nu.x),
        alpha=nu.alpha,
        q=nu.q,
        lam=project_psd(nu.lam),
    )
