"""Smooth approximations of the dual objective and their gradients.

The exact dual objective is a pointwise maximum of functions that are
themselves nonsmooth (plus-parts, absolute values, a Euclidean norm).
Each piece is replaced by a classical smooth surrogate controlled by a
single parameter ``mu > 0``:

* ``max(t, 0)``            -> ``mu * log(1 + exp(t / mu))``
* ``|a|``                  -> ``sqrt(a^2 + mu)``
* ``||z||``                -> ``sqrt(||z||^2 + mu)``
* ``max_i v_i``            -> ``mu * logsumexp(v / mu)``

Every surrogate dominates the original and exceeds it by at most a
known margin (``mu * log 2``, ``sqrt(mu)``, ``sqrt(mu)``, and
``mu * log N`` respectively), so the smoothed objective squeezes the
exact one as ``mu`` decreases.  All evaluations here are overflow-safe
and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import (
    AmbiguityParams,
    DualPoint,
    ModelParams,
    PsiKind,
    SampleSet,
    evaluate_h1,
)

__all__ = [
    "SmoothingParam",
    "smooth_plus",
    "smooth_abs",
    "smooth_psi",
    "smooth_h",
    "smooth_h_values",
    "smooth_phi",
    "grad_smooth_phi",
]

# Normalised softmax weights below this threshold are flushed to zero;
# they are far beneath double-precision resolution of the weighted sums.
WEIGHT_FLUSH = 1e-300


@dataclass(frozen=True)
class SmoothingParam:
    """Validated carrier for a smoothing level ``mu > 0``."""

    mu: float

    def __post_init__(self) -> None:
        mu = float(self.mu)
        if not math.isfinite(mu) or mu <= 0.0:
            raise InvalidInputError(f"mu must be a positive finite float, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)


def _mu_value(mu) -> float:
    if isinstance(mu, SmoothingParam):
        return mu.mu
    value = float(mu)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidInputError(f"mu must be a positive finite float, got {mu!r}")
    return value


def smooth_plus(t, mu):
    """Smooth plus-part ``mu * log(1 + exp(t / mu))``, elementwise.

    Evaluated as ``max(t, 0) + mu * log1p(exp(-|t| / mu))`` so large
    arguments of either sign cannot overflow.
    """
    mu = _mu_value(mu)
    t = np.asarray(t, dtype=float)
    out = np.maximum(t, 0.0) + mu * np.log1p(np.exp(-np.abs(t) / mu))
    return float(out) if out.ndim == 0 else out


def smooth_abs(a, mu):
    """Smooth absolute value ``sqrt(a^2 + mu)``, elementwise."""
    mu = _mu_value(mu)
    a = np.asarray(a, dtype=float)
    out = np.sqrt(np.square(a) + mu)
    return float(out) if out.ndim == 0 else out


def smooth_psi(c, mu, kind: PsiKind):
    """Smoothed tracking penalty; the squared kind is already smooth."""
    if kind is PsiKind.SQUARED:
        c = np.asarray(c, dtype=float)
        out = np.square(c)
        return float(out) if out.ndim == 0 else out
    if kind is PsiKind.ABSOLUTE:
        return smooth_abs(c, mu)
    raise InvalidInputError(f"unknown psi kind {kind!r}")


def _smooth_psi_prime(c: np.ndarray, mu: float, kind: PsiKind) -> np.ndarray:
    if kind is PsiKind.SQUARED:
        return 2.0 * c
    return c / np.sqrt(np.square(c) + mu)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _norm_parts(
    nu: DualPoint, mu: float, amb: AmbiguityParams
) -> tuple[float, np.ndarray]:
    """Smoothed mean-ellipsoid term and its argument ``sigma_hat @ u``."""
    u = nu.q + 2.0 * nu.lam @ amb.mu_hat
    su = amb.sigma_hat @ u
    value = math.sqrt(amb.kappa1 * float(u @ su) + mu)
    return value, su


def smooth_h_values(
    nu: DualPoint,
    samples: SampleSet,
    mu,
    amb: AmbiguityParams,
    model: ModelParams,
) -> np.ndarray:
    """Smoothed max-components for every sample row, shape ``(N,)``."""
    mu = _mu_value(mu)
    if samples.samples.shape[1] != nu.dim + 1:
        raise InvalidInputError(
            f"samples have dimension {samples.samples.shape[1]}, expected {nu.dim + 1}"
        )
    norm_val, _ = _norm_parts(nu, mu, amb)
    base = evaluate_h1(nu, amb, model) + norm_val
    s = samples.samples
    losses = -(samples.xi_b @ nu.x)
    c = samples.xi_a + losses
    quad = np.sum((s @ nu.lam) * s, axis=1) + s @ nu.q
    plus = smooth_plus(losses - nu.alpha, mu)
    return base + smooth_psi(c, mu, model.psi) - quad + model.cvar_coef * plus


def smooth_h(
    nu: DualPoint, xi, mu, amb: AmbiguityParams, model: ModelParams
) -> float:
    """Smoothed max-component at a single joint sample ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1:
        raise InvalidInputError(f"xi must be a 1-d array, got shape {xi.shape}")
    vals = smooth_h_values(nu, SampleSet(xi[None, :]), mu, amb, model)
    return float(vals[0])


def smooth_phi(
    nu: DualPoint,
    samples: SampleSet,
    mu,
    amb: AmbiguityParams,
    model: ModelParams,
) -> float:
    """Log-sum-exp aggregation of the smoothed components.

    Returns ``mu * log(sum_i exp(h_i / mu))`` computed against the
    running maximum, which brackets the true maximum within
    ``mu * log(N)``.
    """
    mu = _mu_value(mu)
    vals = smooth_h_values(nu, samples, mu, amb, model)
    top = float(vals.max())
    return top + mu * math.log(float(np.exp((vals - top) / mu).sum()))


def grad_smooth_phi(
    nu: DualPoint,
    samples: SampleSet,
    mu,
    amb: AmbiguityParams,
    model: ModelParams,
) -> DualPoint:
    """Gradient of :func:`smooth_phi`, packaged blockwise as a DualPoint.

    The gradient is the softmax-weighted combination of the component
    gradients.  The matrix block is symmetrised so ascent directions
    stay inside the symmetric matrices that the feasible set uses.
    """
    mu = _mu_value(mu)
    if samples.samples.shape[1] != nu.dim + 1:
        raise InvalidInputError(
            f"samples have dimension {samples.samples.shape[1]}, expected {nu.dim + 1}"
        )
    s = samples.samples
    mu_hat = amb.mu_hat

    norm_val, su = _norm_parts(nu, mu, amb)
    base = evaluate_h1(nu, amb, model) + norm_val
    losses = -(samples.xi_b @ nu.x)
    c = samples.xi_a + losses
    t = losses - nu.alpha
    quad = np.sum((s @ nu.lam) * s, axis=1) + s @ nu.q
    vals = base + smooth_psi(c, mu, model.psi) - quad + model.cvar_coef * smooth_plus(t, mu)

    top = float(vals.max())
    weights = np.exp((vals - top) / mu)
    weights /= weights.sum()
    weights[weights < WEIGHT_FLUSH] = 0.0

    sig = _sigmoid(t / mu)
    psi_prime = _smooth_psi_prime(c, mu, model.psi)
    coef = model.cvar_coef

    gx = 2.0 * model.tau1 * nu.x - samples.xi_b.T @ (
        weights * (psi_prime + coef * sig)
    )
    galpha = model.tau2 - coef * float(weights @ sig)
    g_norm = (amb.kappa1 / norm_val) * su
    gq = mu_hat + g_norm - s.T @ weights
    glam = (
        amb.kappa2 * amb.sigma_hat
        + np.outer(mu_hat, mu_hat)
        + 2.0 * np.outer(g_norm, mu_hat)
        - (s * weights[:, None]).T @ s
    )
    glam = 0.5 * (glam + glam.T)
    return DualPoint(x=gx, alpha=galpha, q=gq, lam=glam)
