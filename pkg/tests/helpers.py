"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np

from drtrack.model import AmbiguityParams, DualPoint, ModelParams, PsiKind, SampleSet


def gaussian_instance(
    seed,
    d=3,
    n=20,
    scale=3e-4,
    tau1=0.05,
    tau2=1e-4,
    beta=0.50,
    kappa1=0.1,
    kappa2=1.0,
    psi=PsiKind.SQUARED,
):
    """Sample set plus matching moments and model parameters.

    Moments use the population (1/N) covariance so the empirical
    distribution itself sits inside the ambiguity set.
    """
    rng = np.random.default_rng(seed)
    raw = rng.normal(0.0, scale, (n, d + 1))
    samples = SampleSet(samples=raw)
    amb = AmbiguityParams(
        mu_hat=raw.mean(axis=0),
        sigma_hat=np.cov(raw.T, bias=True),
        kappa1=kappa1,
        kappa2=kappa2,
    )
    model = ModelParams(tau1=tau1, tau2=tau2, beta=beta, psi=psi)
    return samples, amb, model


def tracking_instance(seed):
    """The seeded instances the solver acceptance checks run on."""
    return gaussian_instance(seed)


def vertex_start(d) -> DualPoint:
    """Feasible start concentrated on the first asset, far from optimal."""
    x = np.zeros(d)
    x[0] = 1.0
    return DualPoint(
        x=x, alpha=0.0, q=np.zeros(d + 1), lam=np.zeros((d + 1, d + 1))
    )


def random_dual_point(rng, d, scale=0.3) -> DualPoint:
    """Unprojected Gaussian dual point; project before feasible use."""
    return DualPoint(
        x=rng.normal(size=d),
        alpha=float(rng.normal(scale=scale)),
        q=rng.normal(scale=scale, size=d + 1),
        lam=rng.normal(scale=scale, size=(d + 1, d + 1)),
    )
