"""Shared test helpers: analytic score oracles and tiny dataset builders."""

import numpy as np

from scoretab.sde import SdeSpec, kernel_mean_std


def analytic_gaussian_score(sde: SdeSpec, mu, var0):
    """Score and score-vjp closures for data ~ N(mu, var0 * I).

    Under the Gaussian perturbation kernel the marginal at time t is
    N(mean_coeff * mu, (mean_coeff^2 var0 + std^2) I), so the score and its
    (diagonal, constant) Jacobian are available in closed form. Used as a
    stand-in for a trained network.
    """
    mu = np.asarray(mu, dtype=np.float64)

    def _var(t):
        mean, std = kernel_mean_std(sde, t)
        return mean, mean**2 * var0 + std**2

    def score(x, t):
        x = np.asarray(x, dtype=np.float64)
        mean, var = _var(t)
        if x.ndim == 2 and np.ndim(var) == 1:
            mean = mean[:, None]
            var = var[:, None]
        return -(x - mean * mu) / var

    def score_vjp(x, t, cot):
        cot = np.asarray(cot, dtype=np.float64)
        _, var = _var(t)
        if cot.ndim == 2 and np.ndim(var) == 1:
            var = var[:, None]
        return -cot / var

    return score, score_vjp


def conditional_score_for(sde: SdeSpec, x0):
    """The exact conditional score of p(x(t) | x(0)) for a known x0; plugged
    into the loss to make the matching residual vanish identically."""
    x0 = np.asarray(x0, dtype=np.float64)

    def score(xt, t):
        xt = np.asarray(xt, dtype=np.float64)
        mean, std = kernel_mean_std(sde, t)
        if xt.ndim == 2 and np.ndim(std) == 1:
            mean = mean[:, None]
            std = std[:, None]
        return -(xt - mean * x0) / std**2

    return score
