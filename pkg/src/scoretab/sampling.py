"""Generation by reversing the diffusion.

Two routes: the deterministic probability-flow ODE (default), solved with
adaptive Dormand-Prince RK45, and predictor-corrector chains on a uniform
descending time grid with Euler-Maruyama, reverse-diffusion, or ancestral
predictors and an optional Langevin corrector.

Score models are passed as plain (x, t) -> score callables so that analytic
scores can stand in for a trained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InputError, InvalidPredictorForSde, OdeStepFailure
from .sde import SdeSpec, diffusion, drift, gamma, sample_prior, sigma

METHODS = ("PF", "PC")
PREDICTORS = ("EM", "ReverseDiffusion", "Ancestral")


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "PF"
    predictor: str = "EM"
    use_corrector: bool = False
    corrector_snr: float = 0.16
    corrector_steps_per_t: int = 1
    n_steps: int | None = None  # falls back to SdeSpec.n_steps
    ode_rtol: float = 1e-5
    ode_atol: float = 1e-5

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}")
        if self.predictor not in PREDICTORS:
            raise InputError(f"predictor must be one of {PREDICTORS}")
        if self.use_corrector and self.method != "PC":
            raise InputError("the Langevin corrector applies to PC sampling only")
        if self.corrector_snr <= 0 or self.corrector_steps_per_t < 1:
            raise InputError("corrector_snr must be > 0 and corrector_steps_per_t >= 1")
        if self.n_steps is not None and self.n_steps < 2:
            raise InputError("n_steps must be >= 2")
        if self.ode_rtol <= 0 or self.ode_atol <= 0:
            raise InputError("ODE tolerances must be positive")


def pf_drift(sde: SdeSpec, score, x: np.ndarray, t) -> np.ndarray:
    """Probability-flow vector field f(x,t) - g(t)^2/2 * score(x,t)."""
    g = diffusion(sde, t)
    g2 = np.asarray(g, dtype=np.float64) ** 2
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and np.ndim(g2) == 1:
        g2 = g2[:, None]
    return drift(sde, x, t) - 0.5 * g2 * np.asarray(score(x, t), dtype=np.float64)


def integrate_flow(sde: SdeSpec, score, x: np.ndarray, t_from: float, t_to: float,
                   rtol: float = 1e-5, atol: float = 1e-5) -> np.ndarray:
    """Transport states along the flow ODE from t_from to t_to (either
    direction) with one joint adaptive solve over the whole batch."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d = x.shape

    def rhs(t, y):
        xt = y.reshape(n, d)
        return pf_drift(sde, score, xt, float(t)).ravel()

    sol = integrate.solve_ivp(rhs, (t_from, t_to), x.ravel(), method="RK45",
                              rtol=rtol, atol=atol)
    if not sol.success:
        raise OdeStepFailure(f"flow integration failed: {sol.message}")
    return sol.y[:, -1].reshape(n, d)


def sample_pf(sde: SdeSpec, score, dim: int, n: int, rng: np.random.Generator,
              config: SamplerConfig | None = None) -> np.ndarray:
    """Draw prior samples at t=1 and integrate the flow ODE down to t_min.

    Deterministic given the prior draws: the flow itself is noise-free.
    """
    config = config or SamplerConfig()
    if n == 0:
        return np.zeros((0, dim))
    x1 = sample_prior(sde, dim, rng, n=n)
    return integrate_flow(sde, score, x1, 1.0, sde.t_min,
                          rtol=config.ode_rtol, atol=config.ode_atol)


def _langevin_step(sde: SdeSpec, score, x, t, snr, rng):
    grad = np.asarray(score(x, t), dtype=np.float64)
    z = rng.standard_normal(x.shape)
    # batch-averaged norms: per-row step sizes diverge for rows whose score
    # happens to vanish, so the step size is shared across the batch
    g_norm = float(np.mean(np.linalg.norm(grad, axis=-1)))
    z_norm = float(np.mean(np.linalg.norm(z, axis=-1)))
    if g_norm == 0.0:
        return x
    eps = 2.0 * (snr * z_norm / g_norm) ** 2
    return x + eps * grad + math.sqrt(2.0 * eps) * z


def sample_pc(sde: SdeSpec, score, dim: int, n: int, rng: np.random.Generator,
              config: SamplerConfig | None = None) -> np.ndarray:
    """Predictor-corrector sampling on a uniform descending time grid."""
    config = config or SamplerConfig(method="PC")
    if config.predictor == "Ancestral" and sde.kind == "subVP":
        raise InvalidPredictorForSde("ancestral sampling is undefined for sub-VP")
    if n == 0:
        return np.zeros((0, dim))
    n_steps = config.n_steps or sde.n_steps
    grid = np.linspace(1.0, sde.t_min, n_steps)
    x = sample_prior(sde, dim, rng, n=n)
    for k in range(n_steps - 1):
        t_hi, t_lo = grid[k], grid[k + 1]
        dt = t_hi - t_lo
        s = np.asarray(score(x, t_hi), dtype=np.float64)
        z = rng.standard_normal(x.shape)
        if config.predictor in ("EM", "ReverseDiffusion"):
            # with discrete coefficients f_k = f*dt and g_k = g*sqrt(dt) the
            # reverse-diffusion update coincides with Euler-Maruyama
            f = drift(sde, x, t_hi)
            g = float(diffusion(sde, t_hi))
            x = x - (f - g**2 * s) * dt + g * math.sqrt(dt) * z
        else:
            if sde.kind == "VE":
                s2_hi = float(sigma(sde, t_hi)) ** 2
                s2_lo = float(sigma(sde, t_lo)) ** 2
                x_mean = x + (s2_hi - s2_lo) * s
                std = math.sqrt(s2_lo * (s2_hi - s2_lo) / s2_hi)
                x = x_mean + std * z
            else:
                beta = float(gamma(sde, t_hi)) * dt
                x_mean = (x + beta * s) / math.sqrt(1.0 - beta)
                x = x_mean + math.sqrt(beta) * z
        if config.use_corrector:
            for _ in range(config.corrector_steps_per_t):
                x = _langevin_step(sde, score, x, t_lo, config.corrector_snr, rng)
    return x
