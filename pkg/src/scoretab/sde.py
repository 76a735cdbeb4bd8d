"""Forward diffusion processes: VE, VP, and sub-VP.

Each process is an Ito SDE dx = f(x,t) dt + g(t) dw on t in [0, 1] with a
Gaussian transition kernel p(x(t) | x(0)) = N(mean_coeff(t) * x(0), std(t)^2 I).

Noise schedules:
    VE      sigma(t) = sigma_min * (sigma_max / sigma_min)^t
    VP/sub  gamma(t) = gamma_min + t * (gamma_max - gamma_min)

Coefficients:
    VE      f = 0,                g(t) = sigma(t) * sqrt(2 ln(sigma_max/sigma_min))
    VP      f = -gamma(t) x / 2,  g(t) = sqrt(gamma(t))
    sub-VP  f = -gamma(t) x / 2,  g(t) = sqrt(gamma(t) (1 - exp(-2 G(t))))
with G(t) = int_0^t gamma(s) ds = gamma_min t + t^2 (gamma_max - gamma_min) / 2.

The closed-form kernels below follow from these coefficients; the test suite
validates them against direct Euler-Maruyama simulation rather than trusting
the algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

SDE_KINDS = ("VE", "VP", "subVP")


@dataclass(frozen=True)
class SdeSpec:
    kind: str = "VP"
    sigma_min: float = 0.01
    sigma_max: float = 10.0
    gamma_min: float = 0.1
    gamma_max: float = 10.0
    t_min: float = 1e-5
    n_steps: int = 50

    def __post_init__(self):
        if self.kind not in SDE_KINDS:
            raise InputError(f"sde kind must be one of {SDE_KINDS}, got {self.kind!r}")
        if self.kind == "VE" and not (self.sigma_max > self.sigma_min > 0):
            raise InputError("VE requires sigma_max > sigma_min > 0")
        if self.kind in ("VP", "subVP") and not (self.gamma_max > self.gamma_min > 0):
            raise InputError("VP/subVP require gamma_max > gamma_min > 0")
        if not (0.0 < self.t_min < 1.0):
            raise InputError("t_min must lie in (0, 1)")
        if self.n_steps < 2:
            raise InputError("n_steps must be >= 2")


@dataclass(frozen=True)
class PerturbKernel:
    mean_coeff: float
    std: float


def sigma(spec: SdeSpec, t):
    """Geometric noise schedule for VE."""
    t = np.asarray(t, dtype=np.float64)
    return spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** t


def gamma(spec: SdeSpec, t):
    """Linear noise schedule for VP and sub-VP."""
    t = np.asarray(t, dtype=np.float64)
    return spec.gamma_min + t * (spec.gamma_max - spec.gamma_min)


def gamma_integral(spec: SdeSpec, t):
    """G(t) = int_0^t gamma(s) ds, in closed form."""
    t = np.asarray(t, dtype=np.float64)
    return spec.gamma_min * t + 0.5 * t * t * (spec.gamma_max - spec.gamma_min)


def drift(spec: SdeSpec, x: np.ndarray, t) -> np.ndarray:
    """Drift f(x, t). For batched x of shape (N, D), t may be scalar or (N,)."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "VE":
        return np.zeros_like(x)
    g = gamma(spec, t)
    if x.ndim == 2 and np.ndim(g) == 1:
        g = g[:, None]
    return -0.5 * g * x


def diffusion(spec: SdeSpec, t):
    """Diffusion coefficient g(t)."""
    if spec.kind == "VE":
        return sigma(spec, t) * math.sqrt(2.0 * math.log(spec.sigma_max / spec.sigma_min))
    if spec.kind == "VP":
        return np.sqrt(gamma(spec, t))
    return np.sqrt(gamma(spec, t) * (1.0 - np.exp(-2.0 * gamma_integral(spec, t))))


def kernel_mean_std(spec: SdeSpec, t):
    """Vectorized perturbation-kernel coefficients (mean_coeff, std)."""
    t = np.asarray(t, dtype=np.float64)
    if spec.kind == "VE":
        mean = np.ones_like(t)
        std = np.sqrt(np.maximum(sigma(spec, t) ** 2 - spec.sigma_min**2, 0.0))
        return mean, std
    G = gamma_integral(spec, t)
    mean = np.exp(-0.5 * G)
    if spec.kind == "VP":
        std = np.sqrt(1.0 - np.exp(-G))
    else:
        std = 1.0 - np.exp(-G)
    return mean, std


def perturb_kernel(spec: SdeSpec, t) -> PerturbKernel:
    mean, std = kernel_mean_std(spec, t)
    return PerturbKernel(mean_coeff=float(mean), std=float(std))


def sample_perturbed(spec: SdeSpec, x0: np.ndarray, t, z: np.ndarray):
    """Draw x(t) = mean_coeff * x0 + std * z and the conditional score target.

    The target is grad_x log p(x(t) | x(0)) = -(x(t) - mean_coeff x0)/std^2,
    which reduces to -z / std for the z actually used.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    mean, std = kernel_mean_std(spec, t)
    if x0.ndim == 2 and np.ndim(std) == 1:
        mean = mean[:, None]
        std = std[:, None]
    xt = mean * x0 + std * z
    target_score = -z / std
    return xt, target_score


def lambda_weight(spec: SdeSpec, t):
    """Loss weighting lambda(t) = std(t)^2, making the weighted integrand
    ||std * S + z||^2 for every t."""
    _, std = kernel_mean_std(spec, t)
    return std**2


def sample_prior(spec: SdeSpec, dim: int, rng: np.random.Generator, n: int | None = None):
    """Sample the t=1 prior: N(0, sigma_max^2 I) for VE, N(0, I) otherwise."""
    if dim < 1:
        raise InputError("dim must be >= 1")
    shape = (dim,) if n is None else (n, dim)
    scale = spec.sigma_max if spec.kind == "VE" else 1.0
    return scale * rng.standard_normal(shape)


def prior_logpdf(spec: SdeSpec, x: np.ndarray):
    """Log-density of the t=1 prior, row-wise for 2-D input."""
    x = np.asarray(x, dtype=np.float64)
    var = spec.sigma_max**2 if spec.kind == "VE" else 1.0
    d = x.shape[-1]
    sq = np.sum(x * x, axis=-1)
    return -0.5 * (d * math.log(2.0 * math.pi * var) + sq / var)
