"""Self-paced record weighting.

Per-record losses are turned into inclusion weights v in [0, 1] via two loss
quantiles Q(alpha) <= Q(beta): losses at or below Q(alpha) get full weight,
losses at or above Q(beta) get zero, and the ramp between is linear. The
thresholds alpha and beta rise logarithmically with the training step and
reach 1 at a configured step budget, after which every record is included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLosses, InputError


@dataclass(frozen=True)
class SplConfig:
    alpha0: float = 0.25
    beta0: float = 0.95
    ramp_steps: int = 10000  # step at which both thresholds hit 1

    def __post_init__(self):
        if not (0.0 <= self.alpha0 <= self.beta0 <= 1.0):
            raise InputError("need 0 <= alpha0 <= beta0 <= 1")
        if self.ramp_steps < 1:
            raise InputError("ramp_steps must be >= 1")


@dataclass
class SplState:
    step: int
    alpha: float
    beta: float
    v: np.ndarray  # per-record weights over the dataset

    @classmethod
    def initial(cls, config: SplConfig, n_records: int) -> "SplState":
        alpha, beta = advance_schedule(config, 0)
        return cls(step=0, alpha=alpha, beta=beta, v=np.ones(n_records))


def quantile(losses, p: float) -> float:
    """Smallest loss value whose empirical CDF reaches p.

    Q(p) = inf{l : p <= F(l)} with F(l) = #{l_i <= l} / N, and Q(0) is the
    minimum.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise EmptyLosses("quantile of an empty loss multiset")
    if not (0.0 <= p <= 1.0):
        raise InputError("p must lie in [0, 1]")
    ordered = np.sort(losses)
    # round before ceil so that p * N landing a hair above an integer does
    # not overshoot the intended order statistic
    idx = max(math.ceil(round(p * losses.size, 12)) - 1, 0)
    return float(ordered[idx])


def optimal_v(losses, q_alpha: float, q_beta: float):
    """Closed-form minimizer of v*l + r(v) over v in [0, 1], elementwise.

    1 at or below q_alpha, 0 at or above q_beta, linear ramp between. A
    degenerate interval (q_alpha == q_beta) keeps the low side at 1.
    """
    if q_alpha > q_beta:
        raise InputError("q_alpha must be <= q_beta")
    l = np.asarray(losses, dtype=np.float64)
    if q_alpha == q_beta:
        v = (l <= q_alpha).astype(np.float64)
    else:
        ramp = (l - q_beta) / (q_alpha - q_beta)
        v = np.where(l <= q_alpha, 1.0, np.where(l >= q_beta, 0.0, ramp))
    return float(v) if np.isscalar(losses) or np.ndim(losses) == 0 else v


def regularizer_value(v, q_alpha: float, q_beta: float) -> float:
    """r(v) = -(Q(alpha) - Q(beta))/2 * sum(v^2) - Q(beta) * sum(v)."""
    v = np.asarray(v, dtype=np.float64)
    return float(-0.5 * (q_alpha - q_beta) * np.sum(v**2) - q_beta * np.sum(v))


def advance_schedule(config: SplConfig, c: int) -> tuple[float, float]:
    """Threshold pair (alpha, beta) at step c.

    alpha(c) = min(1, alpha0 + ln(1 + c (e-1)/S (1 - alpha0))), same for
    beta. The raw curve reaches at least 1 at c = S for every start value,
    so both thresholds are pinned to exactly 1 from then on.
    """
    if c < 0:
        raise InputError("step must be >= 0")
    if c >= config.ramp_steps:
        return 1.0, 1.0
    rate = c * (math.e - 1.0) / config.ramp_steps

    def curve(p0: float) -> float:
        return min(1.0, p0 + math.log1p(rate * (1.0 - p0)))

    return curve(config.alpha0), curve(config.beta0)
