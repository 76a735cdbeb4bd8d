"""Denoising score matching training with self-paced record weighting.

Each step draws, per record, Monte Carlo times t ~ U(t_min, 1) and Gaussian
noise, forms the variance-normalized per-record loss

    l_i = mean_k || std(t_k) * S(x_i(t_k), t_k) + z_k ||^2,

derives inclusion weights v from the batch loss quantiles at the current
thresholds, takes one Adam step on sum_i v_i l_i (the weight regularizer is
constant in the parameters), stores the recomputed weights, advances the
thresholds, and updates the parameter EMA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .codec import EncodedMatrix
from .errors import InputError, NonFiniteLoss
from .network import NetSpec, Parameters, backward_params, forward, init_params
from .optim import Adam, Ema
from .sde import SdeSpec, kernel_mean_std
from .spl import SplConfig, SplState, advance_schedule, optimal_v, quantile, regularizer_value


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-3
    batch_size: int = 512
    total_steps: int = 10000
    t_draws_per_record: int = 1
    ema_decay: float = 0.999
    seed: int = 0
    log_every: int = 0  # 0 silences progress lines

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")
        if self.batch_size < 1 or self.total_steps < 1 or self.t_draws_per_record < 1:
            raise InputError("batch_size, total_steps, t_draws_per_record must be >= 1")
        if not (0.0 <= self.ema_decay < 1.0):
            raise InputError("ema_decay must lie in [0, 1)")


@dataclass
class LossReport:
    step: int
    losses: np.ndarray
    weighted_objective: float
    mean_v: float
    alpha: float
    beta: float


def record_loss(sde: SdeSpec, score, x0: np.ndarray, rng: np.random.Generator,
                n_draws: int) -> float:
    """Monte Carlo estimate of the per-record matching loss.

    `score` is any (x, t) -> score callable, which lets tests plug the
    analytic conditional score in place of a network.
    """
    if n_draws < 1:
        raise InputError("n_draws must be >= 1")
    x0 = np.asarray(x0, dtype=np.float64)
    d = x0.shape[-1]
    t = rng.uniform(sde.t_min, 1.0, size=n_draws)
    z = rng.standard_normal((n_draws, d))
    _, std = kernel_mean_std(sde, t)
    mean, _ = kernel_mean_std(sde, t)
    xt = mean[:, None] * x0[None, :] + std[:, None] * z
    s = np.atleast_2d(score(xt, t))
    resid = std[:, None] * s + z
    return float(np.mean(np.sum(resid**2, axis=1)))


def dsm_forward(sde: SdeSpec, net_spec: NetSpec, params: Parameters,
                batch: np.ndarray, t: np.ndarray, z: np.ndarray):
    """Per-record losses for given draws, plus the tape the gradient needs.

    `t` and `z` carry n_draws entries per record, flattened record-major.
    Shared by the trainer and the fine-tuner so their per-record gradients
    coincide by construction.
    """
    b, _ = batch.shape
    k = t.size // b
    mean, std = kernel_mean_std(sde, t)
    x0 = np.repeat(batch, k, axis=0)
    xt = mean[:, None] * x0 + std[:, None] * z
    s = forward(net_spec, params, xt, t)
    resid = std[:, None] * s + z
    losses = np.sum(resid**2, axis=1).reshape(b, k).mean(axis=1)
    return losses, (xt, t, std, resid)


def dsm_backward(net_spec: NetSpec, params: Parameters, tape, v: np.ndarray):
    """Gradient of sum_i v_i l_i for the draws recorded by dsm_forward."""
    xt, t, std, resid = tape
    k = t.size // v.size
    upstream = (2.0 / k) * (std * np.repeat(v, k))[:, None] * resid
    return backward_params(net_spec, params, xt, t, upstream)


class Trainer:
    """Owns parameters, optimizer state, EMA, and the threshold schedule."""

    def __init__(self, sde: SdeSpec, net_spec: NetSpec, spl_config: SplConfig,
                 config: TrainConfig, n_records: int):
        self.sde = sde
        self.net_spec = net_spec
        self.spl_config = spl_config
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.params = init_params(net_spec, config.seed)
        self.adam = Adam(self.params, config.learning_rate)
        self.ema = Ema(self.params, config.ema_decay)
        self.spl = SplState.initial(spl_config, n_records)

    def _batch_losses(self, batch: np.ndarray):
        """Per-record losses plus the draw tape needed for the gradient."""
        b, d = batch.shape
        k = self.config.t_draws_per_record
        t = self.rng.uniform(self.sde.t_min, 1.0, size=b * k)
        z = self.rng.standard_normal((b * k, d))
        return dsm_forward(self.sde, self.net_spec, self.params, batch, t, z)

    def _weighted_update(self, tape, v: np.ndarray) -> None:
        """One Adam step on sum_i v_i l_i given the draw tape."""
        grads = dsm_backward(self.net_spec, self.params, tape, v)
        self.adam.step(self.params, grads)

    def train_step(self, batch: np.ndarray, indices: np.ndarray | None = None) -> LossReport:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.size == 0:
            raise InputError("empty batch")
        step = self.spl.step
        losses, tape = self._batch_losses(batch)
        if not np.all(np.isfinite(losses)):
            bad = int(np.sum(~np.isfinite(losses)))
            raise NonFiniteLoss(f"step {step}: {bad}/{losses.size} non-finite record losses")
        alpha, beta = self.spl.alpha, self.spl.beta
        q_alpha = quantile(losses, alpha)
        q_beta = quantile(losses, beta)
        v = np.atleast_1d(optimal_v(losses, q_alpha, q_beta))
        self._weighted_update(tape, v)
        # post-update weights from the closed form; same quantile thresholds
        v = np.atleast_1d(optimal_v(losses, q_alpha, q_beta))
        if indices is not None:
            self.spl.v[np.asarray(indices)] = v
        objective = float(np.dot(v, losses) + regularizer_value(v, q_alpha, q_beta))
        self.spl.step = step + 1
        self.spl.alpha, self.spl.beta = advance_schedule(self.spl_config, self.spl.step)
        self.ema.update(self.params)
        return LossReport(
            step=step,
            losses=losses,
            weighted_objective=objective,
            mean_v=float(v.mean()),
            alpha=alpha,
            beta=beta,
        )

    def to_checkpoint(self, schema, scaler) -> Checkpoint:
        return Checkpoint(
            schema=schema,
            scaler=scaler,
            sde=self.sde,
            net=self.net_spec,
            spl_config=self.spl_config,
            spl_alpha=self.spl.alpha,
            spl_beta=self.spl.beta,
            spl_step=self.spl.step,
            params=self.params.copy(),
            ema_params=self.ema.shadow.copy(),
        )


def train(config: TrainConfig, spl_config: SplConfig, sde: SdeSpec, net_spec: NetSpec,
          data: EncodedMatrix, log_fn=print, checkpoint_every: int = 0,
          on_checkpoint=None) -> Checkpoint:
    """Run the full training loop over shuffled mini-batches.

    Deterministic given the config seed. `on_checkpoint(step, checkpoint)` is
    invoked every `checkpoint_every` steps when both are set.
    """
    x = np.asarray(data.data, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise InputError("training data is empty")
    if net_spec.input_dim != x.shape[1]:
        raise InputError(f"net input_dim {net_spec.input_dim} != encoded width {x.shape[1]}")
    trainer = Trainer(sde, net_spec, spl_config, config, n)
    batch_size = min(config.batch_size, n)
    order = trainer.rng.permutation(n)
    cursor = 0
    for step in range(config.total_steps):
        if cursor + batch_size > n:
            order = trainer.rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + batch_size]
        cursor += batch_size
        report = trainer.train_step(x[idx], idx)
        if config.log_every and (step % config.log_every == 0 or step == config.total_steps - 1):
            log_fn(
                f"step {report.step} loss {report.losses.mean():.6f} "
                f"mean_v {report.mean_v:.3f} alpha {report.alpha:.3f} beta {report.beta:.3f}"
            )
        if checkpoint_every and on_checkpoint is not None and (step + 1) % checkpoint_every == 0:
            on_checkpoint(step + 1, trainer.to_checkpoint(data.schema, data.scaler))
    return trainer.to_checkpoint(data.schema, data.scaler)
