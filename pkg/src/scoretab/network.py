"""Time-conditioned dense score network with hand-written autodiff.

The network maps a record x and a scalar time t to a score vector of the
same width as x. Hidden block i computes a time-modulated branch H_i from
the running hidden vector h_{i-1}, concatenates it with h_{i-1}, and applies
the activation to the concatenation:

    h_0 = x
    h_i = act( H_i(h_{i-1}, t) (+) h_{i-1} )        (+) = concatenation
    out = FC(h_L)                                    no final activation

Branch types (psi = sigmoid, (*) = elementwise product):

    squash        H_i = FC_i(h_{i-1}) (*) psi(FC_t(t))
    concat        H_i = FC_i(t (+) h_{i-1})
    concatsquash  H_i = FC_i(h_{i-1}) (*) psi(FC_gate(t) + FC_bias(t))

Hidden widths therefore grow: width(h_i) = hidden_dims[i] + width(h_{i-1}).
Time enters as the raw scalar t; there is no positional embedding.

Everything is float64 numpy. Besides the forward pass, this module provides
exact reverse-mode gradients w.r.t. parameters and input, a forward-mode
Jacobian-vector product, and gradients of the Hutchinson quadratic form
e^T (dS/dx) e w.r.t. both input and parameters (a second-order quantity
needed when optimizing likelihoods).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _sigmoid

from .errors import InputError, ShapeMismatch

LAYER_TYPES = ("squash", "concat", "concatsquash")
ACTIVATIONS = ("relu", "leaky_relu", "elu")

_LEAKY_SLOPE = 0.2  # LeakyReLU negative slope; ELU alpha is 1.0


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = (512, 1024, 1024, 512)
    layer_type: str = "concatsquash"
    activation: str = "elu"

    def __post_init__(self):
        if self.input_dim < 1:
            raise InputError("input_dim must be >= 1")
        if len(self.hidden_dims) < 1 or any(m < 1 for m in self.hidden_dims):
            raise InputError("hidden_dims must be a nonempty tuple of positive ints")
        if self.layer_type not in LAYER_TYPES:
            raise InputError(f"layer_type must be one of {LAYER_TYPES}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}")

    @property
    def widths(self) -> list[int]:
        """Widths of h_0 .. h_L (input and post-concatenation hiddens)."""
        w = [self.input_dim]
        for m in self.hidden_dims:
            w.append(m + w[-1])
        return w

    def param_count(self) -> int:
        """Closed-form parameter count for this spec."""
        total = 0
        w = self.input_dim
        for m in self.hidden_dims:
            if self.layer_type == "squash":
                total += m * w + m + m + m            # W, b, Wt, bt
            elif self.layer_type == "concat":
                total += m * (1 + w) + m              # W over (t, h), b
            else:
                total += m * w + m + 4 * m            # W, b, Wg, bg, Wb, bb
            w = m + w
        total += self.input_dim * w + self.input_dim  # final projection
        return total


@dataclass
class Parameters:
    """Ordered named collection of weight matrices and bias vectors."""

    values: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def total_count(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def copy(self) -> "Parameters":
        return Parameters({k: v.copy() for k, v in self.values.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.values.items()}


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    fan_out, fan_in = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: NetSpec, seed: int) -> Parameters:
    """Glorot-uniform weights, zero biases; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    w = spec.input_dim
    for i, m in enumerate(spec.hidden_dims, start=1):
        if spec.layer_type == "concat":
            values[f"h{i}.W"] = _glorot(rng, (m, 1 + w))
            values[f"h{i}.b"] = np.zeros(m)
        else:
            values[f"h{i}.W"] = _glorot(rng, (m, w))
            values[f"h{i}.b"] = np.zeros(m)
            if spec.layer_type == "squash":
                values[f"h{i}.Wt"] = _glorot(rng, (m, 1))
                values[f"h{i}.bt"] = np.zeros(m)
            else:
                values[f"h{i}.Wg"] = _glorot(rng, (m, 1))
                values[f"h{i}.bg"] = np.zeros(m)
                values[f"h{i}.Wb"] = _glorot(rng, (m, 1))
                values[f"h{i}.bb"] = np.zeros(m)
        w = m + w
    values["out.W"] = _glorot(rng, (spec.input_dim, w))
    values["out.b"] = np.zeros(spec.input_dim)
    return Parameters(values)


# --- activations ---

def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0.0, z, _LEAKY_SLOPE * z)
    e = np.exp(np.minimum(z, 0.0))
    return np.where(z > 0.0, z, e - 1.0)


def _act_d1(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "leaky_relu":
        return np.where(z > 0.0, 1.0, _LEAKY_SLOPE)
    e = np.exp(np.minimum(z, 0.0))
    return np.where(z > 0.0, 1.0, e)


def _act_d2(name: str, z: np.ndarray) -> np.ndarray:
    if name in ("relu", "leaky_relu"):
        return np.zeros_like(z)
    e = np.exp(np.minimum(z, 0.0))
    return np.where(z > 0.0, 0.0, e)


# --- batching helpers ---

def _as_batch(spec: NetSpec, x, t):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != spec.input_dim:
        raise ShapeMismatch(f"expected input width {spec.input_dim}, got shape {x.shape}")
    t_arr = np.asarray(t, dtype=np.float64)
    if t_arr.ndim == 0:
        tcol = np.full((x2.shape[0], 1), float(t_arr))
    elif t_arr.shape == (x2.shape[0],):
        tcol = t_arr[:, None]
    else:
        raise ShapeMismatch(f"t has shape {t_arr.shape}, expected scalar or ({x2.shape[0]},)")
    return x2, tcol, single


def _check_like(name: str, arr, ref: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape != ref.shape:
        raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {ref.shape}")
    return arr


# --- forward / reverse passes ---

def _forward_tape(spec: NetSpec, params: Parameters, x2: np.ndarray, tcol: np.ndarray):
    p = params.values
    h = x2
    tape = []
    for i, m in enumerate(spec.hidden_dims, start=1):
        rec = {"h": h, "m": m}
        if spec.layer_type == "concat":
            cin = np.concatenate([tcol, h], axis=1)
            H = cin @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            rec["cin"] = cin
        else:
            a = h @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            if spec.layer_type == "squash":
                wlin = tcol @ p[f"h{i}.Wt"].T + p[f"h{i}.bt"]
            else:
                wlin = tcol @ p[f"h{i}.Wg"].T + p[f"h{i}.bg"] + tcol @ p[f"h{i}.Wb"].T + p[f"h{i}.bb"]
            s = _sigmoid(wlin)
            H = a * s
            rec["a"] = a
            rec["s"] = s
        z = np.concatenate([H, h], axis=1)
        rec["z"] = z
        h = _act(spec.activation, z)
        tape.append(rec)
    out = h @ p["out.W"].T + p["out.b"]
    return out, h, tape


def forward(spec: NetSpec, params: Parameters, x, t) -> np.ndarray:
    """Evaluate the score network. x may be (D,) or (N, D); t scalar or (N,)."""
    x2, tcol, single = _as_batch(spec, x, t)
    out, _, _ = _forward_tape(spec, params, x2, tcol)
    return out[0] if single else out


def _backward(spec: NetSpec, params: Parameters, tape, h_last, tcol, upstream,
              want_params: bool):
    """Reverse pass shared by backward_params and vjp_input.

    Returns (param gradients or None, gradient w.r.t. the input batch).
    """
    p = params.values
    grads = {} if want_params else None
    if want_params:
        grads["out.W"] = upstream.T @ h_last
        grads["out.b"] = upstream.sum(axis=0)
    dh = upstream @ p["out.W"]
    for i in range(len(spec.hidden_dims), 0, -1):
        rec = tape[i - 1]
        m = rec["m"]
        dz = dh * _act_d1(spec.activation, rec["z"])
        dH = dz[:, :m]
        dskip = dz[:, m:]
        if spec.layer_type == "concat":
            if want_params:
                grads[f"h{i}.W"] = dH.T @ rec["cin"]
                grads[f"h{i}.b"] = dH.sum(axis=0)
            dh = dH @ p[f"h{i}.W"][:, 1:] + dskip
        else:
            s = rec["s"]
            da = dH * s
            if want_params:
                dwlin = (dH * rec["a"]) * s * (1.0 - s)
                if spec.layer_type == "squash":
                    grads[f"h{i}.Wt"] = dwlin.T @ tcol
                    grads[f"h{i}.bt"] = dwlin.sum(axis=0)
                else:
                    gt = dwlin.T @ tcol
                    gb = dwlin.sum(axis=0)
                    grads[f"h{i}.Wg"] = gt
                    grads[f"h{i}.bg"] = gb
                    grads[f"h{i}.Wb"] = gt.copy()
                    grads[f"h{i}.bb"] = gb.copy()
                grads[f"h{i}.W"] = da.T @ rec["h"]
                grads[f"h{i}.b"] = da.sum(axis=0)
            dh = da @ p[f"h{i}.W"] + dskip
    return grads, dh


def backward_params(spec: NetSpec, params: Parameters, x, t, upstream) -> dict[str, np.ndarray]:
    """Exact gradient of <upstream, S(x, t)> w.r.t. every parameter.

    For batched input the gradient is summed over rows.
    """
    x2, tcol, single = _as_batch(spec, x, t)
    up = np.asarray(upstream, dtype=np.float64)
    up2 = up[None, :] if single else up
    up2 = _check_like("upstream", up2, x2)
    _, h_last, tape = _forward_tape(spec, params, x2, tcol)
    grads, _ = _backward(spec, params, tape, h_last, tcol, up2, want_params=True)
    return grads


def vjp_input(spec: NetSpec, params: Parameters, x, t, cotangent) -> np.ndarray:
    """Vector-Jacobian product cotangent^T dS/dx, row-wise for batches."""
    x2, tcol, single = _as_batch(spec, x, t)
    cot = np.asarray(cotangent, dtype=np.float64)
    cot2 = cot[None, :] if single else cot
    cot2 = _check_like("cotangent", cot2, x2)
    _, h_last, tape = _forward_tape(spec, params, x2, tcol)
    _, dx = _backward(spec, params, tape, h_last, tcol, cot2, want_params=False)
    return dx[0] if single else dx


def jvp_input(spec: NetSpec, params: Parameters, x, t, tangent) -> np.ndarray:
    """Jacobian-vector product (dS/dx) tangent, row-wise for batches."""
    x2, tcol, single = _as_batch(spec, x, t)
    tan = np.asarray(tangent, dtype=np.float64)
    tan2 = tan[None, :] if single else tan
    tan2 = _check_like("tangent", tan2, x2)
    p = params.values
    h, u = x2, tan2
    for i, m in enumerate(spec.hidden_dims, start=1):
        if spec.layer_type == "concat":
            cin = np.concatenate([tcol, h], axis=1)
            H = cin @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            uH = u @ p[f"h{i}.W"][:, 1:].T
        else:
            a = h @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            if spec.layer_type == "squash":
                wlin = tcol @ p[f"h{i}.Wt"].T + p[f"h{i}.bt"]
            else:
                wlin = tcol @ p[f"h{i}.Wg"].T + p[f"h{i}.bg"] + tcol @ p[f"h{i}.Wb"].T + p[f"h{i}.bb"]
            s = _sigmoid(wlin)
            H = a * s
            uH = (u @ p[f"h{i}.W"].T) * s
        z = np.concatenate([H, h], axis=1)
        uz = np.concatenate([uH, u], axis=1)
        h = _act(spec.activation, z)
        u = _act_d1(spec.activation, z) * uz
    du = u @ p["out.W"].T
    return du[0] if single else du


def hutchinson_trace_grads(spec: NetSpec, params: Parameters, x, t, probe):
    """Quadratic form q = probe^T (dS/dx) probe and its exact gradients.

    Returns (q, dq/dx, dq/dparams): q per row, dq/dx per row, and parameter
    gradients summed over rows. This differentiates through the
    forward-mode pass, so second derivatives of the activation enter.
    """
    x2, tcol, single = _as_batch(spec, x, t)
    pr = np.asarray(probe, dtype=np.float64)
    pr2 = pr[None, :] if single else pr
    pr2 = _check_like("probe", pr2, x2)
    p = params.values
    name = spec.activation

    # forward with tangent, keeping everything the reverse sweep needs
    h, u = x2, pr2
    tape = []
    for i, m in enumerate(spec.hidden_dims, start=1):
        rec = {"h": h, "u": u, "m": m}
        if spec.layer_type == "concat":
            cin = np.concatenate([tcol, h], axis=1)
            H = cin @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            uH = u @ p[f"h{i}.W"][:, 1:].T
            rec["cin"] = cin
        else:
            a = h @ p[f"h{i}.W"].T + p[f"h{i}.b"]
            if spec.layer_type == "squash":
                wlin = tcol @ p[f"h{i}.Wt"].T + p[f"h{i}.bt"]
            else:
                wlin = tcol @ p[f"h{i}.Wg"].T + p[f"h{i}.bg"] + tcol @ p[f"h{i}.Wb"].T + p[f"h{i}.bb"]
            s = _sigmoid(wlin)
            ua = u @ p[f"h{i}.W"].T
            H = a * s
            uH = ua * s
            rec["a"] = a
            rec["ua"] = ua
            rec["s"] = s
        z = np.concatenate([H, h], axis=1)
        uz = np.concatenate([uH, u], axis=1)
        rec["z"] = z
        rec["uz"] = uz
        h = _act(name, z)
        u = _act_d1(name, z) * uz
        tape.append(rec)
    dS = u @ p["out.W"].T
    q = np.sum(pr2 * dS, axis=1)

    # reverse sweep; q depends on the primal path only through act'(z)
    grads = params.zeros_like()
    grads["out.W"] += pr2.T @ u
    gh = np.zeros_like(h)
    gu = pr2 @ p["out.W"]
    for i in range(len(spec.hidden_dims), 0, -1):
        rec = tape[i - 1]
        m = rec["m"]
        d1 = _act_d1(name, rec["z"])
        d2 = _act_d2(name, rec["z"])
        gz = d1 * gh + d2 * rec["uz"] * gu
        guz = d1 * gu
        gH, gh_skip = gz[:, :m], gz[:, m:]
        guH, gu_skip = guz[:, :m], guz[:, m:]
        if spec.layer_type == "concat":
            grads[f"h{i}.W"] += gH.T @ rec["cin"]
            grads[f"h{i}.W"][:, 1:] += guH.T @ rec["u"]
            grads[f"h{i}.b"] += gH.sum(axis=0)
            W1 = p[f"h{i}.W"][:, 1:]
            gh = gH @ W1 + gh_skip
            gu = guH @ W1 + gu_skip
        else:
            s = rec["s"]
            ga = gH * s
            gua = guH * s
            gwlin = (gH * rec["a"] + guH * rec["ua"]) * s * (1.0 - s)
            if spec.layer_type == "squash":
                grads[f"h{i}.Wt"] += gwlin.T @ tcol
                grads[f"h{i}.bt"] += gwlin.sum(axis=0)
            else:
                gt = gwlin.T @ tcol
                gb = gwlin.sum(axis=0)
                grads[f"h{i}.Wg"] += gt
                grads[f"h{i}.bg"] += gb
                grads[f"h{i}.Wb"] += gt
                grads[f"h{i}.bb"] += gb
            grads[f"h{i}.W"] += ga.T @ rec["h"] + gua.T @ rec["u"]
            grads[f"h{i}.b"] += ga.sum(axis=0)
            W = p[f"h{i}.W"]
            gh = ga @ W + gh_skip
            gu = gua @ W + gu_skip
    gx = gh
    if single:
        return q[0], gx[0], grads
    return q, gx, grads


# --- closures used by samplers and the likelihood engine ---

def score_fn(spec: NetSpec, params: Parameters):
    """Bind (spec, params) into an (x, t) -> score callable."""
    return lambda x, t: forward(spec, params, x, t)


def score_vjp_fn(spec: NetSpec, params: Parameters):
    """Bind (spec, params) into an (x, t, cotangent) -> vjp callable."""
    return lambda x, t, cot: vjp_input(spec, params, x, t, cot)
