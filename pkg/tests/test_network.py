"""Score network tests: hand oracles and finite-difference gradient checks."""

import itertools

import numpy as np
import pytest

from scoretab.errors import ShapeMismatch
from scoretab.network import (
    LAYER_TYPES,
    ACTIVATIONS,
    NetSpec,
    Parameters,
    backward_params,
    forward,
    hutchinson_trace_grads,
    init_params,
    jvp_input,
    vjp_input,
)

COMBOS = list(itertools.product(LAYER_TYPES, ACTIVATIONS))


def small_net(layer_type, activation, d=4, hidden=(5, 3), seed=0):
    spec = NetSpec(input_dim=d, hidden_dims=hidden, layer_type=layer_type, activation=activation)
    params = init_params(spec, seed)
    # random biases so gradient checks exercise them too
    rng = np.random.default_rng(seed + 1)
    for name, value in params.values.items():
        if value.ndim == 1:
            params.values[name] = rng.normal(scale=0.3, size=value.shape)
    return spec, params


def fd_param_grad(spec, params, x, t, upstream, name, idx, eps=1e-5):
    ref = params.values[name]
    orig = ref.flat[idx]
    ref.flat[idx] = orig + eps
    hi = float(np.sum(upstream * forward(spec, params, x, t)))
    ref.flat[idx] = orig - eps
    lo = float(np.sum(upstream * forward(spec, params, x, t)))
    ref.flat[idx] = orig
    return (hi - lo) / (2 * eps)


class TestInit:
    def test_deterministic(self):
        spec = NetSpec(input_dim=3, hidden_dims=(4,), layer_type="squash", activation="relu")
        a = init_params(spec, 42)
        b = init_params(spec, 42)
        for name in a.values:
            np.testing.assert_array_equal(a.values[name], b.values[name])

    def test_biases_zero(self):
        spec = NetSpec(input_dim=3, hidden_dims=(4, 2), layer_type="concatsquash", activation="elu")
        params = init_params(spec, 0)
        for name, value in params.values.items():
            if value.ndim == 1:
                np.testing.assert_array_equal(value, np.zeros_like(value))

    def test_fresh_net_finite(self):
        spec = NetSpec(input_dim=6, hidden_dims=(8, 8), layer_type="concat", activation="elu")
        params = init_params(spec, 3)
        out = forward(spec, params, np.zeros(6), 0.5)
        assert np.all(np.isfinite(out))
        assert np.linalg.norm(out) < 1e3

    @pytest.mark.parametrize("layer_type", LAYER_TYPES)
    def test_param_count_formula(self, layer_type):
        spec = NetSpec(input_dim=5, hidden_dims=(7, 4, 6), layer_type=layer_type, activation="relu")
        params = init_params(spec, 0)
        assert params.total_count == spec.param_count()


class TestForward:
    def test_zero_weights_zero_output(self):
        spec = NetSpec(input_dim=3, hidden_dims=(4,), layer_type="concat", activation="relu")
        params = init_params(spec, 0)
        params.values["out.W"][:] = 0.0
        out = forward(spec, params, np.array([1.0, -2.0, 3.0]), 0.7)
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_hand_built_concat_net(self):
        # One hidden unit, D=1, relu. H = 1*t + 1*x; z = (H, x);
        # h1 = relu(z); out = 1*relu(t+x) + 0*relu(x).
        spec = NetSpec(input_dim=1, hidden_dims=(1,), layer_type="concat", activation="relu")
        params = init_params(spec, 0)
        params.values["h1.W"] = np.array([[1.0, 1.0]])
        params.values["h1.b"] = np.zeros(1)
        params.values["out.W"] = np.array([[1.0, 0.0]])
        params.values["out.b"] = np.zeros(1)
        out = forward(spec, params, np.array([0.5]), 0.25)
        assert out[0] == pytest.approx(0.75)

    def test_squash_gate_at_zero_time_path(self):
        # sigmoid(0) = 0.5, so a zeroed time path halves the linear branch
        spec = NetSpec(input_dim=2, hidden_dims=(3,), layer_type="squash", activation="relu")
        params = init_params(spec, 1)
        params.values["h1.Wt"][:] = 0.0
        params.values["h1.bt"][:] = 0.0
        x = np.array([0.4, -0.2])
        a = x @ params.values["h1.W"].T + params.values["h1.b"]
        z = np.concatenate([0.5 * a, x])
        want = np.maximum(z, 0.0) @ params.values["out.W"].T + params.values["out.b"]
        np.testing.assert_allclose(forward(spec, params, x, 0.9), want, rtol=1e-12)

    def test_batched_matches_single(self):
        spec, params = small_net("concatsquash", "elu")
        rng = np.random.default_rng(5)
        xs = rng.normal(size=(6, 4))
        ts = rng.uniform(0.1, 1.0, size=6)
        batch = forward(spec, params, xs, ts)
        for i in range(6):
            np.testing.assert_allclose(batch[i], forward(spec, params, xs[i], ts[i]), rtol=1e-12)

    def test_deterministic_and_reentrant(self):
        spec, params = small_net("squash", "leaky_relu")
        x = np.linspace(-1, 1, 4)
        a = forward(spec, params, x, 0.3)
        b = forward(spec, params, x, 0.3)
        np.testing.assert_array_equal(a, b)

    def test_shape_mismatch(self):
        spec, params = small_net("concat", "relu")
        with pytest.raises(ShapeMismatch):
            forward(spec, params, np.zeros(5), 0.5)


class TestBackwardParams:
    @pytest.mark.parametrize("layer_type,activation", COMBOS)
    def test_matches_finite_differences(self, layer_type, activation):
        spec, params = small_net(layer_type, activation, d=4, hidden=(5, 3))
        rng = np.random.default_rng(9)
        x = rng.normal(size=4)
        t = 0.37
        upstream = rng.normal(size=4)
        grads = backward_params(spec, params, x, t, upstream)
        for name, g in grads.items():
            flat = np.asarray(g).ravel()
            for idx in range(flat.size):
                fd = fd_param_grad(spec, params, x, t, upstream, name, idx)
                denom = max(abs(fd), 1e-6)
                assert abs(flat[idx] - fd) / denom < 1e-4, (name, idx)

    def test_zero_upstream(self):
        spec, params = small_net("squash", "elu")
        grads = backward_params(spec, params, np.ones(4), 0.5, np.zeros(4))
        for g in grads.values():
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_linear_in_upstream(self):
        spec, params = small_net("concatsquash", "relu")
        rng = np.random.default_rng(2)
        x, up = rng.normal(size=4), rng.normal(size=4)
        g1 = backward_params(spec, params, x, 0.4, up)
        g2 = backward_params(spec, params, x, 0.4, 2.0 * up)
        for name in g1:
            np.testing.assert_allclose(g2[name], 2.0 * g1[name], rtol=1e-12)

    def test_batch_sums_rows(self):
        spec, params = small_net("concat", "elu")
        rng = np.random.default_rng(4)
        xs = rng.normal(size=(3, 4))
        ts = rng.uniform(0.2, 0.9, size=3)
        ups = rng.normal(size=(3, 4))
        batch = backward_params(spec, params, xs, ts, ups)
        acc = {name: np.zeros_like(g) for name, g in batch.items()}
        for i in range(3):
            gi = backward_params(spec, params, xs[i], ts[i], ups[i])
            for name in acc:
                acc[name] += gi[name]
        for name in acc:
            np.testing.assert_allclose(batch[name], acc[name], rtol=1e-10)


class TestInputJacobian:
    @pytest.mark.parametrize("layer_type,activation", COMBOS)
    def test_vjp_reconstructs_fd_jacobian(self, layer_type, activation):
        spec, params = small_net(layer_type, activation, d=4, hidden=(5, 3))
        rng = np.random.default_rng(21)
        x = rng.normal(size=4)
        t = 0.61
        eps = 1e-5
        jac_fd = np.zeros((4, 4))
        for j in range(4):
            e = np.zeros(4)
            e[j] = eps
            jac_fd[:, j] = (forward(spec, params, x + e, t) - forward(spec, params, x - e, t)) / (2 * eps)
        jac_vjp = np.stack([vjp_input(spec, params, x, t, np.eye(4)[i]) for i in range(4)])
        np.testing.assert_allclose(jac_vjp, jac_fd, rtol=1e-4, atol=1e-7)

    def test_jvp_zero_tangent(self):
        spec, params = small_net("squash", "relu")
        out = jvp_input(spec, params, np.ones(4), 0.5, np.zeros(4))
        np.testing.assert_array_equal(out, np.zeros(4))

    @pytest.mark.parametrize("layer_type,activation", COMBOS)
    def test_adjoint_identity(self, layer_type, activation):
        # <cot, jvp(tan)> == <vjp(cot), tan> to float64 accuracy
        spec, params = small_net(layer_type, activation)
        rng = np.random.default_rng(31)
        x = rng.normal(size=4)
        for _ in range(5):
            cot = rng.normal(size=4)
            tan = rng.normal(size=4)
            lhs = float(np.dot(cot, jvp_input(spec, params, x, 0.45, tan)))
            rhs = float(np.dot(vjp_input(spec, params, x, 0.45, cot), tan))
            assert abs(lhs - rhs) < 1e-10

    def test_batched_vjp_matches_single(self):
        spec, params = small_net("concatsquash", "elu")
        rng = np.random.default_rng(8)
        xs = rng.normal(size=(5, 4))
        ts = rng.uniform(0.1, 1.0, size=5)
        cots = rng.normal(size=(5, 4))
        batch = vjp_input(spec, params, xs, ts, cots)
        for i in range(5):
            np.testing.assert_allclose(batch[i], vjp_input(spec, params, xs[i], ts[i], cots[i]), rtol=1e-12)


class TestHutchinsonQuadraticForm:
    @pytest.mark.parametrize("layer_type,activation", COMBOS)
    def test_value_matches_jvp(self, layer_type, activation):
        spec, params = small_net(layer_type, activation)
        rng = np.random.default_rng(17)
        x = rng.normal(size=4)
        probe = rng.normal(size=4)
        q, _, _ = hutchinson_trace_grads(spec, params, x, 0.52, probe)
        want = float(np.dot(probe, jvp_input(spec, params, x, 0.52, probe)))
        assert q == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("layer_type", LAYER_TYPES)
    def test_grads_match_finite_differences(self, layer_type):
        # elu is the smooth activation; kink-free so central differences apply
        spec, params = small_net(layer_type, "elu")
        rng = np.random.default_rng(19)
        x = rng.normal(size=4)
        t = 0.33
        probe = rng.normal(size=4)
        q, gx, gp = hutchinson_trace_grads(spec, params, x, t, probe)

        def qval():
            return float(np.dot(probe, jvp_input(spec, params, x, t, probe)))

        eps = 1e-6
        for j in range(4):
            orig = x[j]
            x[j] = orig + eps
            hi = qval()
            x[j] = orig - eps
            lo = qval()
            x[j] = orig
            fd = (hi - lo) / (2 * eps)
            assert abs(gx[j] - fd) / max(abs(fd), 1e-5) < 1e-4
        for name, g in gp.items():
            flat = np.asarray(g).ravel()
            for idx in range(flat.size):
                ref = params.values[name]
                orig = ref.flat[idx]
                ref.flat[idx] = orig + eps
                hi = qval()
                ref.flat[idx] = orig - eps
                lo = qval()
                ref.flat[idx] = orig
                fd = (hi - lo) / (2 * eps)
                assert abs(flat[idx] - fd) / max(abs(fd), 1e-5) < 1e-4, (name, idx)
