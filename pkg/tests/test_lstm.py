import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgae.lstm import LstmParams, init_lstm, lstm_backward, lstm_forward, lstm_step
from pgae.numerics import RngStream, ShapeError, grad_check


def make(input_size=3, hidden=4, seed=0, bias=True):
    store = {}
    init_lstm(store, "l", input_size, hidden, RngStream(seed))
    if bias:
        # nonzero biases so every gate path is exercised
        store["l.b"][:] = np.random.default_rng(seed).normal(scale=0.3, size=4 * hidden)
    return store, LstmParams.from_store(store, "l")


def zero_params(input_size=3, hidden=4):
    store, p = make(input_size, hidden)
    for v in store.values():
        v[:] = 0.0
    return p


class TestForward:
    def test_zero_params_hand_values(self):
        # gates all sigmoid(0) = 0.5, g = tanh(0) = 0  ->  c = 0, h = 0
        p = zero_params()
        h, c, cache = lstm_step(p, np.array([1.0, -2.0, 0.5]))
        np.testing.assert_array_equal(h, 0.0)
        np.testing.assert_array_equal(c, 0.0)
        for gate in (cache.i, cache.f, cache.o):
            np.testing.assert_array_equal(gate, 0.5)

    def test_default_state_is_zero(self):
        _, p = make()
        x = np.array([0.2, 0.1, -0.4])
        a = lstm_step(p, x)
        b = lstm_step(p, x, np.zeros(4), np.zeros(4))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_output_gate_peeks_at_new_cell(self):
        _, p = make(seed=3)
        h_prev, c_prev = np.full(4, 0.2), np.full(4, -0.7)
        x = np.array([0.3, -0.1, 0.9])
        h, c, _ = lstm_step(p, x, h_prev, c_prev)
        H = 4
        a = p.W @ x + p.U @ h_prev + p.b
        sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
        i = sig(a[:H] + p.p_i * c_prev)
        f = sig(a[H : 2 * H] + p.p_f * c_prev)
        g = np.tanh(a[2 * H : 3 * H])
        c_ref = f * c_prev + i * g
        o = sig(a[3 * H :] + p.p_o * c_ref)
        np.testing.assert_allclose(c[0], c_ref, rtol=1e-14)
        np.testing.assert_allclose(h[0], o * np.tanh(c_ref), rtol=1e-14)

    def test_shape_error(self):
        _, p = make()
        with pytest.raises(ShapeError):
            lstm_step(p, np.zeros(5))

    def test_deterministic(self):
        _, p = make()
        xs = np.random.default_rng(1).normal(size=(6, 2, 3))
        a, ca, _ = lstm_forward(p, xs)
        b, cb, _ = lstm_forward(p, xs)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(ca, cb)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 50.0))
    def test_h_bounded(self, seed, scale):
        _, p = make(seed=seed % 50)
        xs = np.random.default_rng(seed).normal(scale=scale, size=(5, 3, 3))
        hs, _, _ = lstm_forward(p, xs)
        assert np.all(np.abs(hs) <= 1.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 1000))
    def test_prefix_property(self, k, seed):
        _, p = make()
        xs = np.random.default_rng(seed).normal(size=(10, 1, 3))
        long, _, _ = lstm_forward(p, xs)
        short, _, _ = lstm_forward(p, xs[:k])
        np.testing.assert_array_equal(short, long[:k])

    def test_mask_matches_individual_runs(self):
        _, p = make()
        rng = np.random.default_rng(2)
        seqs = [rng.normal(size=(n, 3)) for n in (2, 5, 3)]
        X = np.zeros((5, 3, 3))
        masks = np.zeros((5, 3))
        for b, s in enumerate(seqs):
            X[: len(s), b] = s
            masks[: len(s), b] = 1
        hs, c, _ = lstm_forward(p, X, masks=masks)
        for b, s in enumerate(seqs):
            hs1, c1, _ = lstm_forward(p, s[:, None, :])
            np.testing.assert_allclose(hs[-1, b], hs1[-1, 0], rtol=0, atol=1e-15)
            np.testing.assert_allclose(c[b], c1[0], rtol=0, atol=1e-15)


class TestBackward:
    def _check(self, store, p, xs, masks=None, probes=200):
        rng = np.random.default_rng(7)
        T, B, _ = xs.shape
        wh = rng.normal(size=(T, B, p.hidden))
        wc = rng.normal(size=(B, p.hidden))

        def loss():
            hs, c, _ = lstm_forward(p, xs, masks=masks)
            return float(np.sum(wh * hs) + np.sum(wc * c))

        _, _, caches = lstm_forward(p, xs, masks=masks)
        grads, dxs, _, _ = lstm_backward(p, caches, wh, wc)
        named = {f"l.{k}": v for k, v in grads.items()}
        return grad_check(loss, store, named, probe_count=probes, rng=RngStream(1)), dxs

    def test_three_steps(self):
        store, p = make()
        xs = np.random.default_rng(0).normal(size=(3, 1, 3))
        err, _ = self._check(store, p, xs)
        assert err < 1e-4

    def test_single_step_hidden_one(self):
        store, p = make(input_size=2, hidden=1)
        xs = np.array([[[0.4, -0.8]]])
        err, _ = self._check(store, p, xs, probes=12)
        assert err < 1e-6

    def test_masked_batch(self):
        store, p = make(hidden=8)
        xs = np.random.default_rng(4).normal(size=(5, 3, 3))
        masks = np.array([[1, 1, 1], [1, 1, 0], [1, 1, 0], [1, 0, 0], [1, 0, 0]], dtype=float)
        err, _ = self._check(store, p, xs, masks)
        assert err < 1e-4

    def test_input_gradient_reaches_every_step(self):
        store, p = make()
        xs = np.random.default_rng(5).normal(size=(5, 1, 3))
        _, dxs = self._check(store, p, xs, probes=1)
        assert all(np.any(dxs[t] != 0) for t in range(5))

    def test_zero_upstream(self):
        _, p = make()
        xs = np.random.default_rng(6).normal(size=(4, 2, 3))
        _, _, caches = lstm_forward(p, xs)
        grads, _, _, _ = lstm_backward(p, caches, np.zeros((4, 2, 4)), np.zeros((2, 4)))
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)

    def test_length_mismatch(self):
        _, p = make()
        _, _, caches = lstm_forward(p, np.zeros((3, 1, 3)))
        with pytest.raises(ShapeError):
            lstm_backward(p, caches, np.zeros((2, 1, 4)))
