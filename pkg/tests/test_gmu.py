import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgae.gmu import gmu_backward, gmu_fuse, init_gmu
from pgae.numerics import RngStream, ShapeError, grad_check


def params(hidden=50, seed=0):
    p = {}
    init_gmu(p, hidden, RngStream(seed))
    rng = np.random.default_rng(seed)
    for k in ("gmu.b_L", "gmu.b_A", "gmu.b_z"):
        p[k][:] = rng.normal(scale=0.5, size=p[k].shape)
    return p


def inputs(seed=0, feats=100, batch=None):
    rng = np.random.default_rng(seed + 1000)
    shape = (feats,) if batch is None else (batch, feats)
    return rng.normal(size=shape), rng.normal(size=shape)


class TestFuse:
    def test_shapes(self):
        p = params()
        assert p["gmu.W_L"].shape == (50, 100)
        assert p["gmu.W_A"].shape == (50, 100)
        assert p["gmu.W_z"].shape == (50, 200)
        lp = gmu_fuse(p, *inputs())
        for v in (lp.L_h, lp.A_h, lp.z, lp.h):
            assert v.shape == (50,)

    def test_closed_gate_averages(self):
        p = params()
        p["gmu.W_z"][:] = 0.0
        p["gmu.b_z"][:] = 0.0
        lp = gmu_fuse(p, *inputs())
        np.testing.assert_array_equal(lp.z, 0.5)
        np.testing.assert_allclose(lp.h, 0.5 * (lp.A_h + lp.L_h), atol=1e-15)

    def test_saturated_gate_selects_action(self):
        p = params()
        p["gmu.W_z"][:] = 0.0
        p["gmu.b_z"][:] = 50.0
        lp = gmu_fuse(p, *inputs())
        np.testing.assert_allclose(lp.h, lp.A_h, atol=1e-9)

    def test_gate_input_order_is_action_first(self):
        p = params()
        L, A = inputs()
        p["gmu.W_z"][:, 100:] = 0.0  # language half of the gate input
        lp1 = gmu_fuse(p, L, A)
        lp2 = gmu_fuse(p, L * 3.0, A)
        np.testing.assert_array_equal(lp1.z, lp2.z)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            gmu_fuse(params(), np.zeros(99), np.zeros(100))

    def test_pure(self):
        p = params()
        L, A = inputs()
        a, b = gmu_fuse(p, L, A), gmu_fuse(p, L, A)
        np.testing.assert_array_equal(a.h, b.h)

    def test_ten_thousand_instances(self):
        # batch of 10^4 random (params, input) draws in blocks of 100
        worst = 0.0
        for s in range(100):
            p = params(hidden=8, seed=s)
            rng = np.random.default_rng(s)
            # float64 sigmoid rounds to 1.0 beyond |logit| ~ 37; keep encodings in the [h; c] range
            scale = 10.0 ** rng.uniform(-1, 0.5)
            L, A = rng.normal(scale=scale, size=(2, 100, 16))
            lp = gmu_fuse(p, L, A)
            assert np.all((lp.z > 0) & (lp.z < 1))
            lo, hi = np.minimum(lp.A_h, lp.L_h), np.maximum(lp.A_h, lp.L_h)
            assert np.all((lp.h >= lo - 1e-12) & (lp.h <= hi + 1e-12))
            worst = max(worst, np.max(np.abs(lp.h - (lp.z * lp.A_h + (1 - lp.z) * lp.L_h))))
        assert worst <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_modality_swap_construction(self, seed):
        p = params(hidden=6, seed=seed)
        L, A = inputs(seed, feats=12)
        lp = gmu_fuse(p, L, A)
        q = dict(p)
        q["gmu.W_L"], q["gmu.W_A"] = p["gmu.W_A"], p["gmu.W_L"]
        q["gmu.b_L"], q["gmu.b_A"] = p["gmu.b_A"], p["gmu.b_L"]
        # swapped inputs put language first in the gate input; negate so z -> 1 - z
        q["gmu.W_z"] = -np.concatenate([p["gmu.W_z"][:, 12:], p["gmu.W_z"][:, :12]], axis=1)
        q["gmu.b_z"] = -p["gmu.b_z"]
        swapped = gmu_fuse(q, A, L)
        np.testing.assert_allclose(swapped.h, lp.h, atol=1e-12)
        np.testing.assert_allclose(swapped.z, 1 - lp.z, atol=1e-12)


class TestBackward:
    def test_zero_upstream(self):
        p = params()
        lp = gmu_fuse(p, *inputs())
        grads, dL, dA = gmu_backward(p, lp, np.zeros(50))
        for g in (*grads.values(), dL, dA):
            np.testing.assert_array_equal(g, 0.0)

    def test_finite_differences(self):
        p = params()
        L, A = inputs()
        store = dict(p, L=L, A=A)
        w = np.random.default_rng(3).normal(size=50)

        def loss():
            return float(w @ gmu_fuse(store, store["L"], store["A"]).h)

        grads, dL, dA = gmu_backward(store, gmu_fuse(store, L, A), w)
        grads = dict(grads, L=dL, A=dA)
        assert grad_check(loss, store, grads, probe_count=300, rng=RngStream(2)) < 1e-6

    def test_both_modalities_receive_gradient(self):
        p = params()
        lp = gmu_fuse(p, *inputs())
        _, dL, dA = gmu_backward(p, lp, np.ones(50))
        assert np.linalg.norm(dL) > 1e-3 and np.linalg.norm(dA) > 1e-3

    def test_cache_mismatch(self):
        p = params()
        lp = gmu_fuse(p, *inputs())
        with pytest.raises(ShapeError):
            gmu_backward(p, lp, np.zeros(49))
