"""TSAM, PCE and SCLN."""

import numpy as np
import pytest

from specdrift.checks import perturb, run_gradcheck
from specdrift.errors import ConfigurationError, DimensionError
from specdrift.numcore import Tensor, backward, layer_norm, sum_
from specdrift.params import ParameterStore
from specdrift.pce import Augmentation, PceParams, parse_pool, pce_forward, scale_lengths
from specdrift.scln import SclnParams, conditioning, scln_forward
from specdrift.tsam import TsamConfig, TsamParams, segment_boundaries, tsam_forward


class TestTsam:
    def build(self, **kwargs):
        cfg = TsamConfig(n_bands=4, token_dim=8, **kwargs)
        store = ParameterStore()
        return cfg, store, TsamParams(store.scope("tsam"), cfg, np.random.default_rng(0))

    def test_identity_at_init(self):
        cfg, _, params = self.build()
        x = np.random.default_rng(1).normal(size=(2, 20, 3))
        np.testing.assert_allclose(tsam_forward(Tensor(x), params, cfg).data, x, atol=1e-12)

    def test_segments_independent(self):
        # with fixed modulation, smoothing never crosses a segment boundary
        cfg, store, params = self.build(static_modulation=True)
        perturb(store, np.random.default_rng(2), scale=0.5)
        x = np.random.default_rng(3).normal(size=(1, 20, 3))
        bumped = x.copy()
        bumped[0, 15:] += 4.0  # last segment is steps 15..19
        a = tsam_forward(Tensor(x), params, cfg).data
        b = tsam_forward(Tensor(bumped), params, cfg).data
        np.testing.assert_array_equal(a[0, :15], b[0, :15])
        assert not np.allclose(a[0, 15:], b[0, 15:])

    def test_boundaries(self):
        assert segment_boundaries(10, 4) == (0, 3, 6, 8, 10)
        with pytest.raises(ConfigurationError):
            segment_boundaries(3, 4)

    def test_shape_error(self):
        cfg, _, params = self.build()
        with pytest.raises(DimensionError):
            tsam_forward(Tensor(np.ones((4, 4))), params, cfg)

    def test_gradients(self):
        assert run_gradcheck("tsam").passed


class TestPce:
    def build(self, channels=3, dim=8):
        store = ParameterStore()
        return store, PceParams(store.scope("pce"), channels, dim, np.random.default_rng(0))

    def test_shapes(self):
        _, params = self.build()
        outs = pce_forward(Tensor(np.random.default_rng(1).normal(size=(2, 64, 3))), params)
        assert [o.shape for o in outs] == [(2, 32, 8), (2, 16, 8), (2, 8, 8)]
        assert scale_lengths(64) == [32, 16, 8]
        assert scale_lengths(15) == [7, 3, 1]

    def test_too_short(self):
        _, params = self.build()
        with pytest.raises(ConfigurationError):
            pce_forward(Tensor(np.ones((1, 7, 3))), params)

    def test_training_needs_rng(self):
        _, params = self.build()
        with pytest.raises(ConfigurationError):
            pce_forward(Tensor(np.ones((1, 16, 3))), params, ["jitter0.1"], training=True)

    def test_eval_mode_ignores_pool(self):
        _, params = self.build()
        x = Tensor(np.random.default_rng(2).normal(size=(1, 16, 3)))
        a = pce_forward(x, params)
        b = pce_forward(x, params, ["drop0.9"], rng=np.random.default_rng(0))
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u.data, v.data)

    def test_training_is_seeded(self):
        _, params = self.build()
        x = Tensor(np.random.default_rng(3).normal(size=(2, 16, 3)))
        runs = [pce_forward(x, params, ["jitter0.5", "drop0.5"], np.random.default_rng(9), True) for _ in range(2)]
        for u, v in zip(*runs):
            np.testing.assert_array_equal(u.data, v.data)

    @pytest.mark.parametrize("spec, kind, strength", [
        ("jitter0.1", "jitter", 0.1), ("SCALE0.2", "scale", 0.2), ("drop.25", "drop", 0.25), ("none", "identity", 0.0),
    ])
    def test_parse(self, spec, kind, strength):
        assert Augmentation.parse(spec) == Augmentation(kind, strength)

    @pytest.mark.parametrize("spec", ["blur0.1", "jitter", "drop1.5"])
    def test_parse_errors(self, spec):
        with pytest.raises(ConfigurationError):
            Augmentation.parse(spec)

    def test_empty_pool_is_identity(self):
        assert parse_pool([]) == [Augmentation("identity")]

    def test_drop_statistics(self):
        x = Tensor(np.ones((20, 50, 10)))
        out = Augmentation("drop", 0.25)(x, np.random.default_rng(0)).data
        assert abs((out == 0).mean() - 0.25) < 0.02
        assert abs(out.mean() - 1.0) < 0.03

    def test_scale_per_channel(self):
        out = Augmentation("scale", 0.3)(Tensor(np.ones((2, 5, 3))), np.random.default_rng(0)).data
        assert np.allclose(out, out[:, :1, :])


class TestScln:
    def build(self, dim=6):
        store = ParameterStore()
        return store, SclnParams(store.scope("scln"), dim, np.random.default_rng(0))

    def test_alpha_zero_is_layer_norm(self):
        store, params = self.build()
        perturb(store, np.random.default_rng(1), scale=1.0)
        h = Tensor(np.random.default_rng(2).normal(size=(2, 5, 6)))
        np.testing.assert_array_equal(scln_forward(h, params, 0.0).data, layer_norm(h).data)

    def test_init_is_layer_norm(self):
        _, params = self.build()
        h = Tensor(np.random.default_rng(3).normal(size=(2, 5, 6)))
        np.testing.assert_allclose(scln_forward(h, params, 0.7).data, layer_norm(h).data, atol=1e-12)

    def test_alpha_one_formula(self):
        store, params = self.build()
        perturb(store, np.random.default_rng(4), scale=0.5)
        h = Tensor(np.random.default_rng(5).normal(size=(2, 5, 6)))
        gamma, beta = conditioning(h, params)
        ref = layer_norm(h).data * gamma.data + beta.data
        np.testing.assert_allclose(scln_forward(h, params, 1.0).data, ref, atol=1e-12)

    def test_conditioning_blocks_gradient(self):
        store, params = self.build()
        perturb(store, np.random.default_rng(6), scale=0.5)
        h = Tensor(np.random.default_rng(7).normal(size=(2, 5, 6)), requires_grad=True)
        gamma, beta = conditioning(h, params)
        backward(sum_(gamma) + sum_(beta))
        assert h.grad is None or np.all(h.grad == 0)
        assert np.any(store["scln.mlp.out.weight"].grad != 0)

    def test_alpha_range(self):
        _, params = self.build()
        with pytest.raises(ConfigurationError):
            scln_forward(Tensor(np.ones((1, 2, 6))), params, 1.5)

    def test_gradients(self):
        assert run_gradcheck("scln").passed
