import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift.errors import DimensionError, NumericError
from specdrift.numcore import (
    ComplexTensor,
    Tensor,
    backward,
    build_tape,
    concat,
    conv1d_same,
    exp,
    gelu,
    grad_check,
    irfft,
    layer_norm,
    log,
    matmul,
    mean,
    rfft,
    softmax,
    stopgrad,
    sum_,
    tanh,
    variance,
)


def direct_dft(x):
    t = len(x)
    k = np.arange(t // 2 + 1)[:, None]
    return (x[None, :] * np.exp(-2j * np.pi * k * np.arange(t)[None, :] / t)).sum(axis=1)


def direct_idft(z, t):
    full = np.zeros(t, dtype=complex)
    full[: len(z)] = z
    for k in range(1, (t + 1) // 2):
        full[t - k] = np.conj(z[k])
    n = np.arange(t)
    return np.real(np.array([(full * np.exp(2j * np.pi * np.arange(t) * i / t)).sum() for i in n]) / t)


class TestFFT:
    @pytest.mark.parametrize(
        "x, expected",
        [
            ([1, 0, 0, 0], [1, 1, 1]),
            ([2.5, 2.5, 2.5, 2.5], [10, 0, 0]),
            ([1, 0, -1, 0], [0, 2, 0]),
        ],
    )
    def test_small_examples(self, x, expected):
        z = rfft(Tensor(np.array(x, dtype=float)))
        np.testing.assert_allclose(z.re.data, expected, atol=1e-12)
        np.testing.assert_allclose(z.im.data, 0.0, atol=1e-12)

    def test_inverse_examples(self):
        np.testing.assert_allclose(irfft(ComplexTensor.from_numpy(np.array([4, 0, 0], complex)), 4).data, 1.0, atol=1e-12)
        np.testing.assert_allclose(
            irfft(ComplexTensor.from_numpy(np.array([0, 2, 0], complex)), 4).data, [1, 0, -1, 0], atol=1e-12
        )

    @pytest.mark.parametrize("t", [2, 3, 5, 8, 15, 16, 17, 31, 64])
    def test_matches_direct_dft(self, t):
        x = np.random.default_rng(t).normal(size=t)
        z = rfft(Tensor(x))
        np.testing.assert_allclose(z.re.data + 1j * z.im.data, direct_dft(x), atol=1e-10)
        np.testing.assert_allclose(irfft(z, t).data, direct_idft(direct_dft(x), t), atol=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 512), st.integers(0, 2**31 - 1))
    def test_round_trip_and_parseval(self, t, seed):
        x = np.random.default_rng(seed).normal(size=(3, t))
        z = rfft(Tensor(x))
        assert np.abs(irfft(z, t).data - x).max() < 1e-10
        power = z.re.data**2 + z.im.data**2
        weights = np.full(t // 2 + 1, 2.0)
        weights[0] = 1.0
        if t % 2 == 0:
            weights[-1] = 1.0
        np.testing.assert_allclose((power * weights).sum(axis=-1) / t, (x**2).sum(axis=-1), rtol=0, atol=1e-9 * t)

    def test_nyquist_is_real(self):
        z = rfft(Tensor(np.random.default_rng(0).normal(size=16)))
        assert z.im.data[-1] == pytest.approx(0.0, abs=1e-12)

    def test_irfft_discards_nyquist_imaginary_part(self):
        z = np.array([1, 2 + 1j, 3 + 5j])
        a = irfft(ComplexTensor.from_numpy(z), 4).data
        b = irfft(ComplexTensor.from_numpy(z.real + 1j * np.array([0, 1, 0])), 4).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_errors(self):
        with pytest.raises(DimensionError):
            rfft(Tensor(np.ones(1)))
        with pytest.raises(DimensionError):
            irfft(ComplexTensor.from_numpy(np.ones(4, complex)), 4)

    def test_gradient_through_modulated_round_trip(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=16), requires_grad=True)
        mod = rng.normal(size=9)

        def f():
            z = rfft(x)
            return sum_(irfft(ComplexTensor(z.re * mod, z.im * (mod * 0.5)), 16) * Tensor(np.arange(16.0)))

        assert grad_check(f, {"x": x}).max_rel_err < 1e-5


class TestOps:
    def test_softmax_symmetry(self):
        np.testing.assert_allclose(softmax(Tensor(np.zeros(2))).data, [0.5, 0.5])

    def test_layer_norm_constant_row(self):
        np.testing.assert_allclose(layer_norm(Tensor(np.ones(3))).data, 0.0)

    def test_conv1d_replicate(self):
        out = conv1d_same(Tensor(np.array([1.0, 2.0, 3.0])), np.full(3, 1 / 3))
        np.testing.assert_allclose(out.data, [4 / 3, 2, 8 / 3])

    def test_variance_population(self):
        x = np.array([1.0, 2.0, 4.0])
        assert variance(Tensor(x)).data == pytest.approx(np.var(x))

    def test_gelu_exact(self):
        from scipy.special import erf

        x = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(gelu(Tensor(x)).data, 0.5 * x * (1 + erf(x / np.sqrt(2))))

    def test_square_gradient(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        report = grad_check(lambda: x * x, {"x": x})
        assert x.grad == pytest.approx(6.0)
        assert report.passed

    def test_stopgrad_blocks_gradient(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        y = sum_(stopgrad(x) * x)
        backward(y)
        np.testing.assert_array_equal(x.grad, [1.0, 2.0])  # only the direct path
        x.grad = None
        backward(sum_(stopgrad(x) * 3.0))
        assert x.grad is None or np.all(x.grad == 0)

    def test_non_finite_forward_raises(self):
        with pytest.raises(NumericError):
            log(Tensor(np.array([-1.0])))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_tape_visits_each_node_once(self):
        x = Tensor(np.ones(3), requires_grad=True)
        h = tanh(x)
        y = sum_(h * h + h)
        tape = build_tape(y)
        assert len(tape) == len({id(n) for n in tape})
        assert tape[-1] is y

    def test_backward_linearity(self):
        rng = np.random.default_rng(0)
        w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        x = Tensor(rng.normal(size=(5, 4)))

        def grads(scale):
            w.grad = None
            out = mean(exp(matmul(x, w) * 0.1), axis=0)
            backward(out, np.full(out.shape, scale))
            return w.grad.copy()

        np.testing.assert_array_equal(grads(2.0), 2.0 * grads(1.0))

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(7)
            w = Tensor(rng.normal(size=(6, 6)), requires_grad=True)
            out = sum_(gelu(layer_norm(matmul(Tensor(rng.normal(size=(3, 6))), w))))
            backward(out)
            return out.data, w.grad

        (a, ga), (b, gb) = run(), run()
        assert a == b and np.array_equal(ga, gb)

    def test_concat_gradient(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones((3, 2)), requires_grad=True)
        backward(sum_(concat([a, b], axis=0) * Tensor(np.arange(10.0).reshape(5, 2))))
        np.testing.assert_array_equal(b.grad, np.arange(4.0, 10.0).reshape(3, 2))

    def test_composite_gradients(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(2, 5, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(4, 4)) * 0.5, requires_grad=True)
        k = Tensor(rng.normal(size=3), requires_grad=True)

        def f():
            h = layer_norm(matmul(x, w))
            h = conv1d_same(h.transpose((0, 2, 1)), softmax(k))
            return sum_(gelu(h) * Tensor(rng_fixed)) + sum_(variance(x, axis=1))

        rng_fixed = np.random.default_rng(9).normal(size=(2, 4, 5))
        assert grad_check(f, {"x": x, "w": w, "k": k}).max_rel_err < 1e-6
