import numpy as np
import pytest

from camscene.ops import ActivationKind, ConvSpec, OpError, activate, conv2d
from camscene.qops import (add_quantized, build_activation_lut,
                           conv2d_quantized, depthwise_conv2d_quantized,
                           fully_connected_quantized, global_avg_pool_quantized,
                           quantize_multiplier, rounding_rshift)
from camscene.tensor import (QuantParams, Tensor, dequantize_array,
                             params_from_range, per_channel_weight_params,
                             quantize_array, tensor_from)


class TestRequantMachinery:
    def test_multiplier_identity(self):
        m_q, shift = quantize_multiplier(1.0)
        x = np.array([-37, 0, 91, 12345], dtype=np.int64)
        assert np.array_equal(rounding_rshift(x * m_q, shift), x)

    @pytest.mark.parametrize("m", [0.0003, 0.024, 0.5, 0.9999, 1.5, 17.0])
    def test_multiplier_accuracy(self, m):
        m_q, shift = quantize_multiplier(m)
        approx = m_q * 2.0 ** (-shift)
        assert approx == pytest.approx(m, rel=2e-9)

    def test_multiplier_rejects_nonpositive(self):
        with pytest.raises(OpError):
            quantize_multiplier(0.0)

    def test_rounding_rshift_half_to_even(self):
        x = np.array([5, 6, 7, -5, -6, -7, 2, -2], dtype=np.int64)
        # shift 2: value/4 = 1.25, 1.5, 1.75, -1.25, -1.5, -1.75, 0.5, -0.5
        out = rounding_rshift(x, 2)
        assert list(out) == [1, 2, 2, -1, -2, -2, 0, 0]

    def test_rounding_rshift_zero_shift(self):
        x = np.array([3, -3], dtype=np.int64)
        assert np.array_equal(rounding_rshift(x, 0), x)


def _quantize_io(x):
    in_q = params_from_range(float(x.min()), float(x.max()))
    codes = quantize_array(x, in_q)
    codes = codes.reshape((1,) * (4 - codes.ndim) + codes.shape)
    return Tensor(codes, in_q), in_q


def _quantize_weights(w, axis):
    wq_params = per_channel_weight_params(w, axis)
    return Tensor(quantize_array(w, wq_params), wq_params), wq_params


def _quantize_bias(b, in_q, wq_params):
    return np.rint(b / (in_q.scalar_scale() * wq_params.scale)).astype(np.int32)


class TestConv2dQuantized:
    def test_zero_input_at_zero_point(self, rng):
        in_q = QuantParams(0.02, 3)
        xq = Tensor(np.full((1, 4, 4, 2), 3, dtype=np.int8), in_q)
        w = rng.standard_normal((3, 3, 2, 4)).astype(np.float32)
        wq, wq_params = _quantize_weights(w, 3)
        bias = np.zeros(4, dtype=np.int32)
        out_q = QuantParams(0.05, -7)
        out = conv2d_quantized(xq, wq, bias, ConvSpec(3, 3), out_q)
        assert np.all(out.data == -7)

    def test_degenerate_scales_match_float_exactly(self):
        # scale 1.0, zp 0 everywhere: integer arithmetic == float conv
        x = np.array([[[[3.0], [5.0]], [[-2.0], [7.0]]]], dtype=np.float32)
        w = np.array([[[[2.0]]]], dtype=np.float32)
        in_q = QuantParams(1.0, 0)
        w_q = QuantParams([1.0], 0, axis=3)
        out_q = QuantParams(1.0, 0)
        xq = Tensor(x.astype(np.int8), in_q)
        wq = Tensor(w.astype(np.int8), w_q)
        out = conv2d_quantized(xq, wq, np.zeros(1, np.int32), ConvSpec(1, 1), out_q)
        ref = conv2d(Tensor(x), Tensor(w), None, ConvSpec(1, 1))
        assert np.array_equal(out.data.astype(np.float32), ref.data)

    def test_random_conv_close_to_float(self, rng):
        x = rng.uniform(-1, 1, (1, 8, 8, 3)).astype(np.float32)
        w = rng.standard_normal((3, 3, 3, 6)).astype(np.float32) * 0.4
        b = rng.standard_normal(6).astype(np.float32) * 0.1
        spec = ConvSpec(3, 3, stride=2, activation=ActivationKind.RELU)
        ref = conv2d(Tensor(x), Tensor(w), b, spec)
        xq, in_q = _quantize_io(x)
        wq, wq_params = _quantize_weights(w, 3)
        out_q = params_from_range(float(ref.data.min()), float(ref.data.max()))
        bias = _quantize_bias(b, in_q, wq_params)
        out = conv2d_quantized(xq, wq, bias, spec, out_q)
        deq = dequantize_array(out.data, out_q)
        assert float(np.mean(np.abs(deq - ref.data))) <= 2 * out_q.scalar_scale()

    def test_bit_deterministic_across_runs(self, rng):
        x = rng.uniform(-1, 1, (1, 6, 6, 4)).astype(np.float32)
        w = rng.standard_normal((3, 3, 4, 4)).astype(np.float32)
        xq, in_q = _quantize_io(x)
        wq, wq_params = _quantize_weights(w, 3)
        out_q = QuantParams(0.1, 0)
        bias = np.zeros(4, dtype=np.int32)
        outs = [conv2d_quantized(xq, wq, bias, ConvSpec(3, 3), out_q).data
                for _ in range(5)]
        assert all(np.array_equal(outs[0], o) for o in outs[1:])


class TestDepthwiseQuantized:
    def test_random_close_to_float(self, rng):
        from camscene.ops import depthwise_conv2d
        x = rng.uniform(-1, 1, (1, 7, 7, 5)).astype(np.float32)
        w = rng.standard_normal((3, 3, 5, 1)).astype(np.float32) * 0.5
        b = rng.standard_normal(5).astype(np.float32) * 0.1
        spec = ConvSpec(3, 3, stride=2, activation=ActivationKind.RELU6)
        ref = depthwise_conv2d(Tensor(x), Tensor(w), b, spec)
        xq, in_q = _quantize_io(x)
        wq, wq_params = _quantize_weights(w, 2)
        out_q = params_from_range(float(ref.data.min()), float(ref.data.max()))
        bias = _quantize_bias(b, in_q, wq_params)
        out = depthwise_conv2d_quantized(xq, wq, bias, spec, out_q)
        deq = dequantize_array(out.data, out_q)
        assert float(np.mean(np.abs(deq - ref.data))) <= 2 * out_q.scalar_scale()


class TestFullyConnectedQuantized:
    def test_sigmoid_lut_path(self, rng):
        from camscene.ops import fully_connected
        x = rng.uniform(-1, 1, (1, 16)).astype(np.float32)
        w = rng.standard_normal((16, 8)).astype(np.float32) * 0.5
        b = rng.standard_normal(8).astype(np.float32) * 0.1
        pre = fully_connected(tensor_from(x), tensor_from(w), b, ActivationKind.NONE)
        ref = fully_connected(tensor_from(x), tensor_from(w), b, ActivationKind.SIGMOID)
        xq, in_q = _quantize_io(x)
        wq, wq_params = _quantize_weights(w.reshape(1, 1, 16, 8), 3)
        preact_q = params_from_range(float(pre.data.min()), float(pre.data.max()))
        out_q = params_from_range(0.0, 1.0)
        bias = _quantize_bias(b, in_q, wq_params)
        out = fully_connected_quantized(xq, wq, bias, ActivationKind.SIGMOID,
                                        out_q, preact_q)
        deq = dequantize_array(out.data, out_q)
        # sigmoid output error: preact rounding through the worst-case slope 1/4
        tol = preact_q.scalar_scale() / 8 + out_q.scalar_scale() + 1e-4
        assert float(np.max(np.abs(deq - ref.data))) <= tol

    def test_lut_requires_preact_params(self, rng):
        xq = Tensor(np.zeros((1, 1, 1, 4), dtype=np.int8), QuantParams(0.1, 0))
        wq, _ = _quantize_weights(rng.standard_normal((1, 1, 4, 2)).astype(np.float32), 3)
        with pytest.raises(OpError):
            fully_connected_quantized(xq, wq, np.zeros(2, np.int32),
                                      ActivationKind.TANH, QuantParams(0.01, 0))

    def test_missing_quant_metadata_rejected(self, rng):
        x = tensor_from(rng.uniform(-1, 1, (1, 1, 1, 4)).astype(np.float32))
        wq, _ = _quantize_weights(rng.standard_normal((1, 1, 4, 2)).astype(np.float32), 3)
        with pytest.raises(OpError):
            fully_connected_quantized(x, wq, np.zeros(2, np.int32),
                                      ActivationKind.NONE, QuantParams(0.01, 0))


class TestActivationLut:
    @pytest.mark.parametrize("kind", [ActivationKind.SIGMOID, ActivationKind.TANH,
                                      ActivationKind.SELU])
    def test_lut_matches_float_activation(self, kind):
        preact = params_from_range(-4.0, 4.0)
        lo, hi = (0.0, 1.0) if kind == ActivationKind.SIGMOID else (-4.0, 4.0)
        out = params_from_range(lo, hi)
        lut = build_activation_lut(kind, preact, out)
        codes = np.arange(-128, 128, dtype=np.int8)
        x = dequantize_array(codes, preact)
        expected = quantize_array(activate(x, kind), out)
        assert np.array_equal(lut, expected)


class TestPoolingAndAdd:
    def test_avg_pool_preserves_params_and_rounds_half_even(self):
        q = QuantParams(0.04, -3)
        x = Tensor(np.array([1, 2, 2, 1], dtype=np.int8).reshape(1, 2, 2, 1), q)
        out = global_avg_pool_quantized(x)
        assert out.quant == q
        assert out.data.reshape(-1)[0] == 2  # 1.5 rounds to even 2
        x2 = Tensor(np.array([0, 1, 1, 0], dtype=np.int8).reshape(1, 2, 2, 1), q)
        assert global_avg_pool_quantized(x2).data.reshape(-1)[0] == 0  # 0.5 -> 0

    def test_add_rescales_inputs(self):
        a_q = QuantParams(0.1, 0)
        b_q = QuantParams(0.05, 10)
        out_q = QuantParams(0.2, -5)
        a = Tensor(np.full((1, 2, 2, 1), 20, dtype=np.int8), a_q)   # 2.0
        b = Tensor(np.full((1, 2, 2, 1), 30, dtype=np.int8), b_q)   # 1.0
        out = add_quantized(a, b, out_q)
        deq = dequantize_array(out.data, out_q)
        assert np.allclose(deq, 3.0, atol=out_q.scalar_scale())
