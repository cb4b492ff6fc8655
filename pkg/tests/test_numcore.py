"""Tensor tape, attention, normalization and optimizer."""

import math

import numpy as np
import pytest

from data_processor import make_batch
from errors import DegenerateMaskError, DimensionError, DomainError, NumericError, TapeError
from numcore import (
    OptimizerState, Tensor, adam_step, backward, embedding, layer_norm, log_softmax,
    lr_schedule, nll_loss, no_grad, parameter, scaled_dot_attention, softmax,
)
from training.loss import joint_loss

from conftest import copy_reverse_samples, tiny_model


def numeric_gradient(loss_fn, tensor, index, h=1e-6):
    original = tensor.data[index]
    tensor.data[index] = original + h
    with no_grad():
        plus = loss_fn().item()
    tensor.data[index] = original - h
    with no_grad():
        minus = loss_fn().item()
    tensor.data[index] = original
    return (plus - minus) / (2 * h)


def gradient_close(analytic, numeric, tolerance):
    # relative error, with an absolute floor for gradients near zero
    return abs(analytic - numeric) <= tolerance * max(abs(analytic) + abs(numeric), 1e-3)


class TestTape:
    def test_product_rule(self):
        a = parameter(np.array([2.0, -3.0]))
        b = parameter(np.array([4.0, 5.0]))
        backward((a * b).sum())
        np.testing.assert_array_equal(a.grad, [4.0, 5.0])
        np.testing.assert_array_equal(b.grad, [2.0, -3.0])

    def test_backward_accumulates_until_zero_grad(self):
        a = parameter(np.array([1.0, 2.0]))
        backward((a * a).sum())
        backward((a * a).sum())
        np.testing.assert_array_equal(a.grad, [4.0, 8.0])
        a.zero_grad()
        assert a.grad is None

    def test_broadcast_gradient_is_summed(self):
        a = parameter(np.ones((3, 2)))
        bias = parameter(np.zeros(2))
        backward((a + bias).sum())
        np.testing.assert_array_equal(bias.grad, [3.0, 3.0])

    def test_non_scalar_loss_rejected(self):
        a = parameter(np.ones(3))
        with pytest.raises(TapeError):
            backward(a * 2.0)

    def test_loss_without_parameters_rejected(self):
        with pytest.raises(TapeError):
            backward(Tensor(np.ones(1)).sum())

    def test_no_grad_records_nothing(self):
        a = parameter(np.ones(2))
        with no_grad():
            out = (a * 3.0).sum()
        assert not out.requires_grad

    def test_item_needs_one_value(self):
        with pytest.raises(DimensionError):
            Tensor(np.ones(2)).item()


class TestPrimitiveGradients:
    @pytest.mark.parametrize("shape", [(3, 5), (2, 3, 4)])
    def test_layer_norm(self, shape):
        rng = np.random.default_rng(0)
        x = parameter(rng.normal(size=shape))
        gain = parameter(rng.normal(size=shape[-1]))
        bias = parameter(rng.normal(size=shape[-1]))
        weights = rng.normal(size=shape)

        def loss():
            return (layer_norm(x, gain, bias) * weights).sum()

        backward(loss())
        for tensor in (x, gain, bias):
            for index in np.ndindex(tensor.shape):
                assert gradient_close(tensor.grad[index], numeric_gradient(loss, tensor, index), 1e-5)

    def test_attention(self):
        rng = np.random.default_rng(1)
        q, k, v = (parameter(rng.normal(size=(2, 3, 4))) for _ in range(3))
        mask = np.tril(np.ones((3, 3), dtype=bool))
        weights = rng.normal(size=(2, 3, 4))

        def loss():
            return (scaled_dot_attention(q, k, v, mask) * weights).sum()

        backward(loss())
        for tensor in (q, k, v):
            for index in np.ndindex(tensor.shape):
                assert gradient_close(tensor.grad[index], numeric_gradient(loss, tensor, index), 1e-5)

    def test_embedding_and_log_softmax(self):
        rng = np.random.default_rng(2)
        table = parameter(rng.normal(size=(6, 3)))
        ids = np.array([[1, 4, 1], [5, 0, 2]])

        def loss():
            return (log_softmax(embedding(table, ids), axis=-1) * np.arange(3.0)).sum()

        backward(loss())
        for index in np.ndindex(table.shape):
            assert gradient_close(table.grad[index], numeric_gradient(loss, table, index), 1e-5)


class TestAttention:
    def test_rows_are_convex_combinations(self):
        rng = np.random.default_rng(3)
        q, k = rng.normal(size=(4, 8)), rng.normal(size=(5, 8))
        v = np.eye(5)
        out = scaled_dot_attention(q, k, v).data
        np.testing.assert_allclose(out.sum(axis=-1), 1.0)
        assert (out >= 0).all()

    def test_masked_keys_get_zero_weight(self):
        rng = np.random.default_rng(4)
        q, k = rng.normal(size=(2, 4)), rng.normal(size=(3, 4))
        mask = np.array([[True, False, False], [True, True, False]])
        out = scaled_dot_attention(q, k, np.eye(3), mask).data
        np.testing.assert_array_equal(out[0], [1.0, 0.0, 0.0])
        assert out[1, 2] == 0.0

    def test_degenerate_mask(self):
        with pytest.raises(DegenerateMaskError):
            scaled_dot_attention(np.ones((2, 4)), np.ones((3, 4)), np.ones((3, 4)),
                                 np.array([[True, False, False], [False, False, False]]))

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            scaled_dot_attention(np.ones((2, 4)), np.ones((3, 5)), np.ones((3, 4)))

    def test_hand_computed_weights(self):
        out = scaled_dot_attention(np.array([[1.0, 0.0]]), np.eye(2), np.array([[1.0], [2.0]])).data
        w = math.exp(1 / math.sqrt(2))
        w = w / (w + 1.0)
        assert out[0, 0] == pytest.approx(w * 1.0 + (1 - w) * 2.0, abs=1e-12)
        assert out[0, 0] == pytest.approx(1.3302, abs=1e-4)

    def test_permuting_keys_with_values(self):
        rng = np.random.default_rng(6)
        q, k, v = rng.normal(size=(3, 4)), rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
        order = rng.permutation(5)
        np.testing.assert_allclose(scaled_dot_attention(q, k[order], v[order]).data,
                                   scaled_dot_attention(q, k, v).data, atol=1e-12)


class TestNormalization:
    def test_layer_norm_output_statistics(self):
        x = np.random.default_rng(5).normal(3.0, 2.0, size=(4, 16))
        out = layer_norm(x, np.ones(16), np.zeros(16), eps=0.0).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-10)

    def test_constant_row_without_eps(self):
        with pytest.raises(NumericError):
            layer_norm(np.ones((1, 4)), np.ones(4), np.zeros(4), eps=0.0)

    def test_affine_after_normalization(self):
        out = layer_norm(np.array([[0.0, 2.0]]), np.array([2.0, 2.0]), np.array([1.0, 1.0]), eps=0.0).data
        np.testing.assert_allclose(out, [[-1.0, 3.0]], atol=1e-12)

    def test_normalized_row_is_unchanged(self):
        out = layer_norm(np.array([[1.0, -1.0]]), np.ones(2), np.zeros(2), eps=0.0).data
        np.testing.assert_allclose(out, [[1.0, -1.0]], atol=1e-12)

    def test_softmax_sums_to_one(self):
        probs = softmax(Tensor(np.array([[1000.0, 1000.0, -1000.0]]))).data
        np.testing.assert_allclose(probs, [[0.5, 0.5, 0.0]])


class TestLoss:
    def test_nll_without_smoothing(self):
        log_probs = log_softmax(Tensor(np.log(np.array([[0.5, 0.25, 0.25]]))))
        loss = nll_loss(log_probs, np.array([1]), np.array([1.0]))
        assert loss.item() == pytest.approx(math.log(4.0))

    def test_label_smoothing_spreads_mass(self):
        log_probs = log_softmax(Tensor(np.log(np.array([[0.5, 0.25, 0.25]]))))
        loss = nll_loss(log_probs, np.array([0]), np.array([1.0]), label_smoothing=0.3)
        expected = -(0.8 * math.log(0.5) + 0.1 * math.log(0.25) + 0.1 * math.log(0.25))
        assert loss.item() == pytest.approx(expected)

    def test_zero_weight_drops_position(self):
        log_probs = log_softmax(Tensor(np.zeros((2, 4))))
        loss = nll_loss(log_probs, np.array([1, 2]), np.array([1.0, 0.0]))
        assert loss.item() == pytest.approx(math.log(4.0))


class TestOptimizer:
    def test_first_adam_step_moves_by_learning_rate(self):
        p = parameter(np.array([1.0]))
        state = OptimizerState(peak_lr=0.1, mode="fixed")
        lr = adam_step([p], [np.array([0.5])], state)
        assert lr == 0.1
        assert p.data[0] == pytest.approx(0.9)
        assert state.step == 1

    def test_missing_gradient_counts_as_zero(self):
        p = parameter(np.array([1.0]))
        adam_step([p], [None], OptimizerState(peak_lr=0.1, mode="fixed"))
        assert p.data[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("gradient", [0.5, -2.0])
    def test_two_steps_with_constant_gradient(self, gradient):
        p = parameter(np.array([1.0]))
        state = OptimizerState(peak_lr=0.1, mode="fixed")
        m = v = 0.0
        expected = 1.0
        for step in (1, 2):
            adam_step([p], [np.array([gradient])], state)
            m = 0.9 * m + 0.1 * gradient
            v = 0.98 * v + 0.02 * gradient ** 2
            expected -= 0.1 * (m / (1 - 0.9 ** step)) / (math.sqrt(v / (1 - 0.98 ** step)) + 1e-9)
        assert p.data[0] == pytest.approx(expected, abs=1e-12)
        # bias correction makes every step lr * sign(g) for a constant gradient
        assert p.data[0] == pytest.approx(1.0 - 0.2 * np.sign(gradient), abs=1e-7)
        np.testing.assert_allclose(state.first_moment[0], [0.19 * gradient])

    def test_zero_gradient_is_identity(self):
        p = parameter(np.array([1.0, -3.0]))
        state = OptimizerState(peak_lr=0.1, mode="fixed")
        for _ in range(3):
            adam_step([p], [np.zeros(2)], state)
        np.testing.assert_array_equal(p.data, [1.0, -3.0])
        np.testing.assert_array_equal(state.second_moment[0], [0.0, 0.0])

    def test_non_finite_gradient(self):
        with pytest.raises(NumericError):
            adam_step([parameter(np.ones(1))], [np.array([np.nan])], OptimizerState())

    def test_gradient_shape_mismatch(self):
        with pytest.raises(DimensionError):
            adam_step([parameter(np.ones(2))], [np.ones(3)], OptimizerState())

    def test_warmup_then_inverse_sqrt(self):
        state = OptimizerState(peak_lr=1e-3, warmup_steps=100)
        assert lr_schedule(50, state) == pytest.approx(5e-4)
        assert lr_schedule(100, state) == pytest.approx(1e-3)
        assert lr_schedule(400, state) == pytest.approx(5e-4)

    def test_schedule_domain(self):
        with pytest.raises(DomainError):
            lr_schedule(0, OptimizerState())

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            OptimizerState(mode="cosine")


class TestModelGradients:
    @pytest.mark.parametrize("coupling", ["dual", "independent"])
    def test_joint_loss_matches_finite_differences(self, coupling):
        model = tiny_model(coupling=coupling)
        batch = make_batch(copy_reverse_samples(count=3, length=3))
        rng = np.random.default_rng(7)

        def loss():
            return joint_loss(model, batch, label_smoothing=0.1)

        model.zero_grad()
        backward(loss())
        for name, tensor in model.named_parameters():
            assert tensor.grad is not None, name
            flat = [tuple(int(i) for i in np.unravel_index(k, tensor.shape))
                    for k in rng.choice(tensor.size, size=min(3, tensor.size), replace=False)]
            for index in flat:
                numeric = numeric_gradient(loss, tensor, index)
                analytic = tensor.grad[index]
                assert gradient_close(analytic, numeric, 1e-4), (name, index, analytic, numeric)
