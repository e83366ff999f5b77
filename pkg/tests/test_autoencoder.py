from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beyondwords import autoencoder as ae
from beyondwords.autoencoder import (
    AutoencoderParams, Layer, TrainingConfig, TrainingReport, decode, encode, init_autoencoder,
    loss_and_gradients, mse_loss, select_best_ratio, train,
)
from tests.oracles import finite_difference_grads, forward_layers, loop_mse, max_relative_error


def full_loss(params, E):
    return loss_and_gradients(params, E)[0]


class TestInit:
    def test_shapes_half(self):
        m = init_autoencoder(8, Fraction(1, 2), seed=0)
        assert m.latent_dim == 4
        assert [l.shape for l in m.encoder_layers] == [(8, 6), (6, 4)]
        assert [l.shape for l in m.decoder_layers] == [(4, 6), (6, 8)]

    def test_shapes_third(self):
        m = init_autoencoder(9, "1/3", seed=0)
        assert m.latent_dim == 3
        assert [l.shape for l in m.encoder_layers] == [(9, 6), (6, 3)]

    def test_deterministic(self):
        a, b = init_autoencoder(10, "1/4", 5), init_autoencoder(10, "1/4", 5)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weight, lb.weight)
            assert np.array_equal(la.bias, lb.bias)

    def test_biases_zero_and_glorot_bound(self):
        m = init_autoencoder(20, "1/2", 1)
        for layer in m.layers:
            fan_in, fan_out = layer.shape
            assert np.all(layer.bias == 0)
            assert np.max(np.abs(layer.weight)) <= np.sqrt(6 / (fan_in + fan_out))

    def test_ratio_too_small(self):
        with pytest.raises(ValueError):
            init_autoencoder(2, "1/4", 0)


class TestForward:
    def test_zero_params_give_zero(self):
        m = init_autoencoder(8, "1/2", 0)
        for layer in m.layers:
            layer.weight[:] = 0
            layer.bias[:] = 0
        E = np.random.default_rng(0).normal(size=(5, 8))
        assert np.all(encode(m, E) == 0)
        assert np.all(decode(m, encode(m, E)) == 0)

    def test_identity_single_layer(self):
        eye = Layer(np.eye(4), np.zeros(4), "identity")
        m = AutoencoderParams(4, 4, [eye], [eye.copy()], seed=0, ratio=None)
        E = np.random.default_rng(1).normal(size=(3, 4))
        assert np.array_equal(encode(m, E), E)
        assert np.array_equal(decode(m, E), E)

    def test_matches_straight_line_oracle(self):
        m = init_autoencoder(8, "1/2", 3)
        E = np.ones((2, 8))
        Z = encode(m, E)
        np.testing.assert_allclose(Z, forward_layers(m.encoder_layers, E), rtol=0, atol=1e-12)
        np.testing.assert_allclose(decode(m, Z), forward_layers(m.decoder_layers, Z), rtol=0, atol=1e-12)

    def test_rejects_bad_width(self):
        m = init_autoencoder(8, "1/2", 0)
        with pytest.raises(ValueError):
            encode(m, np.ones((2, 7)))
        with pytest.raises(ValueError):
            encode(m, np.full((2, 8), np.nan))

    @given(st.integers(4, 12), st.sampled_from(["1/2", "1/3", "1/4"]), st.integers(1, 6))
    @settings(max_examples=30, deadline=None)
    def test_round_trip_shape(self, d, ratio, n):
        if ae.latent_size(d, ratio) < 1:
            return
        m = init_autoencoder(d, ratio, 0)
        E = np.random.default_rng(d).normal(size=(n, d))
        assert decode(m, encode(m, E)).shape == E.shape


class TestLoss:
    def test_zero(self):
        assert mse_loss([[1, 2, 3]], [[1, 2, 3]]) == 0

    def test_hand_value(self):
        assert mse_loss([[0, 0]], [[3, 4]]) == 12.5

    def test_loop_oracle(self):
        rng = np.random.default_rng(7)
        A, B = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
        assert abs(mse_loss(A, B) - loop_mse(A, B)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    m = init_autoencoder(6, "1/2", 4)
    for layer in m.layers:
        layer.bias[:] = rng.normal(scale=0.1, size=layer.bias.shape)
    E = rng.normal(size=(5, 6))
    _, grads = loss_and_gradients(m, E)
    numeric = finite_difference_grads(m, E, full_loss)
    for (dW, db), (nW, nb) in zip(grads, numeric):
        assert max_relative_error(dW, nW) < 1e-4
        assert max_relative_error(db, nb) < 1e-4


class TestTraining:
    def test_constant_rows_drive_loss_down(self):
        E = np.tile(np.linspace(-1, 1, 8), (16, 1))
        cfg = TrainingConfig(epochs=300, batch_size=16, learning_rate=0.05, ratios=("1/2",))
        report, models = train(E, cfg)
        curve = report.curves["1/2"]["train"]
        initial = full_loss(init_autoencoder(8, "1/2", 0), E)
        assert curve[-1] < 1e-3 * initial

    def test_zero_epochs(self):
        E = np.random.default_rng(0).normal(size=(10, 8))
        report, models = train(E, TrainingConfig(epochs=0, ratios=("1/2",)))
        assert report.curves["1/2"] == {"train": [], "val": []}
        fresh = init_autoencoder(8, "1/2", 0)
        for a, b in zip(models[Fraction(1, 2)].layers, fresh.layers):
            assert np.array_equal(a.weight, b.weight)

    def test_deterministic(self):
        E = np.random.default_rng(2).normal(size=(30, 8))
        cfg = TrainingConfig(epochs=5, batch_size=8)
        assert train(E, cfg)[0].to_dict() == train(E, cfg)[0].to_dict()

    def test_small_lr_loss_non_increasing(self):
        E = np.random.default_rng(3).normal(size=(8, 8))
        cfg = TrainingConfig(epochs=10, batch_size=8, learning_rate=1e-3, ratios=("1/2",))
        curve = train(E, cfg)[0].curves["1/2"]["train"]
        assert all(b <= a for a, b in zip(curve, curve[1:]))

    def test_divergence_detected(self):
        E = np.random.default_rng(4).normal(scale=1e3, size=(20, 8))
        with pytest.raises(ae.TrainingDiverged):
            train(E, TrainingConfig(epochs=50, learning_rate=10.0, ratios=("1/2",)))

    def test_selected_ratio_in_config(self):
        E = np.random.default_rng(5).normal(size=(20, 8))
        cfg = TrainingConfig(epochs=3, ratios=("1/2", "1/4"))
        report, _ = train(E, cfg)
        assert report.selected_ratio in cfg.ratios

    def test_params_save_load_round_trip(self, tmp_path):
        m = init_autoencoder(8, "1/2", 0)
        m.save(tmp_path / "m")
        back = AutoencoderParams.load(tmp_path / "m")
        for a, b in zip(m.layers, back.layers):
            np.testing.assert_array_equal(a.weight.astype(np.float32), b.weight)
            assert a.activation == b.activation

    def test_needs_four_by_four(self):
        with pytest.raises(ValueError):
            train(np.zeros((3, 8)), TrainingConfig())


class TestSelectBestRatio:
    def test_argmin(self):
        r = TrainingReport(final_val_loss={"1/2": 0.10, "1/3": 0.05, "1/4": 0.20})
        assert select_best_ratio(r) == Fraction(1, 3)

    def test_single(self):
        assert select_best_ratio(TrainingReport(final_val_loss={"1/2": 1.0})) == Fraction(1, 2)

    def test_tie_goes_to_smaller_ratio(self):
        r = TrainingReport(final_val_loss={"1/2": 0.1, "1/4": 0.1})
        assert select_best_ratio(r) == Fraction(1, 4)

    def test_empty(self):
        with pytest.raises(ValueError):
            select_best_ratio(TrainingReport())
