import numpy as np
import pytest

from encluster.autoencoder import (TrainConfig, decode, encode,
                                   encode_batch, export_params_text, gradient,
                                   init_params, load_checkpoint,
                                   reconstruction_error, save_checkpoint,
                                   train_sgd)
from encluster.errors import DivergedError, ShapeError, ValidationError

SMALL_DIMS = (4, 3, 2, 3, 4)


def forward_oracle(params, x):
    """Independent re-implementation with explicit loops."""
    acts = {
        "affine": lambda v: v,
        "tanh": np.tanh,
        "relu": lambda v: np.where(v > 0, v, 0.0),
    }
    act = acts[params.activation]
    h = np.array(x, dtype=float)
    outputs = [h]
    for w, b in zip(params.weights, params.biases):
        z = np.zeros(w.shape[0])
        for r in range(w.shape[0]):
            acc = b[r]
            for c in range(w.shape[1]):
                acc += w[r, c] * h[c]
            z[r] = acc
        h = act(z)
        outputs.append(h)
    return outputs


def loss_of(params, x):
    h = np.asarray(x, dtype=float)
    return reconstruction_error(x, decode(params, encode(params, x)))


def numerical_gradient(params, x, step=1e-6):
    """Central finite differences over every weight and bias entry."""
    gws, gbs = [], []
    for arrays, grads in ((params.weights, gws), (params.biases, gbs)):
        for arr in arrays:
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = loss_of(params, x)
                flat[i] = orig - step
                down = loss_of(params, x)
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * step)
            grads.append(g)
    return gws, gbs


def max_rel_error(analytic, numeric, floor=0.02):
    """Worst relative deviation; the denominator floor keeps components too
    small for central differences to resolve (fd noise ~1e-9 absolute) from
    dominating."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestInit:
    def test_deterministic_per_seed(self):
        a = init_params(SMALL_DIMS, seed=42, activation="tanh")
        b = init_params(SMALL_DIMS, seed=42, activation="tanh")
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)

    def test_default_topology_shapes(self):
        p = init_params(seed=0)
        assert [w.shape for w in p.weights] == [
            (100, 200), (50, 100), (25, 50), (50, 25), (100, 50), (200, 100)]
        assert [b.shape for b in p.biases] == [
            (100,), (50,), (25,), (50,), (100,), (200,)]
        assert p.code_width == 25

    @pytest.mark.parametrize("seed", [0, 7, 991])
    def test_entries_within_unit_interval(self, seed):
        p = init_params(SMALL_DIMS, seed=seed)
        for arr in (*p.weights, *p.biases):
            assert np.all(arr >= -1.0) and np.all(arr <= 1.0)

    def test_fan_in_scale_bounds(self):
        p = init_params((9, 4, 2, 4, 9), seed=3, init_scale="fan_in")
        for w in p.weights:
            bound = 1.0 / np.sqrt(w.shape[1])
            assert np.all(np.abs(w) <= bound)
            assert np.all(np.abs(w) <= 1.0)

    def test_rejects_bad_topologies(self):
        with pytest.raises(ValidationError):
            init_params((4, 3, 2, 4), seed=0)  # even layer count
        with pytest.raises(ValidationError):
            init_params((4, 3, 2, 3, 5), seed=0)  # asymmetric
        with pytest.raises(ValidationError):
            init_params((), seed=0)
        with pytest.raises(ValidationError):
            init_params(SMALL_DIMS, seed=0, activation="sigmoid")
        with pytest.raises(ValidationError):
            init_params(SMALL_DIMS, seed=0, init_scale="he")


class TestForward:
    def test_zero_params_zero_code(self):
        p = init_params(SMALL_DIMS, seed=0)
        for w in p.weights:
            w[:] = 0.0
        for b in p.biases:
            b[:] = 0.0
        assert np.array_equal(encode(p, np.ones(4)), np.zeros(2))
        assert np.array_equal(decode(p, np.ones(2)), np.zeros(4))

    def test_bias_only_affine_propagation(self):
        p = init_params(SMALL_DIMS, seed=1, activation="affine")
        for w in p.weights:
            w[:] = 0.0
        # with zero weights the code is just the last encoder bias
        assert np.array_equal(encode(p, np.full(4, 3.7)), p.biases[1])

    @pytest.mark.parametrize("activation", ["affine", "tanh", "relu"])
    def test_matches_loop_oracle(self, rng, activation):
        for _ in range(10):
            p = init_params(SMALL_DIMS, seed=int(rng.integers(1 << 30)),
                            activation=activation)
            x = rng.uniform(-2, 2, 4)
            outputs = forward_oracle(p, x)
            assert np.allclose(encode(p, x), outputs[2], atol=1e-12)
            assert np.allclose(decode(p, outputs[2]), outputs[4], atol=1e-12)

    def test_encode_batch_matches_encode(self, rng):
        p = init_params(SMALL_DIMS, seed=5, activation="tanh")
        X = rng.uniform(-1, 1, (7, 4))
        batch = encode_batch(p, X)
        for i in range(7):
            assert np.allclose(batch[i], encode(p, X[i]), atol=1e-12)

    def test_shape_errors(self):
        p = init_params(SMALL_DIMS, seed=0)
        with pytest.raises(ShapeError):
            encode(p, np.zeros(5))
        with pytest.raises(ShapeError):
            decode(p, np.zeros(3))
        with pytest.raises(ShapeError):
            encode_batch(p, np.zeros((3, 5)))

    def test_affine_network_is_linear_plus_offset(self, rng):
        p = init_params(SMALL_DIMS, seed=11, activation="affine")
        offset = encode(p, np.zeros(4))
        f = lambda v: encode(p, v) - offset
        x, y = rng.uniform(-3, 3, 4), rng.uniform(-3, 3, 4)
        assert np.allclose(f(x + y), f(x) + f(y), atol=1e-9)
        assert np.allclose(f(2.5 * x), 2.5 * f(x), atol=1e-9)


class TestReconstructionError:
    def test_zero_for_identical(self):
        assert reconstruction_error([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit_residual(self):
        assert reconstruction_error([1.0, 0.0], [0.0, 0.0]) == 1.0

    def test_sum_of_squares(self):
        assert reconstruction_error([1.0, 2.0], [0.0, 0.0]) == 5.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            reconstruction_error([1.0], [1.0, 2.0])


class TestGradient:
    def test_zero_input_zero_bias_affine_is_stationary(self, rng):
        p = init_params(SMALL_DIMS, seed=2, activation="affine")
        for b in p.biases:
            b[:] = 0.0
        gw, gb = gradient(p, np.zeros(4))
        for g in (*gw, *gb):
            assert np.all(g == 0.0)

    @pytest.mark.parametrize("activation", ["affine", "tanh", "relu"])
    def test_matches_central_differences(self, rng, activation):
        for _ in range(10):
            p = init_params(SMALL_DIMS, seed=int(rng.integers(1 << 30)),
                            activation=activation)
            x = rng.uniform(0.0, 1.0, 4)
            gw, gb = gradient(p, x)
            nw, nb = numerical_gradient(p, x)
            assert max_rel_error(gw + gb, nw + nb) < 1e-6

    def test_last_layer_bias_gradient_hand_algebra(self):
        # one-transition-per-side net: E = ||act(W2 act(W1 x + b1) + b2) - x||^2
        p = init_params((2, 1, 2), seed=3, activation="tanh")
        x = np.array([0.3, 0.8])
        code = np.tanh(p.weights[0] @ x + p.biases[0])
        z2 = p.weights[1] @ code + p.biases[1]
        x_hat = np.tanh(z2)
        expected = 2.0 * (x_hat - x) * (1.0 - np.tanh(z2) ** 2)
        _, gb = gradient(p, x)
        assert np.allclose(gb[1], expected, atol=1e-12)

    def test_affine_output_bias_gradient_is_plain_residual(self):
        p = init_params((2, 1, 2), seed=4, activation="affine")
        x = np.array([0.5, -0.25])
        x_hat = decode(p, encode(p, x))
        _, gb = gradient(p, x)
        assert np.allclose(gb[1], 2.0 * (x_hat - x), atol=1e-12)


class TestTrain:
    def test_zero_dataset_zero_params_stays_optimal(self):
        p = init_params(SMALL_DIMS, seed=0)
        for w in p.weights:
            w[:] = 0.0
        for b in p.biases:
            b[:] = 0.0
        trained, curve = train_sgd(p, np.zeros((3, 4)),
                                   TrainConfig(epochs=5, stop_tolerance=0.0))
        assert curve == [0.0] * 5
        for w in trained.weights:
            assert np.all(w == 0.0)

    def test_toy_synthetic_convergence(self):
        from encluster import synthgen
        from encluster.encounter import (apply_normalization, fit_normalization,
                                         to_feature_vector)
        encs = synthgen.generate_dataset(
            {"intersection": 5, "opposite_direction": 5, "bypass": 5,
             "same_road": 5}, base_seed=11)
        raw = np.stack([to_feature_vector(e) for e in encs])
        data = apply_normalization(raw, fit_normalization(raw))
        p = init_params(seed=1, activation="tanh", init_scale="fan_in")
        trained, curve = train_sgd(p, data, TrainConfig(
            learning_rate=0.01, epochs=200, seed=2, stop_tolerance=0.0))
        assert curve[-1] < 0.10 * curve[0]
        assert all(np.isfinite(curve))

    def test_training_reduces_toy_error_vs_untrained(self, rng):
        data = rng.uniform(0, 1, (10, 4))
        p = init_params(SMALL_DIMS, seed=6, activation="tanh",
                        init_scale="fan_in")
        trained, _ = train_sgd(p, data, TrainConfig(epochs=100, seed=1,
                                                    stop_tolerance=0.0))
        before = np.mean([loss_of(p, x) for x in data])
        after = np.mean([loss_of(trained, x) for x in data])
        assert after < before

    def test_divergence_raises_with_epoch(self, rng):
        data = rng.uniform(0, 1, (16, 4))
        p = init_params(SMALL_DIMS, seed=8, activation="affine")
        with pytest.raises(DivergedError) as err:
            train_sgd(p, data, TrainConfig(learning_rate=10.0, epochs=50, seed=1))
        assert err.value.epoch is not None
        assert "epoch" in str(err.value)

    def test_deterministic_training(self, rng):
        data = rng.uniform(0, 1, (12, 4))
        p = init_params(SMALL_DIMS, seed=9, activation="tanh",
                        init_scale="fan_in")
        t1, c1 = train_sgd(p, data, TrainConfig(epochs=30, seed=3))
        t2, c2 = train_sgd(p, data, TrainConfig(epochs=30, seed=3))
        assert c1 == c2
        for w1, w2 in zip(t1.weights, t2.weights):
            assert np.array_equal(w1, w2)

    def test_input_params_not_mutated(self, rng):
        data = rng.uniform(0, 1, (5, 4))
        p = init_params(SMALL_DIMS, seed=10, init_scale="fan_in")
        snapshot = [w.copy() for w in p.weights]
        train_sgd(p, data, TrainConfig(epochs=3, seed=1))
        for w, snap in zip(p.weights, snapshot):
            assert np.array_equal(w, snap)

    def test_early_stop_on_plateau(self):
        p = init_params(SMALL_DIMS, seed=0)
        for w in p.weights:
            w[:] = 0.0
        for b in p.biases:
            b[:] = 0.0
        _, curve = train_sgd(p, np.zeros((3, 4)),
                             TrainConfig(epochs=100, stop_tolerance=1e-5))
        assert len(curve) == 2  # stops after two identical epoch means

    def test_validation(self):
        p = init_params(SMALL_DIMS, seed=0)
        with pytest.raises(ValidationError):
            train_sgd(p, np.zeros((0, 4)), TrainConfig())
        with pytest.raises(ShapeError):
            train_sgd(p, np.zeros((3, 5)), TrainConfig())
        with pytest.raises(ValidationError):
            train_sgd(p, np.zeros((3, 4)), TrainConfig(learning_rate=-1.0))


class TestCheckpoint:
    def test_roundtrip_is_byte_identical(self, tmp_path):
        p = init_params((6, 4, 2, 4, 6), seed=77, activation="relu")
        p1 = tmp_path / "m1.aec"
        p2 = tmp_path / "m2.aec"
        save_checkpoint(p, p1)
        loaded = load_checkpoint(p1)
        assert loaded.layer_dims == p.layer_dims
        assert loaded.activation == "relu"
        for wa, wb in zip(loaded.weights, p.weights):
            assert np.array_equal(wa, wb)
        save_checkpoint(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_text_export(self, tmp_path):
        p = init_params(SMALL_DIMS, seed=1)
        out = tmp_path / "m.txt"
        export_params_text(p, out)
        lines = out.read_text().splitlines()
        n_values = sum(w.size for w in p.weights) + sum(b.size for b in p.biases)
        assert sum(1 for ln in lines if not ln.startswith("#")) == n_values
        assert lines[0] == "# activation affine"

    def test_rejects_garbage(self, tmp_path):
        bad = tmp_path / "bad.aec"
        bad.write_bytes(b"not a checkpoint")
        with pytest.raises(ShapeError):
            load_checkpoint(bad)
