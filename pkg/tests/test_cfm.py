"""Flow-matching tests: finite-difference gradient admission, analytic loss
values, exact Euler recovery, branch additivity, and checkpoint IO."""

from __future__ import annotations

import numpy as np
import pytest

from physparts.cfm import (
    ConstantField,
    DualBranchField,
    LinearField,
    MLPField,
    ToyBatch,
    TrainConfig,
    check_gradient,
    cfm_loss,
    euler_sample,
    gaussian_mixture,
    interpolant,
    load_checkpoint,
    save_checkpoint,
    toy_mixture,
    train,
)
from physparts.errors import Divergence, ShapeMismatch


def make_batch(rng, n=16, dim=3) -> ToyBatch:
    return ToyBatch(rng.standard_normal((n, dim)),
                    rng.standard_normal((n, dim)),
                    rng.random(n))


class TestBatchAndInterpolant:
    def test_shape_validation(self, rng):
        x = rng.standard_normal((4, 3))
        with pytest.raises(ShapeMismatch):
            ToyBatch(x, rng.standard_normal((4, 2)), rng.random(4))
        with pytest.raises(ShapeMismatch):
            ToyBatch(x, x, rng.random(3))
        with pytest.raises(ValueError):
            ToyBatch(x, x, np.array([0.0, 0.5, 1.0, 1.5]))

    def test_endpoints_are_exact(self, rng):
        x0 = rng.standard_normal((8, 4))
        eps = rng.standard_normal((8, 4))
        assert np.array_equal(interpolant(x0, eps, np.zeros(8)), x0)
        assert np.array_equal(interpolant(x0, eps, np.ones(8)), eps)

    def test_dyadic_midpoints(self):
        x0 = np.array([[0.0, 4.0]])
        eps = np.array([[8.0, 0.0]])
        assert np.array_equal(interpolant(x0, eps, np.array([0.25])),
                              np.array([[2.0, 3.0]]))


class TestLossAndGradient:
    def test_zero_field_loss_is_mean_squared_target(self, rng):
        x0 = rng.standard_normal((32, 5))
        eps = rng.standard_normal((32, 5))
        batch = ToyBatch(x0, eps, rng.random(32))
        model = ConstantField(np.zeros(5))
        expected = float((((eps - x0) ** 2).sum(axis=1)).mean())
        assert cfm_loss(model, batch) == pytest.approx(expected, rel=1e-15)

    def test_exact_field_loss_is_zero(self, rng):
        # a single data point's conditional target is constant: eps - x0
        x0 = np.tile([[0.5, -0.25]], (8, 1))
        eps = np.tile([[1.5, 0.75]], (8, 1))
        batch = ToyBatch(x0, eps, rng.random(8))
        model = ConstantField(np.array([1.0, 1.0]))
        assert cfm_loss(model, batch) == 0.0

    def test_dim_mismatch_rejected(self, rng):
        with pytest.raises(ShapeMismatch):
            cfm_loss(ConstantField(np.zeros(4)), make_batch(rng, dim=3))

    @pytest.mark.parametrize("model", [
        LinearField(dim=3, seed=1, init_scale=0.5),
        MLPField(dim=3, hidden=8, seed=2),
        ConstantField(np.array([0.3, -0.2, 0.1])),
    ], ids=["linear", "mlp", "constant"])
    def test_gradcheck_under_1e4(self, model, rng):
        err = check_gradient(model, make_batch(rng, n=12, dim=3))
        assert err < 1e-4

    def test_gradcheck_flags_a_wrong_gradient(self, rng):
        model = LinearField(dim=3, seed=1, init_scale=0.5)
        good = model.gradient

        model.gradient = lambda batch: good(batch) + 0.05
        assert check_gradient(model, make_batch(rng, n=12, dim=3)) > 1e-4


class TestDualBranch:
    def test_loss_is_additive_over_blocks(self, rng):
        f1 = LinearField(dim=2, seed=3, init_scale=0.4)
        f2 = MLPField(dim=3, hidden=8, seed=4)
        dual = DualBranchField(f1, f2)
        assert dual.dim == 5
        batch = make_batch(rng, n=20, dim=5)
        a = ToyBatch(batch.x0[:, :2], batch.eps[:, :2], batch.t)
        b = ToyBatch(batch.x0[:, 2:], batch.eps[:, 2:], batch.t)
        assert cfm_loss(dual, batch) == pytest.approx(
            cfm_loss(f1, a) + cfm_loss(f2, b), rel=1e-12)

    def test_gradient_is_blockwise_concatenation(self, rng):
        f1 = LinearField(dim=2, seed=3, init_scale=0.4)
        f2 = LinearField(dim=2, seed=5, init_scale=0.4)
        dual = DualBranchField(f1, f2)
        batch = make_batch(rng, n=10, dim=4)
        a = ToyBatch(batch.x0[:, :2], batch.eps[:, :2], batch.t)
        b = ToyBatch(batch.x0[:, 2:], batch.eps[:, 2:], batch.t)
        expected = np.concatenate([f1.gradient(a), f2.gradient(b)])
        assert np.array_equal(dual.gradient(batch), expected)

    def test_gradcheck_passes_combined(self, rng):
        dual = DualBranchField(LinearField(dim=2, seed=3, init_scale=0.4),
                               MLPField(dim=2, hidden=6, seed=4))
        assert check_gradient(dual, make_batch(rng, n=8, dim=4)) < 1e-4


class TestTraining:
    def test_linear_field_halves_the_loss_quickly(self):
        model = LinearField(dim=2, seed=0)
        cfg = TrainConfig(steps=400, batch=64, seed=0)
        res = train(model, toy_mixture(4096, seed=0), cfg)
        assert res.trace.shape == (400,)
        assert np.isfinite(res.trace).all()
        assert res.final_eval < 0.5 * res.initial_eval

    def test_deterministic_per_seed(self):
        data = toy_mixture(1024, seed=2)
        cfg = TrainConfig(steps=50, batch=32, seed=7)
        r1 = train(LinearField(dim=2, seed=1), data, cfg)
        r2 = train(LinearField(dim=2, seed=1), data, cfg)
        assert np.array_equal(r1.trace, r2.trace)
        assert r1.final_eval == r2.final_eval

    def test_admission_rejects_a_broken_gradient(self):
        model = LinearField(dim=2, seed=1, init_scale=0.5)
        good = model.gradient
        model.gradient = lambda batch: good(batch) * 0.5
        with pytest.raises(Divergence):
            train(model, toy_mixture(256, seed=0), TrainConfig(steps=10, batch=16))

    def test_nan_parameters_diverge(self):
        model = LinearField(dim=2, seed=1)
        p = model.get_params()
        p[0] = np.nan
        model.set_params(p)
        with pytest.raises(Divergence):
            train(model, toy_mixture(256, seed=0), TrainConfig(steps=10, batch=16))

    def test_data_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            train(LinearField(dim=2), np.zeros((100, 3)), TrainConfig(steps=1))

    def test_default_config(self):
        cfg = TrainConfig()
        assert (cfg.lr, cfg.steps, cfg.batch, cfg.momentum) == (0.05, 2000, 128, 0.9)


class TestEulerSampling:
    def test_one_step_recovers_x0_bit_exactly(self):
        # x0 and eps chosen so eps - x0 is exact in binary
        x0 = np.array([0.5, -0.25])
        eps = np.array([1.5, 0.75])
        model = ConstantField(eps - x0)
        out = euler_sample(model, eps, steps=1)
        assert np.array_equal(out, x0)

    def test_many_dyadic_steps_stay_exact(self):
        model = ConstantField(np.array([1.0]))
        out = euler_sample(model, np.array([2.0]), steps=4)
        assert np.array_equal(out, np.array([1.0]))

    def test_batched_shape_preserved(self, rng):
        model = ConstantField(np.zeros(3))
        eps = rng.standard_normal((5, 3))
        out = euler_sample(model, eps, steps=3)
        assert out.shape == (5, 3)
        assert np.array_equal(out, eps)  # zero field moves nothing

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            euler_sample(ConstantField(np.zeros(2)), np.zeros(2), steps=0)

    def test_trained_field_lands_near_the_data(self):
        data = toy_mixture(4096, seed=0)
        model = MLPField(dim=2, hidden=32, seed=0)
        train(model, data, TrainConfig(steps=600, batch=128, seed=0))
        eps = np.random.default_rng(9).standard_normal((256, 2))
        samples = euler_sample(model, eps, steps=50)
        # mean transport dominates; samples should center near the data mean
        assert np.linalg.norm(samples.mean(axis=0) - data.mean(axis=0)) < 0.5


class TestMixture:
    def test_deterministic_and_bounded(self):
        a = toy_mixture(512, seed=3)
        b = toy_mixture(512, seed=3)
        assert np.array_equal(a, b)
        assert a.shape == (512, 2)
        assert a.min() > 1.0 and a.max() < 5.0  # means ~3 with sigma 0.15

    def test_single_component_collapses_to_a_gaussian(self):
        pts = gaussian_mixture(2000, [(1.0, 1.0)], 0.1, seed=0)
        assert np.abs(pts.mean(axis=0) - 1.0).max() < 0.02


class TestCheckpoints:
    @pytest.mark.parametrize("model", [
        LinearField(dim=3, seed=2, init_scale=0.3),
        MLPField(dim=2, hidden=8, seed=3),
        ConstantField(np.array([0.25, -0.5])),
    ], ids=["linear", "mlp", "constant"])
    def test_round_trip(self, model, tmp_path, rng):
        path = tmp_path / "field.ckpt"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert type(back) is type(model)
        assert back.dim == model.dim
        # params persist as little-endian f32
        expected = model.get_params().astype("<f4").astype(np.float64)
        assert np.array_equal(back.get_params(), expected)
        x = rng.standard_normal((4, model.dim))
        t = rng.random(4)
        assert np.allclose(back.evaluate(x, t), model.evaluate(x, t), atol=1e-6)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(ValueError):
            load_checkpoint(path)
