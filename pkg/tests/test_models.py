import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dragfl import models
from dragfl.data import gen_gaussian_mixture
from dragfl.errors import ConfigError, DimensionError, EmptyInputError
from dragfl.models import Batch, Example, ModelSpec

LOGISTIC = ModelSpec("logistic", input_dim=4, num_classes=3)
MLP = ModelSpec("mlp", input_dim=4, num_classes=3, hidden_units=8)


def random_batch(rng, n=12, dim=4, k=3):
    return Batch(rng.standard_normal((n, dim)), rng.integers(0, k, size=n))


def scalar_loss(spec, theta, batch):
    """Cross-entropy with explicit loops, logistic only."""
    d, k = spec.input_dim, spec.num_classes
    w = [[theta[i * k + j] for j in range(k)] for i in range(d)]
    b = theta[d * k:]
    total = 0.0
    for x, y in zip(batch.features, batch.labels):
        logits = [sum(x[i] * w[i][j] for i in range(d)) + b[j] for j in range(k)]
        top = max(logits)
        log_z = top + math.log(sum(math.exp(z - top) for z in logits))
        total += log_z - logits[y]
    return total / len(batch)


class TestModelSpec:
    def test_param_dims(self):
        assert LOGISTIC.param_dim == 15
        assert MLP.param_dim == 67

    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError) as e:
            ModelSpec("cnn", 4, 3)
        assert e.value.field == "model.kind"

    def test_mlp_needs_hidden_units(self):
        with pytest.raises(ConfigError):
            ModelSpec("mlp", 4, 3)


class TestInitParams:
    def test_deterministic(self):
        assert_array_equal(models.init_params(MLP, 3), models.init_params(MLP, 3))

    def test_dimension_and_range(self):
        theta = models.init_params(LOGISTIC, 0)
        assert theta.shape == (15,)
        assert np.all(np.abs(theta) <= 1 / math.sqrt(4))

    def test_seeds_differ(self):
        assert not np.array_equal(models.init_params(LOGISTIC, 0), models.init_params(LOGISTIC, 1))


class TestLoss:
    def test_zero_params_give_log_k(self, rng):
        for spec in (LOGISTIC, MLP):
            theta = np.zeros(spec.param_dim)
            assert models.loss(spec, theta, random_batch(rng)) == pytest.approx(math.log(3), abs=1e-12)

    def test_confident_correct_prediction(self):
        spec = ModelSpec("logistic", input_dim=1, num_classes=2)
        theta = np.array([0.0, 0.0, -400.0, 400.0])
        batch = [Example(np.array([1.0]), 1)]
        assert models.loss(spec, theta, batch) == pytest.approx(0.0, abs=1e-12)

    def test_matches_scalar_reference(self, rng):
        theta = rng.standard_normal(LOGISTIC.param_dim)
        batch = random_batch(rng)
        assert models.loss(LOGISTIC, theta, batch) == pytest.approx(scalar_loss(LOGISTIC, theta, batch), rel=1e-10)

    def test_empty_batch(self):
        with pytest.raises(EmptyInputError):
            models.loss(LOGISTIC, np.zeros(15), [])

    def test_wrong_dimension(self, rng):
        with pytest.raises(DimensionError):
            models.loss(LOGISTIC, np.zeros(14), random_batch(rng))

    def test_nonnegative(self, rng):
        for _ in range(10):
            theta = rng.standard_normal(MLP.param_dim) * 3
            assert models.loss(MLP, theta, random_batch(rng)) >= 0.0


class TestGrad:
    def test_bias_block_vanishes_on_symmetric_batch(self):
        spec = ModelSpec("logistic", input_dim=2, num_classes=2)
        x = np.array([[1.0, 2.0], [-1.0, -2.0]])
        g = models.grad(spec, np.zeros(spec.param_dim), Batch(x, np.array([0, 1])))
        assert_allclose(g[4:], 0.0, atol=1e-15)

    def test_union_is_mean_of_halves(self, rng):
        theta = rng.standard_normal(MLP.param_dim)
        a, b = random_batch(rng), random_batch(rng)
        both = Batch(np.vstack([a.features, b.features]), np.concatenate([a.labels, b.labels]))
        expected = (models.grad(MLP, theta, a) + models.grad(MLP, theta, b)) / 2
        assert_allclose(models.grad(MLP, theta, both), expected, rtol=1e-10, atol=1e-14)

    def test_singleton_batch_is_per_example_gradient(self, rng):
        theta = rng.standard_normal(LOGISTIC.param_dim)
        ex = Example(rng.standard_normal(4), 2)
        assert_allclose(models.grad(LOGISTIC, theta, [ex]),
                        models.grad(LOGISTIC, theta, Batch(ex.features[None, :], np.array([2]))))


class TestFiniteDifferenceCheck:
    def test_logistic_random_instances(self, rng):
        for _ in range(20):
            theta = rng.standard_normal(LOGISTIC.param_dim)
            assert models.fd_gradient_check(LOGISTIC, theta, random_batch(rng)) < 1e-5

    def test_mlp_random_instances(self, rng):
        for _ in range(20):
            theta = rng.standard_normal(MLP.param_dim)
            assert models.fd_gradient_check(MLP, theta, random_batch(rng)) < 1e-4

    def test_logistic_at_zero(self, rng):
        assert models.fd_gradient_check(LOGISTIC, np.zeros(15), random_batch(rng)) < 1e-6

    def test_rejects_nonpositive_step(self, rng):
        with pytest.raises(ValueError):
            models.fd_gradient_check(LOGISTIC, np.zeros(15), random_batch(rng), h=0.0)


class TestAccuracy:
    def test_ties_predict_class_zero(self, rng):
        batch = random_batch(rng)
        assert_array_equal(models.predict(MLP, np.zeros(MLP.param_dim), batch), 0)
        assert models.accuracy(LOGISTIC, np.zeros(15), batch) == pytest.approx(np.mean(batch.labels == 0))

    def test_positive_rescaling_invariant(self, rng):
        theta = rng.standard_normal(LOGISTIC.param_dim)
        batch = random_batch(rng, n=50)
        assert models.accuracy(LOGISTIC, theta, batch) == models.accuracy(LOGISTIC, 3.7 * theta, batch)

    def test_separable_mixture_is_fitted(self):
        ds = gen_gaussian_mixture(K=2, per_class=100, dim=2, separation=10.0, seed=4)
        spec = ModelSpec("logistic", input_dim=2, num_classes=2)
        theta = np.zeros(spec.param_dim)
        for _ in range(2000):
            theta = theta - 0.02 * models.grad(spec, theta, ds)
        assert models.accuracy(spec, theta, ds) > 0.99

    def test_empty_dataset(self):
        with pytest.raises(EmptyInputError):
            models.accuracy(LOGISTIC, np.zeros(15), [])
