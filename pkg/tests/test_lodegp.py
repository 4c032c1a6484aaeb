import math
import time

import numpy as np
import pytest

from lodempc.bounds import BoxBounds
from lodempc.kernels import LodeKernel, matern, se
from lodempc.lodegp import (
    Dataset,
    TrainingError,
    build_dataset,
    log_marginal_likelihood,
    posterior,
    train_hyperparameters,
)
from lodempc.polymat import ONE, PolyMatrix, operator_parametrization

from .conftest import SPRING_A, SPRING_B
from .oracles import brute_force_posterior, gaussian_logpdf, ode_residual

SCALAR = PolyMatrix([[ONE]])


def scalar_kernel(spec):
    return LodeKernel(SCALAR, [spec])


def spring_kernel(spec):
    _, P = operator_parametrization(SPRING_A, SPRING_B)
    return LodeKernel(P, [spec])


class TestBuildDataset:
    def test_experiment1_layout(self):
        grid = np.linspace(0, 2, 101)
        box = BoxBounds.from_channels([-1] * 3, [1] * 3, grid.size)
        data = build_dataset(0.0, [0.7, 0.0, 0.0], box, grid)
        assert data.times.size == 101
        assert np.array_equal(data.values[0], [0.7, 0.0, 0.0])
        assert np.all(data.noise[0] == 1e-8)
        assert np.all(data.values[1:] == 0) and np.all(data.noise[1:] == 1.0)

    def test_degenerate_bound_uses_jitter(self):
        grid = np.array([0.0, 1.0])
        box = BoxBounds([-1, 0.3], [1, 0.3])
        data = build_dataset(0.0, [0.0], box, grid)
        assert data.values[1, 0] == 0.3 and data.noise[1, 0] == 1e-8

    def test_initial_point_only(self):
        box = BoxBounds([-1.0], [1.0])
        data = build_dataset(0.0, [0.5], box, [0.0])
        assert data.times.tolist() == [0.0] and data.values.tolist() == [[0.5]]

    def test_infinite_bound_is_unobserved(self):
        grid = np.array([0.0, 1.0])
        box = BoxBounds([-1, -np.inf], [1, 1])
        data = build_dataset(0.0, [0.0], box, grid)
        y, s, mask = data.flat()
        assert mask.tolist() == [True, False] and y.size == 1

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            build_dataset(0.0, [0.0, 0.0], BoxBounds([-1.0], [1.0]), [0.0])


class TestPosterior:
    def test_hand_value(self):
        data = Dataset([0.0], [[1.0]], [[0.1]])
        b = posterior(scalar_kernel(se()), data, [0.5])
        assert b.mean[0] == pytest.approx(math.exp(-0.125) / 1.1, rel=1e-12)
        assert b.mean[0] == pytest.approx(0.8022, abs=1e-4)

    def test_interpolates_noiseless_point(self):
        data = Dataset([0.3], [[0.7]], [[0.0]])
        b = posterior(scalar_kernel(matern(1)), data, [0.3])
        assert b.mean[0] == pytest.approx(0.7, abs=1e-6)
        assert b.cov[0, 0] <= 1e-6

    def test_empty_grid(self):
        b = posterior(scalar_kernel(se()), Dataset([0.0], [[1.0]], [[0.1]]), [])
        assert b.mean.size == 0 and b.cov.shape == (0, 0)

    @pytest.mark.parametrize("n_times", [1, 4, 10])
    def test_brute_force(self, n_times, rng):
        k = spring_kernel(matern(2, 0.8, 0.9))
        t = np.sort(rng.uniform(0, 2, n_times))
        values = rng.normal(size=(n_times, 3))
        noise = rng.uniform(0.05, 1.0, size=(n_times, 3))
        grid = np.linspace(0, 2, 7)
        b = posterior(k, Dataset(t, values, noise), grid)
        y = values.T.ravel()
        m, C = brute_force_posterior(k.gram(t), k.gram(t, grid), k.gram(grid), y, noise.T.ravel())
        assert np.abs(b.mean - m).max() <= 1e-8 * np.abs(m).max()
        assert np.abs(b.cov - C).max() <= 1e-8 * np.abs(C).max()

    def test_variance_never_grows(self, rng):
        k = spring_kernel(se(1.0, 0.7))
        grid = np.linspace(0, 2, 41)
        box = BoxBounds.from_channels([-1] * 3, [1] * 3, grid.size)
        b = posterior(k, build_dataset(0.0, [0.5, 0.1, 0.0], box, grid), grid)
        assert np.all(b.variance() <= np.diag(k.gram(grid)) + 1e-10)

    def test_mean_satisfies_ode(self):
        k = spring_kernel(matern(2, 0.5, 1.9))
        grid = np.linspace(0, 2, 21)
        box = BoxBounds.from_channels([-1] * 3, [1] * 3, grid.size)
        fine = np.linspace(0, 2, 401)
        b = posterior(k, build_dataset(0.0, [0.7, 0.0, 0.0], box, grid), fine)
        res = ode_residual(b.mean.reshape(3, -1), SPRING_A, [[0], [2.5]], fine[1] - fine[0])
        assert np.abs(res).max() <= 1e-2


class TestEvidence:
    def test_single_point(self):
        lml = log_marginal_likelihood(scalar_kernel(se()), Dataset([0.0], [[0.0]], [[0.0]]))
        assert lml == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-6)

    def test_duplicate_points(self):
        data = Dataset([0.2, 0.2], [[0.3], [-0.4]], [[1.0], [1.0]])
        lml = log_marginal_likelihood(scalar_kernel(se()), data)
        ref = gaussian_logpdf(np.array([0.3, -0.4]), np.zeros(2), np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert lml == pytest.approx(ref, rel=1e-12)

    def test_decreases_with_magnitude(self):
        k = scalar_kernel(se())
        vals = [log_marginal_likelihood(k, Dataset([0.0, 1.0], [[a], [a]], [[0.1], [0.1]])) for a in (0, 1, 2, 4)]
        assert all(x > y for x, y in zip(vals, vals[1:]))


class TestTraining:
    def test_recovers_lengthscale(self):
        rng = np.random.default_rng(7)
        t = np.linspace(0, 10, 120)
        K = LodeKernel(SCALAR, [se(1.0, 0.5)]).gram(t)
        y = np.linalg.cholesky(K + 1e-6 * np.eye(t.size)) @ rng.standard_normal(t.size)
        data = Dataset(t, y[:, None], np.full((t.size, 1), 1e-4))
        (spec,) = train_hyperparameters(scalar_kernel(se(1.0, 2.0)), data)
        assert 0.25 <= spec.lengthscale <= 1.0

    def test_zero_budget_returns_initial(self):
        k = scalar_kernel(se(1.3, 0.4))
        data = Dataset([0.0, 1.0], [[1.0], [0.0]], [[0.1], [0.1]])
        assert train_hyperparameters(k, data, max_iter=0) == [se(1.3, 0.4)]

    def test_never_worse_than_start(self, rng):
        k = spring_kernel(matern(2))
        grid = np.linspace(0, 2, 21)
        data = build_dataset(0.0, [0.7, 0, 0], BoxBounds.from_channels([-1] * 3, [1] * 3, 21), grid)
        trained = train_hyperparameters(k, data, max_iter=30)
        assert log_marginal_likelihood(k.with_base(trained), data) >= log_marginal_likelihood(k, data)

    def test_nonfinite_start_raises(self):
        data = Dataset([0.0], [[np.nan]], [[0.1]])
        with pytest.raises(TrainingError):
            train_hyperparameters(scalar_kernel(se()), data)

    def test_experiment1_runtime(self, experiment1):
        problem = experiment1.to_problem()
        data = problem.dataset(problem.grid[0], np.r_[problem.x0, problem.u0], problem.grid)
        start = time.perf_counter()
        train_hyperparameters(problem.initial_kernel(), data)
        assert time.perf_counter() - start < 60
