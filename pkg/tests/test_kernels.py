import math

import numpy as np
import pytest

from lodempc.kernels import (
    KernelOrderError,
    LodeKernel,
    base_kernel,
    gram_matrix,
    kernel_eval,
    kernel_mixed_derivative,
    matern,
    se,
)
from lodempc.polymat import ONE, DEL, PolyMatrix, operator_parametrization

from .conftest import SPRING_A, SPRING_B
from .oracles import fd_mixed, fd_relative_errors


ORDERS = [(i, j) for i in range(3) for j in range(3)]


class TestBaseKernels:
    def test_se_at_zero_lag(self):
        assert kernel_eval(se(), 0.3, 0.3) == pytest.approx(1.0)

    def test_matern0_is_exponential(self):
        assert kernel_eval(matern(0), 0.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)

    @pytest.mark.parametrize("r", range(0, 8))
    def test_matern_zero_lag_equals_signal_variance(self, r):
        assert kernel_eval(matern(r, 2.5, 0.7), 1.0, 1.0) == pytest.approx(2.5, rel=1e-12)

    def test_matern2_closed_form(self):
        # nu = 5/2: (1 + a + a^2/3) exp(-a), a = sqrt(5) |d| / l
        for d in (0.1, 0.7, 2.3):
            a = math.sqrt(5) * d / 0.8
            ref = 1.3 * (1 + a + a * a / 3) * math.exp(-a)
            assert kernel_eval(matern(2, 1.3, 0.8), d, 0.0) == pytest.approx(ref, rel=1e-12)

    def test_odd_derivative_vanishes_on_diagonal(self):
        assert kernel_mixed_derivative(se(), 1, 0, 0.4, 0.4) == 0.0
        assert kernel_mixed_derivative(matern(2), 2, 1, 0.4, 0.4) == 0.0

    def test_se_first_mixed_on_diagonal(self):
        # d^2/dt dt2 exp(-(t-t2)^2/2) at t = t2 equals 1
        assert kernel_mixed_derivative(se(), 1, 1, 0.2, 0.2) == pytest.approx(1.0)
        assert kernel_mixed_derivative(se(1.0, 0.5), 1, 1, 0.2, 0.2) == pytest.approx(4.0)

    def test_evenness(self, rng):
        d = rng.uniform(-3, 3, 50)
        for spec in (se(1.2, 0.6), matern(3, 0.9, 1.4)):
            k = base_kernel(spec)
            for n in range(5):
                assert np.allclose(k.derivative(n, -d), (-1) ** n * k.derivative(n, d))

    @pytest.mark.parametrize("spec", [se(), se(0.7, 0.4), matern(2), matern(2, 1.7, 0.6), matern(3, 1.0, 1.5)])
    def test_finite_difference_oracle(self, spec, rng):
        assert fd_relative_errors(spec, ORDERS, 100, rng) <= 1e-4

    def test_matern2_22_at_lag_03(self):
        spec = matern(2)
        f = lambda t, t2: float(kernel_eval(spec, t, t2))
        exact = kernel_mixed_derivative(spec, 2, 2, 0.3, 0.0)
        assert fd_mixed(f, 2, 2, 0.3, 0.0, 5e-3) == pytest.approx(exact, rel=1e-4)

    def test_order_beyond_smoothness(self):
        with pytest.raises(KernelOrderError):
            kernel_mixed_derivative(matern(1), 2, 0, 0.0, 1.0)

    def test_matern_approaches_se(self):
        d = np.linspace(-1, 1, 201)
        gaps = [np.abs(kernel_eval(matern(r), d, 0.0) - kernel_eval(se(), d, 0.0)).max() for r in (2, 5, 10, 20, 50)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 5e-3

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            se(-1.0)
        with pytest.raises(ValueError):
            matern(-1)


class TestLodeKernel:
    def test_identity_parametrization_is_base(self, rng):
        k = LodeKernel(PolyMatrix([[ONE]]), [matern(1, 1.4, 0.3)])
        t = rng.uniform(0, 2, 7)
        assert np.allclose(k.gram(t), kernel_eval(matern(1, 1.4, 0.3), t[:, None], t[None, :]))

    def test_derivative_channel_on_diagonal(self):
        k = LodeKernel(PolyMatrix([[ONE], [DEL]]), [se(2.0, 0.5)])
        assert k.block(1, 1, 0.3, 0.3) == pytest.approx(2.0 / 0.25)
        assert k.block(0, 1, 0.3, 0.3) == pytest.approx(0.0)

    def test_cross_blocks_match_mixed_derivatives(self, rng):
        _, P = operator_parametrization(SPRING_A, SPRING_B)
        spec = matern(2, 0.8, 0.9)
        k = LodeKernel(P, [spec])
        t, t2 = 0.37, -0.41
        m = lambda i, j: kernel_mixed_derivative(spec, i, j, t, t2)
        # channel 2 is 0.4 (f'' + f' - f), channel 1 is f'
        expected = 0.4 * (m(1, 2) + m(1, 1) - m(1, 0))
        assert k.block(1, 2, t, t2) == pytest.approx(expected, rel=1e-12)

    def test_gram_single_point(self):
        k = LodeKernel(PolyMatrix([[ONE]]), [se()])
        assert gram_matrix(k, [0.0], [0.0]).shape == (1, 1)

    def test_symmetry_and_psd(self, rng):
        _, P = operator_parametrization(SPRING_A, SPRING_B)
        k = LodeKernel(P, [matern(2, 1.0, 1.0)])
        t = np.linspace(0, 2, 101)
        K = k.gram(t)
        assert K.shape == (303, 303)
        assert np.abs(K - K.T).max() <= 1e-12
        eig = np.linalg.eigvalsh(K + 1e-8 * np.eye(303))
        assert eig.min() > -1e-8 * np.abs(eig).max()
        K10 = k.gram(np.linspace(0, 2, 10)) + 1e-8 * np.eye(30)
        assert np.linalg.eigvalsh(K10).min() > 0

    def test_cross_gram_is_transpose(self, rng):
        _, P = operator_parametrization(SPRING_A, SPRING_B)
        k = LodeKernel(P, [se(0.6, 0.8)])
        a, b = rng.uniform(0, 2, 5), rng.uniform(0, 2, 4)
        assert np.allclose(k.gram(a, b), k.gram(b, a).T, atol=1e-13)

    def test_rejects_insufficient_smoothness(self):
        _, P = operator_parametrization(SPRING_A, SPRING_B)
        with pytest.raises(KernelOrderError):
            LodeKernel(P, [matern(1)])

    def test_wrong_number_of_base_kernels(self):
        with pytest.raises(ValueError):
            LodeKernel(PolyMatrix([[ONE]]), [se(), se()])
