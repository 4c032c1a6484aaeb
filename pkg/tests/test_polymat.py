from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lodempc.polymat import (
    DEL,
    ONE,
    ZERO,
    NoFreeParametersError,
    PolyMatrix,
    Polynomial,
    SNFOverflowError,
    operator_parametrization,
    parametrization,
    smith_normal_form,
    system_to_operator_matrix,
)

from .conftest import INTEGRATOR_A, INTEGRATOR_B, SPRING_A, SPRING_B


def P(*coeffs):
    return Polynomial(coeffs)


def assert_snf(H, snf):
    Q, D, V = snf
    assert Q @ H @ V == D
    assert D.is_diagonal()
    diag = D.diagonal()
    nonzero = [d for d in diag if not d.is_zero]
    # zeros trail, nonzeros are monic and form a divisibility chain
    assert diag[: len(nonzero)] == nonzero
    for d in nonzero:
        assert d.lead == 1
    for a, b in zip(nonzero, nonzero[1:]):
        assert a.divides(b)
    for U in (Q, V):
        det = U.det()
        assert det.is_constant and not det.is_zero


class TestPolynomial:
    def test_arithmetic(self):
        p = P(1, 2)  # 1 + 2∂
        q = P(-1, 0, 1)
        assert p * q == P(-1, -2, 1, 2)
        assert p + q == P(0, 2, 1)
        assert (q - q).is_zero
        assert P(0, 0, 0) == ZERO

    def test_divmod(self):
        a = P(-1, 0, 1)
        quo, rem = divmod(a, P(1, 1))
        assert quo == P(-1, 1) and rem.is_zero
        quo, rem = divmod(P(1, 0, 1), P(0, 2))
        assert quo * P(0, 2) + rem == P(1, 0, 1)
        assert rem.degree < 1
        with pytest.raises(ZeroDivisionError):
            divmod(a, ZERO)

    def test_fractions_exact(self):
        p = P("1/3", "2/3")
        assert (p * 3) == P(1, 2)
        assert P(Fraction(5, 2)).lead == Fraction(5, 2)

    def test_float_allclose(self):
        assert P(0.1 + 0.2).allclose(P(0.3))
        assert not P(0.3).allclose(P(0.3 + 1e-9))

    def test_monic_and_derivative(self):
        assert P(2, 4).monic() == P("1/2", 1)
        assert P(1, 1, 1).derivative() == P(1, 2)


class TestOperatorMatrix:
    def test_integrator(self):
        H = system_to_operator_matrix(INTEGRATOR_A, INTEGRATOR_B)
        assert H == PolyMatrix([[-DEL, ONE, ZERO], [ZERO, -DEL, ONE]])

    def test_spring_mass(self):
        H = system_to_operator_matrix(SPRING_A, SPRING_B)
        assert H == PolyMatrix([[-DEL, ONE, ZERO], [ONE, P(-1, -1), P("5/2")]])

    def test_scalar(self):
        assert system_to_operator_matrix([[0]], [[1]]) == PolyMatrix([[-DEL, ONE]])

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            system_to_operator_matrix([[0, 1]], [[1]])
        with pytest.raises(ValueError):
            system_to_operator_matrix([[0]], [[1], [1]])


class TestSmithNormalForm:
    def test_identity(self):
        I2 = PolyMatrix.identity(2)
        assert smith_normal_form(I2) == (I2, I2, I2)

    @pytest.mark.parametrize("A,B", [(INTEGRATOR_A, INTEGRATOR_B), (SPRING_A, SPRING_B)])
    def test_experiment_systems(self, A, B):
        H = system_to_operator_matrix(A, B)
        snf = smith_normal_form(H)
        assert_snf(H, snf)
        assert snf.D.diagonal() == [ONE, ONE]

    def test_nontrivial_invariant_factors(self):
        H = PolyMatrix([[P(0, 1), ZERO], [ZERO, P(1, 1)]])
        snf = smith_normal_form(H)
        assert_snf(H, snf)
        assert snf.D.diagonal() == [ONE, P(0, 1, 1)]

    def test_overflow_guard(self):
        H = PolyMatrix([[P(3, 7, 11), P(5, 13)], [P(17, 19), P(23, 29, 31)]])
        with pytest.raises(SNFOverflowError):
            smith_normal_form(H, max_bits=2)

    def test_idempotent_in_shape(self):
        H = PolyMatrix([[P(2, 1), P(0, 3)], [P(1), P(0, 0, 1)], [P(0, 1), P(4)]])
        D = smith_normal_form(H).D
        D2 = smith_normal_form(D).D
        for a, b in zip(D.diagonal(), D2.diagonal()):
            assert (a.is_zero and b.is_zero) or a.monic() == b.monic()


coeff = st.fractions(min_value=-4, max_value=4, max_denominator=4)
poly = st.lists(coeff, min_size=0, max_size=3).map(Polynomial)


@st.composite
def poly_matrices(draw):
    rows = draw(st.integers(1, 3))
    cols = draw(st.integers(1, 4))
    return PolyMatrix([[draw(poly) for _ in range(cols)] for _ in range(rows)])


@settings(max_examples=200, deadline=None, derandomize=True)
@given(poly_matrices())
def test_random_snf_properties(H):
    assert_snf(H, smith_normal_form(H))


class TestParametrization:
    def test_integrator(self):
        H, Pm = operator_parametrization(INTEGRATOR_A, INTEGRATOR_B)
        assert Pm == PolyMatrix([[ONE], [DEL], [P(0, 0, 1)]])
        assert (H @ Pm).is_zero()

    def test_spring_mass(self):
        H, Pm = operator_parametrization(SPRING_A, SPRING_B)
        expected = PolyMatrix([[ONE], [DEL], [P(-1, 1, 1) * Fraction(2, 5)]])
        assert Pm == expected
        assert (H @ Pm).is_zero()

    def test_scalar(self):
        H, Pm = operator_parametrization([[0]], [[1]])
        assert Pm == PolyMatrix([[ONE], [DEL]])
        assert (H @ Pm).is_zero()

    def test_two_inputs(self):
        H, Pm = operator_parametrization([[0, 1], [0, 0]], [[1, 0], [0, 1]])
        assert Pm.shape == (4, 2)
        assert (H @ Pm).is_zero()

    def test_square_full_rank_has_no_free_columns(self):
        with pytest.raises(NoFreeParametersError):
            parametrization(smith_normal_form(PolyMatrix([[P(0, 1)]])))

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(poly_matrices())
    def test_random_kernel_columns(self, H):
        snf = smith_normal_form(H)
        try:
            Pm = parametrization(snf)
        except NoFreeParametersError:
            return
        assert (H @ Pm).is_zero()
