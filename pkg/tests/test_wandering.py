import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from service.bidisc import SymVector
from service.exceptions import CapExceeded, EmptySpan, PremiseViolated
from service.frame import orthonormalize
from service.wandering import (
    TrigPoly,
    coeff_criterion,
    constant,
    criterion_sums,
    cross_condition,
    is_wandering_span,
    is_wandering_vector,
    orthonormal_system_check,
    radial_constancy,
    radial_sum,
    shift_gram,
)


def random_vector(seed: int, deg: int) -> SymVector:
    rng = np.random.default_rng(seed)
    return SymVector(rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1))


def series_constant(q: SymVector) -> float:
    return radial_sum(q).coefficient(0).real


@pytest.fixture
def tilted():
    """(e_0 + e_1) / sqrt(2)"""
    return SymVector(np.array([1.0, 1.0]) / math.sqrt(2))


class TestTrigPoly:
    """TrigPoly に関するテスト"""

    def test_even_length_rejected(self):
        """係数の長さが偶数の場合 ValueError になることを確認"""
        with pytest.raises(ValueError):
            TrigPoly(np.zeros(2))

    def test_evaluate(self):
        """w + 1/w が w = 1 で 2、w = i で 0 になることを確認"""
        poly = TrigPoly([1.0, 0.0, 1.0])
        np.testing.assert_allclose(poly.evaluate([1.0, 1j]), [2.0, 0.0], atol=1e-15)
        assert poly.is_real()

    def test_coefficient_out_of_range(self):
        """次数を超える周波数の係数が 0 であることを確認"""
        poly = constant(3.0)
        assert poly.coefficient(0) == 3.0
        assert poly.coefficient(5) == 0

    def test_subtract_different_orders(self):
        """次数の異なる Laurent 多項式の差を確認"""
        difference = TrigPoly([1.0, 2.0, 3.0]) - constant(2.0)
        np.testing.assert_allclose(difference.coeffs, [1.0, 0.0, 3.0])


class TestRadialSum:
    """動径和に関するテスト"""

    def test_e0(self):
        """e_0 の動径和が定数 1 であることを確認"""
        series = radial_sum(SymVector.basis(0))
        assert series.coefficient(0) == pytest.approx(1.0)
        assert radial_constancy(SymVector.basis(0)).passed

    @pytest.mark.parametrize('n', [1, 2, 5])
    def test_monomials(self, n):
        """e_n の動径和が定数 1 であることを確認"""
        series = radial_sum(SymVector.basis(n))
        np.testing.assert_allclose(series.coeffs, constant(1.0, n).coeffs, atol=1e-15)
        assert radial_constancy(SymVector.basis(n)).passed

    def test_tilted(self, tilted):
        """(e_0 + e_1)/sqrt(2) で c_1 = 1/(2 sqrt(2)) となり不合格になることを確認"""
        series = radial_sum(tilted)
        assert series.coefficient(1) == pytest.approx(1 / (2 * math.sqrt(2)))
        report = radial_constancy(tilted)
        assert not report.passed
        assert report.worst_index == 1
        assert report.worst_value == pytest.approx(0.3535533906)

    @given(seed=st.integers(0, 2 ** 32 - 1), deg=st.integers(0, 20))
    @settings(max_examples=64, deadline=None)
    def test_positive_on_circle(self, seed, deg):
        """単位円上で実数かつ非負であることを確認"""
        q = random_vector(seed, deg)
        series = radial_sum(q)
        values = series.evaluate(np.exp(2j * np.pi * np.arange(64) / 64))
        scale = q.norm() ** 2
        assert series.is_real(1e-12 * scale)
        assert np.all(values.real >= -1e-12 * scale)
        assert np.max(np.abs(values.imag)) <= 1e-12 * scale

    @given(seed=st.integers(0, 2 ** 32 - 1), deg=st.integers(0, 20))
    @settings(max_examples=50, deadline=None)
    def test_constant_term_is_norm(self, seed, deg):
        """c_0 = ||q||^2 であることを確認"""
        q = random_vector(seed, deg)
        assert series_constant(q) == pytest.approx(q.norm() ** 2, rel=1e-12)

    @given(seed=st.integers(0, 2 ** 32 - 1), deg=st.integers(0, 12))
    @settings(max_examples=30, deadline=None)
    def test_scale_covariance(self, seed, deg):
        """radial_sum(lambda q) = |lambda|^2 radial_sum(q) であることを確認"""
        q = random_vector(seed, deg)
        factor = 2.0 - 3.0j
        scaled = radial_sum(q * factor).coeffs
        np.testing.assert_allclose(scaled, abs(factor) ** 2 * radial_sum(q).coeffs, atol=1e-10 * q.norm() ** 2)


class TestCoeffCriterion:
    """係数条件に関するテスト"""

    def test_tilted_corrected_weight(self, tilted):
        """重み j+1 では k = 1 で不合格になることを確認"""
        report = coeff_criterion(tilted, 'corrected_j_plus_1')
        assert not report.passed
        assert report.worst_index == 1
        assert report.worst_value == pytest.approx(1 / (2 * math.sqrt(2)))

    def test_tilted_weight_j(self, tilted):
        """重み j では同じベクトルが合格してしまうことを確認"""
        assert coeff_criterion(tilted, 'paper_j').passed

    @pytest.mark.parametrize('n', [0, 1, 7])
    def test_monomials_are_wandering(self, n):
        """e_n が遊走ベクトルであることを確認"""
        assert is_wandering_vector(SymVector.basis(n)).passed

    def test_relative_tolerance(self):
        """大きさを変えても e_1 の判定が変わらないことを確認"""
        big = SymVector.basis(1) * 1e8
        assert is_wandering_vector(big).passed
        assert is_wandering_vector(big).tol == pytest.approx(1e-10 * 1e16)

    def test_unknown_weight(self):
        """不明な重みで ValueError になることを確認"""
        with pytest.raises(ValueError):
            criterion_sums(SymVector.basis(1), 'other')

    @given(seed=st.integers(0, 2 ** 32 - 1), deg=st.integers(1, 20))
    @settings(max_examples=200, deadline=None)
    def test_three_forms_agree(self, seed, deg):
        """c_{-k} = s_k = g_k が k = 1..deg で 1e-12 の相対誤差で成り立つことを確認"""
        q = random_vector(seed, deg)
        series = radial_sum(q)
        sums = criterion_sums(q)
        gram = shift_gram(q, q, deg)
        scale = q.norm() ** 2
        for k in range(1, deg + 1):
            assert abs(series.coefficient(-k) - sums[k - 1]) <= 1e-12 * scale
            assert abs(gram[k - 1] - sums[k - 1]) <= 1e-12 * scale

    @given(seed=st.integers(0, 2 ** 32 - 1), deg=st.integers(1, 12))
    @settings(max_examples=50, deadline=None)
    def test_agrees_with_radial_constancy(self, seed, deg):
        """係数条件と動径和の定数性の判定が一致することを確認"""
        q = random_vector(seed, deg)
        assert is_wandering_vector(q).passed == radial_constancy(q).passed


class TestShiftGram:
    """T_z シフトの Gram 値に関するテスト"""

    def test_e0_e2(self):
        """(e_0, e_2) で g_1 = 0, g_2 = 1/sqrt(3) であることを確認"""
        values = shift_gram(SymVector.basis(0), SymVector.basis(2), 2)
        assert abs(values[0]) == 0
        assert values[1] == pytest.approx(1 / math.sqrt(3))

    def test_monomial_vanishes(self):
        """(e_1, e_1) ですべての g_k が 0 であることを確認"""
        values = shift_gram(SymVector.basis(1), SymVector.basis(1), 3)
        np.testing.assert_allclose(values, 0.0, atol=1e-15)

    def test_cap_exceeded(self):
        """kmax + deg が cap を超える場合 CapExceeded になることを確認"""
        with pytest.raises(CapExceeded):
            shift_gram(SymVector.basis(2), SymVector.basis(2), 3, cap=4)


class TestCrossCondition:
    """二元条件に関するテスト"""

    def test_e0_e1(self):
        """cross(e_0, e_1) が周波数 -1 で 1/sqrt(2) となり不合格になることを確認"""
        report = cross_condition(SymVector.basis(0), SymVector.basis(1))
        assert not report.passed
        assert report.worst_index == -1
        assert report.worst_value == pytest.approx(0.7071067812)

    def test_e1_e0(self):
        """逆順の cross(e_1, e_0) は合格することを確認"""
        assert cross_condition(SymVector.basis(1), SymVector.basis(0)).passed


class TestWanderingSpan:
    """is_wandering_span に関するテスト"""

    def test_single_monomial(self):
        """{e_1} が遊走部分空間であることを確認"""
        assert is_wandering_span([SymVector.basis(1)]).passed

    def test_blames_pair(self):
        """{e_0, e_1} ではペア (0, 1) の二元条件が原因として報告されることを確認"""
        report = is_wandering_span([SymVector.basis(0), SymVector.basis(1)])
        assert not report.passed
        assert report.detail == "cross_condition(0, 1)"
        assert report.worst_index == -1
        assert report.worst_value == pytest.approx(1 / math.sqrt(2))

    def test_blames_vector(self, tilted):
        """単独で不合格のベクトルは係数条件として報告されることを確認"""
        report = is_wandering_span([tilted])
        assert not report.passed
        assert report.detail == "coeff_criterion(0)"

    def test_linear_dependence(self):
        """一次従属な入力で PremiseViolated になることを確認"""
        with pytest.raises(PremiseViolated) as exc_info:
            is_wandering_span([SymVector.basis(1), SymVector.basis(1) * 2.0])
        assert exc_info.value.check == 'linear_independence'

    def test_empty(self):
        """空の入力で EmptySpan になることを確認"""
        with pytest.raises(EmptySpan):
            is_wandering_span([])


class TestOrthonormalSystem:
    """正規直交系の恒等式に関するテスト"""

    def test_single_monomial(self):
        """{e_1} が恒等式を満たすことを確認"""
        report = orthonormal_system_check(orthonormalize([SymVector.basis(1)]))
        assert report.passed

    def test_e0_e1(self):
        """{e_0, e_1} ではペア (0, 1) で恒等式が崩れることを確認"""
        frame = orthonormalize([SymVector.basis(0), SymVector.basis(1)])
        report = orthonormal_system_check(frame)
        assert not report.passed
        assert report.detail == "pair(0, 1)"
        assert report.worst_index == -1
        assert report.worst_value == pytest.approx(1 / math.sqrt(2))

    def test_tilted_diagonal(self, tilted):
        """(e_0 + e_1)/sqrt(2) では対角ペアで崩れることを確認"""
        report = orthonormal_system_check(orthonormalize([tilted]))
        assert not report.passed
        assert report.detail == "pair(0, 0)"
        assert report.worst_value == pytest.approx(1 / (2 * math.sqrt(2)))
