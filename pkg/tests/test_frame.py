import math

import numpy as np
import pytest

from service.bidisc import SymVector
from service.exceptions import CapExceeded, EmptySpan
from service.frame import Frame, contains, orthonormalize, orthonormalize_matrix


@pytest.fixture
def e0_frame():
    return orthonormalize([SymVector.basis(0)])


class TestOrthonormalize:
    """orthonormalize に関するテスト"""

    def test_duplicate(self):
        """[e_0, e_0] がランク 1 になることを確認"""
        frame = orthonormalize([SymVector.basis(0), SymVector.basis(0)])
        assert frame.rank == 1
        assert frame.source_count == 2
        np.testing.assert_allclose(frame.vectors[0].coords, [1.0])

    def test_two_by_two(self):
        """[e_0 + e_1, e_0 - e_1] がランク 2 で Gram 行列が単位行列になることを確認"""
        e0, e1 = SymVector.basis(0, 1), SymVector.basis(1)
        frame = orthonormalize([e0 + e1, e0 - e1])
        assert frame.rank == 2
        assert frame.gram_defect() <= 1e-10

    def test_normalization(self):
        """[p_1] が e_1 になることを確認"""
        p1 = SymVector([0.0, math.sqrt(2)])
        frame = orthonormalize([p1])
        np.testing.assert_allclose(frame.vectors[0].coords, [0.0, 1.0], atol=1e-15)

    def test_deterministic_order(self):
        """入力順に処理され、先頭ベクトルの向きが保たれることを確認"""
        first = SymVector([1.0, 1.0, 0.0])
        frame = orthonormalize([first, SymVector.basis(2), SymVector.basis(0, 2)])
        np.testing.assert_allclose(frame.vectors[0].coords, np.array([1.0, 1.0, 0.0]) / math.sqrt(2))
        assert frame.rank == 3

    def test_cap_pads_vectors(self):
        """cap を指定するとすべてのベクトルがその次数で格納されることを確認"""
        frame = orthonormalize([SymVector.basis(1)], cap=6)
        assert frame.cap == 6
        assert frame.vectors[0].deg == 6

    def test_cap_exceeded(self):
        """cap を超える次数の入力で CapExceeded になることを確認"""
        with pytest.raises(CapExceeded):
            orthonormalize([SymVector.basis(4)], cap=3)

    def test_all_below_tolerance(self):
        """すべてが零の場合 EmptySpan になることを確認"""
        with pytest.raises(EmptySpan):
            orthonormalize([SymVector.zeros(3)])

    def test_empty_input(self):
        """空の入力で ValueError になることを確認"""
        with pytest.raises(ValueError):
            orthonormalize([])

    @pytest.mark.parametrize('rank_tol', [0.0, 1.0, -1e-3])
    def test_invalid_rank_tol(self, rank_tol):
        """rank_tol が (0, 1) の外の場合 ValueError になることを確認"""
        with pytest.raises(ValueError):
            orthonormalize([SymVector.basis(0)], rank_tol=rank_tol)

    def test_relative_rank_tolerance(self):
        """最大ノルムに対して小さい方向が捨てられることを確認"""
        frame = orthonormalize([SymVector([1e6, 0.0]), SymVector([0.0, 1e-6])])
        assert frame.rank == 1

    def test_matrix_with_scale(self):
        """scale を与えるとその値を基準に判定することを確認"""
        columns = np.array([[1e-12], [0.0]], dtype=np.complex128)
        assert orthonormalize_matrix(columns, 1e-10).shape[1] == 1
        assert orthonormalize_matrix(columns, 1e-10, scale=1.0).shape[1] == 0


class TestFrame:
    """Frame の補助操作に関するテスト"""

    def test_mismatched_degrees(self):
        """格納次数が揃っていない場合 ValueError になることを確認"""
        with pytest.raises(ValueError):
            Frame((SymVector.basis(0), SymVector.basis(1)), cap=1)

    def test_empty_frame_matrix(self):
        """ランク 0 のフレームの行列の形状を確認"""
        frame = Frame.from_matrix(np.zeros((4, 0), dtype=np.complex128))
        assert frame.rank == 0
        assert frame.cap == 3
        assert frame.matrix().shape == (4, 0)
        assert frame.gram_defect() == 0.0

    def test_project_higher_degree(self, e0_frame):
        """フレームより高い次数のベクトルも射影できることを確認"""
        v = SymVector([2.0, 0.0, 3.0])
        np.testing.assert_allclose(e0_frame.project(v).coords, [2.0, 0.0, 0.0])


class TestContains:
    """contains に関するテスト"""

    def test_member(self, e0_frame):
        """contains(span{e_0}, e_0) が真で残差 0 であることを確認"""
        result = contains(e0_frame, SymVector.basis(0))
        assert result.contained
        assert result.residual == 0

    def test_orthogonal(self, e0_frame):
        """contains(span{e_0}, e_1) が偽で残差 1 であることを確認"""
        result = contains(e0_frame, SymVector.basis(1))
        assert not result.contained
        assert result.residual == pytest.approx(1.0)

    def test_line(self):
        """(e_0 + e_1)/sqrt(2) の張る直線に e_0 が含まれず残差 1/sqrt(2) であることを確認"""
        line = orthonormalize([SymVector([1.0, 1.0])])
        result = contains(line, SymVector.basis(0))
        assert not result.contained
        assert result.residual == pytest.approx(1 / math.sqrt(2))

    def test_empty_frame(self):
        """ランク 0 のフレームには非零ベクトルが含まれないことを確認"""
        frame = Frame.from_matrix(np.zeros((2, 0), dtype=np.complex128))
        result = contains(frame, SymVector.basis(1))
        assert not result.contained
        assert result.residual == pytest.approx(1.0)
