"""H^2(T^2) の有限次打ち切りモデル

単項式 z^m w^n (m+n <= N) の係数グリッド、Toeplitz シフトとその随伴、
対称部分空間 H への射影、Bergman 空間とのユニタリ対応、
および q(0,w) からの級数表示による再構成を扱う。
"""
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from service.exceptions import CapExceeded, NotSymmetric

logger = logging.getLogger(__name__)

Variable = Literal['z', 'w']
Direction = Literal['forward', 'adjoint']
UnitaryDirection = Literal['to_sym', 'from_sym']

SYMMETRY_TOL = 1e-12


def frozen_array(values, length: int | None = None) -> np.ndarray:
    array = np.array(values, dtype=np.complex128)
    if array.ndim == 0:
        array = array.reshape(1)
    if length is not None and array.shape[0] < length:
        array = np.concatenate([array, np.zeros(length - array.shape[0], dtype=np.complex128)])
    array.setflags(write=False)
    return array


def _degree_mask(deg: int) -> np.ndarray:
    index = np.arange(deg + 1)
    return np.add.outer(index, index) <= deg


def shift_weights(count: int) -> np.ndarray:
    """B e_n = sqrt((n+1)/(n+2)) e_{n+1} の重み（n = 0..count-1）"""
    n = np.arange(count, dtype=float)
    return np.sqrt((n + 1.0) / (n + 2.0))


@dataclass(frozen=True, eq=False)
class BidiscPoly:
    """全次数 deg 以下の二変数解析多項式（coeffs[m, n] が z^m w^n の係数）"""

    deg: int
    coeffs: np.ndarray

    def __post_init__(self):
        grid = np.array(self.coeffs, dtype=np.complex128)
        if grid.shape != (self.deg + 1, self.deg + 1):
            raise ValueError(f"係数グリッドの形状が不正です: {grid.shape} (deg={self.deg})")
        grid[~_degree_mask(self.deg)] = 0.0
        grid.setflags(write=False)
        object.__setattr__(self, 'coeffs', grid)

    @classmethod
    def zeros(cls, deg: int) -> 'BidiscPoly':
        return cls(deg, np.zeros((deg + 1, deg + 1), dtype=np.complex128))

    @classmethod
    def monomial(cls, m: int, n: int, deg: int | None = None, amplitude: complex = 1.0) -> 'BidiscPoly':
        total = m + n if deg is None else deg
        if m + n > total:
            raise CapExceeded(m + n, total)
        grid = np.zeros((total + 1, total + 1), dtype=np.complex128)
        grid[m, n] = amplitude
        return cls(total, grid)

    @classmethod
    def from_terms(cls, terms: dict[tuple[int, int], complex], deg: int | None = None) -> 'BidiscPoly':
        total = max((m + n for m, n in terms), default=0) if deg is None else deg
        grid = np.zeros((total + 1, total + 1), dtype=np.complex128)
        for (m, n), amplitude in terms.items():
            if m + n > total:
                raise CapExceeded(m + n, total)
            grid[m, n] += amplitude
        return cls(total, grid)

    def coefficient(self, m: int, n: int) -> complex:
        if m < 0 or n < 0 or m + n > self.deg:
            return 0j
        return complex(self.coeffs[m, n])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def with_degree(self, deg: int) -> 'BidiscPoly':
        """格納次数を変更する。切り捨てる係数が非零なら CapExceeded"""
        if deg == self.deg:
            return self
        if deg > self.deg:
            grid = np.zeros((deg + 1, deg + 1), dtype=np.complex128)
            grid[:self.deg + 1, :self.deg + 1] = self.coeffs
            return BidiscPoly(deg, grid)
        if np.any(self.coeffs[~np.pad(_degree_mask(deg), (0, self.deg - deg))] != 0):
            raise CapExceeded(self.deg, deg)
        return BidiscPoly(deg, self.coeffs[:deg + 1, :deg + 1])

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        """各反対角線 m+n = k 上の係数が一定かどうか"""
        scale = max(self.norm(), 1.0)
        flipped = np.fliplr(self.coeffs)
        for k in range(self.deg + 1):
            diagonal = np.diagonal(flipped, offset=self.deg - k)
            if np.max(np.abs(diagonal - diagonal[0])) > tol * scale:
                return False
        return True

    def __add__(self, other: 'BidiscPoly') -> 'BidiscPoly':
        deg = max(self.deg, other.deg)
        return BidiscPoly(deg, self.with_degree(deg).coeffs + other.with_degree(deg).coeffs)

    def __sub__(self, other: 'BidiscPoly') -> 'BidiscPoly':
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> 'BidiscPoly':
        return BidiscPoly(self.deg, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SymVector:
    """H の正規直交基底 e_n = p_n / sqrt(n+1) に関する座標"""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coords', frozen_array(self.coords))

    @property
    def deg(self) -> int:
        return self.coords.shape[0] - 1

    @classmethod
    def basis(cls, n: int, deg: int | None = None) -> 'SymVector':
        total = n if deg is None else deg
        if n > total:
            raise CapExceeded(n, total)
        coords = np.zeros(total + 1, dtype=np.complex128)
        coords[n] = 1.0
        return cls(coords)

    @classmethod
    def zeros(cls, deg: int) -> 'SymVector':
        return cls(np.zeros(deg + 1, dtype=np.complex128))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def inner(self, other: 'SymVector') -> complex:
        """<self, other>（第二引数について共役線形）"""
        deg = max(self.deg, other.deg)
        return complex(np.vdot(other.with_degree(deg).coords, self.with_degree(deg).coords))

    def effective_degree(self, tol: float = 0.0) -> int:
        """最大係数に対して tol を超える最高次の添字（零ベクトルは -1）"""
        magnitudes = np.abs(self.coords)
        peak = magnitudes.max(initial=0.0)
        if peak == 0.0:
            return -1
        return int(np.nonzero(magnitudes > tol * peak)[0][-1])

    def chopped(self, tol: float) -> 'SymVector':
        """effective_degree より上の係数を 0 にする"""
        top = self.effective_degree(tol)
        coords = np.array(self.coords)
        coords[top + 1:] = 0.0
        return SymVector(coords)

    def with_degree(self, deg: int) -> 'SymVector':
        if deg == self.deg:
            return self
        if deg > self.deg:
            return SymVector(frozen_array(self.coords, deg + 1))
        if np.any(self.coords[deg + 1:] != 0):
            raise CapExceeded(self.effective_degree(), deg)
        return SymVector(self.coords[:deg + 1])

    def to_bidisc(self) -> BidiscPoly:
        """a_{i,n-i} = b_n / sqrt(n+1) として H^2(T^2) に埋め込む"""
        index = np.arange(self.deg + 1)
        totals = np.add.outer(index, index)
        per_degree = self.coords / np.sqrt(index + 1.0)
        grid = np.where(totals <= self.deg, per_degree[np.minimum(totals, self.deg)], 0.0)
        return BidiscPoly(self.deg, grid)

    def __add__(self, other: 'SymVector') -> 'SymVector':
        deg = max(self.deg, other.deg)
        return SymVector(self.with_degree(deg).coords + other.with_degree(deg).coords)

    def __sub__(self, other: 'SymVector') -> 'SymVector':
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> 'SymVector':
        return SymVector(self.coords * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> 'SymVector':
        return self * -1.0


@dataclass(frozen=True, eq=False)
class BergmanPoly:
    """Bergman 空間の単項式展開 sum c_n z^n（||z^n||^2 = 1/(n+1)）"""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', frozen_array(self.coeffs))

    @property
    def deg(self) -> int:
        return self.coeffs.shape[0] - 1

    def norm(self) -> float:
        weights = 1.0 / (np.arange(self.deg + 1) + 1.0)
        return float(np.sqrt(np.sum(weights * np.abs(self.coeffs) ** 2)))

    def times_z(self) -> 'BergmanPoly':
        return BergmanPoly(np.concatenate([[0.0], self.coeffs]))


@dataclass(frozen=True, eq=False)
class CirclePoly:
    """単位円上の一変数解析多項式 sum q_k w^k"""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', frozen_array(self.coeffs))

    @property
    def deg(self) -> int:
        return self.coeffs.shape[0] - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def evaluate(self, w) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(w, dtype=np.complex128), self.coeffs)

    def backward_shift(self) -> 'CirclePoly':
        """T_w^*（定数項を落として添字を一つ下げる）"""
        if self.deg == 0:
            return CirclePoly(np.zeros(1, dtype=np.complex128))
        return CirclePoly(self.coeffs[1:])

    def backward_orbit(self) -> list['CirclePoly']:
        """T_w^{*j} q, j = 0..deg"""
        return [CirclePoly(self.coeffs[j:]) for j in range(self.deg + 1)]

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


def inner_product(f: BidiscPoly, g: BidiscPoly) -> complex:
    """H^2(T^2) の内積 sum a_{m,n} conj(b_{m,n})"""
    deg = max(f.deg, g.deg)
    return complex(np.vdot(g.with_degree(deg).coeffs, f.with_degree(deg).coeffs))


def shift(f: BidiscPoly, var: Variable, direction: Direction = 'forward', cap: int | None = None) -> BidiscPoly:
    """
    Toeplitz シフト T_z, T_w とその随伴

    Args:
        f: 対象の多項式
        var: 'z' または 'w'
        direction: 'forward'（変数を掛ける）または 'adjoint'（後退シフト）
        cap: 前方シフト後の次数の上限

    Returns:
        シフト後の多項式。前方シフトでは格納次数が 1 増える
    """
    if direction == 'forward':
        deg = f.deg + 1
        if cap is not None and deg > cap:
            raise CapExceeded(deg, cap)
        grid = np.zeros((deg + 1, deg + 1), dtype=np.complex128)
        if var == 'z':
            grid[1:, :deg] = f.coeffs
        else:
            grid[:deg, 1:] = f.coeffs
        return BidiscPoly(deg, grid)

    if direction == 'adjoint':
        grid = np.zeros_like(f.coeffs)
        if var == 'z':
            grid[:-1, :] = f.coeffs[1:, :]
        else:
            grid[:, :-1] = f.coeffs[:, 1:]
        return BidiscPoly(f.deg, grid)

    raise ValueError(f"不明なシフト方向です: {direction}")


def project_sym(f: BidiscPoly) -> SymVector:
    """P_H: 次数 n の反対角線を平均して p_n 方向に射影する"""
    flipped = np.fliplr(f.coeffs)
    sums = np.array(
        [np.trace(flipped, offset=f.deg - n) for n in range(f.deg + 1)],
        dtype=np.complex128,
    )
    return SymVector(sums / np.sqrt(np.arange(f.deg + 1) + 1.0))


def bergman_shift(v: SymVector, power: int = 1, direction: Direction = 'forward', cap: int | None = None) -> SymVector:
    """
    B = P_H T_z|_H の冪とその随伴

    B^p e_n = sqrt((n+1)/(n+p+1)) e_{n+p},
    B^{*p} e_n = sqrt((n-p+1)/(n+1)) e_{n-p}（n < p なら 0）
    """
    if power < 0:
        raise ValueError(f"冪は非負でなければなりません: {power}")
    if power == 0:
        return v

    n = np.arange(v.deg + 1, dtype=float)
    if direction == 'forward':
        deg = v.deg + power
        if cap is not None and deg > cap:
            raise CapExceeded(deg, cap)
        coords = np.zeros(deg + 1, dtype=np.complex128)
        coords[power:] = np.sqrt((n + 1.0) / (n + power + 1.0)) * v.coords
        return SymVector(coords)

    if direction == 'adjoint':
        coords = np.zeros(v.deg + 1, dtype=np.complex128)
        if power <= v.deg:
            upper = n[power:]
            coords[:v.deg + 1 - power] = np.sqrt((upper - power + 1.0) / (upper + 1.0)) * v.coords[power:]
        return SymVector(coords)

    raise ValueError(f"不明なシフト方向です: {direction}")


def to_sym(f: BergmanPoly) -> SymVector:
    return SymVector(f.coeffs / np.sqrt(np.arange(f.deg + 1) + 1.0))


def from_sym(v: SymVector) -> BergmanPoly:
    return BergmanPoly(v.coords * np.sqrt(np.arange(v.deg + 1) + 1.0))


def bergman_unitary(f: BergmanPoly | SymVector, direction: UnitaryDirection = 'to_sym') -> SymVector | BergmanPoly:
    """U z^n = p_n/(n+1) = e_n/sqrt(n+1) とその逆"""
    if direction == 'to_sym':
        if not isinstance(f, BergmanPoly):
            raise TypeError("to_sym には BergmanPoly を渡してください")
        return to_sym(f)

    if direction == 'from_sym':
        if not isinstance(f, SymVector):
            raise TypeError("from_sym には SymVector を渡してください")
        return from_sym(f)

    raise ValueError(f"不明な変換方向です: {direction}")


def slice_z0(v: SymVector) -> CirclePoly:
    """q(0,w): p_k(0,w) = w^k より q_k = b_k / sqrt(k+1)"""
    return CirclePoly(v.coords / np.sqrt(np.arange(v.deg + 1) + 1.0))


def series_grid(q0: CirclePoly) -> BidiscPoly:
    """sum_j z^j T_w^{*j} q0 の係数グリッド（a_{j,m} = q_{j+m}）"""
    deg = q0.deg
    index = np.arange(deg + 1)
    totals = np.add.outer(index, index)
    grid = np.where(totals <= deg, q0.coeffs[np.minimum(totals, deg)], 0.0)
    return BidiscPoly(deg, grid)


def reconstruct(q0: CirclePoly) -> SymVector:
    """q(0,w) から q(z,w) = sum_j z^j T_w^{*j} q(0,w) を組み立てる"""
    grid = series_grid(q0)
    if not grid.is_symmetric():
        logger.error(f"反対角線が一定でない係数グリッドを検出しました (deg={grid.deg})")
        raise NotSymmetric("級数表示の係数グリッドが対称になっていません")
    return project_sym(grid)
