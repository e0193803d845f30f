import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from service.bidisc import SymVector
from service.exceptions import CapExceeded, EmptySpan

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10
GRAM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Frame:
    """H の有限次元部分空間を表す正規直交系"""

    vectors: tuple[SymVector, ...]
    cap: int
    rank_tol: float = DEFAULT_RANK_TOL
    source_count: int = 0

    def __post_init__(self):
        for vector in self.vectors:
            if vector.deg != self.cap:
                raise ValueError(f"フレームの格納次数が揃っていません: {vector.deg} != {self.cap}")

    @property
    def rank(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        """列ベクトルとして並べた座標行列（形状 (cap+1, rank)）"""
        if not self.vectors:
            return np.zeros((self.cap + 1, 0), dtype=np.complex128)
        return np.column_stack([vector.coords for vector in self.vectors])

    def gram(self) -> np.ndarray:
        matrix = self.matrix()
        return matrix.conj().T @ matrix

    def gram_defect(self) -> float:
        if not self.vectors:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(self.rank))))

    def padded_matrix(self, deg: int) -> np.ndarray:
        """格納次数 deg まで零行を足した座標行列"""
        matrix = self.matrix()
        if deg <= self.cap:
            return matrix
        return np.vstack([matrix, np.zeros((deg - self.cap, self.rank), dtype=np.complex128)])

    def project(self, v: SymVector) -> SymVector:
        deg = max(v.deg, self.cap)
        matrix = self.padded_matrix(deg)
        coords = v.with_degree(deg).coords
        return SymVector(matrix @ (matrix.conj().T @ coords))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL,
                    source_count: int | None = None) -> 'Frame':
        vectors = tuple(SymVector(matrix[:, k]) for k in range(matrix.shape[1]))
        count = matrix.shape[1] if source_count is None else source_count
        return cls(vectors, matrix.shape[0] - 1, rank_tol, count)


@dataclass(frozen=True)
class Containment:
    contained: bool
    residual: float


def _fit_to_cap(vector: SymVector, cap: int) -> np.ndarray:
    if vector.deg <= cap:
        return vector.with_degree(cap).coords
    if np.any(vector.coords[cap + 1:] != 0):
        raise CapExceeded(vector.effective_degree(), cap)
    return vector.coords[:cap + 1]


def orthonormalize_matrix(columns: np.ndarray, rank_tol: float, scale: float | None = None) -> np.ndarray:
    """
    列を順に直交化する（古典的 Gram-Schmidt を二回反復）

    Args:
        columns: 入力ベクトルを列に並べた行列
        rank_tol: 残差ノルムがこの値と scale の積以下の方向は捨てる
        scale: 基準となるノルム。省略時は入力の最大ノルム

    Returns:
        正規直交な列を持つ行列（列数は 0 のこともある）
    """
    size = columns.shape[0]
    norms = np.linalg.norm(columns, axis=0) if columns.shape[1] else np.zeros(0)
    reference = float(norms.max(initial=0.0)) if scale is None else scale
    threshold = rank_tol * reference

    basis = np.zeros((size, 0), dtype=np.complex128)
    if reference == 0.0:
        return basis

    for k in range(columns.shape[1]):
        residual = columns[:, k].astype(np.complex128)
        for _ in range(2):
            if basis.shape[1]:
                residual = residual - basis @ (basis.conj().T @ residual)
        length = float(np.linalg.norm(residual))
        if length <= threshold:
            logger.debug(f"入力 {k} を一次従属として除外しました (残差={length:.3e})")
            continue
        basis = np.column_stack([basis, residual / length])

    return basis


def orthonormalize(raw: Sequence[SymVector], rank_tol: float = DEFAULT_RANK_TOL,
                   cap: int | None = None, scale: float | None = None) -> Frame:
    """
    ベクトル列の張る空間の正規直交基底を作る

    Args:
        raw: 入力ベクトル（この順に処理する）
        rank_tol: 相対ランク許容誤差 (0, 1)
        cap: フレームの格納次数。省略時は入力の最大次数
        scale: ランク判定の基準ノルム

    Returns:
        Frame

    Raises:
        EmptySpan: すべての入力が許容誤差以下だった場合
    """
    if not raw:
        raise ValueError("入力ベクトルが空です")
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol は (0, 1) の範囲で指定してください: {rank_tol}")

    frame_cap = max(vector.deg for vector in raw) if cap is None else cap
    columns = np.column_stack([_fit_to_cap(vector, frame_cap) for vector in raw])
    basis = orthonormalize_matrix(columns, rank_tol, scale)

    if basis.shape[1] == 0:
        raise EmptySpan(f"{len(raw)} 本の入力がすべて許容誤差以下でした")

    logger.debug(f"正規直交化: 入力 {len(raw)} 本 -> ランク {basis.shape[1]}")
    return Frame.from_matrix(basis, rank_tol, len(raw))


def contains(frame: Frame, v: SymVector, tol: float = GRAM_TOL) -> Containment:
    """||v - P v|| <= tol ||v|| かどうかと残差 ||v - P v||"""
    deg = max(v.deg, frame.cap)
    coords = v.with_degree(deg).coords
    matrix = frame.padded_matrix(deg)
    residual = coords - matrix @ (matrix.conj().T @ coords)
    # 二回目の射影で丸め誤差を落とす
    residual = residual - matrix @ (matrix.conj().T @ residual)
    length = float(np.linalg.norm(residual))
    return Containment(length <= tol * float(np.linalg.norm(coords)), length)
