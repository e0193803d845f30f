"""遊走部分空間の判定条件

定数動径和 sum_j |T_w^{*j} q(0,w)|^2 = const、係数条件（重み (j+1)）、
二元条件（H^1 所属）、正規直交系の恒等式、および T_z シフトの Gram 値による
判定基準を扱う。三角多項式はすべて係数の畳み込みで正確に求める。
"""
import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from service.bidisc import SymVector, frozen_array, inner_product, shift, slice_z0
from service.exceptions import EmptySpan, PremiseViolated
from service.frame import Frame, orthonormalize

logger = logging.getLogger(__name__)

Weight = Literal['paper_j', 'corrected_j_plus_1']

DEFAULT_CRITERION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """単位円上の Laurent 多項式 sum_{k=-N}^{N} c_k w^k（coeffs[N + k] = c_k）"""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = frozen_array(self.coeffs)
        if coeffs.shape[0] % 2 != 1:
            raise ValueError(f"Laurent 係数の長さは奇数でなければなりません: {coeffs.shape[0]}")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def order(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.order:
            return 0j
        return complex(self.coeffs[self.order + k])

    def frequencies(self) -> np.ndarray:
        return np.arange(-self.order, self.order + 1)

    def evaluate(self, w) -> np.ndarray:
        points = np.asarray(w, dtype=np.complex128)
        powers = points[..., None] ** self.frequencies()
        return powers @ self.coeffs

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1])), initial=0.0) <= tol)

    def __sub__(self, other: 'TrigPoly') -> 'TrigPoly':
        order = max(self.order, other.order)
        return TrigPoly(_centered(self, order) - _centered(other, order))


def _centered(poly: TrigPoly, order: int) -> np.ndarray:
    pad = order - poly.order
    return np.pad(poly.coeffs, (pad, pad))


def constant(value: complex, order: int = 0) -> TrigPoly:
    coeffs = np.zeros(2 * order + 1, dtype=np.complex128)
    coeffs[order] = value
    return TrigPoly(coeffs)


@dataclass(frozen=True)
class CriterionReport:
    passed: bool
    worst_index: int
    worst_value: float
    tol: float
    detail: str = ""


def _report(values: np.ndarray, indices: np.ndarray, tol: float, detail: str = "") -> CriterionReport:
    if values.size == 0:
        return CriterionReport(True, 0, 0.0, tol, detail)
    position = int(np.argmax(values))
    worst = float(values[position])
    return CriterionReport(worst <= tol, int(indices[position]), worst, tol, detail)


def _slices(q1: SymVector, q2: SymVector) -> tuple[np.ndarray, np.ndarray]:
    deg = max(q1.deg, q2.deg)
    return slice_z0(q1.with_degree(deg)).coeffs, slice_z0(q2.with_degree(deg)).coeffs


def pairing_series(q1: SymVector, q2: SymVector) -> TrigPoly:
    """sum_j T_w^{*j} q1(0,w) conj(T_w^{*j} q2(0,w)) の Laurent 係数"""
    a, b = _slices(q1, q2)
    deg = a.shape[0] - 1
    coeffs = np.zeros(2 * deg + 1, dtype=np.complex128)
    for j in range(deg + 1):
        # 行 j 同士の積: 添字 i は w^{i - (deg - j)} に対応する
        product = np.convolve(a[j:], np.conj(b[j:])[::-1])
        coeffs[j:j + product.shape[0]] += product
    return TrigPoly(coeffs)


def radial_sum(q: SymVector) -> TrigPoly:
    """sum_j |T_w^{*j} q(0,w)|^2"""
    return pairing_series(q, q)


def _relative_tol(tol: float | None, scale: float) -> float:
    return (DEFAULT_CRITERION_TOL if tol is None else tol) * scale


def radial_constancy(q: SymVector, tol: float | None = None) -> CriterionReport:
    """動径和の非定数係数 |c_k| (k >= 1) の最大値で定数性を判定する"""
    series = radial_sum(q)
    frequencies = np.arange(1, series.order + 1)
    values = np.abs(series.coeffs[series.order + 1:])
    return _report(values, frequencies, _relative_tol(tol, q.norm() ** 2), "radial_sum")


def criterion_sums(q: SymVector, weight: Weight = 'corrected_j_plus_1') -> np.ndarray:
    """
    s_k = sum_j weight(j) q_j conj(q_{j+k})（k = 1..deg）

    Args:
        q: 対象ベクトル
        weight: 'corrected_j_plus_1'（重み j+1、既定）または 'paper_j'（重み j）

    Returns:
        長さ deg の複素配列（先頭が k = 1）
    """
    coeffs = slice_z0(q).coeffs
    deg = q.deg
    j = np.arange(deg + 1, dtype=float)
    if weight == 'corrected_j_plus_1':
        weights = j + 1.0
    elif weight == 'paper_j':
        weights = j
    else:
        raise ValueError(f"不明な重みです: {weight}")

    sums = np.zeros(deg, dtype=np.complex128)
    for k in range(1, deg + 1):
        sums[k - 1] = np.sum(weights[:deg + 1 - k] * coeffs[:deg + 1 - k] * np.conj(coeffs[k:]))
    return sums


def coeff_criterion(q: SymVector, weight: Weight = 'corrected_j_plus_1', tol: float | None = None) -> CriterionReport:
    sums = criterion_sums(q, weight)
    return _report(np.abs(sums), np.arange(1, q.deg + 1), _relative_tol(tol, q.norm() ** 2), f"coeff_criterion[{weight}]")


def is_wandering_vector(q: SymVector, tol: float | None = None) -> CriterionReport:
    return coeff_criterion(q, 'corrected_j_plus_1', tol)


def shift_gram(q1: SymVector, q2: SymVector, kmax: int, cap: int | None = None) -> np.ndarray:
    """
    g_k = <T_z^k q1, q2>_{H^2(T^2)}（k = 1..kmax、射影なしで双円板上で計算）

    Raises:
        CapExceeded: kmax + deg(q1) が cap を超える場合
    """
    current = q1.to_bidisc()
    target = q2.to_bidisc()
    values = np.zeros(kmax, dtype=np.complex128)
    for k in range(1, kmax + 1):
        current = shift(current, 'z', 'forward', cap)
        values[k - 1] = inner_product(current, target)
    return values


def cross_condition(q1: SymVector, q2: SymVector, tol: float | None = None) -> CriterionReport:
    """混合和の負の Laurent 係数がすべて消えるか（三角多項式では H^1 所属と同値）"""
    series = pairing_series(q1, q2)
    frequencies = np.arange(-series.order, 0)
    values = np.abs(series.coeffs[:series.order])
    return _report(values, frequencies, _relative_tol(tol, q1.norm() * q2.norm()), "cross_condition")


def _pair_reports(vectors: Sequence[SymVector], tol: float | None) -> list[tuple[tuple[int, int], CriterionReport]]:
    reports = []
    for i in range(len(vectors)):
        for k in range(i + 1, len(vectors)):
            # 混合和が定数であるためには両方の順序で正則でなければならない
            reports.append(((i, k), cross_condition(vectors[i], vectors[k], tol)))
            reports.append(((k, i), cross_condition(vectors[k], vectors[i], tol)))
    return reports


def is_wandering_span(basis: Sequence[SymVector], tol: float | None = None) -> CriterionReport:
    """
    張る空間のすべての元が定数動径和を持つか（各ベクトルの係数条件と全ペアの二元条件）

    Raises:
        EmptySpan: 入力が空、またはすべて零の場合
        PremiseViolated: 入力が一次従属の場合
    """
    if not basis:
        raise EmptySpan("基底が空です")
    frame = orthonormalize(basis)
    if frame.rank != len(basis):
        raise PremiseViolated('linear_independence', f"ランク {frame.rank} < {len(basis)}")

    failures: list[CriterionReport] = []
    worst: CriterionReport | None = None
    for index, vector in enumerate(basis):
        report = is_wandering_vector(vector, tol)
        labelled = CriterionReport(report.passed, report.worst_index, report.worst_value, report.tol,
                                   f"coeff_criterion({index})")
        if not report.passed:
            failures.append(labelled)
        if worst is None or labelled.worst_value > worst.worst_value:
            worst = labelled

    for (i, k), report in _pair_reports(basis, tol):
        labelled = CriterionReport(report.passed, report.worst_index, report.worst_value, report.tol,
                                   f"cross_condition({i}, {k})")
        if not report.passed:
            failures.append(labelled)
        if worst is None or labelled.worst_value > worst.worst_value:
            worst = labelled

    if failures:
        blamed = max(failures, key=lambda report: report.worst_value / max(report.tol, np.finfo(float).tiny))
        logger.info(f"遊走部分空間の条件を満たしません: {blamed.detail} (値={blamed.worst_value:.3e})")
        return CriterionReport(False, blamed.worst_index, blamed.worst_value, blamed.tol, blamed.detail)

    assert worst is not None
    return CriterionReport(True, worst.worst_index, worst.worst_value, worst.tol, worst.detail)


def orthonormal_system_check(basis: Frame, tol: float | None = None) -> CriterionReport:
    """
    各ペア (k, k') の混合和が定数 delta_{kk'} に一致するか

    ペアは辞書式順序で調べる。worst_index は最悪の周波数、detail はそのペア。
    """
    reports: list[CriterionReport] = []
    threshold = DEFAULT_CRITERION_TOL if tol is None else tol
    for i in range(basis.rank):
        for k in range(i, basis.rank):
            series = pairing_series(basis.vectors[i], basis.vectors[k])
            expected = constant(1.0 if i == k else 0.0, series.order)
            deviation = np.abs((series - expected).coeffs)
            reports.append(_report(deviation, series.frequencies(), threshold, f"pair({i}, {k})"))

    if not reports:
        return CriterionReport(True, 0, 0.0, threshold, "empty")
    worst = max(reports, key=lambda report: report.worst_value)
    if not worst.passed:
        logger.info(f"正規直交系の恒等式が成り立ちません: {worst.detail} (値={worst.worst_value:.3e})")
    return worst
