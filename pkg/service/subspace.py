"""不変部分空間と遊走部分空間

生成元の B 軌道による不変部分空間の生成、M ⊖ BM の抽出、零点集合モデル、
包含関係の判定、および前提条件を検査した中間部分空間の構成を扱う。
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from service.bidisc import BergmanPoly, SymVector, bergman_shift, shift_weights, to_sym
from service.exceptions import CapExceeded, EmptySpan, PremiseViolated
from service.frame import DEFAULT_RANK_TOL, Frame, contains, orthonormalize, orthonormalize_matrix
from service.wandering import coeff_criterion, cross_condition

logger = logging.getLogger(__name__)

DEFAULT_DEGREE_TOL = 1e-13
PREMISE_TOL = 1e-10
MINIMALITY_TOL = 1e-8
COMPLEMENT_TOL = 1e-8
DEFAULT_GUARD = 2


@dataclass(frozen=True, eq=False)
class InvariantModel:
    """B 不変部分空間の次数 cap までの切断"""

    generators: tuple[SymVector, ...]
    cap: int
    basis: Frame

    @classmethod
    def from_generators(cls, generators: Sequence[SymVector], cap: int,
                        rank_tol: float = DEFAULT_RANK_TOL) -> 'InvariantModel':
        """すでに不変な生成元の組（零点集合モデルなど）をそのまま張る"""
        basis = orthonormalize(list(generators), rank_tol, cap=cap)
        return cls(tuple(generators), cap, basis)

    @property
    def dimension(self) -> int:
        return self.basis.rank

    def invariance_residual(self) -> float:
        """次数 cap 未満の部分に B を作用させたときの span からのはみ出し"""
        shifted = _shifted_subcap(self.basis)
        if shifted.shape[1] == 0:
            return 0.0
        matrix = self.basis.matrix()
        outside = shifted - matrix @ (matrix.conj().T @ shifted)
        return float(np.max(np.linalg.norm(outside, axis=0)))


def _subcap_part(basis: Frame) -> np.ndarray:
    """span(basis) のうち e_cap 成分が消える部分空間の正規直交基底"""
    matrix = basis.matrix()
    if basis.rank == 0:
        return matrix

    top = matrix[basis.cap, :].reshape(1, -1)
    _, singular, vh = np.linalg.svd(top)
    if singular[0] <= basis.rank_tol:
        null = np.eye(basis.rank, dtype=np.complex128)
    else:
        null = vh[1:].conj().T
    subcap = matrix @ null
    subcap[basis.cap, :] = 0.0
    return subcap


def _shifted_subcap(basis: Frame) -> np.ndarray:
    subcap = _subcap_part(basis)
    shifted = np.zeros_like(subcap)
    shifted[1:, :] = shift_weights(basis.cap)[:, None] * subcap[:-1, :]
    return shifted


def _generator_vectors(wandering: Frame | Sequence[SymVector]) -> list[SymVector]:
    if isinstance(wandering, Frame):
        return list(wandering.vectors)
    return list(wandering)


def generate_invariant(wandering: Frame | Sequence[SymVector], cap: int,
                       rank_tol: float = DEFAULT_RANK_TOL,
                       degree_tol: float = DEFAULT_DEGREE_TOL) -> InvariantModel:
    """
    span{B^j q : q in W, j >= 0} を次数 cap まで生成する

    Args:
        wandering: 生成元（遊走ベクトルの組）
        cap: 打ち切り次数
        rank_tol: 正規直交化のランク許容誤差
        degree_tol: これ未満の相対係数は次数に数えない

    Returns:
        InvariantModel

    Raises:
        CapExceeded: 生成元の次数がすでに cap を超えている場合
        EmptySpan: 生成元がすべて零の場合
    """
    generators = _generator_vectors(wandering)
    if not generators:
        raise EmptySpan("生成元が空です")

    orbit: list[SymVector] = []
    kept: list[SymVector] = []
    for generator in generators:
        degree = generator.effective_degree(degree_tol)
        if degree > cap:
            raise CapExceeded(degree, cap)
        if degree < 0:
            continue

        current = generator.chopped(degree_tol).with_degree(cap)
        kept.append(current)
        while True:
            orbit.append(current)
            if current.effective_degree(degree_tol) + 1 > cap:
                break
            current = bergman_shift(current.chopped(degree_tol), 1, 'forward').with_degree(cap)

    if not orbit:
        raise EmptySpan("すべての生成元が零です")

    basis = orthonormalize(orbit, rank_tol, cap=cap)
    logger.debug(f"不変部分空間を生成しました: 生成元 {len(kept)} 本, 軌道 {len(orbit)} 本 -> 次元 {basis.rank}")
    return InvariantModel(tuple(kept), cap, basis)


def _complement_within(matrix: np.ndarray, image: np.ndarray, rank_tol: float) -> np.ndarray:
    """span(matrix) の中で image と直交する部分の正規直交基底（matrix の列は正規直交）"""
    if image.shape[1] == 0:
        return matrix

    coupling = image.conj().T @ matrix
    _, singular, vh = np.linalg.svd(coupling)
    overlap_rank = int(np.count_nonzero(singular > COMPLEMENT_TOL))
    null = vh[overlap_rank:].conj().T
    # 基底ベクトルを補空間へ射影してから順に直交化する（向きと順序を基底に合わせる）
    return orthonormalize_matrix(matrix @ (null @ null.conj().T), rank_tol, scale=1.0)


def wandering_of(m: InvariantModel) -> Frame:
    """
    span(m.basis) の中での span{B v : v in span(m.basis), v の e_cap 成分 = 0} の直交補空間

    Returns:
        遊走部分空間の Frame（ランク 0 もありうる）
    """
    matrix = m.basis.matrix()
    if m.basis.rank == 0:
        return Frame.from_matrix(matrix, m.basis.rank_tol, 0)

    image = orthonormalize_matrix(_shifted_subcap(m.basis), m.basis.rank_tol, scale=1.0)
    wandering = _complement_within(matrix, image, m.basis.rank_tol)
    logger.debug(f"遊走部分空間: 次元 {m.basis.rank} のモデルからランク {wandering.shape[1]}")
    return Frame.from_matrix(wandering, m.basis.rank_tol, m.basis.rank)


def zero_set_model(zeros: Sequence[complex], cap: int, rank_tol: float = DEFAULT_RANK_TOL) -> InvariantModel:
    """
    指定した点で消える多項式全体（次数 cap まで）を U で写したモデル

    生成元は U(prod (z - a_i) z^j), j = 0..cap-len(zeros)。零点が空なら H 全体。
    """
    count = len(zeros)
    if count > cap:
        raise CapExceeded(count, cap)

    base = np.polynomial.polynomial.polyfromroots(list(zeros)) if count else np.ones(1)
    generators = []
    for j in range(cap - count + 1):
        coeffs = np.concatenate([np.zeros(j, dtype=np.complex128), np.asarray(base, dtype=np.complex128)])
        generators.append(to_sym(BergmanPoly(coeffs)).with_degree(cap))

    logger.debug(f"零点集合モデル: 零点 {list(zeros)}, cap={cap}, 生成元 {len(generators)} 本")
    return InvariantModel.from_generators(generators, cap, rank_tol)


def containment_residual(inner: Frame, outer: Frame) -> float:
    """inner の各ベクトルについての max ||v - P_outer v||"""
    if inner.rank == 0:
        return 0.0
    return max(contains(outer, vector).residual for vector in inner.vectors)


def strictly_contains(outer: Frame, inner: Frame, tol: float = PREMISE_TOL) -> bool:
    """inner ⊊ outer（切断次数での判定）"""
    return containment_residual(inner, outer) <= tol and outer.rank > inner.rank


def surplus_directions(wandering: Frame, expected: Frame) -> np.ndarray:
    """wandering のうち expected と直交する方向（列ベクトル）"""
    deg = max(wandering.cap, expected.cap)
    found = wandering.padded_matrix(deg)
    reference = expected.padded_matrix(deg)
    for _ in range(2):
        if reference.shape[1]:
            found = found - reference @ (reference.conj().T @ found)
    return orthonormalize_matrix(found, wandering.rank_tol, scale=1.0)


def shift_orbit(vector: SymVector, depth: int) -> list[SymVector]:
    """B^j v (j = 0..depth) を切り捨てずに格納次数 deg(v) + depth で並べる"""
    storage = vector.deg + depth
    return [bergman_shift(vector, j, 'forward').with_degree(storage) for j in range(depth + 1)]


def regenerate(frame: Frame, depth: int | None = None) -> tuple[InvariantModel, Frame]:
    """
    W の B 軌道を深さ depth（既定は frame.cap）まで切り捨てずに作り直し、
    その中での遊走部分空間 span{B^j w} ⊖ span{B^j w : j >= 1} を返す

    Returns:
        (格納次数 cap + depth の InvariantModel, 遊走部分空間の Frame)

    Raises:
        EmptySpan: frame のランクが 0 の場合
    """
    if frame.rank == 0:
        raise EmptySpan("遊走部分空間が空です")
    depth = frame.cap if depth is None else depth
    storage = frame.cap + depth

    orbits = [shift_orbit(vector, depth) for vector in frame.vectors]
    basis = orthonormalize([vector for orbit in orbits for vector in orbit], frame.rank_tol, cap=storage)
    shifted = [vector.coords for orbit in orbits for vector in orbit[1:]]
    image = (orthonormalize_matrix(np.column_stack(shifted), frame.rank_tol) if shifted
             else np.zeros((storage + 1, 0), dtype=np.complex128))

    recovered = _complement_within(basis.matrix(), image, frame.rank_tol)
    logger.debug(f"軌道を作り直しました: 深さ {depth}, 次元 {basis.rank}, 遊走部分空間のランク {recovered.shape[1]}")
    model = InvariantModel(tuple(frame.vectors), storage, basis)
    return model, Frame.from_matrix(recovered, frame.rank_tol, basis.rank)


def beurling_residual(model: InvariantModel, depth: int | None = None,
                      degree_tol: float = DEFAULT_DEGREE_TOL) -> float:
    """
    単一生成のモデル [g] で、wandering_of(model) の B 軌道が B^k g を張り直すかを調べる

    g は model.generators[0]。k は 0..(cap - deg g) // 2 の内側の範囲（depth で上書き可）。

    Returns:
        max_k ||B^k g - P B^k g|| / ||B^k g||

    Raises:
        EmptySpan: 遊走部分空間が空の場合
    """
    generator = model.generators[0]
    degree = generator.effective_degree(degree_tol)
    interior = (model.cap - degree) // 2 if depth is None else depth

    orbit_model, _ = regenerate(wandering_of(model), model.cap)
    worst = 0.0
    for k in range(interior + 1):
        target = bergman_shift(generator, k, 'forward')
        residual = contains(orbit_model.basis, target).residual / target.norm()
        worst = max(worst, residual)
    logger.debug(f"生成元の軌道 {interior + 1} 本の最大相対残差: {worst:.3e}")
    return worst


def truncation_gap(coarse: Frame, fine: Frame) -> float:
    """二つの打ち切り次数で求めた遊走部分空間の間の距離（両方向の包含残差の最大）"""
    return max(containment_residual(coarse, fine), containment_residual(fine, coarse))


@dataclass(frozen=True)
class MinimalityReport:
    residual: float
    surplus_rank: int
    surplus_leak: float
    guard: int
    tol: float
    dimension: int = 0

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol and self.surplus_leak <= self.tol


def minimality_report(frame: Frame, cap: int, guard: int = DEFAULT_GUARD,
                      tol: float = MINIMALITY_TOL) -> MinimalityReport:
    """
    W の B 軌道（深さ cap）の遊走部分空間が W を含み、余分な方向が
    次数 cap - guard より上に収まっているかを調べる
    """
    model, recovered = regenerate(frame, cap)
    residual = containment_residual(frame, recovered)

    surplus = surplus_directions(recovered, frame)
    leak = 0.0
    if surplus.shape[1]:
        leak = float(np.max(np.linalg.norm(surplus[:cap - guard + 1, :], axis=0)))
        logger.debug(f"余分な方向 {surplus.shape[1]} 本 (低次成分の最大ノルム={leak:.3e})")

    return MinimalityReport(residual, surplus.shape[1], leak, guard, tol, model.dimension)


def _require(passed: bool, check: str, detail: str = "", report=None):
    if not passed:
        logger.warning(f"中間部分空間の前提条件 {check} を満たしません: {detail}")
        raise PremiseViolated(check, detail, report)


def construct_intermediate(wn_basis: Frame, q_hat: SymVector, cap: int,
                           tol: float = PREMISE_TOL,
                           rank_tol: float = DEFAULT_RANK_TOL) -> InvariantModel:
    """
    W = span(wn_basis ∪ {q_hat}) から中間の不変部分空間 L を構成する

    前提条件は単位ノルム、直交性、各ベクトルの係数条件、全ペアの二元条件（両方の順序）
    の順に検査する。

    Raises:
        PremiseViolated: いずれかの前提条件を満たさない場合（失敗した検査名を持つ）
    """
    norm = q_hat.norm()
    _require(abs(norm - 1.0) <= tol, 'unit_norm', f"||q_hat|| = {norm:.17g}")

    for index, vector in enumerate(wn_basis.vectors):
        overlap = abs(q_hat.inner(vector))
        _require(overlap <= tol, 'orthogonality', f"|<q_hat, wn[{index}]>| = {overlap:.3e}")

    labelled = [(f"wn[{index}]", vector) for index, vector in enumerate(wn_basis.vectors)]
    labelled.append(('q_hat', q_hat))

    for label, vector in labelled:
        report = coeff_criterion(vector, tol=tol)
        _require(report.passed, 'coeff_criterion', label, report)

    for i in range(len(labelled)):
        for k in range(len(labelled)):
            if i == k:
                continue
            (first, q1), (second, q2) = labelled[i], labelled[k]
            report = cross_condition(q1, q2, tol=tol)
            _require(report.passed, 'cross_condition', f"cross_condition({first}, {second})", report)

    frame = orthonormalize([vector for _, vector in labelled], rank_tol, cap=cap)
    logger.info(f"中間部分空間を構成します: 遊走ベクトル {frame.rank} 本, cap={cap}")
    return generate_invariant(frame, cap, rank_tol)
