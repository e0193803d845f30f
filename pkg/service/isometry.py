"""遊走部分空間の間の等長写像

L_w q = (q(0,w), T_w^* q(0,w), ...) を単位円上の標本点で評価し、
基底の対応による等長写像、交換関係 T_w U = V T_w、および
鎖 M ⊇ L ⊇ N に沿った分解 T^(M,N) = T^(L,N) T^(M,L) を検証する。
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from service.bidisc import CirclePoly, SymVector, slice_z0
from service.exceptions import ChainBroken, PremiseViolated, RankMismatch
from service.frame import Frame
from service.subspace import InvariantModel, containment_residual
from service.wandering import orthonormal_system_check

logger = logging.getLogger(__name__)

ISOMETRY_TOL = 1e-8
UNITARY_TOL = 1e-10
DEFAULT_PROBE_COUNT = 4
DEFAULT_PROBE_SEED = 20220622


@dataclass(frozen=True, eq=False)
class LwImage:
    """行 j が T_w^{*j} q(0,·) の列"""

    rows: tuple[CirclePoly, ...]

    @property
    def depth(self) -> int:
        return sum(1 for row in self.rows if not row.is_zero())

    def values(self, w) -> np.ndarray:
        """形状 (標本数, 行数) の値"""
        points = np.atleast_1d(np.asarray(w, dtype=np.complex128))
        return np.column_stack([row.evaluate(points) for row in self.rows])

    def pointwise_norm_squared(self, w) -> np.ndarray:
        return np.sum(np.abs(self.values(w)) ** 2, axis=1)


def lw_map(q: SymVector) -> LwImage:
    return LwImage(tuple(slice_z0(q).backward_orbit()))


def default_sample_count(deg: int) -> int:
    return 4 * deg + 1


def circle_samples(count: int) -> np.ndarray:
    """単位円上の等間隔な count 点"""
    if count < 1:
        raise ValueError(f"標本数は正でなければなりません: {count}")
    return np.exp(2j * np.pi * np.arange(count) / count)


def probe_coefficients(rank: int, count: int = DEFAULT_PROBE_COUNT, seed: int = DEFAULT_PROBE_SEED) -> np.ndarray:
    """単位ベクトル e_k と乱数の単位ベクトルを列に並べた検査用係数（形状 (rank, rank+count)）"""
    identity = np.eye(rank, dtype=np.complex128)
    if rank == 0 or count == 0:
        return identity
    rng = np.random.default_rng(seed)
    random = rng.standard_normal((rank, count)) + 1j * rng.standard_normal((rank, count))
    random /= np.linalg.norm(random, axis=0)
    return np.hstack([identity, random])


def image_matrices(frame: Frame, samples: np.ndarray, depth: int | None = None) -> np.ndarray:
    """
    各標本点での L_w 像を列に並べた行列

    Args:
        frame: 正規直交系
        samples: 単位円上の点
        depth: 行数（省略時は cap+1）。異なる cap のフレームを比べるときに揃える

    Returns:
        形状 (標本数, depth, rank) の配列。[s, j, k] = T_w^{*j} q_k(0, w_s)
    """
    rows = frame.cap + 1 if depth is None else depth
    coords = frame.padded_matrix(rows - 1)
    slices = coords / np.sqrt(np.arange(rows) + 1.0)[:, None]

    index = np.arange(rows)
    totals = np.add.outer(index, index)
    hankel = np.where((totals < rows)[:, :, None], slices[np.minimum(totals, rows - 1), :], 0.0)
    vandermonde = np.asarray(samples, dtype=np.complex128)[None, :] ** index[:, None]
    return np.einsum('jmk,ms->sjk', hankel, vandermonde)


def _common_depth(*frames: Frame) -> int:
    return max(frame.cap for frame in frames) + 1


@dataclass(frozen=True, eq=False)
class PairedIsometry:
    """source の k 番目を target の pairing[k] 番目へ phases[k] 倍して送る写像"""

    source: Frame
    target: Frame
    pairing: tuple[int, ...] = field(default=())
    phases: tuple[complex, ...] = field(default=())

    def __post_init__(self):
        if self.source.rank != self.target.rank:
            raise RankMismatch(f"フレームのランクが一致しません: {self.source.rank} != {self.target.rank}")
        rank = self.source.rank
        pairing = tuple(self.pairing) if self.pairing else tuple(range(rank))
        phases = tuple(self.phases) if self.phases else tuple(1.0 + 0j for _ in range(rank))
        if sorted(pairing) != list(range(rank)):
            raise RankMismatch(f"対応が全単射になっていません: {pairing}")
        if len(phases) != rank:
            raise RankMismatch(f"位相の個数がランクと一致しません: {len(phases)} != {rank}")
        object.__setattr__(self, 'pairing', pairing)
        object.__setattr__(self, 'phases', phases)

    @property
    def rank(self) -> int:
        return self.source.rank

    def coordinate_map(self) -> np.ndarray:
        """source 座標から target 座標への行列"""
        matrix = np.zeros((self.rank, self.rank), dtype=np.complex128)
        for k, (index, phase) in enumerate(zip(self.pairing, self.phases)):
            matrix[index, k] = phase
        return matrix


def apply_paired(iso: PairedIsometry, coeffs: Sequence[complex], w_samples) -> np.ndarray:
    """
    sum_k c_k L_w(source_k) の T_w による像を標本点ごとに返す

    Returns:
        形状 (標本数, depth) の配列

    Raises:
        RankMismatch: 係数の個数がランクと一致しない場合
    """
    vector = np.asarray(coeffs, dtype=np.complex128)
    if vector.shape != (iso.rank,):
        raise RankMismatch(f"係数の個数 {vector.shape} がランク {iso.rank} と一致しません")
    images = image_matrices(iso.target, np.asarray(w_samples))
    return images @ (iso.coordinate_map() @ vector)


def _require_orthonormal_system(frame: Frame, role: str, tol: float):
    report = orthonormal_system_check(frame, tol)
    if not report.passed:
        logger.warning(f"{role} フレームが正規直交系の恒等式を満たしません: {report.detail}")
        raise PremiseViolated('orthonormal_system', f"{role}: {report.detail}", report)


def isometry_residual(iso: PairedIsometry, w_samples, tol: float = ISOMETRY_TOL,
                      probe_count: int = DEFAULT_PROBE_COUNT, probe_seed: int = DEFAULT_PROBE_SEED) -> float:
    """
    標本点と検査用係数についての max |‖T_w x‖² - ‖x‖²|

    Raises:
        PremiseViolated: source または target が正規直交系の検査に失敗した場合
    """
    _require_orthonormal_system(iso.source, 'source', tol)
    _require_orthonormal_system(iso.target, 'target', tol)

    samples = np.asarray(w_samples)
    depth = _common_depth(iso.source, iso.target)
    probes = probe_coefficients(iso.rank, probe_count, probe_seed)
    source_images = image_matrices(iso.source, samples, depth) @ probes
    target_images = image_matrices(iso.target, samples, depth) @ (iso.coordinate_map() @ probes)

    source_norms = np.sum(np.abs(source_images) ** 2, axis=1)
    target_norms = np.sum(np.abs(target_images) ** 2, axis=1)
    residual = float(np.max(np.abs(target_norms - source_norms), initial=0.0))
    logger.debug(f"等長性の残差: {residual:.3e} (標本 {samples.shape[0]} 点)")
    return residual


def intertwiner_check(iso: PairedIsometry, u_matrix, w_samples, tol: float = ISOMETRY_TOL,
                      probe_count: int = DEFAULT_PROBE_COUNT, probe_seed: int = DEFAULT_PROBE_SEED) -> float:
    """
    V(T_w x) := T_w(U x) を像の上で定め、直交補空間では恒等写像として延長したときの
    交換関係の残差 max ‖T_w(U x) - V(T_w x)‖

    Raises:
        PremiseViolated: U がユニタリでない、次元が合わない、またはフレームが検査に失敗した場合
    """
    unitary = np.asarray(u_matrix, dtype=np.complex128)
    if unitary.shape != (iso.rank, iso.rank):
        raise PremiseViolated('dimension', f"U の形状 {unitary.shape} がランク {iso.rank} と一致しません")
    defect = float(np.max(np.abs(unitary.conj().T @ unitary - np.eye(iso.rank)), initial=0.0))
    if defect > UNITARY_TOL:
        raise PremiseViolated('unitary', f"||U^H U - I|| = {defect:.3e}")

    _require_orthonormal_system(iso.source, 'source', tol)
    _require_orthonormal_system(iso.target, 'target', tol)

    samples = np.asarray(w_samples)
    images = image_matrices(iso.target, samples, _common_depth(iso.source, iso.target)) @ iso.coordinate_map()
    pseudo = np.linalg.pinv(images)
    depth = images.shape[1]
    intertwiner = images @ unitary @ pseudo + (np.eye(depth) - images @ pseudo)

    probes = probe_coefficients(iso.rank, probe_count, probe_seed)
    expected = images @ (unitary @ probes)
    actual = intertwiner @ (images @ probes)
    residual = float(np.max(np.linalg.norm(expected - actual, axis=1), initial=0.0))
    logger.debug(f"交換関係の残差: {residual:.3e}")
    return residual


def _check_chain(models: tuple[InvariantModel, InvariantModel, InvariantModel], tol: float):
    outer, middle, inner = models
    for label, small, large in (('L ⊆ M', middle, outer), ('N ⊆ L', inner, middle)):
        residual = containment_residual(small.basis, large.basis)
        if residual > tol:
            logger.warning(f"包含関係 {label} が成り立ちません (残差={residual:.3e})")
            raise ChainBroken(f"包含関係 {label} が成り立ちません (残差={residual:.3e})")


def factorization_residual(m_frame: Frame, l_frame: Frame, n_frame: Frame, w_samples,
                           ml_pairing: Sequence[int] = (), ml_phases: Sequence[complex] = (),
                           ln_pairing: Sequence[int] = (), ln_phases: Sequence[complex] = (),
                           models: tuple[InvariantModel, InvariantModel, InvariantModel] | None = None,
                           tol: float = ISOMETRY_TOL, probe_count: int = DEFAULT_PROBE_COUNT,
                           probe_seed: int = DEFAULT_PROBE_SEED) -> float:
    """
    max ‖T^(M,N) x - T^(L,N)(T^(M,L) x)‖

    T^(M,N) は添字をそのまま対応させる。各区間の対応と位相は ml_*, ln_* で与える。

    Raises:
        RankMismatch: ランクが揃っていない場合
        PremiseViolated: いずれかのフレームが正規直交系の検査に失敗した場合
        ChainBroken: models を与えたとき M ⊇ L ⊇ N が成り立たない場合
    """
    if not m_frame.rank == l_frame.rank == n_frame.rank:
        raise RankMismatch(f"ランクが揃っていません: {m_frame.rank}, {l_frame.rank}, {n_frame.rank}")
    if models is not None:
        _check_chain(models, tol)
    for role, frame in (('M', m_frame), ('L', l_frame), ('N', n_frame)):
        _require_orthonormal_system(frame, role, tol)

    direct = PairedIsometry(m_frame, n_frame)
    first = PairedIsometry(m_frame, l_frame, tuple(ml_pairing), tuple(ml_phases))
    second = PairedIsometry(l_frame, n_frame, tuple(ln_pairing), tuple(ln_phases))

    samples = np.asarray(w_samples)
    depth = _common_depth(m_frame, l_frame, n_frame)
    probes = probe_coefficients(direct.rank, probe_count, probe_seed)
    middle_images = image_matrices(l_frame, samples, depth)
    target_images = image_matrices(n_frame, samples, depth)

    expected = target_images @ (direct.coordinate_map() @ probes)
    intermediate = middle_images @ (first.coordinate_map() @ probes)
    # L の像から L の座標を標本点ごとに読み戻す
    recovered = np.linalg.pinv(middle_images) @ intermediate
    composed = target_images @ (second.coordinate_map() @ recovered)

    residual = float(np.max(np.linalg.norm(expected - composed, axis=1), initial=0.0))
    logger.debug(f"分解の残差: {residual:.3e}")
    return residual
