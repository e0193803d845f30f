"""Dirichlet 空間モデル

重み付き内積 <f,g>_D = sum (k+1) f_k conj(g_k)、H への等長埋め込み
f -> sum_j z^j T_w^{*j} f、その逆写像、および随伴関係の恒等式。
"""
import logging
from dataclasses import dataclass

import numpy as np

from service.bidisc import (
    CirclePoly,
    SymVector,
    frozen_array,
    inner_product,
    reconstruct,
    shift,
    slice_z0,
)

logger = logging.getLogger(__name__)

QUADRATURE_TOL = 1e-10
QUADRATURE_MAX_ROUNDS = 6


@dataclass(frozen=True, eq=False)
class DirichletPoly:
    """Dirichlet 空間の多項式 sum f_k w^k"""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', frozen_array(self.coeffs))

    @property
    def deg(self) -> int:
        return self.coeffs.shape[0] - 1

    def norm_squared(self) -> float:
        return dirichlet_inner(self, self).real

    def backward_shift(self) -> 'DirichletPoly':
        if self.deg == 0:
            return DirichletPoly(np.zeros(1, dtype=np.complex128))
        return DirichletPoly(self.coeffs[1:])

    def as_circle(self) -> CirclePoly:
        return CirclePoly(self.coeffs)


def _padded(f: DirichletPoly, g: DirichletPoly) -> tuple[np.ndarray, np.ndarray]:
    deg = max(f.deg, g.deg)
    return frozen_array(f.coeffs, deg + 1), frozen_array(g.coeffs, deg + 1)


def dirichlet_inner(f: DirichletPoly, g: DirichletPoly) -> complex:
    a, b = _padded(f, g)
    weights = np.arange(a.shape[0]) + 1.0
    return complex(np.sum(weights * a * np.conj(b)))


def _quadrature_value(a: np.ndarray, b: np.ndarray, radial_nodes: int, angular_nodes: int) -> complex:
    # s = r^2 とおくと r dr = ds/2 となり、(1/pi) の因子と角度平均で重み和 1 になる
    x, weights = np.polynomial.legendre.leggauss(radial_nodes)
    s = (x + 1.0) / 2.0
    weights = weights / 2.0
    theta = 2.0 * np.pi * np.arange(angular_nodes) / angular_nodes

    points = np.sqrt(s)[:, None] * np.exp(1j * theta)[None, :]
    derivative_weights = np.arange(a.shape[0]) + 1.0
    fa = np.polynomial.polynomial.polyval(points, derivative_weights * a)
    gb = np.polynomial.polynomial.polyval(points, derivative_weights * b)

    angular_mean = np.mean(fa * np.conj(gb), axis=1)
    return complex(np.sum(weights * angular_mean))


def dirichlet_inner_quadrature(f: DirichletPoly, g: DirichletPoly, tol: float = QUADRATURE_TOL) -> complex:
    """
    面積積分 (1/pi) iint_D (wf)' conj((wg)') dA による内積（検証用）

    Args:
        f: 第一引数
        g: 第二引数
        tol: 連続する二回の値の差がこれ未満になるまで節点数を倍にする

    Returns:
        数値積分の値
    """
    a, b = _padded(f, g)
    deg = a.shape[0] - 1
    radial_nodes = deg + 1
    angular_nodes = 4 * deg + 8

    previous = _quadrature_value(a, b, radial_nodes, angular_nodes)
    for _ in range(QUADRATURE_MAX_ROUNDS):
        radial_nodes *= 2
        angular_nodes *= 2
        current = _quadrature_value(a, b, radial_nodes, angular_nodes)
        if abs(current - previous) < tol:
            return current
        previous = current

    logger.warning(f"数値積分が収束しませんでした (deg={deg}, 節点数={radial_nodes}x{angular_nodes})")
    return previous


def embed(f: DirichletPoly) -> SymVector:
    """f -> sum_j z^j T_w^{*j} f（H への等長埋め込み）"""
    return reconstruct(f.as_circle())


def restrict(v: SymVector) -> DirichletPoly:
    """埋め込みの逆写像 q(z,w) -> q(0,w)"""
    return DirichletPoly(slice_z0(v).coeffs)


def adjoint_relation_residual(f: DirichletPoly, g: DirichletPoly) -> float:
    """|<q_f, T_w^* q_g>_{H^2(T^2)} - <f, T_w^* g>_D|（T_w^* は射影前の双円板上で作用）"""
    q_f = embed(f).to_bidisc()
    q_g = embed(g).to_bidisc()
    lhs = inner_product(q_f, shift(q_g, 'w', 'adjoint'))
    rhs = dirichlet_inner(f, g.backward_shift())
    return abs(lhs - rhs)
