"""
非负矩阵的谱半径

两种幂迭代：
- spectral_radius: 通用非负矩阵（可约、可幂零），对 (M + I)/2 迭代，
  先按至多 dim 步检测幂零；用于耦合算子 V 与带势算子 W、A。
- perron_root: 本原矩阵的 Perron 根，直接对 M 迭代并给出
  Collatz–Wielandt 区间 [lower, upper]；用于倾斜算子 T^β。
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config import settings
from ..exceptions import NoConvergenceWarning
from ..utils.logger import get_logger

logger = get_logger(__name__)

# 上界步间相对变化低于此值（数个 ulp）视为停滞
_STAGNATION = 4 * np.finfo(float).eps


@dataclass
class SpectralResult:
    """幂迭代结果"""
    radius: float
    iterations: int
    converged: bool
    # 上下界（Collatz–Wielandt），对幂零矩阵均为 0
    lower: float
    upper: float
    # 近似特征向量，最大分量归一化为 1
    vector: np.ndarray
    nilpotent: bool = False


def _check_nonnegative(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"需要方阵，实际形状: {matrix.shape}")
    if np.any(matrix < 0):
        raise ValueError("幂迭代要求非负矩阵")
    return matrix


def nilpotency_index(matrix: np.ndarray) -> Optional[int]:
    """
    返回使 Mᵏ = 0 的最小 k，非幂零时返回 None

    M 非负时 Mᵏ1 = 0 当且仅当 Mᵏ = 0，且幂零指数不超过维数。
    """
    matrix = _check_nonnegative(matrix)
    vector = np.ones(matrix.shape[0])
    for k in range(1, matrix.shape[0] + 1):
        vector = matrix @ vector
        peak = vector.max()
        if peak == 0.0:
            return k
        vector = vector / peak
    return None


def spectral_radius(
    matrix: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    label: str = "M",
) -> SpectralResult:
    """
    非负矩阵的谱半径

    对 B = (M + I)/2 做幂迭代：B 的主特征值 (r + 1)/2 在模意义下唯一，
    迭代向量始终严格为正，因此每步都有 Collatz–Wielandt 上界。
    上下界闭合（相对 tol）或上界停滞时停止。

    Args:
        matrix: 非负方阵
        tol: 相对容差，缺省取 settings.numerics.power_tolerance
        max_iter: 迭代上限，缺省取 settings.numerics.power_max_iterations
        label: 日志中的算子名称
    """
    matrix = _check_nonnegative(matrix)
    tol = settings.numerics.power_tolerance if tol is None else tol
    max_iter = settings.numerics.power_max_iterations if max_iter is None else max_iter
    dim = matrix.shape[0]

    index = nilpotency_index(matrix)
    if index is not None:
        logger.debug(f"谱半径计算 | 算子: {label} | 幂零指数: {index}")
        return SpectralResult(
            radius=0.0,
            iterations=index,
            converged=True,
            lower=0.0,
            upper=0.0,
            vector=np.zeros(dim),
            nilpotent=True,
        )

    shifted = 0.5 * (matrix + np.eye(dim))
    x = np.ones(dim)
    previous = np.inf
    lower = upper = 0.0
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        y = shifted @ x
        ratios = y / x
        lower, upper = float(ratios.min()), float(ratios.max())
        x = y / y.max()
        if upper - lower <= tol * upper or abs(previous - upper) <= _STAGNATION * upper:
            converged = True
            break
        previous = upper

    if not converged:
        warnings.warn(
            f"{label} 的幂迭代在 {max_iter} 步内未收敛，返回当前估计",
            NoConvergenceWarning,
            stacklevel=2,
        )
        logger.warning(f"幂迭代未收敛 | 算子: {label} | 上界: {2 * upper - 1:.12g}")

    radius = max(0.0, 2.0 * upper - 1.0)
    logger.debug(
        f"谱半径计算 | 算子: {label} | r: {radius:.12g} | 迭代: {iterations} | 收敛: {converged}"
    )
    return SpectralResult(
        radius=radius,
        iterations=iterations,
        converged=converged,
        lower=max(0.0, 2.0 * lower - 1.0),
        upper=radius,
        vector=x,
    )


def perron_root(
    matrix: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    label: str = "T",
) -> SpectralResult:
    """
    本原非负矩阵的 Perron 根与正特征向量

    M 的每行至少有一个正元素时，从 1 出发的迭代向量保持严格为正，
    min/max (Mx)_i / x_i 给出单调收紧的区间。
    """
    matrix = _check_nonnegative(matrix)
    tol = settings.numerics.perron_tolerance if tol is None else tol
    max_iter = settings.numerics.power_max_iterations if max_iter is None else max_iter

    if np.any(matrix.sum(axis=1) <= 0):
        raise ValueError("Perron 迭代要求每行至少有一个正元素")

    x = np.ones(matrix.shape[0])
    lower = upper = 0.0
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        y = matrix @ x
        ratios = y / x
        lower, upper = float(ratios.min()), float(ratios.max())
        x = y / y.max()
        if upper - lower <= tol * upper:
            converged = True
            break

    if not converged:
        warnings.warn(
            f"{label} 的 Perron 迭代在 {max_iter} 步内未收敛，返回当前估计",
            NoConvergenceWarning,
            stacklevel=2,
        )
        logger.warning(f"Perron 迭代未收敛 | 算子: {label} | 区间: [{lower:.12g}, {upper:.12g}]")

    # 区间内取几何平均，ln r 的误差不超过区间宽度的一半（对数尺度）
    radius = float(np.sqrt(lower * upper))
    return SpectralResult(
        radius=radius,
        iterations=iterations,
        converged=converged,
        lower=lower,
        upper=upper,
        vector=x,
    )


def dense_spectral_radius(matrix: np.ndarray) -> float:
    """稠密特征值求解的谱半径（小规模对照用）"""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))
