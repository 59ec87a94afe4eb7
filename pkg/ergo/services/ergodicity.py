"""
遍历性分析

- Markov–Dobrushin 系数 κ_{n0}、κ、κ₀ 与成对重叠矩阵
- 不变测度：线性求解与 Cesàro 平均两种独立方法
- 最坏情形全变差包络与 2(1−κ)ⁿ 几何界
- 集合包络 m⁽ⁿ⁾(A)、M⁽ⁿ⁾(A) 与条件期望衰减
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..config import settings
from ..exceptions import (
    DimensionMismatch,
    NoConvergence,
    NonUniqueWarning,
    VacuousBoundWarning,
)
from ..utils.logger import get_logger
from .chain_core import Distribution, Observable, StochasticChain, n_step

logger = get_logger(__name__)


class InvariantMethod(str, Enum):
    """不变测度求解方法"""
    LINEAR_SOLVE = "linear_solve"
    CESARO = "cesaro"


@dataclass
class ContractionReport:
    """收缩系数汇总"""
    n0: int
    kappa_n0: float
    kappa: float
    kappa0: float
    pairwise: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n0": self.n0,
            "kappa_n0": self.kappa_n0,
            "kappa": self.kappa,
            "kappa0": self.kappa0,
            "pairwise": self.pairwise.tolist(),
        }


@dataclass
class ConvergenceEnvelope:
    """n = 0..n_max 的最坏情形全变差与几何界"""
    worst_tv: np.ndarray
    bound: np.ndarray
    kappa: float
    vacuous: bool
    bound_holds: bool

    @property
    def n_max(self) -> int:
        return int(self.worst_tv.shape[0]) - 1


@dataclass
class DecayProfile:
    """max_x |(𝒫ᵏf)(x) − ⟨f, μ⟩| 及其包络 osc(f)(1−κ)ᵏ"""
    deviation: np.ndarray
    envelope: np.ndarray
    oscillation: float
    kappa: float


def _pairwise_overlap(matrix: np.ndarray) -> np.ndarray:
    overlap = np.minimum(matrix[:, None, :], matrix[None, :, :]).sum(axis=-1)
    np.fill_diagonal(overlap, 1.0)
    return np.clip(overlap, 0.0, 1.0)


def md_coefficient(chain: StochasticChain, n0: int = 1) -> float:
    """κ_{n0} = min_{i,i'} Σ_j min(p_ij^(n0), p_i'j^(n0))"""
    if n0 < 1:
        raise ValueError(f"n0 必须为正: {n0}")
    return float(_pairwise_overlap(n_step(chain, n0)).min())


def pairwise_md(chain: StochasticChain) -> np.ndarray:
    """κ(i, i') 矩阵，对称，对角为 1"""
    return _pairwise_overlap(chain.matrix)


def md_coefficient_min_entry(chain: StochasticChain) -> float:
    """κ₀ = min_{ij} p_ij"""
    return float(chain.matrix.min())


def contraction_report(chain: StochasticChain, n0: int = 1) -> ContractionReport:
    pairwise = pairwise_md(chain)
    report = ContractionReport(
        n0=n0,
        kappa_n0=md_coefficient(chain, n0),
        kappa=float(pairwise.min()),
        kappa0=md_coefficient_min_entry(chain),
        pairwise=pairwise,
    )
    logger.info(
        f"收缩系数 | κ_{n0}: {report.kappa_n0:.6g} | κ: {report.kappa:.6g} | κ₀: {report.kappa0:.6g}"
    )
    return report


def has_positive_md(chain: StochasticChain, n0_max: Optional[int] = None) -> bool:
    """是否存在 n0 ≤ n0_max（缺省 N）使 κ_{n0} > 0"""
    n0_max = n0_max or chain.size
    power = np.eye(chain.size)
    for _ in range(n0_max):
        power = power @ chain.matrix
        if _pairwise_overlap(power).min() > 0:
            return True
    return False


def invariance_residual(chain: StochasticChain, mu: Distribution) -> float:
    """‖μ𝒫 − μ‖₁"""
    mu = np.asarray(mu, dtype=float)
    return float(np.abs(mu @ chain.matrix - mu).sum())


def _linear_solve(chain: StochasticChain) -> Distribution:
    n = chain.size
    system = np.vstack((chain.matrix.T - np.eye(n), np.ones((1, n))))
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    mu, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def _cesaro(chain: StochasticChain, start: int) -> Distribution:
    """
    倍增 Cesàro 平均：A_{2n} = (A_n + 𝒫ⁿA_n)/2，A_1 = I

    第 start 行相邻两次之差的 ℓ¹ 范数低于 cesaro_tolerance 时停止。
    """
    tol = settings.numerics.cesaro_tolerance
    max_doublings = settings.numerics.cesaro_max_doublings

    average = np.eye(chain.size)
    power = chain.matrix.copy()
    row = average[start].copy()

    for doubling in range(1, max_doublings + 1):
        average = 0.5 * (average + power @ average)
        power = power @ power
        power /= power.sum(axis=1, keepdims=True)

        new_row = average[start]
        change = float(np.abs(new_row - row).sum())
        logger.debug(f"Cesàro 倍增 | 次数: {doubling} | 时域: 2^{doubling} | 变化: {change:.3e}")
        row = new_row.copy()
        if change < tol:
            return row / row.sum()

    raise NoConvergence(f"Cesàro 平均在 {max_doublings} 次倍增内未收敛")


def invariant_measure(
    chain: StochasticChain,
    method: InvariantMethod | str = InvariantMethod.LINEAR_SOLVE,
    start: int = 0,
) -> Distribution:
    """
    不变测度 μ𝒫 = μ

    Args:
        method: linear_solve 或 cesaro
        start: Cesàro 方法的起始状态 i₀

    Warns:
        NonUniqueWarning: 所有 n0 ≤ N 上 κ_{n0} = 0，结果可能依赖方法或起点
    """
    method = InvariantMethod(method)
    if not has_positive_md(chain):
        warnings.warn(
            f"所有 n0 ≤ {chain.size} 上 κ_n0 = 0，不变测度可能不唯一"
            + (f"（Cesàro 起点 i₀ = {start}）" if method == InvariantMethod.CESARO else ""),
            NonUniqueWarning,
            stacklevel=2,
        )

    if method == InvariantMethod.LINEAR_SOLVE:
        mu = _linear_solve(chain)
    else:
        if not 0 <= start < chain.size:
            raise DimensionMismatch(f"起始状态 {start} 超出范围")
        mu = _cesaro(chain, start)

    logger.info(
        f"不变测度 | 方法: {method.value} | 残差: {invariance_residual(chain, mu):.3e}"
    )
    return mu


def convergence_envelope(
    chain: StochasticChain,
    n_max: int,
    mu: Optional[Distribution] = None,
) -> ConvergenceEnvelope:
    """
    worst_tv(n) = max_x ‖δₓ𝒫ⁿ − μ‖_TV 与 bound(n) = 2(1−κ)ⁿ

    Warns:
        VacuousBoundWarning: κ = 0，bound ≡ 2
    """
    if n_max < 0:
        raise ValueError(f"n_max 必须非负: {n_max}")
    if mu is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonUniqueWarning)
            mu = invariant_measure(chain)
    mu = np.asarray(mu, dtype=float)

    kappa = md_coefficient(chain, 1)
    vacuous = kappa <= 0.0
    if vacuous:
        warnings.warn("κ = 0，几何界退化为 2", VacuousBoundWarning, stacklevel=2)

    worst = np.empty(n_max + 1)
    power = np.eye(chain.size)
    for n in range(n_max + 1):
        if n > 0:
            power = power @ chain.matrix
        worst[n] = np.abs(power - mu[None, :]).sum(axis=1).max()

    steps = np.arange(n_max + 1)
    bound = np.full(n_max + 1, 2.0) if vacuous else 2.0 * (1.0 - kappa) ** steps
    bound_holds = bool(np.all(worst <= bound + 1e-12))
    if not bound_holds:
        logger.warning(f"几何界被违反 | κ: {kappa:.6g} | 最大超出: {(worst - bound).max():.3e}")

    logger.info(f"收敛包络 | n_max: {n_max} | κ: {kappa:.6g} | worst_tv({n_max}): {worst[-1]:.3e}")
    return ConvergenceEnvelope(
        worst_tv=worst,
        bound=bound,
        kappa=kappa,
        vacuous=vacuous,
        bound_holds=bound_holds,
    )


def set_envelopes(
    chain: StochasticChain,
    subset: Sequence[int],
    n_max: int,
) -> tuple[np.ndarray, np.ndarray]:
    """m⁽ⁿ⁾(A) = min_i P_i(n, A)，M⁽ⁿ⁾(A) = max_i P_i(n, A)，n = 0..n_max"""
    indicator = np.zeros(chain.size)
    indicator[list(subset)] = 1.0
    lower = np.empty(n_max + 1)
    upper = np.empty(n_max + 1)
    values = indicator
    for n in range(n_max + 1):
        if n > 0:
            values = chain.matrix @ values
        lower[n] = values.min()
        upper[n] = values.max()
    return lower, upper


def sup_set_deviation(p: Distribution, q: Distribution) -> float:
    """sup_A |p(A) − q(A)|，穷举全部子集（N ≤ 12）"""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    n = diff.shape[0]
    if n > 12:
        raise ValueError(f"子集穷举仅支持 N ≤ 12，实际 N = {n}")
    masks = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    return float(np.abs(masks @ diff).max())


def conditional_decay(
    chain: StochasticChain,
    f: Observable,
    horizon: int,
    mu: Optional[Distribution] = None,
) -> DecayProfile:
    """
    max_x |(𝒫ᵏf)(x) − ⟨f, μ⟩|，k = 0..horizon，包络为 osc(f)·(1−κ)ᵏ
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != chain.size:
        raise DimensionMismatch(f"观测值长度 {f.shape[0]} 与状态数 {chain.size} 不符")
    if mu is None:
        mu = invariant_measure(chain)
    mean = float(f @ mu)
    kappa = md_coefficient(chain, 1)
    oscillation = float(f.max() - f.min())

    deviation = np.empty(horizon + 1)
    values = f.copy()
    for k in range(horizon + 1):
        if k > 0:
            values = chain.matrix @ values
        deviation[k] = np.abs(values - mean).max()

    envelope = oscillation * (1.0 - kappa) ** np.arange(horizon + 1)
    return DecayProfile(deviation=deviation, envelope=envelope, oscillation=oscillation, kappa=kappa)


def decay_slope(values: Sequence[float], start: int, stop: int) -> float:
    """ln values[n] 在 n ∈ [start, stop] 上的最小二乘斜率"""
    values = np.asarray(values, dtype=float)
    steps = np.arange(start, stop + 1)
    window = values[start : stop + 1]
    if window.shape[0] < 2 or np.any(window <= 0):
        raise ValueError("斜率拟合需要至少两个正值")
    slope, _ = np.polyfit(steps, np.log(window), 1)
    return float(slope)
