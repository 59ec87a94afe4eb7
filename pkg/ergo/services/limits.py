"""
极限定理诊断

- 精确自协方差 γ_k 与渐近方差 σ²（几何尾界截断）
- 有限 n 方差与 Chebyshev 偏差界（精确递推）
- 大数定律 / 中心极限定理的蒙特卡罗实验
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import stats

from ..config import settings
from ..exceptions import DimensionMismatch, NotCentered, VacuousBound
from ..utils.logger import get_logger
from .chain_core import Distribution, Observable, StochasticChain
from .ergodicity import invariant_measure, md_coefficient
from .mc_engine import additive_sums

logger = get_logger(__name__)

CENTERING_TOLERANCE = 1e-10


class ExperimentMode(str, Enum):
    """实验模式"""
    MEAN = "mean"
    CLT = "clt"


@dataclass
class VarianceReport:
    """σ² 及截断信息"""
    sigma2: float
    truncation_n: int
    tail_bound: float
    kappa: float

    def to_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "truncation_n": self.truncation_n,
            "tail_bound": self.tail_bound,
            "kappa": self.kappa,
        }


@dataclass
class ChebyshevBound:
    """E_init(Σ_{k<n} f̄(X_k))² 与 ℙ(|平均 − E_inv f| > ε) 的 Chebyshev 界"""
    second_moment: float
    bound: float

    @property
    def probability_bound(self) -> float:
        return min(1.0, self.bound)


@dataclass
class ExperimentResult:
    """LLN / CLT 实验结果"""
    mode: ExperimentMode
    n: int
    replicas: int
    samples: np.ndarray
    statistic: float
    mean_inv: float
    sigma2: Optional[float] = None
    epsilon: Optional[float] = None
    exceedance: Optional[float] = None
    chebyshev: Optional[ChebyshevBound] = None
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        result = {
            "mode": self.mode.value,
            "n": self.n,
            "replicas": self.replicas,
            "statistic": self.statistic,
            "mean_inv": self.mean_inv,
            "sample_mean": float(self.samples.mean()),
            "sample_std": float(self.samples.std(ddof=1)) if self.samples.size > 1 else 0.0,
        }
        if self.sigma2 is not None:
            result["sigma2"] = self.sigma2
        if self.epsilon is not None:
            result["epsilon"] = self.epsilon
            result["exceedance"] = self.exceedance
            result["chebyshev_bound"] = self.chebyshev.probability_bound if self.chebyshev else None
        result.update(self.extra)
        return result


def _check_dims(chain: StochasticChain, f: Observable) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.size,):
        raise DimensionMismatch(f"观测值长度 {f.shape} 与状态数 {chain.size} 不符")
    return f


def center(f: Observable, mu: Distribution) -> Observable:
    """f − ⟨f, μ⟩·1"""
    f = np.asarray(f, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if f.shape != mu.shape:
        raise DimensionMismatch(f"观测值与分布维度不一致: {f.shape} vs {mu.shape}")
    return f - float(f @ mu)


def _require_centered(f: np.ndarray, mu: np.ndarray) -> None:
    mean = float(f @ mu)
    if abs(mean) > CENTERING_TOLERANCE:
        raise NotCentered(f"观测值未中心化: ⟨f, μ⟩ = {mean:.3e}")


def autocovariances(
    chain: StochasticChain,
    f: Observable,
    k_max: int,
    mu: Optional[Distribution] = None,
) -> np.ndarray:
    """γ_k = Σ_i μ_i f_i (𝒫ᵏf)_i，k = 0..k_max；f 需已中心化"""
    f = _check_dims(chain, f)
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    _require_centered(f, mu)

    weighted = mu * f
    values = np.empty(k_max + 1)
    current = f.copy()
    for k in range(k_max + 1):
        if k > 0:
            current = chain.matrix @ current
        values[k] = float(weighted @ current)
    return values


def autocovariance(
    chain: StochasticChain,
    f: Observable,
    k: int,
    mu: Optional[Distribution] = None,
) -> float:
    if k < 0:
        raise ValueError(f"滞后必须非负: {k}")
    return float(autocovariances(chain, f, k, mu)[-1])


def _truncation_index(scale: float, kappa: float, tol: float) -> tuple[int, float]:
    """满足 scale·(1−κ)^{K+1}/κ < tol 的最小 K 及对应尾界"""
    if scale == 0.0 or kappa >= 1.0:
        return 0, 0.0
    rate = 1.0 - kappa
    guess = math.log(tol * kappa / scale) / math.log(rate) - 1.0
    k = max(0, int(math.floor(guess)))
    while scale * rate ** (k + 1) / kappa >= tol:
        k += 1
    while k > 0 and scale * rate ** k / kappa < tol:
        k -= 1
    return k, scale * rate ** (k + 1) / kappa


def asymptotic_variance(
    chain: StochasticChain,
    f: Observable,
    tol: Optional[float] = None,
    mu: Optional[Distribution] = None,
) -> VarianceReport:
    """
    σ² = γ₀ + 2Σ_{k=1}^{K} γ_k，f 先关于 μ 中心化

    K 取使 2‖f̄‖_∞·osc(f̄)·(1−κ)^{K+1}/κ < tol 的最小值。

    Raises:
        VacuousBound: κ = 0
    """
    f = _check_dims(chain, f)
    tol = settings.numerics.variance_tolerance if tol is None else tol
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    kappa = md_coefficient(chain, 1)
    if kappa <= 0.0:
        raise VacuousBound("κ = 0，无法给出 σ² 的截断界")

    centered = center(f, mu)
    scale = 2.0 * float(np.abs(centered).max()) * float(centered.max() - centered.min())
    truncation, tail = _truncation_index(scale, kappa, tol)

    gammas = autocovariances(chain, centered, truncation, mu)
    sigma2 = float(gammas[0] + 2.0 * gammas[1:].sum())
    if sigma2 < -1e-10:
        logger.warning(f"σ² 截断结果为负 | σ²: {sigma2:.3e}")
    sigma2 = max(0.0, sigma2)

    logger.info(f"渐近方差 | σ²: {sigma2:.12g} | 截断: {truncation} | 尾界: {tail:.3e}")
    return VarianceReport(sigma2=sigma2, truncation_n=truncation, tail_bound=tail, kappa=kappa)


def finite_n_variance(
    chain: StochasticChain,
    f: Observable,
    n: int,
    mu: Optional[Distribution] = None,
) -> float:
    """n⁻¹E_inv(Σ_{r<n} f̄(X_r))² = γ₀ + 2Σ_{k=1}^{n−1}(1 − k/n)γ_k"""
    if n < 1:
        raise ValueError(f"n 必须为正: {n}")
    f = _check_dims(chain, f)
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    gammas = autocovariances(chain, center(f, mu), n - 1, mu)
    weights = 1.0 - np.arange(1, n) / n
    return float(gammas[0] + 2.0 * (weights * gammas[1:]).sum())


def mean_deviation_bound(
    chain: StochasticChain,
    f: Observable,
    n: int,
    epsilon: float,
    init: Distribution,
    mu: Optional[Distribution] = None,
) -> ChebyshevBound:
    """
    E_init(Σ_{k<n} f̄(X_k))² / (n²ε²)

    a_{m+1} = f̄ + 𝒫a_m，b_{m+1} = f̄² + 2f̄·𝒫a_m + 𝒫b_m，a_0 = b_0 = 0。
    """
    if n < 1 or epsilon <= 0:
        raise ValueError("需要 n ≥ 1 且 ε > 0")
    f = _check_dims(chain, f)
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    centered = center(f, mu)

    first = np.zeros(chain.size)
    second = np.zeros(chain.size)
    for _ in range(n):
        pushed = chain.matrix @ first
        second = centered ** 2 + 2.0 * centered * pushed + chain.matrix @ second
        first = centered + pushed

    moment = float(np.asarray(init, dtype=float) @ second)
    return ChebyshevBound(second_moment=moment, bound=moment / (n * n * epsilon * epsilon))


def _degenerate_ks(samples: np.ndarray) -> float:
    """到点质量 0 的 Kolmogorov–Smirnov 距离"""
    below = float((samples < 0).mean())
    above = float((samples > 0).mean())
    return max(below, above)


def lln_clt_experiment(
    chain: StochasticChain,
    f: Observable,
    n: int,
    m: int,
    mode: ExperimentMode | str,
    init: Distribution,
    seed: int,
    epsilon: Optional[float] = None,
    mu: Optional[Distribution] = None,
    block_size: Optional[int] = None,
) -> ExperimentResult:
    """
    mean 模式：m 个 n⁻¹Σ_{k<n} f(X_k)，统计量为 max|样本 − E_inv f|；
    clt 模式：m 个 n^{−1/2}Σ_{k<n}(f(X_k) − E_inv f)，统计量为到 N(0, σ²) 的 KS 距离。

    初始分布可以不是不变测度。
    """
    if n < 1 or m < 1:
        raise ValueError("需要 n ≥ 1 且 m ≥ 1")
    mode = ExperimentMode(mode)
    f = _check_dims(chain, f)
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    mean_inv = float(f @ mu)

    sums = additive_sums(chain, init, n, f, m, seed, block_size=block_size)

    if mode == ExperimentMode.MEAN:
        samples = sums / n
        result = ExperimentResult(
            mode=mode,
            n=n,
            replicas=m,
            samples=samples,
            statistic=float(np.abs(samples - mean_inv).max()),
            mean_inv=mean_inv,
        )
        if epsilon is not None:
            result.epsilon = epsilon
            result.exceedance = float((np.abs(samples - mean_inv) > epsilon).mean())
            result.chebyshev = mean_deviation_bound(chain, f, n, epsilon, init, mu)
        logger.info(f"LLN 实验 | n: {n} | m: {m} | 最大偏差: {result.statistic:.4g}")
        return result

    samples = (sums - n * mean_inv) / math.sqrt(n)
    sigma2 = asymptotic_variance(chain, f, mu=mu).sigma2
    if sigma2 <= 1e-15:
        statistic = _degenerate_ks(samples)
    else:
        statistic = float(stats.kstest(samples, "norm", args=(0.0, math.sqrt(sigma2))).statistic)

    logger.info(f"CLT 实验 | n: {n} | m: {m} | σ²: {sigma2:.6g} | KS: {statistic:.4g}")
    return ExperimentResult(
        mode=mode,
        n=n,
        replicas=m,
        samples=samples,
        statistic=statistic,
        mean_inv=mean_inv,
        sigma2=sigma2,
    )
