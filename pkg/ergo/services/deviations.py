"""
大偏差

- 倾斜算子 T^β = diag(e^{βf})·𝒫 与 H(β) = ln r(T^β)（Perron 根）
- 有限 n 的 H_n(β, x) = n⁻¹ ln (T^β)ⁿ1(x)
- Legendre 变换 L(α) = sup_β(αβ − H(β))：网格求最大 + Brent 有界细化，边界处自动扩展
- 精确尾概率：对 (状态, 整数化部分和) 做动态规划，与 −L̃(ε) + δ_n 比较
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import partial, reduce
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ..config import settings
from ..exceptions import (
    BracketFailure,
    DimensionMismatch,
    NotPrimitive,
    TableTooLarge,
    ZeroProbability,
)
from ..utils.logger import get_logger
from ..utils.memory_utils import estimate_array_mb
from .chain_core import Observable, StochasticChain, is_primitive
from .replica_pool import get_replica_pool
from .spectral import perron_root

logger = get_logger(__name__)


class BetaRange(str, Enum):
    """Legendre 上确界的 β 取值范围"""
    ALL = "all"
    NONNEGATIVE = "nonnegative"
    NONPOSITIVE = "nonpositive"


@dataclass
class TiltedOperator:
    beta: float
    matrix: np.ndarray


@dataclass
class PerronData:
    """
    H(β) 及 Perron 根区间与正特征向量

    radius、lower、upper 属于 e^{−shift}·T^β，H(β) = shift + ln radius。
    """
    beta: float
    value: float
    radius: float
    lower: float
    upper: float
    vector: np.ndarray
    shift: float = 0.0

    @property
    def eigenvector_ratio(self) -> float:
        """h_max / h_min"""
        return float(self.vector.max() / self.vector.min())


@dataclass
class LegendreResult:
    value: float
    beta_star: float
    extensions: int = 0


@dataclass
class RateFunctionTable:
    beta_grid: np.ndarray
    H_values: np.ndarray
    alpha_grid: np.ndarray
    L_values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "beta_grid": self.beta_grid.tolist(),
            "H_values": self.H_values.tolist(),
            "alpha_grid": self.alpha_grid.tolist(),
            "L_values": [float(v) if np.isfinite(v) else None for v in self.L_values],
        }


@dataclass
class TailCheck:
    """精确尾概率与大偏差界的比较"""
    epsilon: float
    n: int
    probability: float
    log_tail_rate: float
    L: float
    L_tilde: float
    bound: float
    slack: float
    beta_star: Optional[float]
    denominator: int
    holds: Optional[bool]

    def to_dict(self) -> dict:
        def _finite(value):
            return float(value) if value is not None and np.isfinite(value) else None

        return {
            "epsilon": self.epsilon,
            "n": self.n,
            "probability": self.probability,
            "log_tail_rate": _finite(self.log_tail_rate),
            "L": _finite(self.L),
            "L_tilde": _finite(self.L_tilde),
            "bound": _finite(self.bound),
            "slack": self.slack,
            "beta_star": self.beta_star,
            "denominator": self.denominator,
            "holds": self.holds,
        }


def _check_observable(chain: StochasticChain, f: Observable) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.size,):
        raise DimensionMismatch(f"观测值长度 {f.shape} 与状态数 {chain.size} 不符")
    return f


def require_primitive(chain: StochasticChain) -> int:
    """返回使 𝒫ᵏ > 0 的最小 k，不存在时抛出 NotPrimitive"""
    power = is_primitive(chain)
    if power is None:
        raise NotPrimitive("转移矩阵的任何幂都不严格为正")
    return power


def tilted_operator(chain: StochasticChain, f: Observable, beta: float) -> TiltedOperator:
    """T^β = diag(e^{βf})·𝒫"""
    f = _check_observable(chain, f)
    return TiltedOperator(beta=float(beta), matrix=np.exp(beta * f)[:, None] * chain.matrix)


def _scaled_tilt(f: np.ndarray, matrix: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """e^{−shift}·T^β，shift 取 β·max f 或 β·min f 使所有权重 ≤ 1；指数下限 −600"""
    shift = float(beta * (f.max() if beta >= 0 else f.min()))
    weights = np.exp(np.maximum(beta * f - shift, -600.0))
    return weights[:, None] * matrix, shift


def perron_data(
    chain: StochasticChain,
    f: Observable,
    beta: float,
    check: bool = True,
) -> PerronData:
    """
    H(β) = ln r(T^β) 与 Perron 特征向量

    Raises:
        NotPrimitive: check 为真且 𝒫 不是本原矩阵
    """
    if check:
        require_primitive(chain)
    matrix, shift = _scaled_tilt(_check_observable(chain, f), chain.matrix, beta)
    result = perron_root(matrix, label=f"T^{beta:g}")
    return PerronData(
        beta=float(beta),
        value=shift + math.log(result.radius),
        radius=result.radius,
        lower=result.lower,
        upper=result.upper,
        vector=result.vector,
        shift=shift,
    )


def scaled_cgf(chain: StochasticChain, f: Observable, beta: float, check: bool = True) -> float:
    """H(β)"""
    return perron_data(chain, f, beta, check).value


def finite_cgf(chain: StochasticChain, f: Observable, beta: float, n: int) -> np.ndarray:
    """H_n(β, x) = n⁻¹ ln (T^β)ⁿ1(x)，逐步归一化防止溢出"""
    if n < 1:
        raise ValueError(f"n 必须为正: {n}")
    operator = tilted_operator(chain, f, beta).matrix
    vector = np.ones(chain.size)
    log_scale = 0.0
    for _ in range(n):
        vector = operator @ vector
        peak = vector.max()
        vector = vector / peak
        log_scale += math.log(peak)
    return (np.log(vector) + log_scale) / n


def cgf_derivatives(
    chain: StochasticChain,
    f: Observable,
    step: float = 1e-3,
) -> tuple[float, float]:
    """
    H′(0) 与 H″(0)：步长 step 与 step/2 的中心差分，再做一次 Richardson 外推
    """
    require_primitive(chain)
    h = partial(scaled_cgf, chain, f, check=False)
    h0 = h(0.0)

    def _first(s: float) -> float:
        return (h(s) - h(-s)) / (2.0 * s)

    def _second(s: float) -> float:
        return (h(s) - 2.0 * h0 + h(-s)) / (s * s)

    first = (4.0 * _first(step / 2) - _first(step)) / 3.0
    second = (4.0 * _second(step / 2) - _second(step)) / 3.0
    return first, second


def evaluate_grid(cgf: Callable[[float], float], beta_grid: Sequence[float]) -> np.ndarray:
    """在 β 网格上并行求 H，按网格序合并"""
    return np.asarray(get_replica_pool().map_blocks(cgf, list(beta_grid)), dtype=float)


def legendre(
    cgf: Callable[[float], float],
    alpha: float,
    beta_min: Optional[float] = None,
    beta_max: Optional[float] = None,
    grid_points: Optional[int] = None,
    beta_range: BetaRange | str = BetaRange.ALL,
) -> LegendreResult:
    """
    sup_β (αβ − H(β))

    先在网格上取最大，极大点落在网格边缘时把该侧端点加倍且至少外移 1（至多
    max_grid_extensions 次），再在相邻格点之间做有界 Brent 细化（β 容差 1e-10）。

    Raises:
        BracketFailure: 扩展上限后极大点仍在边缘
    """
    cfg = settings.deviations
    beta_range = BetaRange(beta_range)
    lo = cfg.beta_min if beta_min is None else beta_min
    hi = cfg.beta_max if beta_max is None else beta_max
    points = grid_points or cfg.grid_points
    if beta_range == BetaRange.NONNEGATIVE:
        lo = 0.0
    elif beta_range == BetaRange.NONPOSITIVE:
        hi = 0.0

    for extension in range(cfg.max_grid_extensions + 1):
        grid = np.union1d(np.linspace(lo, hi, points), [0.0])
        values = alpha * grid - evaluate_grid(cgf, grid)
        best = int(np.argmax(values))
        zero_index = int(np.searchsorted(grid, 0.0))
        at_zero = float(values[zero_index])
        noise = 1e-10 * max(1.0, float(np.abs(alpha * grid).max()))
        # 与 β = 0 处的值在噪声内持平时以 0 为极大点
        peak = best if values[best] - at_zero > noise else zero_index

        at_low_edge = peak == 0 and beta_range != BetaRange.NONNEGATIVE
        at_high_edge = peak == grid.shape[0] - 1 and beta_range != BetaRange.NONPOSITIVE
        if at_low_edge or at_high_edge:
            if at_low_edge:
                lo = min(2.0 * lo, lo - 1.0)
            if at_high_edge:
                hi = max(2.0 * hi, hi + 1.0)
            logger.debug(f"Legendre 网格扩展 | α: {alpha:.6g} | 范围: [{lo:g}, {hi:g}]")
            continue

        if peak == zero_index:
            return LegendreResult(value=max(0.0, at_zero), beta_star=0.0, extensions=extension)

        left = grid[max(best - 1, 0)]
        right = grid[min(best + 1, grid.shape[0] - 1)]
        refined = minimize_scalar(
            lambda b: cgf(b) - alpha * b,
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-10},
        )
        candidate = -float(refined.fun)
        if candidate >= values[best]:
            return LegendreResult(value=candidate, beta_star=float(refined.x), extensions=extension)
        return LegendreResult(value=float(values[best]), beta_star=float(grid[best]), extensions=extension)

    raise BracketFailure(
        f"α = {alpha:.6g} 的 Legendre 极大点在 {cfg.max_grid_extensions} 次扩展后仍位于网格边缘"
    )


def legendre_pair(
    cgf: Callable[[float], float],
    alpha: float,
    mean: float = 0.0,
    delta0: Optional[float] = None,
    **grid_options,
) -> tuple[float, float]:
    """
    (L(α), L̃(α))

    L̃ 只用与偏离方向同号的 β：α > mean 时为 sup_{β≥0}((α−δ₀)β − H(β))，
    α < mean 时为 sup_{β≤0}((α+δ₀)β − H(β))，否则为 0。
    """
    delta0 = settings.deviations.delta0 if delta0 is None else delta0
    full = legendre(cgf, alpha, **grid_options).value
    if alpha > mean:
        tilde = legendre(cgf, alpha - delta0, beta_range=BetaRange.NONNEGATIVE, **grid_options).value
    elif alpha < mean:
        tilde = legendre(cgf, alpha + delta0, beta_range=BetaRange.NONPOSITIVE, **grid_options).value
    else:
        tilde = 0.0
    return full, tilde


def rate_function_table(
    chain: StochasticChain,
    f: Observable,
    beta_grid: Sequence[float],
    alpha_grid: Sequence[float],
    **grid_options,
) -> RateFunctionTable:
    """
    β 网格上的 H 与 α 网格上的 L（+∞ 处记为 inf）

    grid_options（beta_min、beta_max、grid_points）原样传给 legendre。
    """
    f = _check_observable(chain, f)
    require_primitive(chain)
    cgf = partial(scaled_cgf, chain, f, check=False)

    beta_grid = np.sort(np.asarray(beta_grid, dtype=float))
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    H_values = evaluate_grid(cgf, beta_grid)

    L_values = np.empty(alpha_grid.shape[0])
    for i, alpha in enumerate(alpha_grid):
        try:
            L_values[i] = legendre(cgf, float(alpha), **grid_options).value
        except BracketFailure:
            L_values[i] = np.inf

    logger.info(f"速率函数表 | β 点数: {beta_grid.shape[0]} | α 点数: {alpha_grid.shape[0]}")
    return RateFunctionTable(beta_grid=beta_grid, H_values=H_values, alpha_grid=alpha_grid, L_values=L_values)


def integer_lattice(f: Observable, denominator: int) -> tuple[np.ndarray, int]:
    """round(f·D) 除以各值的最大公约数，返回 (整数值, 公约数)"""
    scaled = np.rint(np.asarray(f, dtype=float) * denominator).astype(np.int64)
    divisor = reduce(math.gcd, (abs(int(v)) for v in scaled if v != 0), 0) or 1
    return scaled // divisor, divisor


def tail_probability(
    chain: StochasticChain,
    steps: np.ndarray,
    threshold: int,
    n: int,
    start: int,
) -> float:
    """
    ℙ_start(Σ_{k<n} steps(X_k) ≥ threshold)，对 (状态, 部分和) 做 DP

    Raises:
        TableTooLarge: 表格单元数超过 max_table_cells
    """
    steps = np.asarray(steps, dtype=np.int64)
    # 部分和范围，起点 0 必须在表内
    low = min(0, n * int(steps.min()))
    high = max(0, n * int(steps.max()))
    width = high - low + 1
    cells = chain.size * width
    if cells > settings.deviations.max_table_cells:
        raise TableTooLarge(f"DP 表格需要 {cells} 个单元，超过上限 {settings.deviations.max_table_cells}")
    logger.debug(f"DP 表格 | 单元: {cells} | 内存: {estimate_array_mb(chain.size, width):.1f}MB")

    offset = -low
    table = np.zeros((chain.size, width))
    table[start, offset] = 1.0
    for k in range(n):
        shifted = np.zeros_like(table)
        for x in range(chain.size):
            step = int(steps[x])
            if step >= 0:
                shifted[x, step:] = table[x, : width - step]
            else:
                shifted[x, :step] = table[x, -step:]
        if k < n - 1:
            table = chain.matrix.T @ shifted
        else:
            table = shifted

    totals = table.sum(axis=0)
    first = max(0, threshold + offset)
    if first >= width:
        return 0.0
    return float(min(1.0, totals[first:].sum()))


def ld_tail_exact(
    chain: StochasticChain,
    f: Observable,
    epsilon: float,
    n: int,
    init: int,
    allow_zero: bool = True,
    beta_min: Optional[float] = None,
    beta_max: Optional[float] = None,
    grid_points: Optional[int] = None,
) -> TailCheck:
    """
    精确尾概率 ℙ_x(n⁻¹Σ_{k<n} f(X_k) ≥ ε) 与 −L̃(ε) + δ_n 的比较

    f 先按 denominator 整数化，所有量（概率、H、L）都针对整数化后的观测值计算。
    δ_n = n⁻¹ ln(h_max/h_min)，h 为最优 β 处的 Perron 特征向量。
    L(ε) = +∞（ε 在 f 的取值范围外）时记为 inf，不影响与 L̃ 的比较。

    Raises:
        TableTooLarge: DP 表格过大
        ZeroProbability: allow_zero 为假且概率为 0
    """
    f = _check_observable(chain, f)
    if n < 1:
        raise ValueError(f"n 必须为正: {n}")
    if not 0 <= init < chain.size:
        raise DimensionMismatch(f"起始状态 {init} 超出范围")

    denominator = settings.deviations.denominator
    steps, divisor = integer_lattice(f, denominator)
    rounded = steps * divisor / denominator
    threshold = math.ceil(n * epsilon * denominator / divisor - 1e-9)

    probability = tail_probability(chain, steps, threshold, n, init)
    if probability <= 0.0:
        if not allow_zero:
            raise ZeroProbability(f"ℙ(平均 ≥ {epsilon}) = 0")
        rate = -math.inf
    else:
        rate = math.log(probability) / n

    require_primitive(chain)
    cgf = partial(scaled_cgf, chain, rounded, check=False)

    L = L_tilde = math.inf
    beta_star: Optional[float] = None
    slack = 0.0
    holds: Optional[bool] = None
    grid = {"beta_min": beta_min, "beta_max": beta_max, "grid_points": grid_points}
    try:
        L = legendre(cgf, epsilon, **grid).value
    except BracketFailure as e:
        logger.warning(f"L(ε) 无有限极大点 | ε: {epsilon} | {e}")

    try:
        # 上尾事件只用 β ≥ 0，ε ≤ E_inv f 时 L̃(ε) = 0
        L_tilde = legendre(
            cgf, epsilon - settings.deviations.delta0, beta_range=BetaRange.NONNEGATIVE, **grid
        ).value
        upper = legendre(cgf, epsilon, beta_range=BetaRange.NONNEGATIVE, **grid)
        beta_star = upper.beta_star
        slack = math.log(perron_data(chain, rounded, beta_star, check=False).eigenvector_ratio) / n
        holds = bool(rate <= -L_tilde + slack + 1e-12)
    except BracketFailure as e:
        logger.warning(f"L̃(ε) 无有限极大点 | ε: {epsilon} | {e}")
        if rate == -math.inf:
            holds = True

    bound = -L_tilde
    logger.info(
        f"精确尾概率 | ε: {epsilon} | n: {n} | 概率: {probability:.6e} | "
        f"速率: {rate:.6g} | 界: {bound:.6g} | δ_n: {slack:.3e}"
    )
    return TailCheck(
        epsilon=float(epsilon),
        n=n,
        probability=probability,
        log_tail_rate=rate,
        L=L,
        L_tilde=L_tilde,
        bound=bound,
        slack=slack,
        beta_star=beta_star,
        denominator=denominator,
        holds=holds,
    )
