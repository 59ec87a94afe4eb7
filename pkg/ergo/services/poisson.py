"""
生成元与离散泊松方程

- 生成元 Lu = 𝒫u − u，带势 L^c u = e^{−c}⊙𝒫u − u
- Dynkin 公式 1 / 4 的精确验证（矩阵幂），鞅增量与停时形式的蒙特卡罗验证
- 四类泊松方程：Dirichlet / 全空间 × 有无势函数，
  每类支持 linear、series、monte_carlo 三种方法
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..config import settings
from ..exceptions import (
    AutoCenteredWarning,
    DimensionMismatch,
    HorizonExceeded,
    IllPosed,
    ModelValidationError,
    NoConvergence,
    UnreachableBoundary,
    VacuousBound,
)
from ..utils.logger import get_logger
from .chain_core import Observable, StochasticChain
from .ergodicity import invariant_measure, md_coefficient
from .mc_engine import Estimate, cumulative_rows, estimate_values, inverse_cdf, run_blocks, sample_batch
from .spectral import spectral_radius

logger = get_logger(__name__)

CENTERING_TOLERANCE = 1e-10


class SolveMethod(str, Enum):
    """求解方法"""
    LINEAR = "linear"
    SERIES = "series"
    MONTE_CARLO = "monte_carlo"

    @classmethod
    def parse(cls, value: "SolveMethod | str") -> "SolveMethod":
        if isinstance(value, cls):
            return value
        return cls.MONTE_CARLO if value == "mc" else cls(value)


@dataclass
class BoundaryProblem:
    """
    Dirichlet 问题：边界 Γ、源项 f、边界数据 g、可选势函数 c

    f、g、c 均为长度 N 的向量，f 只在内部使用，g 只在 Γ 上使用。
    """
    chain: StochasticChain
    boundary: tuple[int, ...]
    source: np.ndarray
    boundary_data: np.ndarray
    potential: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.chain.size
        self.boundary = tuple(sorted(set(int(i) for i in self.boundary)))
        if not self.boundary:
            raise ModelValidationError("边界 Γ 不能为空")
        if len(self.boundary) >= n:
            raise ModelValidationError("边界 Γ 不能覆盖全部状态")
        if any(not 0 <= i < n for i in self.boundary):
            raise DimensionMismatch("边界状态索引超出范围")
        self.source = _vector(self.source, n, "源项")
        self.boundary_data = _vector(self.boundary_data, n, "边界数据")
        if self.potential is not None:
            self.potential = _vector(self.potential, n, "势函数")

    @property
    def interior(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.chain.size) if i not in self.boundary)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.chain.size, dtype=bool)
        mask[list(self.boundary)] = True
        return mask

    @property
    def weights(self) -> np.ndarray:
        """e^{−c}，无势函数时为 1"""
        if self.potential is None:
            return np.ones(self.chain.size)
        return np.exp(-self.potential)

    def without_potential(self) -> "BoundaryProblem":
        return BoundaryProblem(self.chain, self.boundary, self.source, self.boundary_data, None)


@dataclass
class PoissonSolution:
    """泊松方程的解"""
    values: np.ndarray
    residual: float
    method: SolveMethod
    wellposedness: Dict[str, Any] = field(default_factory=dict)
    std_error: Optional[np.ndarray] = None
    crosscheck: Optional[float] = None

    def to_dict(self) -> dict:
        result = {
            "values": self.values.tolist(),
            "residual": self.residual,
            "method": self.method.value,
            "wellposedness": self.wellposedness,
        }
        if self.std_error is not None:
            result["std_error"] = self.std_error.tolist()
        if self.crosscheck is not None:
            result["crosscheck"] = self.crosscheck
        return result


@dataclass
class DynkinCheck:
    """Dynkin 公式两端（k = 0..n）及最大偏差"""
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def defect(self) -> float:
        return float(np.abs(self.lhs - self.rhs).max())


@dataclass
class HittingCap:
    """k 步最小击中概率与路径上限"""
    steps: int
    kappa_hit: float
    cap: int


@dataclass
class SeriesResult:
    values: np.ndarray
    terms: int
    tail_bound: float
    block: int


@dataclass
class MartingaleTable:
    """各 (时刻, 状态) 上鞅增量的均值、标准误与样本数"""
    mean: np.ndarray
    std_error: np.ndarray
    count: np.ndarray

    def max_z(self, min_count: int = 2) -> float:
        """样本数足够且标准误为正的格子上 |均值|/标准误 的最大值"""
        usable = (self.count >= min_count) & (self.std_error > 0)
        if not usable.any():
            return 0.0
        return float((np.abs(self.mean[usable]) / self.std_error[usable]).max())


def _vector(values: Sequence[float], n: int, name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float).reshape(-1)
    if vector.shape[0] != n:
        raise DimensionMismatch(f"{name}长度 {vector.shape[0]} 与状态数 {n} 不符")
    return vector


# ---------------------------------------------------------------------------
# 生成元与 Dynkin 公式
# ---------------------------------------------------------------------------


def apply_generator(
    chain: StochasticChain,
    u: Observable,
    potential: Optional[Observable] = None,
) -> np.ndarray:
    """𝒫u − u，或 e^{−c}⊙𝒫u − u"""
    u = _vector(u, chain.size, "函数")
    pushed = chain.matrix @ u
    if potential is not None:
        pushed = np.exp(-_vector(potential, chain.size, "势函数")) * pushed
    return pushed - u


def weighted_kernel(chain: StochasticChain, potential: Optional[Observable] = None) -> np.ndarray:
    """diag(e^{−c})·𝒫，无势函数时为 𝒫"""
    if potential is None:
        return chain.matrix.copy()
    return np.exp(-_vector(potential, chain.size, "势函数"))[:, None] * chain.matrix


def dynkin_verify(
    chain: StochasticChain,
    h: Observable,
    x: int,
    n: int,
    potential: Optional[Observable] = None,
) -> DynkinCheck:
    """
    E_x e^{−φ_{k−1}}h(X_k) 与 h(x) + Σ_{j<k} E_x e^{−φ_{j−1}}L^c h(X_j)，k = 0..n

    两端都用 A = diag(e^{−c})𝒫 的幂精确计算，φ₋₁ = 0。
    """
    if n < 0:
        raise ValueError(f"n 必须非负: {n}")
    h = _vector(h, chain.size, "函数")
    kernel = weighted_kernel(chain, potential)
    generator = kernel @ h - h

    lhs = np.empty(n + 1)
    rhs = np.empty(n + 1)
    pushed_h = h.copy()
    pushed_gen = generator.copy()
    running = h[x]
    for k in range(n + 1):
        if k > 0:
            running += pushed_gen[x]
            pushed_gen = kernel @ pushed_gen
            pushed_h = kernel @ pushed_h
        lhs[k] = pushed_h[x]
        rhs[k] = running
    return DynkinCheck(lhs=lhs, rhs=rhs)


# ---------------------------------------------------------------------------
# 通用工具
# ---------------------------------------------------------------------------


def reaches_boundary(chain: StochasticChain, boundary: Sequence[int]) -> np.ndarray:
    """支撑图上能到达 Γ 的状态掩码"""
    support = chain.matrix > 0
    reached = np.zeros(chain.size, dtype=bool)
    reached[list(boundary)] = True
    while True:
        grown = reached | support[:, reached].any(axis=1)
        if np.array_equal(grown, reached):
            return reached
        reached = grown


def _require_reachable(problem: BoundaryProblem) -> None:
    reached = reaches_boundary(problem.chain, problem.boundary)
    missing = [problem.chain.states[i] for i in problem.interior if not reached[i]]
    if missing:
        raise UnreachableBoundary(f"以下内部状态无法到达边界: {missing}")


def neumann_series(
    matrix: np.ndarray,
    rhs: np.ndarray,
    tol: Optional[float] = None,
    max_block: int = 100_000,
) -> SeriesResult:
    """
    Σ_k Mᵏb，M 非负且 r(M) < 1

    先找最小 m 使 ‖Mᵐ‖_∞ = q < 1，C = max_{j<m}‖Mʲ‖_∞，
    取 K = t·m 使 C·m·q^t·‖b‖_∞/(1 − q) < tol。
    """
    tol = settings.numerics.series_tolerance if tol is None else tol
    dim = matrix.shape[0]
    scale = float(np.abs(rhs).max()) if rhs.size else 0.0
    if scale == 0.0 or dim == 0:
        return SeriesResult(values=np.zeros_like(rhs, dtype=float), terms=0, tail_bound=0.0, block=1)

    power = np.eye(dim)
    constant = 1.0
    block = 0
    ratio = 1.0
    for block in range(1, max_block + 1):
        power = power @ matrix
        ratio = float(np.abs(power).sum(axis=1).max())
        if ratio < 1.0:
            break
        constant = max(constant, ratio)
    else:
        raise NoConvergence(f"{max_block} 次幂内未找到 ‖Mᵐ‖ < 1")

    if ratio == 0.0:
        repeats = 1
        tail = 0.0
    else:
        prefactor = constant * block * scale / (1.0 - ratio)
        repeats = max(1, math.ceil(math.log(tol / prefactor) / math.log(ratio)))
        tail = prefactor * ratio ** repeats
        while tail >= tol:
            repeats += 1
            tail = prefactor * ratio ** repeats
    terms = repeats * block

    total = np.zeros(dim)
    term = np.asarray(rhs, dtype=float).copy()
    for _ in range(terms):
        total += term
        term = matrix @ term
    return SeriesResult(values=total, terms=terms, tail_bound=tail, block=block)


def hitting_time_cap(problem: BoundaryProblem, tail: Optional[float] = None) -> HittingCap:
    """
    k 为所有内部状态都能在 k 步内击中 Γ 的最小步数，
    κ_hit 为 k 步内击中概率的最小值；ℙ(τ > j·k) ≤ (1 − κ_hit)^j。
    """
    tail = settings.simulation.mc_horizon_tail if tail is None else tail
    _require_reachable(problem)
    interior = list(problem.interior)
    q = problem.chain.matrix[np.ix_(interior, interior)]

    survive = np.ones(len(interior))
    for k in range(1, len(interior) + 1):
        survive = q @ survive
        kappa_hit = float(1.0 - survive.max())
        if kappa_hit > 0.0:
            break
    else:
        raise UnreachableBoundary("内部状态在有限步内无法全部到达边界")

    if kappa_hit >= 1.0:
        cap = k
    else:
        cap = math.ceil(math.log(tail) / math.log(1.0 - kappa_hit)) * k
    return HittingCap(steps=k, kappa_hit=kappa_hit, cap=cap)


# ---------------------------------------------------------------------------
# 停时泛函的蒙特卡罗
# ---------------------------------------------------------------------------


def _stopped_values(
    problem: BoundaryProblem,
    start: int,
    running: np.ndarray,
    terminal: np.ndarray,
    paths: int,
    seed: int,
    stream_offset: int,
    cap: int,
) -> np.ndarray:
    """每条路径的 Σ_{k<τ} e^{−φ_{k−1}} running(X_k) + e^{−φ_{τ−1}} terminal(X_τ)"""
    chain = problem.chain
    cdf = cumulative_rows(chain.matrix)
    weights = problem.weights
    on_boundary = problem.boundary_mask

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        states = np.full(size, start, dtype=np.int64)
        total = np.zeros(size)
        if on_boundary[start]:
            return total + terminal[start]
        weight = np.ones(size)
        alive = np.ones(size, dtype=bool)
        for _ in range(cap):
            u = rng.random(size)
            total = np.where(alive, total + weight * running[states], total)
            weight = np.where(alive, weight * weights[states], weight)
            nxt = np.where(alive, inverse_cdf(cdf[states], u), states)
            hit = alive & on_boundary[nxt]
            total = np.where(hit, total + weight * terminal[nxt], total)
            alive &= ~hit
            states = nxt
            if not alive.any():
                return total
        raise HorizonExceeded(f"从状态 {chain.states[start]} 出发的路径在 {cap} 步内未击中边界")

    return np.concatenate(run_blocks(paths, seed, _block, stream_offset=stream_offset))


def _streams_per_start(paths: int) -> int:
    return math.ceil(paths / settings.simulation.block_size)


def _monte_carlo_dirichlet(
    problem: BoundaryProblem,
    paths: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, HittingCap]:
    cap = hitting_time_cap(problem)
    values = problem.boundary_data.copy()
    errors = np.zeros(problem.chain.size)
    stride = _streams_per_start(paths)
    for position, x in enumerate(problem.interior):
        samples = _stopped_values(
            problem, x, problem.source, problem.boundary_data, paths, seed, position * stride, cap.cap
        )
        result = estimate_values(samples)
        values[x] = result.mean
        errors[x] = result.std_error
    return values, errors, cap


# ---------------------------------------------------------------------------
# Dirichlet 问题
# ---------------------------------------------------------------------------


def _dirichlet_system(problem: BoundaryProblem) -> tuple[np.ndarray, np.ndarray]:
    """W = diag(w_I)·Q，b = f_I + diag(w_I)·R·g_Γ"""
    interior = list(problem.interior)
    boundary = list(problem.boundary)
    matrix = problem.chain.matrix
    w = problem.weights[interior]
    q = matrix[np.ix_(interior, interior)]
    r = matrix[np.ix_(interior, boundary)]
    operator = w[:, None] * q
    rhs = problem.source[interior] + w * (r @ problem.boundary_data[boundary])
    return operator, rhs


def dirichlet_residual(problem: BoundaryProblem, values: np.ndarray) -> float:
    """内部方程 e^{−c}𝒫u − u + f = 0 的上确界范数偏差与边界偏差"""
    interior = list(problem.interior)
    boundary = list(problem.boundary)
    generator = apply_generator(problem.chain, values, problem.potential)
    interior_defect = np.abs(generator[interior] + problem.source[interior]).max()
    boundary_defect = np.abs(values[boundary] - problem.boundary_data[boundary]).max()
    return float(max(interior_defect, boundary_defect))


def _solve_dirichlet(
    problem: BoundaryProblem,
    method: SolveMethod,
    paths: Optional[int],
    seed: Optional[int],
) -> PoissonSolution:
    _require_reachable(problem)
    operator, rhs = _dirichlet_system(problem)
    interior = list(problem.interior)

    spectrum = spectral_radius(operator, label="W")
    wellposedness: Dict[str, Any] = {
        "operator": "W" if problem.potential is not None else "Q",
        "spectral_radius": spectrum.radius,
        "interior_states": len(interior),
    }
    if spectrum.radius >= 1.0:
        raise IllPosed(
            f"加权内部算子的谱半径 r(W) = {spectrum.radius:.10g} ≥ 1，级数发散",
            spectral_radius=spectrum.radius,
        )

    linear = problem.boundary_data.copy()
    linear[interior] = np.linalg.solve(np.eye(len(interior)) - operator, rhs)

    std_error = None
    crosscheck = None
    if method == SolveMethod.LINEAR:
        values = linear
    elif method == SolveMethod.SERIES:
        series = neumann_series(operator, rhs)
        values = problem.boundary_data.copy()
        values[interior] = series.values
        wellposedness["series_terms"] = series.terms
        wellposedness["tail_bound"] = series.tail_bound
        crosscheck = float(np.abs(values - linear).max())
    else:
        paths = paths or settings.simulation.paths
        seed = settings.simulation.default_seed if seed is None else seed
        values, std_error, cap = _monte_carlo_dirichlet(problem, paths, seed)
        wellposedness["hitting_steps"] = cap.steps
        wellposedness["kappa_hit"] = cap.kappa_hit
        wellposedness["path_cap"] = cap.cap
        crosscheck = float(np.abs(values - linear).max())

    residual = dirichlet_residual(problem, values)
    logger.info(
        f"Dirichlet 问题求解完成 | 方法: {method.value} | 势函数: {problem.potential is not None} | "
        f"r: {spectrum.radius:.6g} | 残差: {residual:.3e}"
    )
    return PoissonSolution(
        values=values,
        residual=residual,
        method=method,
        wellposedness=wellposedness,
        std_error=std_error,
        crosscheck=crosscheck,
    )


def solve_dirichlet(
    problem: BoundaryProblem,
    method: SolveMethod | str = SolveMethod.LINEAR,
    paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> PoissonSolution:
    """
    𝒫u − u = −f 于内部，u = g 于 Γ

    Raises:
        UnreachableBoundary: 存在无法到达 Γ 的内部状态
        HorizonExceeded: 蒙特卡罗路径在上限步数内未击中 Γ
    """
    if problem.potential is not None:
        problem = problem.without_potential()
    return _solve_dirichlet(problem, SolveMethod.parse(method), paths, seed)


def solve_dirichlet_potential(
    problem: BoundaryProblem,
    method: SolveMethod | str = SolveMethod.LINEAR,
    paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> PoissonSolution:
    """
    e^{−c}𝒫u − u = −f 于内部，u = g 于 Γ

    Raises:
        IllPosed: r(diag(e^{−c})Q) ≥ 1
        UnreachableBoundary: 存在无法到达 Γ 的内部状态
    """
    return _solve_dirichlet(problem, SolveMethod.parse(method), paths, seed)


# ---------------------------------------------------------------------------
# 全空间问题
# ---------------------------------------------------------------------------


def _truncated_path_sums(
    chain: StochasticChain,
    kernel_weights: np.ndarray,
    f: np.ndarray,
    start: int,
    horizon: int,
    paths: int,
    seed: int,
    stream_offset: int,
) -> np.ndarray:
    """每条路径的 Σ_{k≤horizon} e^{−φ_{k−1}} f(X_k)"""
    cdf = cumulative_rows(chain.matrix)

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        states = np.full(size, start, dtype=np.int64)
        weight = np.ones(size)
        total = np.zeros(size)
        for k in range(horizon + 1):
            total += weight * f[states]
            if k < horizon:
                weight = weight * kernel_weights[states]
                states = inverse_cdf(cdf[states], rng.random(size))
        return total

    return np.concatenate(run_blocks(paths, seed, _block, stream_offset=stream_offset))


def _monte_carlo_whole(
    chain: StochasticChain,
    kernel_weights: np.ndarray,
    f: np.ndarray,
    horizon: int,
    paths: Optional[int],
    seed: Optional[int],
) -> tuple[np.ndarray, np.ndarray]:
    paths = paths or settings.simulation.paths
    seed = settings.simulation.default_seed if seed is None else seed
    stride = _streams_per_start(paths)
    values = np.empty(chain.size)
    errors = np.empty(chain.size)
    for x in range(chain.size):
        result = estimate_values(
            _truncated_path_sums(chain, kernel_weights, f, x, horizon, paths, seed, x * stride)
        )
        values[x] = result.mean
        errors[x] = result.std_error
    return values, errors


def solve_whole(
    chain: StochasticChain,
    f: Observable,
    method: SolveMethod | str = SolveMethod.SERIES,
    paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> PoissonSolution:
    """
    𝒫u − u = −f̄，返回 ⟨u, μ⟩ = 0 的代表元

    series: u = Σ_{k≤K} 𝒫ᵏf̄，K 使 osc(f̄)(1−κ)^{K+1}/κ < series_tolerance；
    linear: 加边系统 [(𝒫 − I); μᵀ]u = [−f̄; 0] 的最小二乘解。

    Warns:
        AutoCenteredWarning: ⟨f, μ⟩ ≠ 0，已自动中心化
    Raises:
        VacuousBound: κ = 0
    """
    method = SolveMethod.parse(method)
    f = _vector(f, chain.size, "源项")
    kappa = md_coefficient(chain, 1)
    if kappa <= 0.0:
        raise VacuousBound("κ = 0，全空间泊松方程的级数截断无界")

    mu = invariant_measure(chain)
    mean = float(f @ mu)
    if abs(mean) > CENTERING_TOLERANCE:
        warnings.warn(f"源项未中心化（⟨f, μ⟩ = {mean:.6g}），已自动中心化", AutoCenteredWarning, stacklevel=2)
    centered = f - mean

    oscillation = float(centered.max() - centered.min())
    tol = settings.numerics.series_tolerance
    if oscillation == 0.0 or kappa >= 1.0:
        truncation = 0
    else:
        truncation = max(0, math.ceil(math.log(tol * kappa / oscillation) / math.log(1.0 - kappa)) - 1)
        while oscillation * (1.0 - kappa) ** (truncation + 1) / kappa >= tol:
            truncation += 1

    series = np.zeros(chain.size)
    term = centered.copy()
    for k in range(truncation + 1):
        series += term
        term = chain.matrix @ term
    series -= float(series @ mu)

    bordered = np.vstack((chain.matrix - np.eye(chain.size), mu[None, :]))
    rhs = np.concatenate((-centered, [0.0]))
    linear, *_ = np.linalg.lstsq(bordered, rhs, rcond=None)
    linear -= float(linear @ mu)

    wellposedness: Dict[str, Any] = {
        "kappa": kappa,
        "series_terms": truncation + 1,
        "centering_shift": mean,
    }
    std_error = None
    if method == SolveMethod.SERIES:
        values = series
    elif method == SolveMethod.LINEAR:
        values = linear
    else:
        values, std_error = _monte_carlo_whole(
            chain, np.ones(chain.size), centered, truncation, paths, seed
        )
        values = values - float(values @ mu)
        wellposedness["path_horizon"] = truncation

    crosscheck = float(np.abs(series - linear).max())
    residual = float(np.abs(apply_generator(chain, values) + centered).max())
    logger.info(
        f"全空间泊松方程求解完成 | 方法: {method.value} | 截断: {truncation} | "
        f"残差: {residual:.3e} | 交叉检验: {crosscheck:.3e}"
    )
    return PoissonSolution(
        values=values,
        residual=residual,
        method=method,
        wellposedness=wellposedness,
        std_error=std_error,
        crosscheck=crosscheck,
    )


def solve_whole_potential(
    chain: StochasticChain,
    c: Observable,
    f: Observable,
    method: SolveMethod | str = SolveMethod.LINEAR,
    paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> PoissonSolution:
    """
    e^{−c}𝒫u − u = −f，u = Σₙ Aⁿf，A = diag(e^{−c})𝒫

    ln r(A) 即倾斜算子在 β = −1、观测值为 c 时的 H 值。

    Raises:
        IllPosed: r(A) ≥ 1
    """
    method = SolveMethod.parse(method)
    c = _vector(c, chain.size, "势函数")
    f = _vector(f, chain.size, "源项")
    kernel = weighted_kernel(chain, c)

    spectrum = spectral_radius(kernel, label="A")
    log_radius = math.log(spectrum.radius) if spectrum.radius > 0 else -math.inf
    wellposedness: Dict[str, Any] = {
        "operator": "A",
        "spectral_radius": spectrum.radius,
        "log_spectral_radius": log_radius if math.isfinite(log_radius) else None,
        "sign_condition": bool(log_radius < 0),
    }
    if spectrum.radius >= 1.0:
        raise IllPosed(
            f"A = diag(e^(-c))P 的谱半径 r(A) = {spectrum.radius:.10g} ≥ 1，级数发散",
            spectral_radius=spectrum.radius,
        )

    linear = np.linalg.solve(np.eye(chain.size) - kernel, f)
    std_error = None
    crosscheck = None
    if method == SolveMethod.LINEAR:
        values = linear
    elif method == SolveMethod.SERIES:
        series = neumann_series(kernel, f)
        values = series.values
        wellposedness["series_terms"] = series.terms
        wellposedness["tail_bound"] = series.tail_bound
        crosscheck = float(np.abs(values - linear).max())
    else:
        horizon = neumann_series(kernel, f, tol=settings.simulation.mc_horizon_tail).terms
        values, std_error = _monte_carlo_whole(chain, np.exp(-c), f, horizon, paths, seed)
        wellposedness["path_horizon"] = horizon
        crosscheck = float(np.abs(values - linear).max())

    residual = float(np.abs(apply_generator(chain, values, c) + f).max())
    logger.info(
        f"带势全空间方程求解完成 | 方法: {method.value} | r(A): {spectrum.radius:.6g} | 残差: {residual:.3e}"
    )
    return PoissonSolution(
        values=values,
        residual=residual,
        method=method,
        wellposedness=wellposedness,
        std_error=std_error,
        crosscheck=crosscheck,
    )


# ---------------------------------------------------------------------------
# 鞅形式与停时形式的 Dynkin 公式
# ---------------------------------------------------------------------------


def martingale_increments(
    chain: StochasticChain,
    h: Observable,
    x: int,
    n: int,
    paths: int,
    seed: int,
    potential: Optional[Observable] = None,
) -> MartingaleTable:
    """
    M_{k+1} − M_k = e^{−φ_{k−1}}·e^{−c(X_k)}·(h(X_{k+1}) − 𝒫h(X_k))，按 (k, X_k) 分组统计
    """
    h = _vector(h, chain.size, "函数")
    weights = np.ones(chain.size) if potential is None else np.exp(-_vector(potential, chain.size, "势函数"))
    start = np.zeros(chain.size)
    start[x] = 1.0
    batch = sample_batch(chain, start, n, paths, seed)
    states = batch.paths
    pushed = chain.matrix @ h

    mean = np.zeros((n, chain.size))
    std_error = np.zeros((n, chain.size))
    count = np.zeros((n, chain.size), dtype=np.int64)

    discount = np.ones(paths)
    for k in range(n):
        current = states[:, k]
        step_weight = discount * weights[current]
        increments = step_weight * (h[states[:, k + 1]] - pushed[current])
        for y in range(chain.size):
            selected = increments[current == y]
            count[k, y] = selected.size
            if selected.size:
                mean[k, y] = selected.mean()
            if selected.size > 1:
                std_error[k, y] = selected.std(ddof=1) / math.sqrt(selected.size)
        discount = step_weight
    return MartingaleTable(mean=mean, std_error=std_error, count=count)


def dynkin_stopped_check(
    problem: BoundaryProblem,
    h: Observable,
    x: int,
    paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> Estimate:
    """
    E_x e^{−φ_{τ−1}}h(X_τ) − h(x) − E_x Σ_{k<τ} e^{−φ_{k−1}}L^c h(X_k) 的蒙特卡罗估计，
    τ 为 Γ 的击中时刻；无势函数时即停时形式的 Dynkin 公式
    """
    h = _vector(h, problem.chain.size, "函数")
    paths = paths or settings.simulation.paths
    seed = settings.simulation.default_seed if seed is None else seed
    generator = apply_generator(problem.chain, h, problem.potential)
    cap = hitting_time_cap(problem)
    samples = _stopped_values(problem, x, -generator, h, paths, seed, 0, cap.cap) - h[x]
    return estimate_values(samples)
