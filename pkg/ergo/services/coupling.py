"""
耦合构造

- 三随机变量引理与两随机变量引理的极大耦合抽样（批量向量化）
- 两个独立副本的简单耦合：乘积链 DP 给出相遇时刻的精确尾概率
- Vaserstein 四分量耦合过程 (η¹, η², ξ, ζ) 的模拟与重构
- 耦合算子 V（N²×N² 非负矩阵）、精确耦合界与谱半径 r(V)
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import DimensionMismatch, SingularPair, VacuousBoundWarning
from ..utils.logger import get_logger
from .chain_core import Distribution, StochasticChain, point_mass
from .ergodicity import convergence_envelope, invariant_measure, md_coefficient, md_coefficient_min_entry
from .mc_engine import cumulative_rows, inverse_cdf, run_blocks
from .spectral import spectral_radius

logger = get_logger(__name__)

# 剩余质量低于该值时视为 κ = 1
_FULL_OVERLAP = 1e-15


# ---------------------------------------------------------------------------
# 数据类型
# ---------------------------------------------------------------------------


@dataclass
class CoupledPairSample:
    """一次耦合抽样；coupled 为真时 first == second"""
    first: int
    second: int
    coupled: bool


@dataclass
class CoupledPairBatch:
    """批量耦合抽样"""
    first: np.ndarray
    second: np.ndarray
    coupled: np.ndarray
    kappa: float

    def __len__(self) -> int:
        return int(self.first.shape[0])

    def sample(self, i: int) -> CoupledPairSample:
        return CoupledPairSample(int(self.first[i]), int(self.second[i]), bool(self.coupled[i]))


@dataclass
class CouplingOperator:
    """
    配对状态 (x¹, x²) ↦ a = x¹·N + x² 上的耦合算子 V

    matrix[a] = (1 − κ(x¹, x²))·φ₁ ⊗ φ₂；phi1、phi2、coupled_law 为各配对状态下
    η¹、η²、ξ 的条件分布，κ 退化时取约定分布。
    """
    size: int
    matrix: np.ndarray
    kappa_pairs: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    coupled_law: np.ndarray

    @property
    def dimension(self) -> int:
        return self.size * self.size

    def pair_index(self, x1: int, x2: int) -> int:
        return x1 * self.size + x2


@dataclass
class SimpleCouplingTail:
    """独立副本相遇时刻的精确尾概率 ℙ(τ > n) 与 (1−κ₀)ⁿ"""
    tail: np.ndarray
    bound: np.ndarray
    kappa0: float
    vacuous: bool
    bound_holds: bool


@dataclass
class VasersteinPaths:
    """Vaserstein 耦合过程的路径，形状 (paths, horizon + 1)"""
    eta1: np.ndarray
    eta2: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    kappa0: float

    @property
    def x1(self) -> np.ndarray:
        """X̃¹ = η¹·1(ζ=1) + ξ·1(ζ=0)"""
        return np.where(self.zeta == 1, self.eta1, self.xi)

    @property
    def x2(self) -> np.ndarray:
        return np.where(self.zeta == 1, self.eta2, self.xi)

    @property
    def horizon(self) -> int:
        return int(self.zeta.shape[1]) - 1

    def decoupled_frequency(self) -> np.ndarray:
        """每个 n 上 ℙ(X̃¹_n ≠ X̃²_n) 的经验值"""
        return (self.x1 != self.x2).mean(axis=0)


@dataclass
class OperatorSpectrum:
    """r(V) 及其与 1 − κ 的比较"""
    radius: float
    iterations: int
    converged: bool
    kappa: float

    @property
    def within_kappa_bound(self) -> bool:
        return self.radius <= 1.0 - self.kappa + 1e-10


@dataclass
class CouplingTVBound:
    """‖δₓ𝒫ⁿ − μ‖_TV 与耦合不等式右端 2·coupling_bound_exact(δₓ, μ, n)"""
    tv: np.ndarray
    bound: np.ndarray
    holds: bool


@dataclass
class RateCurves:
    """worst_tv(n)、2(1−κ)ⁿ、2r(V)ⁿ"""
    worst_tv: np.ndarray
    bound_kappa: np.ndarray
    bound_rv: np.ndarray
    kappa: float
    r_v: float

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [
            (n, float(self.worst_tv[n]), float(self.bound_kappa[n]), float(self.bound_rv[n]))
            for n in range(self.worst_tv.shape[0])
        ]


# ---------------------------------------------------------------------------
# 两个分布的耦合
# ---------------------------------------------------------------------------


def _as_pair(p: Distribution, q: Distribution) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"分布维度不一致: {p.shape} vs {q.shape}")
    return p, q


def overlap(p: Distribution, q: Distribution) -> float:
    """κ = Σ_i min(p_i, q_i)"""
    p, q = _as_pair(p, q)
    return float(np.minimum(p, q).sum())


def _residual(p: np.ndarray, common: np.ndarray) -> tuple[np.ndarray, float]:
    rest = np.clip(p - common, 0.0, None)
    mass = float(rest.sum())
    return (rest / mass if mass > 0 else rest), mass


def couple_three_batch(
    p1: Distribution,
    p2: Distribution,
    rng: np.random.Generator,
    size: int,
) -> CoupledPairBatch:
    """
    三随机变量引理：ξ² ~ p2，以概率 min(1, p1/p2)(ξ²) 令 ξ³ = ξ²，
    否则 ξ³ 取自剩余密度 (p1 − p1∧p2)/(1 − κ)

    first 为 ξ³（边缘分布 p1），second 为 ξ²（边缘分布 p2）。
    """
    p1, p2 = _as_pair(p1, p2)
    common = np.minimum(p1, p2)
    kappa = float(common.sum())
    if kappa <= 0.0:
        raise SingularPair("两个分布重叠为 0，无法耦合")

    u = rng.random((3, size))
    second = inverse_cdf(cumulative_rows(p2)[0], u[0])

    residual, mass = _residual(p1, common)
    if mass <= _FULL_OVERLAP:
        return CoupledPairBatch(second.copy(), second, np.ones(size, dtype=bool), kappa)

    with np.errstate(divide="ignore", invalid="ignore"):
        accept_ratio = np.where(p1 >= p2, 1.0, p1 / np.maximum(p1, p2))
    accepted = u[1] <= accept_ratio[second]
    fallback = inverse_cdf(cumulative_rows(residual)[0], u[2])
    first = np.where(accepted, second, fallback)
    return CoupledPairBatch(first, second, first == second, kappa)


def couple_two_batch(
    p1: Distribution,
    p2: Distribution,
    rng: np.random.Generator,
    size: int,
) -> CoupledPairBatch:
    """
    两随机变量引理：γ 以概率 κ 取 0，此时 η¹ = η² = ζ⁰ ~ p1∧p2/κ；
    否则 η¹ = ζ¹ ~ (p1 − p1∧p2)/(1−κ)，η² = ζ² ~ (p2 − p1∧p2)/(1−κ)
    """
    p1, p2 = _as_pair(p1, p2)
    common = np.minimum(p1, p2)
    kappa = float(common.sum())
    if kappa <= 0.0:
        raise SingularPair("两个分布重叠为 0，无法耦合")

    u = rng.random((4, size))
    zeta0 = inverse_cdf(cumulative_rows(common / kappa)[0], u[1])

    residual1, mass1 = _residual(p1, common)
    residual2, _ = _residual(p2, common)
    if mass1 <= _FULL_OVERLAP:
        return CoupledPairBatch(zeta0.copy(), zeta0, np.ones(size, dtype=bool), kappa)

    joint = u[0] < kappa
    zeta1 = inverse_cdf(cumulative_rows(residual1)[0], u[2])
    zeta2 = inverse_cdf(cumulative_rows(residual2)[0], u[3])
    first = np.where(joint, zeta0, zeta1)
    second = np.where(joint, zeta0, zeta2)
    return CoupledPairBatch(first, second, joint, kappa)


def couple_three(p1: Distribution, p2: Distribution, rng: np.random.Generator) -> CoupledPairSample:
    return couple_three_batch(p1, p2, rng, 1).sample(0)


def couple_two(p1: Distribution, p2: Distribution, rng: np.random.Generator) -> CoupledPairSample:
    return couple_two_batch(p1, p2, rng, 1).sample(0)


# ---------------------------------------------------------------------------
# 简单耦合
# ---------------------------------------------------------------------------


def simple_coupling_tail(
    chain: StochasticChain,
    x1: int,
    x2: int,
    n_max: int,
) -> SimpleCouplingTail:
    """
    两个独立副本从 (x1, x2) 出发，τ = inf{n ≥ 0: X¹_n = X²_n}，
    乘积链 D ↦ 𝒫ᵀD𝒫 去掉对角质量，得到 ℙ(τ > n)

    Warns:
        VacuousBoundWarning: κ₀ = 0
    """
    if x1 == x2:
        raise ValueError("简单耦合要求不同的起点")
    n = chain.size
    if not (0 <= x1 < n and 0 <= x2 < n):
        raise DimensionMismatch(f"起点 ({x1}, {x2}) 超出范围")

    kappa0 = md_coefficient_min_entry(chain)
    vacuous = kappa0 <= 0.0
    if vacuous:
        warnings.warn("κ₀ = 0，(1−κ₀)ⁿ 界退化为 1", VacuousBoundWarning, stacklevel=2)

    mass = np.zeros((n, n))
    mass[x1, x2] = 1.0
    tail = np.empty(n_max + 1)
    tail[0] = 1.0
    for k in range(1, n_max + 1):
        mass = chain.matrix.T @ mass @ chain.matrix
        np.fill_diagonal(mass, 0.0)
        tail[k] = mass.sum()

    bound = (1.0 - kappa0) ** np.arange(n_max + 1)
    holds = bool(np.all(tail <= bound + 1e-12))
    logger.info(f"简单耦合尾概率 | 起点: ({x1}, {x2}) | κ₀: {kappa0:.6g} | ℙ(τ>{n_max}): {tail[-1]:.3e}")
    return SimpleCouplingTail(tail=tail, bound=bound, kappa0=kappa0, vacuous=vacuous, bound_holds=holds)


# ---------------------------------------------------------------------------
# Vaserstein 耦合
# ---------------------------------------------------------------------------


def coupling_operator(chain: StochasticChain) -> CouplingOperator:
    """
    构造 V 及各配对状态下的条件分布

    κ(x¹,x²) = 0 时 φᵢ 取原转移行、ξ 取均匀分布；
    κ(x¹,x²) = 1 时 φᵢ 取均匀分布，对应行为 0。
    """
    n = chain.size
    uniform = np.full(n, 1.0 / n)
    dim = n * n
    matrix = np.zeros((dim, dim))
    kappa_pairs = np.empty(dim)
    phi1 = np.empty((dim, n))
    phi2 = np.empty((dim, n))
    coupled_law = np.empty((dim, n))

    for x1 in range(n):
        row1 = chain.matrix[x1]
        for x2 in range(n):
            row2 = chain.matrix[x2]
            a = x1 * n + x2
            common = np.minimum(row1, row2)
            kappa = float(min(1.0, common.sum()))
            residual1, mass1 = _residual(row1, common)
            residual2, mass2 = _residual(row2, common)

            if x1 == x2 or mass1 <= _FULL_OVERLAP or mass2 <= _FULL_OVERLAP:
                kappa = 1.0
                phi1[a] = uniform
                phi2[a] = uniform
                coupled_law[a] = common / common.sum()
            elif kappa <= 0.0:
                kappa = 0.0
                phi1[a] = row1
                phi2[a] = row2
                coupled_law[a] = uniform
                matrix[a] = np.kron(row1, row2)
            else:
                phi1[a] = residual1
                phi2[a] = residual2
                coupled_law[a] = common / kappa
                matrix[a] = (1.0 - kappa) * np.kron(residual1, residual2)
            kappa_pairs[a] = kappa

    return CouplingOperator(
        size=n,
        matrix=matrix,
        kappa_pairs=kappa_pairs,
        phi1=phi1,
        phi2=phi2,
        coupled_law=coupled_law,
    )


def initial_pair_law(mu1: Distribution, mu2: Distribution) -> tuple[float, np.ndarray]:
    """
    时刻 0 的 κ(0) 与未耦合时 η-配对的分布 q0（长度 N² 的概率向量）

    κ(0) = 0 时 q0 = μ1 ⊗ μ2；κ(0) = 1 时 q0 ≡ 0。
    """
    mu1, mu2 = _as_pair(mu1, mu2)
    common = np.minimum(mu1, mu2)
    kappa0 = float(min(1.0, common.sum()))
    residual1, mass1 = _residual(mu1, common)
    residual2, mass2 = _residual(mu2, common)
    if mass1 <= _FULL_OVERLAP or mass2 <= _FULL_OVERLAP:
        return 1.0, np.zeros(mu1.shape[0] ** 2)
    if kappa0 <= 0.0:
        return 0.0, np.kron(mu1, mu2)
    return kappa0, np.kron(residual1, residual2)


def coupling_bound_curve(
    chain: StochasticChain,
    mu1: Distribution,
    mu2: Distribution,
    n_max: int,
    operator: Optional[CouplingOperator] = None,
) -> np.ndarray:
    """n = 0..n_max 上的 (1 − κ(0))·⟨q0, Vⁿ1⟩"""
    operator = operator or coupling_operator(chain)
    kappa0, q0 = initial_pair_law(mu1, mu2)
    values = np.empty(n_max + 1)
    vector = np.ones(operator.dimension)
    for n in range(n_max + 1):
        if n > 0:
            vector = operator.matrix @ vector
        values[n] = (1.0 - kappa0) * float(q0 @ vector)
    return values


def coupling_bound_exact(
    chain: StochasticChain,
    mu1: Distribution,
    mu2: Distribution,
    n: int,
    operator: Optional[CouplingOperator] = None,
) -> float:
    """(1 − κ(0))·E ∏_{i<n} (1 − κ(η¹_i, η²_i))，即 ℙ(ζ_n = 1)"""
    if n < 0:
        raise ValueError(f"步数必须非负: {n}")
    return float(coupling_bound_curve(chain, mu1, mu2, n, operator)[-1])


def _vaserstein_block(
    chain_cdf: np.ndarray,
    operator: CouplingOperator,
    mu1: np.ndarray,
    mu2: np.ndarray,
    horizon: int,
    rng: np.random.Generator,
    size: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = operator.size
    phi1_cdf = cumulative_rows(operator.phi1)
    phi2_cdf = cumulative_rows(operator.phi2)
    coupled_cdf = cumulative_rows(operator.coupled_law)

    eta1 = np.empty((size, horizon + 1), dtype=np.int64)
    eta2 = np.empty_like(eta1)
    xi = np.empty_like(eta1)
    zeta = np.empty_like(eta1)

    # 时刻 0
    u = rng.random((4, size))
    common = np.minimum(mu1, mu2)
    kappa0 = float(common.sum())
    residual1, mass1 = _residual(mu1, common)
    residual2, mass2 = _residual(mu2, common)
    if mass1 <= _FULL_OVERLAP or mass2 <= _FULL_OVERLAP:
        xi[:, 0] = inverse_cdf(cumulative_rows(mu1)[0], u[1])
        eta1[:, 0] = xi[:, 0]
        eta2[:, 0] = xi[:, 0]
        zeta[:, 0] = 0
    elif kappa0 <= 0.0:
        eta1[:, 0] = inverse_cdf(cumulative_rows(mu1)[0], u[2])
        eta2[:, 0] = inverse_cdf(cumulative_rows(mu2)[0], u[3])
        xi[:, 0] = 0
        zeta[:, 0] = 1
    else:
        zeta[:, 0] = np.where(u[0] < kappa0, 0, 1)
        xi[:, 0] = inverse_cdf(cumulative_rows(common / kappa0)[0], u[1])
        eta1[:, 0] = inverse_cdf(cumulative_rows(residual1)[0], u[2])
        eta2[:, 0] = inverse_cdf(cumulative_rows(residual2)[0], u[3])

    for k in range(1, horizon + 1):
        u = rng.random((4, size))
        pair = eta1[:, k - 1] * n + eta2[:, k - 1]
        active = zeta[:, k - 1] == 1

        eta1[:, k] = inverse_cdf(phi1_cdf[pair], u[2])
        eta2[:, k] = inverse_cdf(phi2_cdf[pair], u[3])

        xi_from_pair = inverse_cdf(coupled_cdf[pair], u[1])
        xi_from_chain = inverse_cdf(chain_cdf[xi[:, k - 1]], u[1])
        xi[:, k] = np.where(active, xi_from_pair, xi_from_chain)

        meets = u[0] < operator.kappa_pairs[pair]
        zeta[:, k] = np.where(active & ~meets, 1, 0)

    return eta1, eta2, xi, zeta


def vaserstein_simulate(
    chain: StochasticChain,
    mu1: Distribution,
    mu2: Distribution,
    horizon: int,
    rng: np.random.Generator,
    paths: int = 1,
    operator: Optional[CouplingOperator] = None,
) -> VasersteinPaths:
    """在单个生成器上模拟 paths 条 Vaserstein 耦合路径"""
    if horizon < 1:
        raise ValueError(f"horizon 必须 ≥ 1: {horizon}")
    mu1, mu2 = _as_pair(mu1, mu2)
    operator = operator or coupling_operator(chain)
    chain_cdf = cumulative_rows(chain.matrix)
    eta1, eta2, xi, zeta = _vaserstein_block(chain_cdf, operator, mu1, mu2, horizon, rng, paths)
    return VasersteinPaths(eta1=eta1, eta2=eta2, xi=xi, zeta=zeta, kappa0=overlap(mu1, mu2))


def vaserstein_batch(
    chain: StochasticChain,
    mu1: Distribution,
    mu2: Distribution,
    horizon: int,
    paths: int,
    master_seed: int,
    block_size: Optional[int] = None,
) -> VasersteinPaths:
    """按子流分块并行模拟，块序拼接"""
    if horizon < 1:
        raise ValueError(f"horizon 必须 ≥ 1: {horizon}")
    mu1, mu2 = _as_pair(mu1, mu2)
    operator = coupling_operator(chain)
    chain_cdf = cumulative_rows(chain.matrix)

    blocks = run_blocks(
        paths,
        master_seed,
        lambda rng, size: _vaserstein_block(chain_cdf, operator, mu1, mu2, horizon, rng, size),
        block_size=block_size,
    )
    eta1, eta2, xi, zeta = (np.concatenate(parts, axis=0) for parts in zip(*blocks))
    logger.info(f"Vaserstein 耦合模拟完成 | 路径数: {paths} | horizon: {horizon}")
    return VasersteinPaths(eta1=eta1, eta2=eta2, xi=xi, zeta=zeta, kappa0=overlap(mu1, mu2))


def operator_v_spectral(
    chain: StochasticChain,
    operator: Optional[CouplingOperator] = None,
) -> OperatorSpectrum:
    """
    r(V) 的幂迭代估计，并检查 r(V) ≤ 1 − κ

    Warns:
        VacuousBoundWarning: κ = 0
        NoConvergenceWarning: 达到迭代上限
    """
    operator = operator or coupling_operator(chain)
    kappa = md_coefficient(chain, 1)
    if kappa <= 0.0:
        warnings.warn("κ = 0，r(V) ≤ 1 − κ 不提供改进", VacuousBoundWarning, stacklevel=2)

    result = spectral_radius(operator.matrix, label="V")
    spectrum = OperatorSpectrum(
        radius=result.radius,
        iterations=result.iterations,
        converged=result.converged,
        kappa=kappa,
    )
    if not spectrum.within_kappa_bound:
        logger.warning(f"r(V) 超过 1 − κ | r(V): {result.radius:.12g} | 1 − κ: {1 - kappa:.12g}")
    logger.info(f"耦合算子谱半径 | r(V): {result.radius:.10g} | 1 − κ: {1 - kappa:.10g} | 迭代: {result.iterations}")
    return spectrum


def coupling_tv_bound(
    chain: StochasticChain,
    x: int,
    n_max: int,
    mu: Optional[Distribution] = None,
    operator: Optional[CouplingOperator] = None,
) -> CouplingTVBound:
    """耦合不等式 ‖δₓ𝒫ⁿ − μ‖_TV ≤ 2·coupling_bound_exact(δₓ, μ, n)，逐 n 检查"""
    mu = invariant_measure(chain) if mu is None else np.asarray(mu, dtype=float)
    start = point_mass(chain.size, x)
    bound = 2.0 * coupling_bound_curve(chain, start, mu, n_max, operator)

    tv = np.empty(n_max + 1)
    law = start
    for n in range(n_max + 1):
        if n > 0:
            law = law @ chain.matrix
        tv[n] = np.abs(law - mu).sum()
    return CouplingTVBound(tv=tv, bound=bound, holds=bool(np.all(tv <= bound + 1e-12)))


def rate_curves(
    chain: StochasticChain,
    n_max: int,
    mu: Optional[Distribution] = None,
    spectrum: Optional[OperatorSpectrum] = None,
) -> RateCurves:
    """CSV 绘图数据：worst_tv(n)、2(1−κ)ⁿ、2r(V)ⁿ"""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VacuousBoundWarning)
        envelope = convergence_envelope(chain, n_max, mu)
        spectrum = spectrum or operator_v_spectral(chain)
    steps = np.arange(n_max + 1)
    return RateCurves(
        worst_tv=envelope.worst_tv,
        bound_kappa=2.0 * (1.0 - envelope.kappa) ** steps,
        bound_rv=2.0 * spectrum.radius ** steps,
        kappa=envelope.kappa,
        r_v=spectrum.radius,
    )
