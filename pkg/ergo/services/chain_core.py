"""
状态空间与转移矩阵

- 校验行随机矩阵（负元素、行和容差、维度）
- n 步转移矩阵（Chapman–Kolmogorov）
- 全变差距离（ℓ¹ 约定，取值 [0, 2]）

分布与观测值均以一维 float 数组表示，所有内部索引按位置进行。
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..config import settings
from ..exceptions import (
    ChainValidationError,
    DimensionMismatch,
    NegativeEntry,
    RowSumOutOfTolerance,
    UnknownReference,
)
from ..utils.logger import get_logger

logger = get_logger(__name__)

# 概率向量（长度 N，非负，和为 1）
Distribution = np.ndarray
# 状态上的实值函数（长度 N，有限）
Observable = np.ndarray


@dataclass(frozen=True)
class StochasticChain:
    """已校验的行随机矩阵及其状态标签"""

    states: tuple[str, ...]
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.states)

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StochasticChain):
            return NotImplemented
        return self.states == other.states and np.array_equal(self.matrix, other.matrix)

    def __hash__(self) -> int:
        return hash((self.states, self.matrix.tobytes()))


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def validate_chain(
    raw_matrix: Sequence[Sequence[float]],
    labels: Optional[Sequence[str]] = None,
    tolerance: Optional[float] = None,
) -> StochasticChain:
    """
    校验并构造转移矩阵

    行和在容差内时精确归一化。

    Args:
        raw_matrix: N×N 转移概率
        labels: 状态标签，缺省为 "0".."N-1"
        tolerance: 行和容差，缺省取 settings.numerics.row_sum_tolerance

    Raises:
        DimensionMismatch: 非方阵、空矩阵或标签数量不符
        NegativeEntry: 存在负元素
        RowSumOutOfTolerance: 行和偏离 1 超过容差
    """
    if tolerance is None:
        tolerance = settings.numerics.row_sum_tolerance

    try:
        matrix = np.array(raw_matrix, dtype=float)
    except (TypeError, ValueError) as e:
        raise DimensionMismatch(f"转移矩阵不是规则的二维数组: {e}") from e

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise DimensionMismatch(f"转移矩阵必须是非空方阵，实际形状: {matrix.shape}")

    n = matrix.shape[0]
    if labels is None:
        labels = [str(i) for i in range(n)]
    labels = tuple(str(label) for label in labels)
    if len(labels) != n:
        raise DimensionMismatch(f"状态标签数量 {len(labels)} 与矩阵维度 {n} 不符")
    if len(set(labels)) != n:
        raise ChainValidationError("状态标签必须唯一")

    if not np.all(np.isfinite(matrix)):
        raise ChainValidationError("转移矩阵包含非有限值")

    negative = np.argwhere(matrix < 0)
    if negative.size:
        i, j = (int(v) for v in negative[0])
        raise NegativeEntry(i, j, float(matrix[i, j]))

    row_sums = matrix.sum(axis=1)
    for i, row_sum in enumerate(row_sums):
        if abs(row_sum - 1.0) > tolerance:
            raise RowSumOutOfTolerance(i, float(row_sum))

    matrix = matrix / row_sums[:, None]
    logger.debug(f"转移矩阵校验通过 | N: {n}")
    return StochasticChain(states=labels, matrix=_readonly(matrix))


def n_step(chain: StochasticChain, n: int) -> np.ndarray:
    """返回 𝒫ⁿ，𝒫⁰ 为单位阵；逐次右乘 𝒫，不做特征分解"""
    if n < 0:
        raise ValueError(f"步数必须非负: {n}")
    power = np.eye(chain.size)
    for _ in range(int(n)):
        power = power @ chain.matrix
    return power


def total_variation(mu: Distribution, nu: Distribution) -> float:
    """‖μ − ν‖_TV = Σ|μ_i − ν_i|"""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise DimensionMismatch(f"分布维度不一致: {mu.shape} vs {nu.shape}")
    return float(np.abs(mu - nu).sum())


def distribution(weights: Sequence[float], n: Optional[int] = None) -> Distribution:
    """
    校验概率向量

    Raises:
        DimensionMismatch: 长度与 n 不符
        ChainValidationError: 负权重或和不为 1
    """
    vector = np.asarray(weights, dtype=float).reshape(-1)
    if n is not None and vector.shape[0] != n:
        raise DimensionMismatch(f"分布长度 {vector.shape[0]} 与状态数 {n} 不符")
    if not np.all(np.isfinite(vector)):
        raise ChainValidationError("分布包含非有限值")
    if np.any(vector < 0):
        raise ChainValidationError("分布存在负权重")
    total = vector.sum()
    if abs(total - 1.0) > settings.numerics.distribution_tolerance:
        raise ChainValidationError(f"分布之和不为 1: {total}")
    return vector


def observable(values: Sequence[float], n: Optional[int] = None) -> Observable:
    """校验观测值向量（有限实数）"""
    vector = np.asarray(values, dtype=float).reshape(-1)
    if n is not None and vector.shape[0] != n:
        raise DimensionMismatch(f"观测值长度 {vector.shape[0]} 与状态数 {n} 不符")
    if not np.all(np.isfinite(vector)):
        raise ChainValidationError("观测值包含非有限值")
    return vector


def point_mass(n: int, i: int) -> Distribution:
    """δ_i"""
    if not 0 <= i < n:
        raise DimensionMismatch(f"状态索引 {i} 超出范围 [0, {n})")
    vector = np.zeros(n)
    vector[i] = 1.0
    return vector


def state_index(chain: StochasticChain, label: str) -> int:
    """状态标签到位置索引"""
    try:
        return chain.states.index(str(label))
    except ValueError:
        raise UnknownReference(str(label), "状态") from None


def is_primitive(chain: StochasticChain) -> Optional[int]:
    """
    返回使 𝒫ᵏ 严格为正的最小 k（k ≤ N² − 2N + 2），不存在时返回 None
    """
    n = chain.size
    limit = max(1, n * n - 2 * n + 2)
    support = chain.matrix > 0
    current = support.copy()
    for k in range(1, limit + 1):
        if current.all():
            return k
        current = (current.astype(np.int64) @ support.astype(np.int64)) > 0
    return None
