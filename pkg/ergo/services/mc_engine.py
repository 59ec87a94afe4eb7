"""
蒙特卡罗轨迹模拟

- 计数器型子流：Philox 比特生成器，由 SeedSequence(master_seed, spawn_key=(stream_id,)) 派生
- 逆 CDF 抽样，状态顺序固定，路径是均匀数序列的纯函数
- 路径按块划分，块 b 使用子流 b，块在工作池上并行、按块序拼接
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from ..config import settings
from .chain_core import Distribution, Observable, StochasticChain
from .replica_pool import get_replica_pool
from ..utils.logger import get_logger

logger = get_logger(__name__)

R = TypeVar("R")


@dataclass(frozen=True)
class SeedSpec:
    """主种子与子流编号"""
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.stream_id < 0:
            raise ValueError("种子与子流编号必须非负")


@dataclass
class PathBatch:
    """M 条长度为 n+1 的路径"""
    paths: np.ndarray
    init: Distribution
    chain: StochasticChain
    master_seed: int
    block_size: int

    @property
    def count(self) -> int:
        return int(self.paths.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.paths.shape[1]) - 1


@dataclass
class Estimate:
    """样本均值、标准误与样本数"""
    mean: float
    std_error: float
    count: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "count": self.count}


def substream(seed: SeedSpec) -> np.random.Generator:
    """返回 (master_seed, stream_id) 对应的独立生成器"""
    sequence = np.random.SeedSequence(seed.master_seed, spawn_key=(seed.stream_id,))
    return np.random.Generator(np.random.Philox(sequence))


def cumulative_rows(matrix: np.ndarray) -> np.ndarray:
    """
    逐行累积分布

    每行最后一个正概率位置及其之后置为 1，零概率状态永远不会被抽中。
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    cdf = np.cumsum(matrix, axis=1)
    n = matrix.shape[1]
    positive = matrix > 0
    last = n - 1 - np.argmax(positive[:, ::-1], axis=1)
    columns = np.arange(n)[None, :]
    cdf[columns >= last[:, None]] = 1.0
    return cdf


def inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    逆 CDF 抽样（向量化）

    Args:
        cdf_rows: (B, N) 每个样本对应的累积分布行，或单行 (N,)
        u: (B,) [0, 1) 上的均匀数
    """
    u = np.asarray(u, dtype=float)
    cdf_rows = np.asarray(cdf_rows, dtype=float)
    if cdf_rows.ndim == 1:
        cdf_rows = np.broadcast_to(cdf_rows, (u.shape[0], cdf_rows.shape[0]))
    index = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(index, cdf_rows.shape[1] - 1)


def run_blocks(
    total: int,
    master_seed: int,
    block_fn: Callable[[np.random.Generator, int], R],
    block_size: Optional[int] = None,
    stream_offset: int = 0,
) -> List[R]:
    """
    把 total 个样本切分为块，块 b 在子流 stream_offset + b 上执行 block_fn(rng, size)

    结果按块序返回，与调度无关。
    """
    if total < 1:
        raise ValueError(f"样本数必须为正: {total}")
    block_size = block_size or settings.simulation.block_size
    blocks = math.ceil(total / block_size)
    sizes = [min(block_size, total - b * block_size) for b in range(blocks)]

    def _run(b: int) -> R:
        rng = substream(SeedSpec(master_seed, stream_offset + b))
        return block_fn(rng, sizes[b])

    return get_replica_pool().map_blocks(_run, range(blocks))


def _simulate_block(
    cdf: np.ndarray,
    init_cdf: np.ndarray,
    n: int,
    rng: np.random.Generator,
    size: int,
) -> np.ndarray:
    u = rng.random((n + 1, size))
    paths = np.empty((size, n + 1), dtype=np.int64)
    current = inverse_cdf(init_cdf, u[0])
    paths[:, 0] = current
    for k in range(1, n + 1):
        current = inverse_cdf(cdf[current], u[k])
        paths[:, k] = current
    return paths


def sample_path(
    chain: StochasticChain,
    init: Distribution,
    n: int,
    seed: SeedSpec,
) -> np.ndarray:
    """X₀ ~ init，逐步按行逆 CDF 抽样，返回 n+1 个状态"""
    if n < 0:
        raise ValueError(f"步数必须非负: {n}")
    cdf = cumulative_rows(chain.matrix)
    init_cdf = cumulative_rows(init)[0]
    return _simulate_block(cdf, init_cdf, n, substream(seed), 1)[0]


def sample_batch(
    chain: StochasticChain,
    init: Distribution,
    n: int,
    paths: int,
    master_seed: int,
    block_size: Optional[int] = None,
    stream_offset: int = 0,
) -> PathBatch:
    """按块并行模拟 paths 条路径"""
    if n < 0:
        raise ValueError(f"步数必须非负: {n}")
    block_size = block_size or settings.simulation.block_size
    cdf = cumulative_rows(chain.matrix)
    init_cdf = cumulative_rows(init)[0]

    blocks = run_blocks(
        paths,
        master_seed,
        lambda rng, size: _simulate_block(cdf, init_cdf, n, rng, size),
        block_size=block_size,
        stream_offset=stream_offset,
    )
    batch = np.concatenate(blocks, axis=0)
    logger.info(f"路径模拟完成 | 路径数: {paths} | 步数: {n} | 块数: {len(blocks)}")
    return PathBatch(
        paths=batch,
        init=np.asarray(init, dtype=float),
        chain=chain,
        master_seed=master_seed,
        block_size=block_size,
    )


def additive_sums(
    chain: StochasticChain,
    init: Distribution,
    n: int,
    f: Observable,
    replicas: int,
    master_seed: int,
    block_size: Optional[int] = None,
    stream_offset: int = 0,
) -> np.ndarray:
    """每个副本的 Σ_{k<n} f(X_k)，不保存路径"""
    if n < 1:
        raise ValueError(f"步数必须为正: {n}")
    cdf = cumulative_rows(chain.matrix)
    init_cdf = cumulative_rows(init)[0]
    f = np.asarray(f, dtype=float)

    def _block(rng: np.random.Generator, size: int) -> np.ndarray:
        current = inverse_cdf(init_cdf, rng.random(size))
        total = f[current].copy()
        for _ in range(1, n):
            current = inverse_cdf(cdf[current], rng.random(size))
            total += f[current]
        return total

    sums = np.concatenate(
        run_blocks(replicas, master_seed, _block, block_size=block_size, stream_offset=stream_offset)
    )
    logger.info(f"可加泛函模拟完成 | 副本数: {replicas} | 步数: {n}")
    return sums


def estimate_values(values: Sequence[float]) -> Estimate:
    """样本均值与标准误"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("空样本无法估计")
    count = int(values.size)
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return Estimate(mean=mean, std_error=std_error, count=count)


def estimate(functional: Callable[[np.ndarray], float], batch: PathBatch) -> Estimate:
    """对每条路径求泛函值，按路径序聚合"""
    if batch.count == 0:
        raise ValueError("空路径批次无法估计")
    values = np.fromiter((functional(path) for path in batch.paths), dtype=float, count=batch.count)
    return estimate_values(values)
