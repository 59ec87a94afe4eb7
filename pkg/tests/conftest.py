"""
共享测试夹具
"""

import numpy as np
import pytest

from ergo.services.chain_core import StochasticChain, validate_chain
from ergo.services.replica_pool import ExecutionMode, get_replica_pool


def positive_chain(rng: np.random.Generator, n: int, floor: float = 0.01) -> StochasticChain:
    """所有元素 ≥ floor 的随机转移矩阵"""
    weights = rng.dirichlet(np.ones(n), size=n)
    return validate_chain(floor + (1.0 - floor * n) * weights)


@pytest.fixture
def p2() -> StochasticChain:
    return validate_chain([[0.9, 0.1], [0.2, 0.8]], ["a", "b"])


@pytest.fixture
def swap() -> StochasticChain:
    return validate_chain([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def iid() -> StochasticChain:
    """各行相同的链：X_k 独立同分布"""
    return validate_chain([[0.3, 0.7], [0.3, 0.7]])


@pytest.fixture
def uniform3() -> StochasticChain:
    return validate_chain(np.full((3, 3), 1.0 / 3.0))


@pytest.fixture(scope="session")
def corpus() -> list[StochasticChain]:
    """100 条严格正的随机链，N ∈ {2, …, 8}，元素 ≥ 0.01"""
    rng = np.random.default_rng(20240101)
    return [positive_chain(rng, int(rng.integers(2, 9))) for _ in range(100)]


@pytest.fixture
def serial_pool():
    """临时切换到串行执行"""
    pool = get_replica_pool()
    previous = pool.mode
    pool.set_mode(ExecutionMode.SERIAL)
    yield pool
    pool.set_mode(previous)
