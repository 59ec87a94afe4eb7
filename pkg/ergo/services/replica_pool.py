"""
并行工作池模块

蒙特卡罗批次与 β 网格求值的并行执行器：
- thread 模式：线程池并行（numpy 运算释放 GIL）
- serial 模式：在调用线程中顺序执行（调试用）

无论调度顺序如何，结果总是按提交顺序返回。
"""

import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Deque, List, Optional, Sequence, TypeVar

from ..config import settings
from ..utils.logger import get_logger

logger = get_logger(__name__)

# 只保留最近的批次耗时
HISTORY_LIMIT = 256

T = TypeVar("T")
R = TypeVar("R")


class ExecutionMode(str, Enum):
    """执行模式"""
    THREAD = "thread"
    SERIAL = "serial"


@dataclass
class PoolStats:
    """工作池累计统计"""
    batches: int = 0
    blocks: int = 0
    seconds: float = 0.0
    history: Deque[float] = field(default_factory=lambda: deque(maxlen=HISTORY_LIMIT))

    def record(self, blocks: int, seconds: float) -> None:
        self.batches += 1
        self.blocks += blocks
        self.seconds += seconds
        self.history.append(seconds)


class ReplicaPool:
    """
    并行工作池

    进程内单例；工作者数量来自 settings.workers.max_workers，
    0 表示使用 CPU 数量。
    """

    _instance: Optional["ReplicaPool"] = None

    def __new__(cls) -> "ReplicaPool":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        configured_workers = settings.workers.max_workers
        if configured_workers > 0:
            self._max_workers = configured_workers
        else:
            self._max_workers = max(1, os.cpu_count() or 1)

        try:
            self._mode = ExecutionMode(settings.workers.execution_mode)
        except ValueError:
            logger.warning(f"未知的执行模式 {settings.workers.execution_mode!r}，回退为 thread")
            self._mode = ExecutionMode.THREAD

        self._executor: Optional[ThreadPoolExecutor] = None
        self.stats = PoolStats()

        self._initialized = True
        logger.info(f"工作池初始化 | 模式: {self._mode.value} | 最大并行数: {self._max_workers}")

    @property
    def max_workers(self) -> int:
        """最大并行工作者数量"""
        return self._max_workers

    @property
    def mode(self) -> ExecutionMode:
        return self._mode

    def set_mode(self, mode: ExecutionMode) -> None:
        """切换执行模式（测试中用于对比 serial 与 thread 输出）"""
        self._mode = ExecutionMode(mode)

    def _ensure_executor(self) -> ThreadPoolExecutor:
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self._max_workers,
                thread_name_prefix="ergo_worker",
            )
        return self._executor

    def map_blocks(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        对每个 item 调用 fn，按提交顺序返回结果

        任一块抛出的异常会原样传播给调用方。
        """
        items = list(items)
        started = time.perf_counter()

        if self._mode == ExecutionMode.SERIAL or len(items) <= 1 or self._max_workers == 1:
            results = [fn(item) for item in items]
        else:
            executor = self._ensure_executor()
            futures = [executor.submit(fn, item) for item in items]
            results = [future.result() for future in futures]

        elapsed = time.perf_counter() - started
        self.stats.record(len(items), elapsed)
        logger.debug(f"批次完成 | 块数: {len(items)} | 耗时: {elapsed:.3f}s")
        return results

    def shutdown(self) -> None:
        """关闭线程池"""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
            logger.info("工作池已关闭")

    def info(self) -> dict[str, Any]:
        return {
            "mode": self._mode.value,
            "max_workers": self._max_workers,
            "batches": self.stats.batches,
            "blocks": self.stats.blocks,
        }


_replica_pool: Optional[ReplicaPool] = None


def get_replica_pool() -> ReplicaPool:
    """获取工作池单例"""
    global _replica_pool
    if _replica_pool is None:
        _replica_pool = ReplicaPool()
    return _replica_pool
