"""
内存监控工具

记录大矩阵运算与蒙特卡罗批次前后的进程内存（RSS），
用于定位 N²×N² 耦合算子与 DP 表格的内存峰值。
"""

import gc
from typing import Any, Dict, Optional

import psutil

from .logger import get_logger

logger = get_logger(__name__)


def cleanup_memory(aggressive: bool = False) -> Dict[str, Any]:
    """
    执行垃圾回收并返回回收前后的内存信息

    Args:
        aggressive: 是否多轮回收
    """
    memory_before = get_memory_info()

    gc.collect()
    if aggressive:
        for _ in range(2):
            gc.collect()

    memory_after = get_memory_info()
    freed_mb = memory_before["rss_mb"] - memory_after["rss_mb"]

    logger.debug(f"内存清理完成 | RSS 释放: {freed_mb:.1f}MB")

    return {
        "before": memory_before,
        "after": memory_after,
        "freed_mb": max(0.0, freed_mb),
    }


def get_memory_info() -> Dict[str, Any]:
    """
    获取当前进程与系统的内存使用信息

    Returns:
        rss_mb / rss_gb: 进程常驻内存
        total_gb / percent: 系统总内存及占用率
    """
    info: Dict[str, Any] = {"rss_mb": 0.0, "rss_gb": 0.0}
    try:
        process = psutil.Process()
        rss = process.memory_info().rss
        info["rss_mb"] = rss / (1024 ** 2)
        info["rss_gb"] = rss / (1024 ** 3)

        system_memory = psutil.virtual_memory()
        info["total_gb"] = system_memory.total / (1024 ** 3)
        info["percent"] = system_memory.percent
    except Exception as e:
        logger.warning(f"获取内存信息失败: {e}")
    return info


def estimate_array_mb(*shape: int, itemsize: int = 8) -> float:
    """估算给定形状的数组占用（MB）"""
    cells = 1
    for dim in shape:
        cells *= int(dim)
    return cells * itemsize / (1024 ** 2)


def log_memory_status(prefix: str = "") -> None:
    """
    记录当前内存状态到日志

    Args:
        prefix: 日志前缀，用于标识调用位置
    """
    info = get_memory_info()
    log_parts = [prefix if prefix else "内存状态"]
    log_parts.append(f"进程内存(RSS): {info['rss_mb']:.1f}MB")
    if "percent" in info:
        log_parts.append(f"系统占用: {info['percent']:.1f}%")
    logger.info(" | ".join(log_parts))


class MemoryTracker:
    """
    内存跟踪器上下文管理器

    Usage:
        with MemoryTracker("analyze"):
            ...
    """

    def __init__(self, name: str = "任务", auto_cleanup: bool = False):
        self.name = name
        self.auto_cleanup = auto_cleanup
        self.memory_before: Optional[Dict[str, Any]] = None
        self.memory_after: Optional[Dict[str, Any]] = None

    def __enter__(self) -> "MemoryTracker":
        self.memory_before = get_memory_info()
        logger.debug(f"[{self.name}] 开始 | RSS: {self.memory_before['rss_mb']:.1f}MB")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        if self.auto_cleanup:
            cleanup_memory()

        self.memory_after = get_memory_info()
        delta = self.memory_after["rss_mb"] - self.memory_before["rss_mb"]

        logger.info(
            f"[{self.name}] 完成 | "
            f"RSS: {self.memory_after['rss_mb']:.1f}MB ({delta:+.1f}MB)"
        )
        return False  # 不抑制异常

    @property
    def delta_mb(self) -> float:
        if self.memory_before is None or self.memory_after is None:
            return 0.0
        return self.memory_after["rss_mb"] - self.memory_before["rss_mb"]
