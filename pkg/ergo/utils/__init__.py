"""工具模块"""

from .logger import get_logger, init_logging
from .memory_utils import MemoryTracker, get_memory_info, log_memory_status

__all__ = [
    "get_logger",
    "init_logging",
    "MemoryTracker",
    "get_memory_info",
    "log_memory_status",
]
