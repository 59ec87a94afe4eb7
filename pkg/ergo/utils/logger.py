"""
日志配置模块

ergo 包下所有 logger 共用一组处理器：控制台走 stderr（stdout 只输出报告），
文件日志可选。日志不向 Python 根 logger 传播，嵌入其他程序时不会重复输出。
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

PACKAGE_LOGGER = "ergo"
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_state = {"initialized": False}


def _build_handlers(
    level: int,
    formatter: logging.Formatter,
    file_enabled: bool,
    file_path: Optional[str],
) -> List[logging.Handler]:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if file_enabled and file_path:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(file_path, encoding="utf-8"))
    for handler in handlers:
        handler.setFormatter(formatter)
        handler.setLevel(level)
    return handlers


def init_logging(
    level: str = "INFO",
    log_format: Optional[str] = None,
    file_enabled: bool = False,
    file_path: Optional[str] = None,
    force: bool = False,
) -> None:
    """
    初始化 ergo 包的日志

    Args:
        level: 日志级别名称，无法识别时按 INFO
        log_format: 日志格式，缺省为 DEFAULT_FORMAT
        file_enabled: 是否同时写文件
        file_path: 日志文件路径
        force: 已初始化时仍重新配置（CLI 的 --log-level）
    """
    if _state["initialized"] and not force:
        return

    numeric_level = getattr(logging, level.upper(), logging.INFO)
    formatter = logging.Formatter(log_format or DEFAULT_FORMAT)

    package_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()
    for handler in _build_handlers(numeric_level, formatter, file_enabled, file_path):
        package_logger.addHandler(handler)
    package_logger.setLevel(numeric_level)
    package_logger.propagate = False

    _state["initialized"] = True


def get_logger(name: str = PACKAGE_LOGGER) -> logging.Logger:
    """
    获取 logger 实例

    首次调用时按 settings.logging 初始化；配置不可用时退回默认值。
    """
    if not _state["initialized"]:
        try:
            from ..config import settings

            init_logging(
                level=settings.logging.level,
                log_format=settings.logging.format,
                file_enabled=settings.logging.file_enabled,
                file_path=settings.logging.file_path,
            )
        except Exception:
            init_logging()

    return logging.getLogger(name)
