"""
命令处理模块
"""

from . import analyze, couple, ldp, limits, poisson

COMMANDS = {
    "analyze": analyze,
    "couple": couple,
    "limits": limits,
    "ldp": ldp,
    "poisson": poisson,
}

__all__ = ["COMMANDS"]
