"""
数据模型模块
"""

from .model_file import ModelFile, emit_model, load_model, parse_model
from .report import Diagnostics, Report, SeedRecord

__all__ = [
    "ModelFile",
    "emit_model",
    "load_model",
    "parse_model",
    "Diagnostics",
    "Report",
    "SeedRecord",
]
