"""
报告输出工具模块

JSON 报告、文本渲染与 CSV 绘图数据
"""

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..config import settings
from ..schemas.report import Report
from .logger import get_logger

logger = get_logger(__name__)


def file_digest(path: str | Path) -> str:
    """文件内容的 SHA-256"""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def to_jsonable(value: Any) -> Any:
    """numpy 类型转为原生类型，非有限浮点数记为 None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_json(report: Report) -> str:
    payload = to_jsonable(report.model_dump())
    return json.dumps(payload, indent=settings.report.indent, ensure_ascii=False, allow_nan=False) + "\n"


def _flatten(prefix: str, value: Any, lines: list[str]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, lines)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for i, item in enumerate(value):
            _flatten(f"{prefix}[{i}]", item, lines)
    else:
        lines.append(f"{prefix}: {value}")


def render_text(report: Report) -> str:
    """逐行 key: value 的可读渲染"""
    lines: list[str] = []
    _flatten("", to_jsonable(report.model_dump()), lines)
    return "\n".join(lines) + "\n"


def write_report(report: Report, out: Optional[str], output_format: str = "json") -> str:
    """渲染报告；out 为空时只返回文本"""
    text = render_text(report) if output_format == "text" else render_json(report)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"报告已写入 | 路径: {path} | 格式: {output_format}")
    return text


def write_csv(path: str | Path, columns: Dict[str, Sequence[Any]]) -> None:
    """按列写 CSV，浮点数使用 csv_float_format"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    length = len(next(iter(columns.values()))) if columns else 0
    float_format = settings.report.csv_float_format

    def _cell(value: Any) -> str:
        if isinstance(value, (float, np.floating)):
            return float_format % float(value)
        return str(value)

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in range(length):
            writer.writerow([_cell(columns[name][row]) for name in names])
    logger.info(f"CSV 已写入 | 路径: {path} | 列: {names} | 行数: {length}")
