"""
模型文件的 Pydantic Schema

模型文件是一个 JSON 文档：
states / matrix / observables / potentials / boundaries / initial_laws
"""

import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, ValidationError

from ..exceptions import ModelValidationError, ParseError, UnknownReference
from ..services.chain_core import StochasticChain, distribution, observable, validate_chain
from ..utils.logger import get_logger

logger = get_logger(__name__)


class ModelFile(BaseModel):
    """已校验的模型文件"""

    states: List[str] = Field(..., min_length=1, description="状态标签")
    matrix: List[List[float]] = Field(..., description="转移矩阵（按行）")
    observables: Dict[str, List[float]] = Field(default_factory=dict, description="观测值")
    potentials: Dict[str, List[float]] = Field(default_factory=dict, description="势函数")
    boundaries: Dict[str, List[str]] = Field(default_factory=dict, description="边界（状态标签子集）")
    initial_laws: Dict[str, List[float]] = Field(default_factory=dict, description="初始分布")

    model_config = {"extra": "forbid"}

    _chain: Optional[StochasticChain] = PrivateAttr(default=None)

    def check_references(self) -> None:
        """校验转移矩阵并解析全部交叉引用"""
        self._chain = validate_chain(self.matrix, self.states)
        n = len(self.states)
        for values in {**self.observables, **self.potentials}.values():
            observable(values, n)
        for name, labels in self.boundaries.items():
            for label in labels:
                if label not in self.states:
                    raise UnknownReference(label, f"状态（边界 {name}）")
        for values in self.initial_laws.values():
            distribution(values, n)

    @property
    def chain(self) -> StochasticChain:
        if self._chain is None:
            self._chain = validate_chain(self.matrix, self.states)
        return self._chain

    def observable(self, name: str) -> np.ndarray:
        return self._lookup(self.observables, name, "观测值")

    def potential(self, name: str) -> np.ndarray:
        return self._lookup(self.potentials, name, "势函数")

    def initial_law(self, name: str) -> np.ndarray:
        return self._lookup(self.initial_laws, name, "初始分布")

    def boundary(self, name: str) -> tuple[int, ...]:
        if name not in self.boundaries:
            raise UnknownReference(name, "边界")
        return tuple(self.states.index(label) for label in self.boundaries[name])

    def state(self, label: str) -> int:
        if label not in self.states:
            raise UnknownReference(label, "状态")
        return self.states.index(label)

    @staticmethod
    def _lookup(table: Dict[str, List[float]], name: str, kind: str) -> np.ndarray:
        if name not in table:
            raise UnknownReference(name, kind)
        return np.asarray(table[name], dtype=float)


def load_model(text: str) -> ModelFile:
    """
    从 JSON 文本构造模型

    Raises:
        ParseError: JSON 语法错误（含行号）
        ModelValidationError: 字段缺失或类型不符
        UnknownReference: 边界引用了未知状态
        ChainValidationError: 转移矩阵或向量不满足约束
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from e
    if not isinstance(raw, dict):
        raise ParseError(1, "顶层必须是 JSON 对象")

    try:
        model = ModelFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ModelValidationError(f"模型字段 {location} 无效: {first['msg']}") from e

    model.check_references()
    return model


def parse_model(path: str | Path) -> ModelFile:
    """读取并校验模型文件"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(0, f"无法读取模型文件 {path}: {e}") from e

    model = load_model(text)
    logger.info(
        f"模型加载完成 | 文件: {path.name} | 状态数: {len(model.states)} | "
        f"观测值: {len(model.observables)} | 边界: {len(model.boundaries)}"
    )
    return model


def emit_model(model: ModelFile) -> str:
    """序列化为 JSON 文本，parse_model 的逆操作"""
    return json.dumps(model.model_dump(), indent=2, ensure_ascii=False)
