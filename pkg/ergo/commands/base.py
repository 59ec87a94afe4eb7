"""
命令处理的公共部分
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..config import settings
from ..exceptions import UnknownReference
from ..schemas.model_file import ModelFile
from ..schemas.report import SeedRecord
from ..services.chain_core import point_mass


@dataclass
class CommandOutput:
    """命令结果：报告内容、适定性记录、种子记录与可选的 CSV 列"""
    results: Dict[str, Any]
    wellposedness: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[SeedRecord] = None
    csv: Optional[Dict[str, Sequence[Any]]] = None


def seed_record(seed: int) -> SeedRecord:
    return SeedRecord(master_seed=seed, block_size=settings.simulation.block_size)


def resolve_seed(seed: Optional[int]) -> int:
    return settings.simulation.default_seed if seed is None else seed


def resolve_law(model: ModelFile, name: str) -> np.ndarray:
    """初始分布名优先，否则按状态标签取点质量"""
    if name in model.initial_laws:
        return model.initial_law(name)
    if name in model.states:
        return point_mass(len(model.states), model.state(name))
    raise UnknownReference(name, "初始分布或状态")


def by_state(model: ModelFile, values: Sequence[float]) -> Dict[str, float]:
    return {label: float(v) for label, v in zip(model.states, values)}
