"""
分析报告的 Pydantic Schema

相同输入与种子下，报告序列化结果逐字节一致：不含时间戳，字段顺序固定。
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class SeedRecord(BaseModel):
    """采样运行的种子记录"""
    master_seed: int = Field(..., ge=0, description="主种子")
    block_size: int = Field(..., ge=1, description="每个子流的路径数")
    bit_generator: str = Field(default="Philox", description="计数器型位生成器")


class Diagnostics(BaseModel):
    """警告与适定性记录"""
    warnings: List[str] = Field(default_factory=list)
    wellposedness: Dict[str, Any] = Field(default_factory=dict)


class Report(BaseModel):
    """命令输出报告"""
    command: Dict[str, Any] = Field(..., description="命令及参数回显")
    input_digest: str = Field(..., description="模型文件的 SHA-256")
    results: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Diagnostics = Field(default_factory=Diagnostics)
    seed: Optional[SeedRecord] = None
