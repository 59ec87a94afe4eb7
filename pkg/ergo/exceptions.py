"""
异常与警告定义

每个错误类携带唯一的进程退出码，CLI 据此返回非零状态。
"返回结果但需标记" 的情况使用警告类别，由 CLI 收集进报告。
"""

from typing import Dict, Optional, Type


class ErgoError(Exception):
    """所有分析错误的基类"""

    exit_code: int = 1


# ---------------------------------------------------------------------------
# 输入与模型文件
# ---------------------------------------------------------------------------


class DimensionMismatch(ErgoError, ValueError):
    """向量或矩阵维度不一致"""

    exit_code = 10


class ChainValidationError(ErgoError, ValueError):
    """转移矩阵或概率向量不满足约束"""

    exit_code = 11


class NegativeEntry(ChainValidationError):
    """转移矩阵存在负元素"""

    exit_code = 12

    def __init__(self, i: int, j: int, value: float):
        self.i = i
        self.j = j
        self.value = value
        super().__init__(f"转移矩阵元素 ({i}, {j}) 为负: {value}")


class RowSumOutOfTolerance(ChainValidationError):
    """转移矩阵行和偏离 1"""

    exit_code = 13

    def __init__(self, i: int, row_sum: float):
        self.i = i
        self.row_sum = row_sum
        super().__init__(f"第 {i} 行的行和超出容差: {row_sum}")


class ParseError(ErgoError):
    """模型文件无法解析"""

    exit_code = 14

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"第 {line} 行解析失败: {message}")


class UnknownReference(ErgoError, KeyError):
    """引用了不存在的名称（状态、观测值、边界等）"""

    exit_code = 15

    def __init__(self, name: str, kind: str = "名称"):
        self.name = name
        self.kind = kind
        super().__init__(f"未知的{kind}: {name}")

    def __str__(self) -> str:
        return self.args[0]


class ModelValidationError(ErgoError, ValueError):
    """模型文件结构合法但内容不满足约束"""

    exit_code = 16


# ---------------------------------------------------------------------------
# 分析错误
# ---------------------------------------------------------------------------


class NotCentered(ErgoError, ValueError):
    """观测值关于不变测度未中心化"""

    exit_code = 20


class SingularPair(ErgoError, ValueError):
    """两个分布相互奇异（重叠为 0），无法耦合"""

    exit_code = 21


class VacuousBound(ErgoError):
    """κ = 0，几何界失效"""

    exit_code = 22


class NotPrimitive(ErgoError):
    """转移矩阵的任何幂都不严格为正"""

    exit_code = 23


class BracketFailure(ErgoError):
    """Legendre 变换的极大点落在网格边界上"""

    exit_code = 24


class TableTooLarge(ErgoError):
    """精确尾概率的 DP 表超出上限"""

    exit_code = 25


class ZeroProbability(ErgoError):
    """事件概率为 0"""

    exit_code = 26


class UnreachableBoundary(ErgoError):
    """存在无法到达边界的内部状态"""

    exit_code = 27


class IllPosed(ErgoError):
    """加权算子的谱半径 ≥ 1，级数发散"""

    exit_code = 28

    def __init__(self, message: str, spectral_radius: Optional[float] = None):
        self.spectral_radius = spectral_radius
        super().__init__(message)


class HorizonExceeded(ErgoError):
    """模拟路径在上限步数内未击中边界"""

    exit_code = 29


class NoConvergence(ErgoError):
    """迭代在上限内未收敛"""

    exit_code = 30


# ---------------------------------------------------------------------------
# 警告
# ---------------------------------------------------------------------------


class ErgoWarning(UserWarning):
    """所有分析警告的基类"""


class NonUniqueWarning(ErgoWarning):
    """不变测度可能不唯一，结果依赖初始状态"""


class VacuousBoundWarning(ErgoWarning):
    """κ = 0，几何界退化为平凡界"""


class NoConvergenceWarning(ErgoWarning):
    """迭代达到上限，返回最佳估计"""


class AutoCenteredWarning(ErgoWarning):
    """观测值未中心化，已自动中心化"""


def exit_code_table() -> Dict[str, int]:
    """错误类名到退出码的映射（文档与测试使用）"""
    table: Dict[str, int] = {}
    stack: list[Type[ErgoError]] = [ErgoError]
    while stack:
        cls = stack.pop()
        table[cls.__name__] = cls.exit_code
        stack.extend(cls.__subclasses__())
    return dict(sorted(table.items(), key=lambda item: item[1]))
