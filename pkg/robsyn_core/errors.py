"""
异常定义 (Error Types)

所有领域异常都继承自 RobsynError，并同时继承 ValueError / RuntimeError，
方便调用方按标准异常类别捕获。
"""

from typing import Any, Optional


class RobsynError(Exception):
    """领域异常基类"""


class DimensionMismatchError(RobsynError, ValueError):
    """矩阵维度不一致或分块选择矩阵重叠"""


class RankDeficientError(RobsynError, ValueError):
    """数值秩不足（B_d、B_j 或数据矩阵 Z）"""

    def __init__(self, what: str, rank: int, expected: int):
        self.what = what
        self.rank = rank
        self.expected = expected
        super().__init__(f"RankDeficient({what}): 数值秩 {rank} < 期望 {expected}")


class AsymmetricMatrixError(RobsynError, ValueError):
    """期望对称的矩阵不对称"""


class UnstableSystemError(RobsynError, ValueError):
    """闭环谱半径 ≥ 1，范数无定义"""


class ProblemFileError(RobsynError, ValueError):
    """问题文件解析失败，field 指向出错字段路径"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class InfeasibleError(RobsynError, RuntimeError):
    """LMI 问题不可行"""

    def __init__(self, message: str, solution: Optional[Any] = None):
        self.solution = solution
        super().__init__(message)


class NumericalFailureError(RobsynError, RuntimeError):
    """求解器数值失败或求解后残差检查不通过"""

    def __init__(self, message: str, solution: Optional[Any] = None):
        self.solution = solution
        super().__init__(message)


class InertiaViolationError(RobsynError, RuntimeError):
    """非线性通道乘子 P′ 的惯性与证明要求不符"""
