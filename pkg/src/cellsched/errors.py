"""异常定义

不可行性通过报告对象表达（LpSolution.status、SolveReport.termination），
这里只定义调用错误与内部故障。
"""


class CellschedError(Exception):
    """所有 cellsched 异常的基类"""


class DomainError(CellschedError, ValueError):
    """参数不属于问题定义域（小区/用户/簇不匹配、实例违反不变量等）"""


class SizeLimitError(CellschedError, ValueError):
    """问题规模超过精确定价、穷举搜索或 oracle 的上限"""


class ConfigError(CellschedError, ValueError):
    """生成器或实验配置无效"""


class SolverFault(CellschedError, RuntimeError):
    """求解器内部故障（主问题无界、基矩阵奇异等）"""
