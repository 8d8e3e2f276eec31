"""实验结果数据模型"""

import math
from dataclasses import asdict, dataclass
from typing import Any

# 每实例结果表的列顺序；墙钟时间单独写入 timings 表，结果表可逐字节复现
RESULT_COLUMNS = (
    "seed",
    "instance",
    "algorithm",
    "T",
    "M",
    "energy",
    "feasible",
    "iterations",
    "active_columns",
    "completion_time",
    "mean_activations",
    "mean_user_rate",
    "termination",
)
BOUND_COLUMNS = (
    "seed",
    "instance",
    "T",
    "M",
    "lower",
    "near",
    "upper",
    "gap",
    "lower_feasible",
    "upper_feasible",
)
TIMING_KEYS = ("instance", "algorithm", "T", "M")


@dataclass
class ResultRow:
    """单个 (实例, 算法, T, M) 的结果

    Attributes:
        seed: 生成器种子
        instance: 批次内实例编号
        algorithm: 算法标签
        T: 时限 (s)
        M: M 策略，与 M 无关的算法为 "-"
        energy: 能量 (J)，不可行时为 inf（tdma 为诊断值）
        feasible: 是否可行
        iterations: 定价轮数
        active_columns: 时长为正的列数
        completion_time: 调度总时长 (s)
        termination: 终止原因
        mean_activations: 每小区平均激活次数
        mean_user_rate: 用户平均速率 (bit/s)
        wall_seconds: 墙钟时间 (s)
    """

    seed: int
    instance: int
    algorithm: str
    T: float
    M: str
    energy: float
    feasible: bool
    iterations: int
    active_columns: int
    completion_time: float
    termination: str
    mean_activations: float = math.nan
    mean_user_rate: float = math.nan
    wall_seconds: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        """转换为字典（不含墙钟时间）"""
        data = asdict(self)
        return {key: data[key] for key in RESULT_COLUMNS}

    def timing(self) -> dict[str, Any]:
        data = asdict(self)
        return {**{key: data[key] for key in TIMING_KEYS}, "wall_seconds": self.wall_seconds}


@dataclass
class BoundRow:
    """单个 (实例, T, M) 的能量区间

    Attributes:
        lower: 能量下界（off 模式），未计算时为 nan
        near: near 能量
        upper: 能量上界（on 模式），不可行时为 inf
        gap: (upper − lower) / lower，无定义时为 nan
    """

    seed: int
    instance: int
    T: float
    M: str
    lower: float = math.nan
    near: float = math.nan
    upper: float = math.nan
    gap: float = math.nan
    lower_feasible: bool = False
    upper_feasible: bool = False

    def to_dict(self) -> dict[str, Any]:
        """转换为字典"""
        return asdict(self)
