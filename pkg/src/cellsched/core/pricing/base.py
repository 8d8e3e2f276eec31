"""定价引擎基类"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..model import Cluster, Column, NetworkInstance, RateModel


@dataclass(frozen=True)
class PricingResult:
    """一轮定价的结果

    Attributes:
        column: 检验数最小的列
        reduced_cost: 该列检验数（由列本身重新计算）
        omega: Σ_j π_j r_j
    """

    column: Column
    reduced_cost: float
    omega: float


class PricingEngine(ABC):
    """定价引擎抽象基类

    unit_cost=True 时列费用恒为 1（最短完成时间主问题），否则为簇功率。
    """

    rate_model: RateModel = RateModel.EXACT

    def __init__(self, inst: NetworkInstance) -> None:
        self.inst = inst

    @abstractmethod
    def price(
        self,
        duals: NDArray[np.float64],
        time_dual: float,
        *,
        unit_cost: bool = False,
    ) -> PricingResult:
        """求检验数最小的列

        Args:
            duals: 需求行对偶 π
            time_dual: 时间行对偶 λ
            unit_cost: 是否按单位费用定价

        Returns:
            PricingResult
        """
        pass

    @abstractmethod
    def cluster_rates(self, s: Cluster) -> NDArray[np.float64]:
        """该引擎速率模型下簇 s 的全部顶点速率（簇外为 0）"""
        pass


def evaluate(
    column: Column,
    duals: NDArray[np.float64],
    time_dual: float,
    *,
    unit_cost: bool = False,
) -> PricingResult:
    """由列本身计算 ω 与检验数 p_s − ω − λ"""
    omega = float(duals @ column.rates)
    cost = 1.0 if unit_cost else column.power
    return PricingResult(column=column, reduced_cost=cost - omega - time_dual, omega=omega)
