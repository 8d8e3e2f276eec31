"""暴力参考实现

完整构建全列问题并用 scipy 的 HiGHS 求解；逐一枚举簇指示向量求局部枚举定价的最优值。
只用于测试与交叉校验，不在求解主流程中使用。
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from ..errors import SizeLimitError, SolverFault
from .model import (
    Cluster,
    Column,
    NetworkInstance,
    Schedule,
    cluster_power,
    coupling_coeff,
)
from .pricing.local import LocalMode, ScenarioTable

MAX_COLUMNS = 10**6
MAX_LOCAL_CELLS = 20


@dataclass(frozen=True)
class OracleResult:
    """全列问题的全局最优

    Attributes:
        feasible: 全列问题是否可行
        energy: 最优能量，不可行时为 inf
        schedule: 时长为正的列
        column_count: 全部列数
    """

    feasible: bool
    energy: float
    schedule: Schedule
    column_count: int


def full_column_count(inst: NetworkInstance) -> int:
    """Σ_s Π_{i∈s} J_i = Π_i (1 + J_i) − 1"""
    return math.prod(1 + len(cell) for cell in inst.users_of_cell) - 1


def all_columns(inst: NetworkInstance) -> list[Column]:
    """逐簇、逐顶点构造全部列，速率由耦合系数逐项计算"""
    count = full_column_count(inst)
    if count > MAX_COLUMNS:
        raise SizeLimitError(f"全列数 {count} 超过上限 {MAX_COLUMNS}")
    columns = []
    for mask in range(1, 1 << inst.cell_count):
        s = Cluster(mask)
        power = cluster_power(inst, s)
        members = s.members
        rate_of = {
            (i, j): inst.load[i] * inst.wb / coupling_coeff(inst, s, i, j)
            for i in members
            for j in inst.users_of_cell[i]
        }
        for combo in itertools.product(*(sorted(inst.users_of_cell[i]) for i in members)):
            rates = np.zeros(inst.user_count)
            for i, j in zip(members, combo, strict=True):
                rates[j] = rate_of[(i, j)]
            columns.append(
                Column(
                    cluster=s,
                    served=tuple(zip(members, combo, strict=True)),
                    rates=rates,
                    power=power,
                )
            )
    return columns


def full_matrix(inst: NetworkInstance, columns: list[Column]) -> NDArray[np.float64]:
    """全列约束矩阵：J 个需求行 + 1 个时间行"""
    rates = np.column_stack([c.rates for c in columns])
    return np.vstack([rates, np.ones((1, len(columns)))])


def brute_force_p2(inst: NetworkInstance) -> OracleResult:
    """构建全列问题并求全局最优

    Raises:
        SizeLimitError: 列数超过 10^6
        SolverFault: HiGHS 未给出最优或不可行结论
    """
    columns = all_columns(inst)
    matrix = full_matrix(inst, columns)
    users = inst.user_count
    # Σ r x ≥ d 写成 −Σ r x ≤ −d
    a_ub = np.vstack([-matrix[:users], matrix[users:]])
    b_ub = np.append(-inst.demand, inst.deadline)
    result = linprog(
        c=np.array([c.power for c in columns]),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs",
    )
    if result.status == 2:
        return OracleResult(
            feasible=False, energy=math.inf, schedule=Schedule(), column_count=len(columns)
        )
    if result.status != 0:
        raise SolverFault(f"HiGHS 求解失败: {result.message}")
    schedule = Schedule.from_pairs(
        (c, float(x)) for c, x in zip(columns, result.x, strict=True) if x > 0
    )
    return OracleResult(
        feasible=True,
        energy=float(result.fun),
        schedule=schedule,
        column_count=len(columns),
    )


def brute_force_cluster_omega(
    inst: NetworkInstance, s: Cluster, duals: NDArray[np.float64]
) -> float:
    """枚举簇 s 的全部顶点，返回 max Σ π_j r_j"""
    best = -math.inf
    members = s.members
    for combo in itertools.product(*(inst.users_of_cell[i] for i in members)):
        omega = 0.0
        for i, j in zip(members, combo, strict=True):
            omega += duals[j] * inst.load[i] * inst.wb / coupling_coeff(inst, s, i, j)
        best = max(best, omega)
    return best


def brute_force_price_all(
    inst: NetworkInstance,
    duals: NDArray[np.float64],
    time_dual: float,
) -> tuple[int, float]:
    """逐簇枚举全部顶点，返回 (位掩码, 最小检验数)，并列取位掩码最小者"""
    if inst.cell_count > MAX_LOCAL_CELLS:
        raise SizeLimitError(f"需要 I ≤ {MAX_LOCAL_CELLS}")
    best_mask, best = 0, math.inf
    for mask in range(1, 1 << inst.cell_count):
        s = Cluster(mask)
        reduced = cluster_power(inst, s) - brute_force_cluster_omega(inst, s, duals) - time_dual
        if reduced < best:
            best_mask, best = mask, reduced
    return best_mask, best


def brute_force_local_pricing(
    inst: NetworkInstance,
    table: ScenarioTable,
    duals: NDArray[np.float64],
    mode: LocalMode | str,
    *,
    unit_cost: bool = False,
) -> tuple[int, float]:
    """对全部非空 z 计算 F(z)，返回 (位掩码, 最大值)，并列取位掩码最小者

    Raises:
        SizeLimitError: I > 20
    """
    count = inst.cell_count
    if count > MAX_LOCAL_CELLS:
        raise SizeLimitError(f"穷举局部定价需要 I ≤ {MAX_LOCAL_CELLS}，当前 I = {count}")
    planes = table.beta(mode)
    best_mask, best = 0, -math.inf
    for z in range(1, 1 << count):
        value = 0.0
        for i in range(count):
            if not z >> i & 1:
                continue
            beta = planes[i][table.scenario_of(i, z)]
            users = table.users[i]
            top = max(
                float(duals[j] * (inst.load[i] * inst.wb / beta[u]))
                for u, j in enumerate(users)
            )
            cost = 0.0 if unit_cost else float(inst.cell_power[i])
            value += top - cost
        if value > best:
            best_mask, best = z, value
    return best_mask, best
