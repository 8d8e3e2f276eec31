"""受限主问题的构建与求解

行：每个用户一行 Σ r_j x ≥ d_j，外加一行 Σ x ≤ T；费用为簇功率 p_s。
最短完成时间模式下费用恒为 1，且没有时间行。
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError, SolverFault
from . import lp
from .lp import LpStatus, Relation
from .model import (
    Cluster,
    Column,
    NetworkInstance,
    RateModel,
    Schedule,
    make_column,
)

logger = logging.getLogger(__name__)

# 给定簇返回其所有用户顶点速率（簇外为 0）的函数
RateFunction = Callable[[Cluster], NDArray[np.float64]]


class MasterObjective(StrEnum):
    ENERGY = "energy"
    TIME = "time"


class ColumnPreset(StrEnum):
    """初始列集合

    - default: 所有单小区簇的全部顶点列（TDMA 列）+ 全簇上每个用户一列
    - pairs: 所有二元簇的全部顶点列 + default
    - full_only: 仅全簇列
    """

    DEFAULT = "default"
    PAIRS = "pairs"
    FULL_ONLY = "full_only"


def _vertex(
    inst: NetworkInstance,
    s: Cluster,
    served_user: dict[int, int],
    rates: NDArray[np.float64],
    rate_model: RateModel,
) -> Column:
    return make_column(inst, s, served_user, rates=rates, rate_model=rate_model)


def full_cluster_columns(
    inst: NetworkInstance,
    rate_fn: RateFunction,
    rate_model: RateModel = RateModel.EXACT,
) -> list[Column]:
    """全簇上每个用户 j 一列：本小区服务 j，其他小区服务各自编号最小的用户"""
    full = Cluster.full(inst.cell_count)
    rates = rate_fn(full)
    lowest = {i: min(cell) for i, cell in enumerate(inst.users_of_cell)}
    columns = []
    for j in range(inst.user_count):
        served = dict(lowest)
        served[int(inst.cell_of_user[j])] = j
        columns.append(_vertex(inst, full, served, rates, rate_model))
    return columns


def all_vertex_columns(
    inst: NetworkInstance,
    s: Cluster,
    rate_fn: RateFunction,
    rate_model: RateModel = RateModel.EXACT,
) -> list[Column]:
    """簇 s 的全部 Π J_i 个顶点列"""
    rates = rate_fn(s)
    members = s.members
    choices = [sorted(inst.users_of_cell[i]) for i in members]
    return [
        _vertex(inst, s, dict(zip(members, combo, strict=True)), rates, rate_model)
        for combo in itertools.product(*choices)
    ]


def initial_columns(
    inst: NetworkInstance,
    preset: ColumnPreset | str,
    rate_fn: RateFunction,
    rate_model: RateModel = RateModel.EXACT,
) -> list[Column]:
    preset = ColumnPreset(preset)
    columns: list[Column] = []
    if preset is not ColumnPreset.FULL_ONLY:
        for i in range(inst.cell_count):
            columns.extend(
                all_vertex_columns(inst, Cluster.of([i]), rate_fn, rate_model)
            )
    if preset is ColumnPreset.PAIRS:
        for a, b in itertools.combinations(range(inst.cell_count), 2):
            columns.extend(
                all_vertex_columns(inst, Cluster.of([a, b]), rate_fn, rate_model)
            )
    columns.extend(full_cluster_columns(inst, rate_fn, rate_model))
    return dedupe(columns)


def dedupe(columns: Iterable[Column]) -> list[Column]:
    seen: set[tuple[int, tuple[tuple[int, int], ...]]] = set()
    unique = []
    for column in columns:
        if column.key not in seen:
            seen.add(column.key)
            unique.append(column)
    return unique


def adapt_columns(inst: NetworkInstance, columns: Sequence[Column]) -> list[Column]:
    """热启动：把旧列搬到新实例上，新增用户在旧列中的速率补零

    旧用户编号必须保持不变，新用户只能追加在末尾。
    """
    adapted = []
    for column in columns:
        old = column.rates.shape[0]
        if old > inst.user_count:
            raise DomainError("热启动列的用户数多于新实例")
        for i, j in column.served:
            if int(inst.cell_of_user[j]) != i:
                raise DomainError(f"热启动列中用户 {j} 不再属于小区 {i}")
        rates = np.zeros(inst.user_count)
        rates[:old] = column.rates
        adapted.append(
            Column(
                cluster=column.cluster,
                served=column.served,
                rates=rates,
                power=float(sum(inst.cell_power[i] for i in column.cluster)),
                rate_model=column.rate_model,
            )
        )
    return adapted


def build(
    inst: NetworkInstance,
    columns: Sequence[Column],
    objective: MasterObjective = MasterObjective.ENERGY,
) -> lp.LpProblem:
    """构建受限主问题：J 个需求行（≥ d_j）+ 时间行（≤ T），每列一个变量"""
    if not columns:
        raise DomainError("主问题至少需要一列")
    rates = np.column_stack([c.rates for c in columns])
    if objective is MasterObjective.TIME:
        return lp.LpProblem(
            cost=np.ones(len(columns)),
            matrix=rates,
            relations=(Relation.GE,) * inst.user_count,
            rhs=inst.demand,
        )
    return lp.LpProblem(
        cost=np.array([c.power for c in columns]),
        matrix=np.vstack([rates, np.ones((1, len(columns)))]),
        relations=(Relation.GE,) * inst.user_count + (Relation.LE,),
        rhs=np.append(inst.demand, inst.deadline),
    )


@dataclass
class MasterState:
    """受限主问题的工作集与最近一次最优解

    Attributes:
        columns: 当前列（无重复）
        durations: 每列时长 x_sc
        duals: 需求行对偶 π_j（≥ 0）
        time_dual: 时间行对偶 λ（≤ 0，时间模式为 0）
        objective: 目标值（能量焦耳或总时长秒）
        status: LP 状态
    """

    columns: list[Column]
    durations: NDArray[np.float64]
    duals: NDArray[np.float64]
    time_dual: float
    objective: float
    status: LpStatus
    mode: MasterObjective = MasterObjective.ENERGY
    _keys: set[tuple[int, tuple[tuple[int, int], ...]]] = field(
        default_factory=set, repr=False
    )

    def __post_init__(self) -> None:
        self._keys = {c.key for c in self.columns}

    @property
    def feasible(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def contains(self, column: Column) -> bool:
        return column.key in self._keys

    def add(self, column: Column) -> bool:
        """追加一列；重复 (簇, 服务用户) 返回 False"""
        if column.key in self._keys:
            return False
        self._keys.add(column.key)
        self.columns.append(column)
        return True

    def column_cost(self, column: Column) -> float:
        return 1.0 if self.mode is MasterObjective.TIME else column.power

    def reduced_cost(self, column: Column) -> float:
        """p_s − Σ_j π_j r_j − λ"""
        return float(
            self.column_cost(column) - self.duals @ column.rates - self.time_dual
        )

    def schedule(self, tol: float = 0.0) -> Schedule:
        return Schedule.from_pairs(
            (c, float(x))
            for c, x in zip(self.columns, self.durations, strict=True)
            if x > tol
        )

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.durations > 0))


def solve_master(
    inst: NetworkInstance,
    columns: Sequence[Column],
    objective: MasterObjective = MasterObjective.ENERGY,
) -> MasterState:
    """求解受限主问题并给出对偶

    Raises:
        SolverFault: 主问题无界（费用为正、x ≥ 0，构造上不可能）
    """
    problem = build(inst, columns, objective)
    solution = lp.solve(problem)
    if solution.status is LpStatus.UNBOUNDED:
        raise SolverFault("受限主问题无界")
    users = inst.user_count
    if solution.status is LpStatus.INFEASIBLE:
        return MasterState(
            columns=list(columns),
            durations=np.zeros(len(columns)),
            duals=np.zeros(users),
            time_dual=0.0,
            objective=float("inf"),
            status=solution.status,
            mode=objective,
        )
    time_dual = 0.0 if objective is MasterObjective.TIME else float(solution.duals[users])
    return MasterState(
        columns=list(columns),
        durations=solution.x,
        duals=np.maximum(solution.duals[:users], 0.0),
        time_dual=min(time_dual, 0.0),
        objective=solution.objective,
        status=solution.status,
        mode=objective,
    )
