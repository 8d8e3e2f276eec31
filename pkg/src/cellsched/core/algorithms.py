"""端到端求解流程

- ocs: 精确列生成，收敛时为全局最优能量
- bound: 局部枚举 off/on 两次列生成给出能量下界与上界，并附带 near
- near: 取 on 模式最优解中的列，换成精确速率后重解主问题
- tdma: 逐用户独占时隙的闭式解
- all_on: 只允许全簇激活的列生成
- min_completion_time: 最短完成时间（单位费用列生成）
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from enum import StrEnum
from typing import Any

from ..errors import ConfigError, SolverFault
from ..metrics import get_metrics
from ..settings import Settings, get_settings
from .master import (
    ColumnPreset,
    MasterObjective,
    MasterState,
    adapt_columns,
    dedupe,
    initial_columns,
    solve_master,
)
from .model import (
    Cluster,
    Column,
    NetworkInstance,
    Schedule,
    cluster_power,
    make_column,
    tdma_user_times,
)
from .pricing import (
    ExactPricing,
    LocalMode,
    LocalPricing,
    MPolicy,
    PricingEngine,
    ScenarioTable,
    SearchStrategy,
    build_scenarios,
    select_neighbors,
)

logger = logging.getLogger(__name__)

# 判定 T 可满足时允许的相对误差
DEADLINE_REL_TOL = 1e-9


class Algorithm(StrEnum):
    OCS = "ocs"
    NEAR = "near"
    ALL_ON = "allon"
    TDMA = "tdma"
    LE_OFF = "le_off"
    LE_ON = "le_on"
    MIN_TIME = "tmin"


class Termination(StrEnum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class SolverOptions:
    """列生成参数

    Attributes:
        iteration_cap: 定价轮数上限
        rc_tolerance: 检验数 ≥ −rc_tolerance 时停止
        initial_columns: 初始列集合
        workers: 精确定价线程数
        exact_pricing_limit: 精确定价允许的最大小区数
        recover_infeasible: 初始主问题不可行时先求最短完成时间，以其列集重试
        local_search: 局部枚举定价的搜索策略
    """

    iteration_cap: int = 10_000
    rc_tolerance: float = 1e-7
    initial_columns: ColumnPreset = ColumnPreset.DEFAULT
    workers: int = 1
    exact_pricing_limit: int = 20
    recover_infeasible: bool = False
    local_search: SearchStrategy = SearchStrategy.DFS

    def __post_init__(self) -> None:
        try:
            object.__setattr__(
                self, "initial_columns", ColumnPreset(self.initial_columns)
            )
            object.__setattr__(self, "local_search", SearchStrategy(self.local_search))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.iteration_cap < 1:
            raise ConfigError("iteration_cap 必须 >= 1")
        if self.rc_tolerance <= 0:
            raise ConfigError("rc_tolerance 必须 > 0")
        if self.workers < 1:
            raise ConfigError("workers 必须 >= 1")
        if not 1 <= self.exact_pricing_limit <= 20:
            raise ConfigError("exact_pricing_limit 必须在 [1, 20] 内")

    @classmethod
    def from_settings(cls, settings: Settings | None = None, **overrides: Any) -> SolverOptions:
        settings = settings or get_settings()
        values: dict[str, Any] = {
            "iteration_cap": settings.iteration_cap,
            "rc_tolerance": settings.rc_tolerance,
            "workers": settings.pricing_workers,
            "exact_pricing_limit": settings.exact_pricing_limit,
        }
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SolverOptions:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"未知的求解参数: {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True)
class SolveReport:
    """单次求解结果

    Attributes:
        algorithm: 算法标签
        energy: 能量 (J)，不可行时为 inf（TDMA 仍给出诊断值）
        schedule: 调度
        iterations: 定价轮数
        termination: converged / infeasible / iteration-cap
        pricing_seconds: 定价耗时
        wall_seconds: 总耗时
        completion_time: 调度总时长 (s)
        master: 最终主问题状态，可用于热启动
    """

    algorithm: Algorithm
    energy: float
    schedule: Schedule
    iterations: int
    termination: Termination
    pricing_seconds: float = 0.0
    wall_seconds: float = 0.0
    completion_time: float = math.nan
    master: MasterState | None = field(default=None, repr=False, compare=False)

    @property
    def feasible(self) -> bool:
        return self.termination is not Termination.INFEASIBLE

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED

    @property
    def active_columns(self) -> int:
        return len(self.schedule.active())


@dataclass(frozen=True)
class BoundReport:
    """局部枚举给出的能量区间

    gap = (E_on − E_off) / E_off；on 不可行或任一侧缺失时为 nan。
    """

    policy: str
    lower: SolveReport | None
    upper: SolveReport | None
    near: SolveReport | None

    @property
    def lower_energy(self) -> float:
        return self.lower.energy if self.lower is not None else math.nan

    @property
    def upper_energy(self) -> float:
        return self.upper.energy if self.upper is not None else math.nan

    @property
    def near_energy(self) -> float:
        return self.near.energy if self.near is not None else math.nan

    @property
    def gap(self) -> float:
        lower, upper = self.lower_energy, self.upper_energy
        if not (math.isfinite(lower) and math.isfinite(upper)) or lower <= 0:
            return math.nan
        return (upper - lower) / lower


# ---------------------------------------------------------------------------
# 列生成
# ---------------------------------------------------------------------------


def _report(
    inst: NetworkInstance,
    algorithm: Algorithm,
    state: MasterState | None,
    *,
    termination: Termination,
    iterations: int,
    started: float,
    pricing_seconds: float = 0.0,
    schedule: Schedule | None = None,
    energy: float | None = None,
) -> SolveReport:
    if schedule is None:
        schedule = state.schedule() if state is not None and state.feasible else Schedule()
    if energy is None:
        energy = (
            schedule.total_energy
            if termination is not Termination.INFEASIBLE
            else math.inf
        )
    seconds = time.perf_counter() - started
    report = SolveReport(
        algorithm=algorithm,
        energy=energy,
        schedule=schedule,
        iterations=iterations,
        termination=termination,
        pricing_seconds=pricing_seconds,
        wall_seconds=seconds,
        completion_time=schedule.total_duration,
        master=state,
    )
    get_metrics().record_solve(
        algorithm=str(algorithm), termination=str(termination), seconds=seconds
    )
    logger.info(
        "solve_completed",
        extra={
            "algorithm": str(algorithm),
            "energy": energy,
            "iterations": iterations,
            "termination": str(termination),
            "cells": inst.cell_count,
            "users": inst.user_count,
            "deadline": inst.deadline,
            "wall_seconds": round(seconds, 6),
        },
    )
    return report


def column_generation(
    inst: NetworkInstance,
    engine: PricingEngine,
    columns: Sequence[Column],
    options: SolverOptions,
    *,
    algorithm: Algorithm,
    objective: MasterObjective = MasterObjective.ENERGY,
) -> SolveReport:
    """交替求解主问题与定价问题，直到最小检验数 ≥ −ε

    Args:
        inst: 实例
        engine: 定价引擎
        columns: 初始列
        options: 求解参数
        algorithm: 报告中的算法标签
        objective: energy（能量）或 time（最短完成时间）

    Returns:
        SolveReport；初始主问题不可行时 termination=infeasible
    """
    started = time.perf_counter()
    metrics = get_metrics()
    unit_cost = objective is MasterObjective.TIME
    state = solve_master(inst, dedupe(columns), objective)
    if not state.feasible and not unit_cost and options.recover_infeasible:
        state = _recover(inst, engine, state, options)
    if not state.feasible:
        logger.debug(f"{algorithm} 初始主问题不可行 (T = {inst.deadline})")
        return _report(
            inst,
            algorithm,
            state,
            termination=Termination.INFEASIBLE,
            iterations=0,
            started=started,
        )

    iterations = 0
    pricing_seconds = 0.0
    termination = Termination.ITERATION_CAP
    while iterations < options.iteration_cap:
        tick = time.perf_counter()
        result = engine.price(state.duals, state.time_dual, unit_cost=unit_cost)
        pricing_seconds += time.perf_counter() - tick
        iterations += 1
        metrics.inc("pricing_rounds_total")
        logger.debug(
            f"第 {iterations} 轮定价: 目标 {state.objective:.9g}, "
            f"最小检验数 {result.reduced_cost:.3e}, 簇 {result.column.cluster}, "
            f"列数 {len(state.columns)}"
        )
        if result.reduced_cost >= -options.rc_tolerance:
            termination = Termination.CONVERGED
            break
        if not state.add(result.column):
            logger.warning(
                f"定价返回已有列 {result.column.cluster}，"
                f"检验数 {result.reduced_cost:.3e}，按收敛处理"
            )
            termination = Termination.CONVERGED
            break
        metrics.inc("columns_added_total")
        state = solve_master(inst, state.columns, objective)
        if not state.feasible:
            raise SolverFault("追加列后主问题变为不可行")

    if termination is Termination.ITERATION_CAP:
        logger.warning(f"{algorithm} 达到定价轮数上限 {options.iteration_cap}")
    return _report(
        inst,
        algorithm,
        state,
        termination=termination,
        iterations=iterations,
        started=started,
        pricing_seconds=pricing_seconds,
    )


def _recover(
    inst: NetworkInstance,
    engine: PricingEngine,
    state: MasterState,
    options: SolverOptions,
) -> MasterState:
    """以最短完成时间问题的列集重建能量主问题"""
    shortest = column_generation(
        inst,
        engine,
        state.columns,
        options,
        algorithm=Algorithm.MIN_TIME,
        objective=MasterObjective.TIME,
    )
    if shortest.completion_time > inst.deadline * (1 + DEADLINE_REL_TOL):
        logger.debug(
            f"最短完成时间 {shortest.completion_time:.6g} s 超过时限 {inst.deadline} s"
        )
        return state
    assert shortest.master is not None
    return solve_master(inst, shortest.master.columns, MasterObjective.ENERGY)


def _seed_columns(
    inst: NetworkInstance, engine: PricingEngine, options: SolverOptions
) -> list[Column]:
    return initial_columns(
        inst, options.initial_columns, engine.cluster_rates, engine.rate_model
    )


# ---------------------------------------------------------------------------
# 算法
# ---------------------------------------------------------------------------


def ocs(
    inst: NetworkInstance,
    options: SolverOptions | None = None,
    *,
    warm_start: MasterState | Iterable[Column] | None = None,
) -> SolveReport:
    """精确列生成

    Args:
        inst: 实例（I 不超过精确定价上限）
        options: 求解参数
        warm_start: 之前的主问题状态或列；新增用户在旧列中的速率取 0

    Raises:
        SizeLimitError: 小区数超过精确定价上限
    """
    options = options or SolverOptions.from_settings()
    engine = ExactPricing(
        inst, limit=options.exact_pricing_limit, workers=options.workers
    )
    columns = _seed_columns(inst, engine, options)
    if warm_start is not None:
        previous = (
            warm_start.columns if isinstance(warm_start, MasterState) else list(warm_start)
        )
        columns = adapt_columns(inst, previous) + columns
    return column_generation(inst, engine, columns, options, algorithm=Algorithm.OCS)


def local_bound(
    inst: NetworkInstance,
    table: ScenarioTable,
    mode: LocalMode | str,
    options: SolverOptions | None = None,
) -> SolveReport:
    """单侧界：off 为能量下界，on 为可行上界（速率取自对应平面）"""
    options = options or SolverOptions.from_settings()
    mode = LocalMode(mode)
    engine = LocalPricing(inst, table, mode, strategy=options.local_search)
    algorithm = Algorithm.LE_OFF if mode is LocalMode.OFF else Algorithm.LE_ON
    return column_generation(
        inst, engine, _seed_columns(inst, engine, options), options, algorithm=algorithm
    )


def near(
    inst: NetworkInstance,
    policy: MPolicy | None = None,
    options: SolverOptions | None = None,
    *,
    upper: SolveReport | None = None,
    table: ScenarioTable | None = None,
) -> SolveReport:
    """取 on 模式最优解中时长为正的列，速率换成精确值后重解主问题

    Args:
        inst: 实例
        policy: M 策略（未给出 upper 与 table 时必需）
        options: 求解参数
        upper: 已完成的 on 模式结果
        table: 已构建的场景表
    """
    started = time.perf_counter()
    options = options or SolverOptions.from_settings()
    if upper is None:
        if table is None:
            if policy is None:
                raise ConfigError("near 需要 M 策略、场景表或 on 模式结果")
            table = build_scenarios(inst, select_neighbors(inst, policy))
        upper = local_bound(inst, table, LocalMode.ON, options)
    if not upper.feasible or upper.master is None:
        return _report(
            inst,
            Algorithm.NEAR,
            None,
            termination=Termination.INFEASIBLE,
            iterations=upper.iterations,
            started=started,
        )
    columns = dedupe(
        make_column(inst, entry.column.cluster, entry.column.served_user)
        for entry in upper.schedule.active()
    )
    state = solve_master(inst, columns)
    if not state.feasible:
        raise SolverFault("near: 精确速率下 on 模式列集不可行")
    return _report(
        inst,
        Algorithm.NEAR,
        state,
        termination=upper.termination,
        iterations=upper.iterations,
        started=started,
        pricing_seconds=upper.pricing_seconds,
    )


def bound(
    inst: NetworkInstance,
    policy: MPolicy,
    options: SolverOptions | None = None,
    *,
    modes: Sequence[LocalMode | str] = (LocalMode.OFF, LocalMode.ON),
    table: ScenarioTable | None = None,
) -> BoundReport:
    """局部枚举上下界与 near

    Args:
        inst: 实例
        policy: M 策略
        options: 求解参数
        modes: 需要计算的一侧或两侧；包含 on 时同时计算 near
        table: 已按同一策略构建的场景表（只依赖增益，可跨 T 复用）
    """
    options = options or SolverOptions.from_settings()
    if table is None:
        table = build_scenarios(inst, select_neighbors(inst, policy))
    wanted = {LocalMode(m) for m in modes}
    lower = (
        local_bound(inst, table, LocalMode.OFF, options)
        if LocalMode.OFF in wanted
        else None
    )
    upper = near_report = None
    if LocalMode.ON in wanted:
        upper = local_bound(inst, table, LocalMode.ON, options)
        near_report = near(inst, options=options, upper=upper)
    return BoundReport(policy=table.neighbors.policy, lower=lower, upper=upper, near=near_report)


def tdma(inst: NetworkInstance) -> SolveReport:
    """每个用户以最大速率独占全部 RU

    t_ij = d_ij / (l_i·W·B·log2(1 + p_i g_ij / η))，Σ t ≤ T 时可行；
    不可行时仍给出能量供诊断。
    """
    started = time.perf_counter()
    times = tdma_user_times(inst)
    pairs = []
    for j, duration in enumerate(times):
        i = int(inst.cell_of_user[j])
        pairs.append((make_column(inst, Cluster.of([i]), {i: j}), float(duration)))
    schedule = Schedule.from_pairs(pairs)
    feasible = schedule.total_duration <= inst.deadline
    return _report(
        inst,
        Algorithm.TDMA,
        None,
        termination=Termination.CONVERGED if feasible else Termination.INFEASIBLE,
        iterations=0,
        started=started,
        schedule=schedule,
        energy=schedule.total_energy,
    )


def all_on(inst: NetworkInstance, options: SolverOptions | None = None) -> SolveReport:
    """全部小区始终激活

    在全簇的顶点列上求最短完成时间；其不超过 T 时可行，
    能量 = p_full × 完成时间，与 T 无关。
    """
    started = time.perf_counter()
    options = options or SolverOptions.from_settings()
    full = Cluster.full(inst.cell_count)
    engine = ExactPricing(inst, restrict_to=[full])
    shortest = column_generation(
        inst,
        engine,
        initial_columns(inst, ColumnPreset.FULL_ONLY, engine.cluster_rates),
        options,
        algorithm=Algorithm.MIN_TIME,
        objective=MasterObjective.TIME,
    )
    completion = shortest.completion_time
    energy = cluster_power(inst, full) * completion
    feasible = completion <= inst.deadline * (1 + DEADLINE_REL_TOL)
    return _report(
        inst,
        Algorithm.ALL_ON,
        shortest.master,
        termination=shortest.termination if feasible else Termination.INFEASIBLE,
        iterations=shortest.iterations,
        started=started,
        pricing_seconds=shortest.pricing_seconds,
        schedule=shortest.schedule,
        energy=energy,
    )


def min_completion_time(
    inst: NetworkInstance,
    options: SolverOptions | None = None,
    *,
    engine: PricingEngine | None = None,
) -> SolveReport:
    """最短完成时间：min Σ x  s.t.  Σ r_j x ≥ d_j

    completion_time 即完整问题（或所给引擎对应的局部枚举变体）可行的最小 T；
    energy 为该调度的能量。
    """
    options = options or SolverOptions.from_settings()
    engine = engine or ExactPricing(
        inst, limit=options.exact_pricing_limit, workers=options.workers
    )
    return column_generation(
        inst,
        engine,
        _seed_columns(inst, engine, options),
        options,
        algorithm=Algorithm.MIN_TIME,
        objective=MasterObjective.TIME,
    )
