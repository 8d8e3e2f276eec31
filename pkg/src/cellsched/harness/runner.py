"""批量实验执行

按实例并行：每个进程生成一个实例，依次跑完全部 T 与 M 组合。
结果按 (实例, 算法, T, M) 排序，与完成顺序无关。
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import TypeVar

import pandas as pd

from ..core.algorithms import (
    SolveReport,
    SolverOptions,
    all_on,
    bound,
    ocs,
    tdma,
)
from ..core.master import MasterState
from ..core.model import NetworkInstance, schedule_stats
from ..core.netgen import GenConfig, generate
from ..core.pricing import LocalMode, build_scenarios, select_neighbors
from ..metrics import MetricsDelta, get_metrics
from .config import LE_MODE_SIDES, RUN_ALGORITHMS, ExperimentConfig
from .models import BOUND_COLUMNS, RESULT_COLUMNS, BoundRow, ResultRow

logger = logging.getLogger(__name__)

NO_POLICY = "-"
_ALGO_ORDER = {name: rank for rank, name in enumerate(RUN_ALGORITHMS)}

_T = TypeVar("_T")
_R = TypeVar("_R")


@dataclass(frozen=True)
class InstanceTask:
    """单个实例的工作单元（可跨进程传递）"""

    index: int
    gen: GenConfig
    algos: tuple[str, ...]
    deadlines: tuple[float, ...]
    policies: tuple[str, ...]
    options: SolverOptions
    le_mode: str = "both"


@dataclass(frozen=True)
class ExperimentResult:
    """一次批量实验的全部表格

    Attributes:
        results: 每个 (实例, 算法, T, M) 一行
        aggregate: 按 (算法, M, T) 的均值
        timings: 墙钟时间，单独成表
    """

    results: pd.DataFrame
    aggregate: pd.DataFrame
    timings: pd.DataFrame


@dataclass(frozen=True)
class BoundResult:
    bounds: pd.DataFrame
    aggregate: pd.DataFrame


# ---------------------------------------------------------------------------
# 单实例
# ---------------------------------------------------------------------------


def _row(
    inst: NetworkInstance,
    task: InstanceTask,
    report: SolveReport,
    deadline: float,
    policy: str = NO_POLICY,
) -> ResultRow:
    mean_activations = mean_user_rate = math.nan
    if report.feasible and len(report.schedule.active()) > 0:
        stats = schedule_stats(inst, report.schedule)
        mean_activations = stats.mean_activations
        mean_user_rate = stats.mean_user_rate
    return ResultRow(
        seed=task.gen.seed,
        instance=task.index,
        algorithm=str(report.algorithm),
        T=deadline,
        M=policy,
        energy=report.energy,
        feasible=report.feasible,
        iterations=report.iterations,
        active_columns=report.active_columns,
        completion_time=report.completion_time,
        termination=str(report.termination),
        mean_activations=mean_activations,
        mean_user_rate=mean_user_rate,
        wall_seconds=report.wall_seconds,
    )


def run_instance(task: InstanceTask) -> list[ResultRow]:
    """在一个实例上运行全部算法与 (T, M) 组合

    OCS 按 T 升序运行，并以上一个 T 的主问题列集热启动；
    场景表只依赖增益，每个 M 策略构建一次。
    """
    base = generate(task.gen, task.index)
    deadlines = sorted(task.deadlines)
    rows: list[ResultRow] = []

    if "tdma" in task.algos:
        rows.extend(_row(base, task, tdma(base.with_deadline(t)), t) for t in deadlines)

    if "allon" in task.algos:
        for t in deadlines:
            inst = base.with_deadline(t)
            rows.append(_row(inst, task, all_on(inst, task.options), t))

    if "ocs" in task.algos:
        previous: MasterState | None = None
        for t in deadlines:
            inst = base.with_deadline(t)
            report = ocs(inst, task.options, warm_start=previous)
            if report.feasible and report.master is not None:
                previous = report.master
            rows.append(_row(inst, task, report, t))

    wanted = {
        algo: mode
        for algo, mode in (
            ("le_off", LocalMode.OFF),
            ("le_on", LocalMode.ON),
            ("near", LocalMode.ON),
        )
        if algo in task.algos and mode in LE_MODE_SIDES[task.le_mode]
    }
    if wanted:
        modes = tuple(sorted(set(wanted.values()), key=list(LocalMode).index))
        for policy in task.policies:
            table = build_scenarios(base, select_neighbors(base, policy))
            label = table.neighbors.policy
            for t in deadlines:
                inst = base.with_deadline(t)
                result = bound(inst, policy, task.options, modes=modes, table=table)
                for report in (result.lower, result.near, result.upper):
                    if report is not None and str(report.algorithm) in wanted:
                        rows.append(_row(inst, task, report, t, label))
    return rows


def run_bound_instance(task: InstanceTask) -> list[BoundRow]:
    """局部枚举能量区间，每个 (T, M) 一行"""
    base = generate(task.gen, task.index)
    modes = LE_MODE_SIDES[task.le_mode]
    rows: list[BoundRow] = []
    for policy in task.policies:
        table = build_scenarios(base, select_neighbors(base, policy))
        for t in sorted(task.deadlines):
            result = bound(
                base.with_deadline(t), policy, task.options, modes=modes, table=table
            )
            rows.append(
                BoundRow(
                    seed=task.gen.seed,
                    instance=task.index,
                    T=t,
                    M=result.policy,
                    lower=result.lower_energy,
                    near=result.near_energy,
                    upper=result.upper_energy,
                    gap=result.gap,
                    lower_feasible=result.lower is not None and result.lower.feasible,
                    upper_feasible=result.upper is not None and result.upper.feasible,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# 批量
# ---------------------------------------------------------------------------


def _recorded(fn: Callable[[_T], _R], task: _T) -> tuple[_R, MetricsDelta]:
    with get_metrics().recording() as delta:
        result = fn(task)
    return result, delta


def _map(fn: Callable[[_T], _R], tasks: Sequence[_T], jobs: int) -> Iterable[_R]:
    """按输入顺序产出结果；jobs > 1 时使用进程池

    子进程中的指标增量随结果返回，并计入本进程的 get_metrics()。
    """
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield fn(task)
        return
    metrics = get_metrics()
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as executor:
        for result, delta in executor.map(partial(_recorded, fn), tasks):
            metrics.merge(delta)
            yield result


def build_tasks(config: ExperimentConfig) -> list[InstanceTask]:
    gen = config.gen_config()
    options = config.solver_options()
    return [
        InstanceTask(
            index=index,
            gen=gen,
            algos=tuple(config.algos),
            deadlines=tuple(config.deadlines),
            policies=tuple(config.policies),
            options=options,
            le_mode=config.le_mode,
        )
        for index in range(config.instances)
    ]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """运行 run 子命令的全部实例"""
    tasks = build_tasks(config)
    rows: list[ResultRow] = []
    for done, instance_rows in enumerate(_map(run_instance, tasks, config.jobs), 1):
        rows.extend(instance_rows)
        logger.info(f"实例进度: {done}/{len(tasks)}")

    results = _sort(
        pd.DataFrame([r.to_dict() for r in rows], columns=list(RESULT_COLUMNS)),
        ["instance", "_order", "T", "M"],
    )
    timings = _sort(
        pd.DataFrame([r.timing() for r in rows]),
        ["instance", "_order", "T", "M"],
    )
    return ExperimentResult(
        results=results, aggregate=aggregate_results(results), timings=timings
    )


def run_bounds(config: ExperimentConfig) -> BoundResult:
    """运行 bound 子命令的全部实例"""
    tasks = build_tasks(config)
    rows: list[BoundRow] = []
    for done, instance_rows in enumerate(_map(run_bound_instance, tasks, config.jobs), 1):
        rows.extend(instance_rows)
        logger.info(f"实例进度: {done}/{len(tasks)}")
    bounds = pd.DataFrame([r.to_dict() for r in rows], columns=list(BOUND_COLUMNS))
    bounds = bounds.sort_values(["instance", "T"], kind="mergesort").reset_index(drop=True)
    return BoundResult(bounds=bounds, aggregate=aggregate_bounds(bounds))


def _sort(frame: pd.DataFrame, keys: list[str]) -> pd.DataFrame:
    if frame.empty:
        return frame
    frame = frame.assign(_order=frame["algorithm"].map(_ALGO_ORDER))
    return (
        frame.sort_values(keys, kind="mergesort")
        .drop(columns="_order")
        .reset_index(drop=True)
    )


def aggregate_results(results: pd.DataFrame) -> pd.DataFrame:
    """按 (算法, M, T) 汇总：能量等指标只对可行行取均值"""
    keys = ["algorithm", "M", "T"]
    ordered = results.assign(_order=results["algorithm"].map(_ALGO_ORDER)).sort_values(
        ["_order", "M", "T"], kind="mergesort"
    )
    counts = ordered.groupby(keys, sort=False).agg(
        instances=("instance", "count"),
        feasible_rate=("feasible", "mean"),
        iterations=("iterations", "mean"),
    )
    means = (
        ordered[ordered["feasible"]]
        .groupby(keys, sort=False)
        .agg(
            energy=("energy", "mean"),
            completion_time=("completion_time", "mean"),
            active_columns=("active_columns", "mean"),
            mean_activations=("mean_activations", "mean"),
            mean_user_rate=("mean_user_rate", "mean"),
        )
    )
    return counts.join(means).reset_index()


def aggregate_bounds(bounds: pd.DataFrame) -> pd.DataFrame:
    """按 M 汇总：gap 对全部实例与 T 取均值（无定义的 gap 不计入）"""
    return (
        bounds.groupby("M", sort=False)
        .agg(
            rows=("instance", "count"),
            mean_gap=("gap", "mean"),
            max_gap=("gap", "max"),
            upper_feasible_rate=("upper_feasible", "mean"),
        )
        .reset_index()
    )


# ---------------------------------------------------------------------------
# 输出
# ---------------------------------------------------------------------------


def _summary_text(title: str, table: pd.DataFrame) -> str:
    body = table.to_string(index=False, float_format=lambda v: f"{v:.6g}")
    return f"{title}\n{'=' * len(title)}\n{body}\n"


def write_experiment(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """写出 results.csv / aggregate.csv / timings.csv / summary.txt"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, frame in (
        ("results.csv", result.results),
        ("aggregate.csv", result.aggregate),
        ("timings.csv", result.timings),
    ):
        frame.to_csv(out / name, index=False)
        written.append(out / name)
    summary = out / "summary.txt"
    summary.write_text(_summary_text("平均能量 (J)", result.aggregate), encoding="utf-8")
    written.append(summary)
    logger.info(f"结果已写入: {out}")
    return written


def write_bounds(result: BoundResult, out_dir: str | Path) -> list[Path]:
    """写出 bounds.csv / bounds_aggregate.csv / bounds_summary.txt"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.bounds.to_csv(out / "bounds.csv", index=False)
    result.aggregate.to_csv(out / "bounds_aggregate.csv", index=False)
    summary = out / "bounds_summary.txt"
    summary.write_text(_summary_text("能量区间平均间隙", result.aggregate), encoding="utf-8")
    logger.info(f"结果已写入: {out}")
    return [out / "bounds.csv", out / "bounds_aggregate.csv", summary]
