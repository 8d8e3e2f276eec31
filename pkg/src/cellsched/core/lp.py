"""稠密两阶段单纯形法

求最小化问题的基本最优解与对偶价格，作为受限主问题的求解引擎。

对偶符号约定（最小化）：≥ 行对偶 ≥ 0，≤ 行对偶 ≤ 0，= 行对偶自由。
任意列 a（费用 c0）的检验数为 c0 − dualᵀa，最优时 ≥ −1e-9。
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError, SolverFault
from ..metrics import get_metrics

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
# 退化转轴超过 5×(行数+列数) 次后改用 Bland 规则
BLAND_FACTOR = 5


class Relation(StrEnum):
    GE = ">="
    LE = "<="
    EQ = "="


class LpStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """min cᵀx  s.t.  A x (≥|≤|=) b,  x ≥ 0"""

    cost: NDArray[np.float64]
    matrix: NDArray[np.float64]
    relations: tuple[Relation, ...]
    rhs: NDArray[np.float64]

    def __post_init__(self) -> None:
        cost = np.array(self.cost, dtype=np.float64)
        matrix = np.array(self.matrix, dtype=np.float64)
        rhs = np.array(self.rhs, dtype=np.float64)
        if matrix.ndim != 2:
            matrix = matrix.reshape(len(rhs), len(cost))
        rows, cols = matrix.shape
        if cost.shape != (cols,) or rhs.shape != (rows,):
            raise DomainError(
                f"LP 维度不一致: A{matrix.shape}, c{cost.shape}, b{rhs.shape}"
            )
        if len(self.relations) != rows:
            raise DomainError("relations 数量必须等于行数")
        if not (
            np.all(np.isfinite(cost))
            and np.all(np.isfinite(matrix))
            and np.all(np.isfinite(rhs))
        ):
            raise DomainError("LP 含有非有限值")
        for array in (cost, matrix, rhs):
            array.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "relations", tuple(Relation(r) for r in self.relations))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """求解结果

    Attributes:
        status: optimal / infeasible / unbounded
        x: 原始变量取值
        objective: 目标值（非最优时为 nan）
        duals: 每行对偶价格
        basic: 原始变量是否在最优基中
        iterations: 两阶段转轴总数
    """

    status: LpStatus
    x: NDArray[np.float64]
    objective: float
    duals: NDArray[np.float64]
    basic: NDArray[np.bool_]
    iterations: int

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def reduced_costs(self, problem: LpProblem) -> NDArray[np.float64]:
        return problem.cost - self.duals @ problem.matrix


class _Tableau:
    """标准型单纯形表：行 = 约束，末列 = 右端项"""

    def __init__(self, table: NDArray[np.float64], basis: list[int]) -> None:
        self.table = table
        self.basis = basis
        self.pivots = 0
        self.degenerate = 0

    @property
    def rhs(self) -> NDArray[np.float64]:
        return self.table[:, -1]

    def pivot(self, row: int, col: int, objective: NDArray[np.float64]) -> None:
        table = self.table
        table[row] /= table[row, col]
        factors = table[:, col].copy()
        factors[row] = 0.0
        table -= np.outer(factors, table[row])
        objective -= objective[col] * table[row]
        table[np.abs(table) < 1e-13] = 0.0
        self.basis[row] = col
        self.pivots += 1

    def run(
        self,
        objective: NDArray[np.float64],
        allowed: NDArray[np.bool_],
        *,
        bland_after: int,
        max_pivots: int,
    ) -> LpStatus:
        """对给定检验数行迭代至最优或判定无界"""
        while True:
            reduced = objective[:-1]
            candidates = np.flatnonzero(allowed & (reduced < -PIVOT_TOL))
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if self.degenerate >= bland_after:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(reduced[candidates])])

            column = self.table[:, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = np.maximum(self.rhs[rows], 0.0) / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            row = int(min(tied, key=lambda r: self.basis[r]))
            if best <= PIVOT_TOL:
                self.degenerate += 1

            self.pivot(row, col, objective)
            if self.pivots > max_pivots:
                raise SolverFault(f"单纯形转轴次数超过上限 {max_pivots}")


def _objective_row(
    tableau: _Tableau, costs: NDArray[np.float64]
) -> NDArray[np.float64]:
    """d = c − c_Bᵀ B⁻¹A，末元素为 −c_Bᵀ B⁻¹b"""
    cb = costs[tableau.basis]
    row = np.append(costs, 0.0) - cb @ tableau.table
    row[tableau.basis] = 0.0
    return row


def solve(problem: LpProblem, *, max_pivots: int | None = None) -> LpSolution:
    """两阶段单纯形求解

    Args:
        problem: 线性规划
        max_pivots: 转轴上限，默认 50×(行数+列数)

    Returns:
        LpSolution；infeasible 表示第一阶段结束时人工变量和为正，
        unbounded 表示检测到无界射线

    Raises:
        SolverFault: 转轴次数超过上限
    """
    get_metrics().inc("lp_solves_total")
    rows, n = problem.shape
    matrix = problem.matrix.copy()
    rhs = problem.rhs.copy()
    relations = list(problem.relations)

    # 行均衡：每行最大绝对系数缩放到 1
    scale = np.ones(rows)
    for i in range(rows):
        peak = np.abs(matrix[i]).max(initial=0.0)
        if peak > 0:
            scale[i] = 1.0 / peak
    matrix *= scale[:, None]
    rhs *= scale

    # 右端项非负化
    flipped = rhs < 0
    matrix[flipped] *= -1.0
    rhs[flipped] *= -1.0
    for i in np.flatnonzero(flipped):
        if relations[i] is Relation.GE:
            relations[i] = Relation.LE
        elif relations[i] is Relation.LE:
            relations[i] = Relation.GE

    slack_rows = [i for i in range(rows) if relations[i] is not Relation.EQ]
    art_rows = [i for i in range(rows) if relations[i] is not Relation.LE]
    n_slack, n_art = len(slack_rows), len(art_rows)
    total = n + n_slack + n_art

    table = np.zeros((rows, total + 1))
    table[:, :n] = matrix
    table[:, -1] = rhs
    initial_basis = [-1] * rows
    for offset, i in enumerate(slack_rows):
        col = n + offset
        table[i, col] = 1.0 if relations[i] is Relation.LE else -1.0
        if relations[i] is Relation.LE:
            initial_basis[i] = col
    for offset, i in enumerate(art_rows):
        col = n + n_slack + offset
        table[i, col] = 1.0
        initial_basis[i] = col

    is_art = np.zeros(total, dtype=bool)
    is_art[n + n_slack :] = True
    tableau = _Tableau(table, list(initial_basis))
    bland_after = BLAND_FACTOR * (rows + total)
    cap = max_pivots if max_pivots is not None else 50 * (rows + total) + 100

    # 第一阶段
    if n_art:
        phase1_cost = is_art.astype(np.float64)
        objective = _objective_row(tableau, phase1_cost)
        tableau.run(
            objective,
            np.ones(total, dtype=bool),
            bland_after=bland_after,
            max_pivots=cap,
        )
        infeasibility = float(tableau.rhs[is_art[tableau.basis]].sum())
        if infeasibility > PIVOT_TOL * max(1.0, float(rhs.max(initial=0.0))):
            logger.debug(f"LP 不可行，第一阶段人工变量和 {infeasibility:.3e}")
            return _failure(LpStatus.INFEASIBLE, n, rows, tableau.pivots)
        _drive_out_artificials(tableau, is_art)

    # 第二阶段
    phase2_cost = np.zeros(total)
    phase2_cost[:n] = problem.cost
    objective = _objective_row(tableau, phase2_cost)
    status = tableau.run(
        objective,
        ~is_art,
        bland_after=bland_after,
        max_pivots=cap,
    )
    if status is LpStatus.UNBOUNDED:
        return _failure(LpStatus.UNBOUNDED, n, rows, tableau.pivots)

    values = np.zeros(total)
    values[tableau.basis] = np.maximum(tableau.rhs, 0.0)
    x = values[:n]
    basic = np.zeros(n, dtype=bool)
    for col in tableau.basis:
        if col < n:
            basic[col] = True

    # y_i = c_Bᵀ B⁻¹ e_i；初始基各列恰为单位阵，B⁻¹ 的第 i 列就是它们当前的表列
    cb = phase2_cost[tableau.basis]
    duals = np.array(
        [cb @ tableau.table[:, col] for col in initial_basis], dtype=np.float64
    )
    duals[flipped] *= -1.0
    duals *= scale

    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        objective=float(problem.cost @ x),
        duals=duals,
        basic=basic,
        iterations=tableau.pivots,
    )


def _drive_out_artificials(tableau: _Tableau, is_art: NDArray[np.bool_]) -> None:
    """把零水平的人工变量换出基；整行无可用非人工元素时视为冗余行保留"""
    for row, col in enumerate(list(tableau.basis)):
        if not is_art[col]:
            continue
        entries = np.abs(tableau.table[row, :-1])
        entries[is_art] = 0.0
        if entries.max(initial=0.0) > PIVOT_TOL:
            target = int(np.argmax(entries))
            dummy = np.zeros(tableau.table.shape[1])
            tableau.pivot(row, target, dummy)


def _failure(status: LpStatus, n: int, rows: int, pivots: int) -> LpSolution:
    return LpSolution(
        status=status,
        x=np.zeros(n),
        objective=float("nan"),
        duals=np.zeros(rows),
        basic=np.zeros(n, dtype=bool),
        iterations=pivots,
    )


def build_problem(
    cost: Sequence[float] | NDArray[np.float64],
    matrix: Sequence[Sequence[float]] | NDArray[np.float64],
    relations: Sequence[Relation | str],
    rhs: Sequence[float] | NDArray[np.float64],
) -> LpProblem:
    return LpProblem(
        cost=np.asarray(cost, dtype=np.float64),
        matrix=np.asarray(matrix, dtype=np.float64),
        relations=tuple(Relation(r) for r in relations),
        rhs=np.asarray(rhs, dtype=np.float64),
    )
