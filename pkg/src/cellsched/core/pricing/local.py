"""局部枚举定价

每个小区只对 M_i 个最强干扰邻区的开关组合（场景）精确计算耦合系数，
范围外小区在 off 模式下视为静默（β̌，偏乐观），在 on 模式下视为常开（β̂，偏保守）。
于是 β̌ ≤ b ≤ β̂ 逐项成立，M_i = I−1 时两者都等于精确系数。

定价问题化为对簇指示向量 z 的最大化：
    F(z) = Σ_{i: z_i=1} v_i(e_i(z)),
    v_i(e) = max_j π_j·l_i·W·B / β_ij^e − p_i^tot
其中 e_i(z) 是 z 在 L_i 上的取值。默认用带上界剪枝的深度优先搜索。
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ...errors import DomainError, SizeLimitError
from ..model import (
    Cluster,
    Column,
    NetworkInstance,
    RateModel,
    make_column,
    spectral_efficiency,
)
from .base import PricingEngine, PricingResult, evaluate

logger = logging.getLogger(__name__)

NEIGHBOR_POLICY = "neighbor"
EXHAUSTIVE_LIMIT = 20

MPolicy = int | str | Sequence[int]


class LocalMode(StrEnum):
    OFF = "off"
    ON = "on"

    @property
    def rate_model(self) -> RateModel:
        return RateModel.LE_OFF if self is LocalMode.OFF else RateModel.LE_ON


class SearchStrategy(StrEnum):
    DFS = "dfs"
    EXHAUSTIVE = "exhaustive"


# ---------------------------------------------------------------------------
# 邻区选择
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeighborSets:
    """每个小区的邻区列表 L_i（按干扰强度降序，不含自身）"""

    lists: tuple[tuple[int, ...], ...]
    policy: str

    def __getitem__(self, cell: int) -> tuple[int, ...]:
        return self.lists[cell]

    def __len__(self) -> int:
        return len(self.lists)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(lst) for lst in self.lists)


def interference_scores(inst: NetworkInstance) -> NDArray[np.float64]:
    """score[i, k] = (1/J_i) Σ_{j∈J_i} p_k g_kj l_k"""
    weight = (inst.tx_power_per_ru * inst.load)[:, None] * inst.gain
    scores = np.empty((inst.cell_count, inst.cell_count))
    for i, cell in enumerate(inst.users_of_cell):
        scores[i] = weight[:, list(cell)].sum(axis=1) / len(cell)
    return scores


def neighbor_counts(inst: NetworkInstance) -> tuple[int, ...]:
    """六边形布局中每个小区的一跳相邻小区数

    Raises:
        DomainError: 实例缺少生成器写入的小区中心与站间距
    """
    centers = inst.metadata.get("centers")
    pitch = inst.metadata.get("pitch")
    if centers is None or pitch is None:
        raise DomainError("neighbor 策略需要实例元数据中的 centers 与 pitch")
    points = np.asarray(centers, dtype=np.float64)
    if points.shape != (inst.cell_count, 2):
        raise DomainError("centers 数量与小区数不一致")
    distance = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    adjacent = (distance > 0) & (distance <= float(pitch) * (1 + 1e-6))
    return tuple(int(n) for n in adjacent.sum(axis=1))


def select_neighbors(inst: NetworkInstance, policy: MPolicy) -> NeighborSets:
    """按干扰强度为每个小区选 M_i 个邻区

    Args:
        inst: 实例
        policy: 统一的 M、逐小区的 M_i 序列，或 "neighbor"（一跳相邻数）

    Returns:
        NeighborSets；M 超过 I−1 时截断，同分时小区编号小者优先
    """
    count = inst.cell_count
    if isinstance(policy, str):
        if policy.strip().lower() == NEIGHBOR_POLICY:
            sizes = list(neighbor_counts(inst))
            label = NEIGHBOR_POLICY
        else:
            try:
                return select_neighbors(inst, int(policy))
            except ValueError as e:
                raise DomainError(f"无法识别的 M 策略: {policy!r}") from e
    elif isinstance(policy, int | np.integer):
        sizes = [int(policy)] * count
        label = str(int(policy))
    else:
        sizes = [int(m) for m in policy]
        if len(sizes) != count:
            raise DomainError(f"逐小区 M 序列长度应为 {count}")
        label = "custom"
    if any(m < 0 for m in sizes):
        raise DomainError(f"M 不能为负: {sizes}")

    scores = interference_scores(inst)
    lists = []
    for i in range(count):
        others = sorted((k for k in range(count) if k != i), key=lambda k: (-scores[i, k], k))
        lists.append(tuple(others[: min(sizes[i], count - 1)]))
    return NeighborSets(lists=tuple(lists), policy=label)


# ---------------------------------------------------------------------------
# 场景表
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScenarioTable:
    """每个小区 2^{M_i} 个场景的系数，off/on 两个平面同时存储

    Attributes:
        neighbors: 邻区集合
        users: 每个小区的用户（升序）
        beta_off: beta_off[i][e, u] = β̌，形状 (2^{M_i}, J_i)
        beta_on: beta_on[i][e, u] = β̂
    """

    neighbors: NeighborSets
    users: tuple[NDArray[np.int64], ...]
    beta_off: tuple[NDArray[np.float64], ...]
    beta_on: tuple[NDArray[np.float64], ...]

    def beta(self, mode: LocalMode | str) -> tuple[NDArray[np.float64], ...]:
        return self.beta_off if LocalMode(mode) is LocalMode.OFF else self.beta_on

    def scenario_of(self, cell: int, mask: int) -> int:
        """簇位掩码在 L_i 上诱导的场景编号"""
        scenario = 0
        for t, k in enumerate(self.neighbors[cell]):
            scenario |= (mask >> k & 1) << t
        return scenario

    def rates(
        self, inst: NetworkInstance, mode: LocalMode | str, s: Cluster
    ) -> NDArray[np.float64]:
        """簇 s 在该模式下的全部顶点速率 l_i·W·B/β，簇外为 0"""
        s.check(inst)
        planes = self.beta(mode)
        dense = np.zeros(inst.user_count)
        for i in s.members:
            beta = planes[i][self.scenario_of(i, s.mask)]
            dense[self.users[i]] = inst.load[i] * inst.wb / beta
        return dense


def _scenario_activity(
    count: int, cell: int, neighbors: tuple[int, ...], mode: LocalMode
) -> NDArray[np.float64]:
    size = len(neighbors)
    codes = np.arange(1 << size)
    active = np.zeros((1 << size, count))
    if mode is LocalMode.ON:
        outside = [k for k in range(count) if k != cell and k not in neighbors]
        active[:, outside] = 1.0
    for t, k in enumerate(neighbors):
        active[:, k] = (codes >> t) & 1
    return active


def build_scenarios(inst: NetworkInstance, nbrs: NeighborSets) -> ScenarioTable:
    """为每个小区计算 off/on 两个平面的场景系数"""
    if len(nbrs) != inst.cell_count:
        raise DomainError("邻区集合与小区数不一致")
    users = tuple(np.array(sorted(cell), dtype=np.int64) for cell in inst.users_of_cell)
    planes: dict[LocalMode, list[NDArray[np.float64]]] = {m: [] for m in LocalMode}
    for i in range(inst.cell_count):
        for mode in LocalMode:
            active = _scenario_activity(inst.cell_count, i, nbrs[i], mode)
            beta = 1.0 / spectral_efficiency(inst, active, users[i])
            beta.setflags(write=False)
            planes[mode].append(beta)
    logger.debug(
        f"场景表已构建: 策略 {nbrs.policy}, "
        f"场景总数 {sum(1 << m for m in nbrs.sizes)}"
    )
    return ScenarioTable(
        neighbors=nbrs,
        users=users,
        beta_off=tuple(planes[LocalMode.OFF]),
        beta_on=tuple(planes[LocalMode.ON]),
    )


# ---------------------------------------------------------------------------
# 定价
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellProfit:
    """单个小区在各场景下的最大收益 v_i(e) 及对应用户"""

    profit: NDArray[np.float64]
    best_user: NDArray[np.int64]


def cell_profits(
    inst: NetworkInstance,
    table: ScenarioTable,
    duals: NDArray[np.float64],
    mode: LocalMode | str,
    *,
    unit_cost: bool = False,
) -> list[CellProfit]:
    """v_i(e) = max_j π_j·(l_i·W·B)/β_ij^e − c_i，unit_cost 时 c_i = 0"""
    planes = table.beta(mode)
    duals = np.asarray(duals, dtype=np.float64)
    profits = []
    for i, beta in enumerate(planes):
        users = table.users[i]
        value = duals[users] * (inst.load[i] * inst.wb / beta)
        best = np.argmax(value, axis=1)
        cost = 0.0 if unit_cost else float(inst.cell_power[i])
        profits.append(
            CellProfit(
                profit=value[np.arange(len(value)), best] - cost,
                best_user=users[best],
            )
        )
    return profits


@dataclass(frozen=True)
class LocalPricingResult:
    """局部枚举定价结果

    Attributes:
        column: 最优列（速率取自所选平面）
        reduced_cost: p_s − ω − λ（unit_cost 时 1 − ω − λ）
        omega: Σ_j π_j r_j
        objective: F(z*)
        scenarios: 每个激活小区所处的场景编号
        nodes: 搜索访问的节点数
    """

    column: Column
    reduced_cost: float
    omega: float
    objective: float
    scenarios: dict[int, int]
    nodes: int

    @property
    def cluster(self) -> Cluster:
        return self.column.cluster


class _BranchAndBound:
    """在 z ∈ {0,1}^I \\ {0} 上最大化 F(z)，并列时取位掩码最小者"""

    def __init__(self, table: ScenarioTable, profits: list[CellProfit]) -> None:
        self.count = len(profits)
        self.neighbors = table.neighbors.lists
        self.profit = [p.profit for p in profits]
        self.optimistic = [max(0.0, float(p.max())) for p in self.profit]
        self.full = [(1 << len(lst)) - 1 for lst in self.neighbors]
        self._consistent: dict[tuple[int, int, int], float] = {}
        self.best = -math.inf
        self.best_mask = 0
        self.nodes = 0

    def _scenario(self, cell: int, z: int, depth: int) -> tuple[int, int]:
        decided = fixed = 0
        for t, k in enumerate(self.neighbors[cell]):
            if k < depth:
                decided |= 1 << t
                fixed |= (z >> k & 1) << t
        return decided, fixed

    def _cell_bound(self, cell: int, z: int, depth: int) -> float:
        decided, fixed = self._scenario(cell, z, depth)
        if decided == self.full[cell]:
            return float(self.profit[cell][fixed])
        key = (cell, decided, fixed)
        if key not in self._consistent:
            codes = np.arange(len(self.profit[cell]))
            self._consistent[key] = float(
                self.profit[cell][(codes & decided) == fixed].max()
            )
        return self._consistent[key]

    def bound(self, z: int, depth: int) -> float:
        total = 0.0
        for i in range(self.count):
            if i >= depth:
                total += self.optimistic[i]
            elif z >> i & 1:
                total += self._cell_bound(i, z, depth)
        return total

    def value(self, z: int) -> float:
        return self.bound(z, self.count)

    def search(self, z: int = 0, depth: int = 0) -> None:
        self.nodes += 1
        if depth == self.count:
            if z == 0:
                return
            value = self.value(z)
            if value > self.best or (value == self.best and z < self.best_mask):
                self.best, self.best_mask = value, z
            return
        if self.bound(z, depth) < self.best:
            return
        order = (1, 0) if self.optimistic[depth] > 0 else (0, 1)
        for bit in order:
            self.search(z | bit << depth, depth + 1)


def _exhaustive(table: ScenarioTable, profits: list[CellProfit]) -> tuple[int, float]:
    count = len(profits)
    if count > EXHAUSTIVE_LIMIT:
        raise SizeLimitError(f"穷举搜索需要 I ≤ {EXHAUSTIVE_LIMIT}，当前 I = {count}")
    z = np.arange(1, 1 << count, dtype=np.int64)
    total = np.zeros(len(z))
    for i, cell in enumerate(profits):
        scenario = np.zeros(len(z), dtype=np.int64)
        for t, k in enumerate(table.neighbors[i]):
            scenario |= ((z >> k) & 1) << t
        total = total + np.where(((z >> i) & 1).astype(bool), cell.profit[scenario], 0.0)
    k = int(np.argmax(total))
    return int(z[k]), float(total[k])


def solve_pricing_local(
    inst: NetworkInstance,
    table: ScenarioTable,
    duals: NDArray[np.float64],
    time_dual: float,
    mode: LocalMode | str,
    *,
    unit_cost: bool = False,
    strategy: SearchStrategy | str = SearchStrategy.DFS,
) -> LocalPricingResult:
    """求 argmax_z F(z)，构造对应列

    Args:
        inst: 实例
        table: 场景表
        duals: 需求行对偶 π
        time_dual: 时间行对偶 λ
        mode: off（β̌）或 on（β̂）
        unit_cost: 小区费用取 0，列费用取 1
        strategy: dfs 或 exhaustive（I ≤ 20）

    Returns:
        LocalPricingResult
    """
    mode = LocalMode(mode)
    profits = cell_profits(inst, table, duals, mode, unit_cost=unit_cost)
    if SearchStrategy(strategy) is SearchStrategy.EXHAUSTIVE:
        mask, objective = _exhaustive(table, profits)
        nodes = (1 << inst.cell_count) - 1
    else:
        search = _BranchAndBound(table, profits)
        search.search()
        mask, objective, nodes = search.best_mask, search.best, search.nodes

    cluster = Cluster(mask)
    scenarios = {i: table.scenario_of(i, mask) for i in cluster.members}
    served = {i: int(profits[i].best_user[e]) for i, e in scenarios.items()}
    column = make_column(
        inst,
        cluster,
        served,
        rates=table.rates(inst, mode, cluster),
        rate_model=mode.rate_model,
    )
    priced = evaluate(column, np.asarray(duals, dtype=np.float64), time_dual, unit_cost=unit_cost)
    return LocalPricingResult(
        column=column,
        reduced_cost=priced.reduced_cost,
        omega=priced.omega,
        objective=objective,
        scenarios=scenarios,
        nodes=nodes,
    )


class LocalPricing(PricingEngine):
    """局部枚举定价引擎

    Args:
        inst: 实例
        table: 场景表
        mode: off 给出能量下界，on 给出可行上界
        strategy: 搜索策略
    """

    def __init__(
        self,
        inst: NetworkInstance,
        table: ScenarioTable,
        mode: LocalMode | str,
        *,
        strategy: SearchStrategy | str = SearchStrategy.DFS,
    ) -> None:
        super().__init__(inst)
        self.table = table
        self.mode = LocalMode(mode)
        self.strategy = SearchStrategy(strategy)
        self.rate_model = self.mode.rate_model

    def price(
        self,
        duals: NDArray[np.float64],
        time_dual: float,
        *,
        unit_cost: bool = False,
    ) -> PricingResult:
        result = solve_pricing_local(
            self.inst,
            self.table,
            duals,
            time_dual,
            self.mode,
            unit_cost=unit_cost,
            strategy=self.strategy,
        )
        return PricingResult(
            column=result.column,
            reduced_cost=result.reduced_cost,
            omega=result.omega,
        )

    def cluster_rates(self, s: Cluster) -> NDArray[np.float64]:
        return self.table.rates(self.inst, self.mode, s)
