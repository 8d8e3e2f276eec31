"""问题输入、耦合系数运算、列/调度表示与调度校验

单位约定：保留物理单位（bit、秒、瓦），速率中显式携带 W·B 因子；
归一化 WB=1 的公式在 rate ↦ rate/(W·B) 代换后全部成立。
"""

from __future__ import annotations

import math
import operator
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from functools import cached_property
from types import MappingProxyType
from typing import Any

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError

MAX_CELLS = 64
FEASIBILITY_EPS = 1e-6

FloatArray = NDArray[np.float64]


class RateModel(StrEnum):
    """列速率所依据的系数集合"""

    EXACT = "exact"
    LE_OFF = "le_off"
    LE_ON = "le_on"


def _frozen_array(values: Any, *, name: str, ndim: int) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise DomainError(f"{name} 维度应为 {ndim}，实际为 {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} 含有非有限值")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """完整的问题输入

    Attributes:
        users_of_cell: 各小区的用户编号（对用户集合的划分）
        gain: 线性功率增益 g[k, j]，形状 (I, J)
        tx_power_per_ru: 每 RU 发射功率 p_i (W)
        circuit_power: 电路功率 p0 (W)
        ru_count: 每小区 RU 数 W
        ru_bandwidth: 每 RU 带宽 B (Hz)
        noise: 每 RU 噪声功率 η (W)
        load: 负载 l_i ∈ (0, 1]
        demand: 用户需求 d_j (bit)
        deadline: 时限 T (秒)
        metadata: 生成器来源等附加信息（不参与计算）
    """

    users_of_cell: tuple[tuple[int, ...], ...]
    gain: FloatArray
    tx_power_per_ru: FloatArray
    circuit_power: float
    ru_count: int
    ru_bandwidth: float
    noise: float
    load: FloatArray
    demand: FloatArray
    deadline: float
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        users = tuple(tuple(int(j) for j in cell) for cell in self.users_of_cell)
        object.__setattr__(self, "users_of_cell", users)
        object.__setattr__(
            self, "gain", _frozen_array(self.gain, name="gain", ndim=2)
        )
        object.__setattr__(
            self,
            "tx_power_per_ru",
            _frozen_array(self.tx_power_per_ru, name="tx_power_per_ru", ndim=1),
        )
        object.__setattr__(self, "load", _frozen_array(self.load, name="load", ndim=1))
        object.__setattr__(
            self, "demand", _frozen_array(self.demand, name="demand", ndim=1)
        )
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        self._validate()

    def _validate(self) -> None:
        cells = len(self.users_of_cell)
        if not 1 <= cells <= MAX_CELLS:
            raise DomainError(f"小区数必须在 [1, {MAX_CELLS}] 内: {cells}")
        flat = [j for cell in self.users_of_cell for j in cell]
        if any(len(cell) == 0 for cell in self.users_of_cell):
            raise DomainError("每个小区至少需要一个用户")
        if sorted(flat) != list(range(len(flat))):
            raise DomainError("users_of_cell 必须是 0..J-1 的一个划分")
        users = len(flat)
        if self.gain.shape != (cells, users):
            raise DomainError(f"gain 形状应为 {(cells, users)}，实际为 {self.gain.shape}")
        if self.tx_power_per_ru.shape != (cells,) or self.load.shape != (cells,):
            raise DomainError("tx_power_per_ru 与 load 长度必须等于小区数")
        if self.demand.shape != (users,):
            raise DomainError("demand 长度必须等于用户数")
        if np.any(self.gain < 0):
            raise DomainError("增益不能为负")
        if np.any(self.gain[self.cell_of_user, np.arange(users)] <= 0):
            raise DomainError("服务小区到本小区用户的增益必须为正")
        if np.any(self.tx_power_per_ru <= 0) or np.any(self.demand <= 0):
            raise DomainError("发射功率与需求必须为正")
        if np.any(self.load <= 0) or np.any(self.load > 1):
            raise DomainError("负载必须在 (0, 1] 内")
        for name in ("circuit_power", "ru_bandwidth", "noise", "deadline"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f"{name} 必须为正: {value}")
        if int(self.ru_count) < 1:
            raise DomainError(f"ru_count 必须为正整数: {self.ru_count}")

    # ---- 形状 ----

    @property
    def cell_count(self) -> int:
        return len(self.users_of_cell)

    @property
    def user_count(self) -> int:
        return int(self.demand.shape[0])

    @cached_property
    def cell_of_user(self) -> NDArray[np.int64]:
        owner = np.empty(sum(len(c) for c in self.users_of_cell), dtype=np.int64)
        for i, cell in enumerate(self.users_of_cell):
            owner[list(cell)] = i
        owner.setflags(write=False)
        return owner

    # ---- 派生量 ----

    @property
    def wb(self) -> float:
        """W·B：满负载时单位频谱效率对应的速率 (Hz)"""
        return float(self.ru_count) * float(self.ru_bandwidth)

    @cached_property
    def cell_power(self) -> FloatArray:
        """p_i^tot = p0 + l_i·W·p_i"""
        power = self.circuit_power + self.load * self.ru_count * self.tx_power_per_ru
        power.setflags(write=False)
        return power

    @cached_property
    def signal(self) -> FloatArray:
        """服务小区收到的有用信号 p_i·g_ij，按用户索引"""
        owner = self.cell_of_user
        sig = self.tx_power_per_ru[owner] * self.gain[owner, np.arange(self.user_count)]
        sig.setflags(write=False)
        return sig

    @cached_property
    def interference_matrix(self) -> FloatArray:
        """p_k·g_kj·l_k，本小区对自身用户的项置零"""
        matrix = (self.tx_power_per_ru * self.load)[:, None] * self.gain
        matrix[self.cell_of_user, np.arange(self.user_count)] = 0.0
        matrix.setflags(write=False)
        return matrix

    def with_deadline(self, deadline: float) -> NetworkInstance:
        return replace(self, deadline=float(deadline))

    def with_demand(self, demand: Sequence[float] | FloatArray) -> NetworkInstance:
        return replace(self, demand=np.asarray(demand, dtype=np.float64))


@dataclass(frozen=True, order=True)
class Cluster:
    """同时激活的小区集合，规范编码为位掩码"""

    mask: int

    def __post_init__(self) -> None:
        if not 0 < self.mask < (1 << MAX_CELLS):
            raise DomainError(f"簇位掩码非法: {self.mask}")

    @classmethod
    def of(cls, cells: Iterable[int]) -> Cluster:
        mask = 0
        for cell in cells:
            if not 0 <= cell < MAX_CELLS:
                raise DomainError(f"小区编号越界: {cell}")
            mask |= 1 << cell
        return cls(mask)

    @classmethod
    def full(cls, cell_count: int) -> Cluster:
        return cls((1 << cell_count) - 1)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.mask.bit_length()) if self.mask >> i & 1)

    def __contains__(self, cell: object) -> bool:
        try:
            index = operator.index(cell)  # type: ignore[arg-type]
        except TypeError:
            return False
        return index >= 0 and bool(self.mask >> index & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def issubset(self, other: Cluster) -> bool:
        return self.mask & ~other.mask == 0

    def indicator(self, cell_count: int) -> FloatArray:
        return ((self.mask >> np.arange(cell_count)) & 1).astype(np.float64)

    def check(self, inst: NetworkInstance) -> None:
        if self.mask >> inst.cell_count:
            raise DomainError(f"簇 {self.members} 含有不存在的小区")

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


# ---------------------------------------------------------------------------
# 耦合系数
# ---------------------------------------------------------------------------


def interference_sum(
    interference: FloatArray,
    active: FloatArray,
) -> FloatArray:
    """按小区编号升序累加激活小区的干扰

    Args:
        interference: 形状 (I, K) 的干扰贡献（列为所关心的用户）
        active: 形状 (..., I) 的 0/1 指示

    Returns:
        形状 (..., K) 的干扰和

    所有干扰和都经由这里以固定次序累加，子集与超集的浮点结果保持单调。
    """
    total = np.zeros(active.shape[:-1] + interference.shape[1:], dtype=np.float64)
    for k in range(interference.shape[0]):
        total += active[..., k, None] * interference[k]
    return total


def spectral_efficiency(
    inst: NetworkInstance,
    active: FloatArray,
    users: Sequence[int] | NDArray[np.int64] | None = None,
) -> FloatArray:
    """log2(1 + SINR)，active 为 (..., I) 指示，返回 (..., K)"""
    cols = np.arange(inst.user_count) if users is None else np.asarray(users)
    interference = interference_sum(inst.interference_matrix[:, cols], active)
    return np.log2(1.0 + inst.signal[cols] / (interference + inst.noise))


def _check_member(inst: NetworkInstance, s: Cluster, i: int, j: int) -> None:
    s.check(inst)
    if i not in s:
        raise DomainError(f"小区 {i} 不在簇 {s} 中")
    if not 0 <= j < inst.user_count or int(inst.cell_of_user[j]) != i:
        raise DomainError(f"用户 {j} 不属于小区 {i}")


def coupling_coeff(inst: NetworkInstance, s: Cluster, i: int, j: int) -> float:
    """b_ij^s = 1 / log2(1 + p_i g_ij / (Σ_{k∈s\\{i}} p_k g_kj l_k + η))"""
    _check_member(inst, s, i, j)
    efficiency = spectral_efficiency(inst, s.indicator(inst.cell_count), [j])
    return float(1.0 / efficiency[0])


def cluster_power(inst: NetworkInstance, s: Cluster) -> float:
    s.check(inst)
    return float(sum(inst.cell_power[i] for i in s.members))


def vertex_rate(inst: NetworkInstance, s: Cluster, i: int, j: int) -> float:
    """小区 i 只服务用户 j 时的顶点速率 l_i·W·B·log2(1 + SINR)"""
    _check_member(inst, s, i, j)
    efficiency = spectral_efficiency(inst, s.indicator(inst.cell_count), [j])
    return float(inst.load[i] * inst.wb * efficiency[0])


def cluster_vertex_rates(inst: NetworkInstance, s: Cluster) -> FloatArray:
    """簇内所有用户各自的顶点速率，簇外用户为 0"""
    s.check(inst)
    indicator = s.indicator(inst.cell_count)
    rates = inst.load[inst.cell_of_user] * inst.wb * spectral_efficiency(inst, indicator)
    return np.where(indicator[inst.cell_of_user] > 0, rates, 0.0)


# ---------------------------------------------------------------------------
# 列与调度
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Column:
    """簇 + 一个顶点速率向量（每个成员小区恰好服务一个用户）

    Attributes:
        cluster: 所属簇
        served: (小区, 用户) 对，按小区升序
        rates: 长度 J 的稠密速率向量 (bit/s)
        power: 簇功率 p_s (W)
        rate_model: 生成速率所用的系数集合
    """

    cluster: Cluster
    served: tuple[tuple[int, int], ...]
    rates: FloatArray
    power: float
    rate_model: RateModel = RateModel.EXACT

    def __post_init__(self) -> None:
        rates = np.array(self.rates, dtype=np.float64)
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @property
    def key(self) -> tuple[int, tuple[tuple[int, int], ...]]:
        """去重键：(簇位掩码, 服务用户)"""
        return (self.cluster.mask, self.served)

    @property
    def served_user(self) -> dict[int, int]:
        return dict(self.served)

    @property
    def rate(self) -> dict[int, float]:
        return {j: float(self.rates[j]) for _, j in self.served}


def make_column(
    inst: NetworkInstance,
    s: Cluster,
    served_user: Mapping[int, int],
    *,
    rates: FloatArray | None = None,
    rate_model: RateModel = RateModel.EXACT,
) -> Column:
    """构造列；rates 为空时按精确系数计算顶点速率"""
    s.check(inst)
    if set(served_user) != set(s.members):
        raise DomainError(f"服务用户映射必须恰好覆盖簇 {s} 的成员")
    for i, j in served_user.items():
        _check_member(inst, s, i, j)
    served = tuple(sorted((int(i), int(j)) for i, j in served_user.items()))
    served_users = [j for _, j in served]
    dense = np.zeros(inst.user_count, dtype=np.float64)
    if rates is None:
        if rate_model is not RateModel.EXACT:
            raise DomainError("非精确速率模型必须显式给出速率")
        dense[served_users] = cluster_vertex_rates(inst, s)[served_users]
    else:
        rates = np.asarray(rates, dtype=np.float64)
        dense[served_users] = rates[served_users]
    if np.any(dense[served_users] <= 0):
        raise DomainError("被服务用户的速率必须为正")
    return Column(
        cluster=s,
        served=served,
        rates=dense,
        power=cluster_power(inst, s),
        rate_model=rate_model,
    )


def exact_rates(inst: NetworkInstance, column: Column) -> FloatArray:
    """按精确系数重算列的速率向量"""
    dense = np.zeros(inst.user_count, dtype=np.float64)
    users = [j for _, j in column.served]
    dense[users] = cluster_vertex_rates(inst, column.cluster)[users]
    return dense


@dataclass(frozen=True)
class ScheduleEntry:
    column: Column
    duration: float


@dataclass(frozen=True)
class Schedule:
    """(列, 时长) 列表；total_energy = Σ 功率 × 时长"""

    entries: tuple[ScheduleEntry, ...] = ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Column, float]]) -> Schedule:
        return cls(tuple(ScheduleEntry(c, float(x)) for c, x in pairs))

    @property
    def total_energy(self) -> float:
        return float(sum(e.column.power * e.duration for e in self.entries))

    @property
    def total_duration(self) -> float:
        return float(sum(e.duration for e in self.entries))

    def active(self, tol: float = 0.0) -> tuple[ScheduleEntry, ...]:
        return tuple(e for e in self.entries if e.duration > tol)

    def __len__(self) -> int:
        return len(self.entries)


def served_bits(
    inst: NetworkInstance,
    sched: Schedule,
    *,
    exact: bool = True,
) -> FloatArray:
    """每个用户获得的总比特数；exact=True 时按精确系数重算速率"""
    bits = np.zeros(inst.user_count, dtype=np.float64)
    for entry in sched.entries:
        rates = exact_rates(inst, entry.column) if exact else entry.column.rates
        bits += rates * entry.duration
    return bits


@dataclass(frozen=True)
class FeasibilityReport:
    """调度校验结果（违反约束以报告形式给出，不抛异常）"""

    feasible: bool
    demand_slack: FloatArray
    total_duration: float
    time_slack: float
    total_energy: float

    @property
    def unmet_users(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.demand_slack < 0))

    @property
    def max_violation(self) -> float:
        return float(max(0.0, -self.demand_slack.min(initial=0.0), -self.time_slack))


def validate_schedule(
    inst: NetworkInstance,
    sched: Schedule,
    *,
    tol: float = FEASIBILITY_EPS,
) -> FeasibilityReport:
    """用精确系数重算速率，检查需求与时限

    需求以 d_j − tol·max(1, d_j) 为界，时限以 T + tol·max(1, T) 为界。
    tol 按 max(1, ·) 放大，与纯绝对容差不同：d_j、T 不超过 1 时两者一致，
    兆比特量级的需求则允许 LP 舍入带来的相对 1e-6 缺口。
    """
    for entry in sched.entries:
        entry.column.cluster.check(inst)
        if entry.duration < 0:
            raise DomainError(f"调度时长不能为负: {entry.duration}")
    bits = served_bits(inst, sched, exact=True)
    slack = bits - inst.demand
    duration = sched.total_duration
    time_slack = inst.deadline - duration
    feasible = bool(np.all(slack >= -tol * np.maximum(1.0, inst.demand))) and (
        time_slack >= -tol * max(1.0, inst.deadline)
    )
    return FeasibilityReport(
        feasible=feasible,
        demand_slack=slack,
        total_duration=duration,
        time_slack=time_slack,
        total_energy=sched.total_energy,
    )


@dataclass(frozen=True)
class AggregatedActivation:
    """同一簇多列合并后的单一激活：时长与时长加权平均速率"""

    cluster: Cluster
    rates: FloatArray
    duration: float


def aggregate_columns(entries: Sequence[tuple[Column, float]]) -> AggregatedActivation:
    """r^s = Σ (x_sc / x_s) r^{sc}，x_s = Σ x_sc；逐用户服务比特不变"""
    if not entries:
        raise DomainError("至少需要一列")
    cluster = entries[0][0].cluster
    if any(column.cluster != cluster for column, _ in entries):
        raise DomainError("aggregate_columns 只接受同一簇的列")
    total = math.fsum(x for _, x in entries)
    if total <= 0:
        raise DomainError("总时长必须为正")
    bits = np.zeros_like(entries[0][0].rates)
    for column, duration in entries:
        bits += column.rates * duration
    return AggregatedActivation(cluster=cluster, rates=bits / total, duration=total)


# ---------------------------------------------------------------------------
# 解的特征统计
# ---------------------------------------------------------------------------


def tdma_user_times(inst: NetworkInstance) -> FloatArray:
    """t_ij = d_ij / (l_i·W·B·log2(1 + p_i g_ij / η))"""
    efficiency = np.log2(1.0 + inst.signal / inst.noise)
    return inst.demand / (inst.load[inst.cell_of_user] * inst.wb * efficiency)


def tdma_time(inst: NetworkInstance) -> float:
    return float(tdma_user_times(inst).sum())


@dataclass(frozen=True)
class ScheduleStats:
    """解的特征：各小区激活次数与用户平均速率"""

    activations: NDArray[np.int64]
    mean_activations: float
    user_rate: FloatArray
    mean_user_rate: float
    active_columns: int
    total_duration: float


def schedule_stats(
    inst: NetworkInstance,
    sched: Schedule,
    *,
    tol: float = 1e-12,
) -> ScheduleStats:
    """用户平均速率 = 服务比特 / 本小区处于激活状态的总时长"""
    active = sched.active(tol)
    activations = np.zeros(inst.cell_count, dtype=np.int64)
    cell_time = np.zeros(inst.cell_count, dtype=np.float64)
    for entry in active:
        for i in entry.column.cluster.members:
            activations[i] += 1
            cell_time[i] += entry.duration
    bits = served_bits(inst, Schedule(active), exact=True)
    time_of_user = cell_time[inst.cell_of_user]
    user_rate = np.divide(
        bits, time_of_user, out=np.zeros_like(bits), where=time_of_user > 0
    )
    return ScheduleStats(
        activations=activations,
        mean_activations=float(activations.mean()),
        user_rate=user_rate,
        mean_user_rate=float(user_rate.mean()),
        active_columns=len(active),
        total_duration=float(sum(e.duration for e in active)),
    )
