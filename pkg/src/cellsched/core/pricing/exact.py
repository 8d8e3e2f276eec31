"""精确定价

给定簇时各成员小区独立地选 argmax_j π_j r_j；全体簇按位掩码分块向量化枚举，
取检验数最小者（并列时取位掩码最小者）。
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from ...errors import SizeLimitError
from ..model import (
    Cluster,
    Column,
    NetworkInstance,
    RateModel,
    cluster_vertex_rates,
    make_column,
    spectral_efficiency,
)
from .base import PricingEngine, PricingResult, evaluate

logger = logging.getLogger(__name__)

DEFAULT_LIMIT = 20
CHUNK_SIZE = 4096


def _sorted_cells(inst: NetworkInstance) -> list[NDArray[np.int64]]:
    return [np.array(sorted(cell), dtype=np.int64) for cell in inst.users_of_cell]


def best_vertex(
    inst: NetworkInstance,
    s: Cluster,
    duals: NDArray[np.float64],
) -> Column:
    """簇 s 上使 Σ π_j r_j 最大的顶点列（并列取用户编号最小者）"""
    rates = cluster_vertex_rates(inst, s)
    value = duals * rates
    served = {}
    for i in s.members:
        users = np.array(sorted(inst.users_of_cell[i]), dtype=np.int64)
        served[i] = int(users[np.argmax(value[users])])
    return make_column(inst, s, served, rates=rates)


def price_cluster(
    inst: NetworkInstance,
    s: Cluster,
    duals: NDArray[np.float64],
    time_dual: float,
    *,
    unit_cost: bool = False,
) -> PricingResult:
    """给定簇的最优列及其检验数"""
    return evaluate(best_vertex(inst, s, duals), duals, time_dual, unit_cost=unit_cost)


def _scan(
    inst: NetworkInstance,
    masks: NDArray[np.int64],
    duals: NDArray[np.float64],
    cell_cost: NDArray[np.float64],
    constant: float,
    cells: list[NDArray[np.int64]],
) -> tuple[float, int]:
    """对一批位掩码计算检验数，返回块内 (最小检验数, 对应位掩码)"""
    count = inst.cell_count
    active = ((masks[:, None] >> np.arange(count)) & 1).astype(np.float64)
    scale = inst.load[inst.cell_of_user] * inst.wb
    value = duals * (scale * spectral_efficiency(inst, active))
    omega = np.zeros(len(masks))
    for i, users in enumerate(cells):
        omega += active[:, i] * value[:, users].max(axis=1)
    reduced = active @ cell_cost + constant - omega
    k = int(np.argmin(reduced))
    return float(reduced[k]), int(masks[k])


def price_all(
    inst: NetworkInstance,
    duals: NDArray[np.float64],
    time_dual: float,
    *,
    limit: int = DEFAULT_LIMIT,
    workers: int = 1,
    unit_cost: bool = False,
    masks: Sequence[int] | None = None,
) -> PricingResult:
    """枚举全部 2^I − 1 个簇（或给定的簇子集），返回检验数最小的列

    Args:
        inst: 实例
        duals: 需求行对偶 π
        time_dual: 时间行对偶 λ
        limit: 允许全枚举的最大小区数
        workers: 线程数，结果与串行一致
        unit_cost: 列费用恒为 1
        masks: 只在这些簇中定价

    Raises:
        SizeLimitError: 全枚举且 I > limit
    """
    count = inst.cell_count
    if masks is None:
        if count > limit:
            raise SizeLimitError(f"精确定价需要 I ≤ {limit}，当前 I = {count}")
        candidates = np.arange(1, 1 << count, dtype=np.int64)
    else:
        candidates = np.array(sorted(set(masks)), dtype=np.int64)
    duals = np.asarray(duals, dtype=np.float64)
    cell_cost = np.zeros(count) if unit_cost else np.asarray(inst.cell_power)
    constant = 1.0 if unit_cost else 0.0
    cells = _sorted_cells(inst)
    chunks = [
        candidates[start : start + CHUNK_SIZE]
        for start in range(0, len(candidates), CHUNK_SIZE)
    ]

    def scan(chunk: NDArray[np.int64]) -> tuple[float, int]:
        return _scan(inst, chunk, duals, cell_cost, constant, cells)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan, chunks))
    else:
        results = [scan(chunk) for chunk in chunks]
    _, mask = min(results)
    return price_cluster(inst, Cluster(mask), duals, time_dual, unit_cost=unit_cost)


class ExactPricing(PricingEngine):
    """精确系数定价引擎

    Args:
        inst: 实例
        limit: 全枚举允许的最大小区数
        workers: 枚举线程数
        restrict_to: 只在这些簇中定价（例如只含全簇）
    """

    rate_model = RateModel.EXACT

    def __init__(
        self,
        inst: NetworkInstance,
        *,
        limit: int = DEFAULT_LIMIT,
        workers: int = 1,
        restrict_to: Sequence[Cluster] | None = None,
    ) -> None:
        super().__init__(inst)
        self.limit = limit
        self.workers = workers
        self.masks = None if restrict_to is None else [s.mask for s in restrict_to]
        if self.masks is None and inst.cell_count > limit:
            raise SizeLimitError(
                f"精确定价需要 I ≤ {limit}，当前 I = {inst.cell_count}"
            )

    def price(
        self,
        duals: NDArray[np.float64],
        time_dual: float,
        *,
        unit_cost: bool = False,
    ) -> PricingResult:
        return price_all(
            self.inst,
            duals,
            time_dual,
            limit=self.limit,
            workers=self.workers,
            unit_cost=unit_cost,
            masks=self.masks,
        )

    def cluster_rates(self, s: Cluster) -> NDArray[np.float64]:
        return cluster_vertex_rates(self.inst, s)
