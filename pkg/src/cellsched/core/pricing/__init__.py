"""定价引擎模块"""

from __future__ import annotations

from ...errors import ConfigError
from ..model import NetworkInstance
from .base import PricingEngine, PricingResult, evaluate
from .exact import ExactPricing, price_all, price_cluster
from .local import (
    LocalMode,
    LocalPricing,
    LocalPricingResult,
    MPolicy,
    NeighborSets,
    ScenarioTable,
    SearchStrategy,
    build_scenarios,
    neighbor_counts,
    select_neighbors,
    solve_pricing_local,
)


def create_pricing_engine(
    inst: NetworkInstance,
    kind: str = "exact",
    *,
    policy: MPolicy | None = None,
    table: ScenarioTable | None = None,
    limit: int = 20,
    workers: int = 1,
    strategy: SearchStrategy | str = SearchStrategy.DFS,
) -> PricingEngine:
    """根据类型创建定价引擎

    Args:
        inst: 实例
        kind: exact / le_off / le_on
        policy: 局部枚举的 M 策略（未给出 table 时必需）
        table: 预先构建的场景表
        limit: 精确定价的小区数上限
        workers: 精确定价的线程数
        strategy: 局部枚举搜索策略

    Raises:
        ConfigError: 未知类型或缺少 M 策略
    """
    kind = kind.lower()
    if kind == "exact":
        return ExactPricing(inst, limit=limit, workers=workers)
    if kind in ("le_off", "le_on"):
        if table is None:
            if policy is None:
                raise ConfigError("局部枚举定价需要 M 策略或场景表")
            table = build_scenarios(inst, select_neighbors(inst, policy))
        mode = LocalMode.OFF if kind == "le_off" else LocalMode.ON
        return LocalPricing(inst, table, mode, strategy=strategy)
    raise ConfigError(f"未知定价引擎类型: {kind}，支持的类型: exact, le_off, le_on")


__all__ = [
    "ExactPricing",
    "LocalMode",
    "LocalPricing",
    "LocalPricingResult",
    "MPolicy",
    "NeighborSets",
    "PricingEngine",
    "PricingResult",
    "ScenarioTable",
    "SearchStrategy",
    "build_scenarios",
    "create_pricing_engine",
    "evaluate",
    "neighbor_counts",
    "price_all",
    "price_cluster",
    "select_neighbors",
    "solve_pricing_local",
]
