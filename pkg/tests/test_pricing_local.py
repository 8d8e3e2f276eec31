"""局部枚举定价测试"""

import numpy as np
import pytest

from cellsched.core.model import Cluster, NetworkInstance, coupling_coeff
from cellsched.core.oracle import brute_force_local_pricing
from cellsched.core.pricing import (
    LocalMode,
    LocalPricing,
    SearchStrategy,
    build_scenarios,
    create_pricing_engine,
    neighbor_counts,
    price_all,
    select_neighbors,
    solve_pricing_local,
)
from cellsched.errors import DomainError

# ============================================================================
# 邻区选择
# ============================================================================


class TestSelectNeighbors:
    """按平均干扰选择邻区"""

    def test_two_cells(self, make_instance, rng) -> None:
        """I = 2 时任意 M ≥ 1 都互为邻区"""
        inst = make_instance(rng, 2, 2)
        for m in (1, 2, 5):
            nbrs = select_neighbors(inst, m)
            assert nbrs.lists == ((1,), (0,))

    def test_dominant_interferer(self) -> None:
        """0↔1 强、0↔2 弱时 L_0 = {1}"""
        gain = np.array(
            [
                [1.0, 0.9, 0.1],
                [0.9, 1.0, 0.9],
                [0.1, 0.9, 1.0],
            ]
        )
        inst = NetworkInstance(
            users_of_cell=((0,), (1,), (2,)),
            gain=gain,
            tx_power_per_ru=[1.0, 1.0, 1.0],
            circuit_power=1.0,
            ru_count=1,
            ru_bandwidth=1.0,
            noise=1.0,
            load=[1.0, 1.0, 1.0],
            demand=[1.0, 1.0, 1.0],
            deadline=1.0,
        )
        nbrs = select_neighbors(inst, 1)
        assert nbrs[0] == (1,)
        assert nbrs[2] == (1,)
        assert nbrs.policy == "1"

    def test_ties_prefer_lower_cell(self, two_cell_instance) -> None:
        """同分时小区编号小者在前"""
        from dataclasses import replace

        inst = replace(
            two_cell_instance,
            users_of_cell=((0,), (1,), (2,)),
            gain=np.ones((3, 3)),
            tx_power_per_ru=[1.0, 1.0, 1.0],
            load=[1.0, 1.0, 1.0],
            demand=[1.0, 1.0, 1.0],
        )
        assert select_neighbors(inst, 2).lists == ((1, 2), (0, 2), (0, 1))

    def test_clipped_to_other_cells(self, make_instance, rng) -> None:
        """M 超过 I−1 时截断"""
        inst = make_instance(rng, 4, 1)
        assert select_neighbors(inst, 10).sizes == (3, 3, 3, 3)
        assert select_neighbors(inst, "2").sizes == (2, 2, 2, 2)

    def test_per_cell_sequence(self, make_instance, rng) -> None:
        """逐小区 M_i"""
        inst = make_instance(rng, 3, 1)
        nbrs = select_neighbors(inst, [0, 1, 2])
        assert nbrs.sizes == (0, 1, 2)
        assert nbrs.policy == "custom"
        for i in range(3):
            assert i not in nbrs[i]

    def test_hex7_neighbor_policy(self, hex7_instance) -> None:
        """hex7：中心小区 M = 6，外环小区 M = 3"""
        assert neighbor_counts(hex7_instance) == (6, 3, 3, 3, 3, 3, 3)
        nbrs = select_neighbors(hex7_instance, "neighbor")
        assert nbrs.sizes == (6, 3, 3, 3, 3, 3, 3)
        assert nbrs.policy == "neighbor"

    def test_invalid_policies(self, make_instance, rng) -> None:
        """非法策略"""
        inst = make_instance(rng, 3, 1)
        with pytest.raises(DomainError, match="M 策略"):
            select_neighbors(inst, "strongest")
        with pytest.raises(DomainError, match="负"):
            select_neighbors(inst, -1)
        with pytest.raises(DomainError, match="长度"):
            select_neighbors(inst, [1, 1])
        with pytest.raises(DomainError, match="centers"):
            select_neighbors(inst, "neighbor")


# ============================================================================
# 场景表
# ============================================================================


class TestScenarioTable:
    """β̌ 与 β̂"""

    def test_empty_scenario_is_singleton(self, make_instance, rng) -> None:
        """e = 0 时 β̌ 等于单小区簇的系数"""
        inst = make_instance(rng, 3, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        for i in range(3):
            for u, j in enumerate(table.users[i]):
                assert table.beta_off[i][0, u] == pytest.approx(
                    coupling_coeff(inst, Cluster.of([i]), i, int(j)), rel=1e-12
                )

    def test_full_scope_modes_coincide(self, make_instance, rng) -> None:
        """M = I−1 时两个平面相同，全 1 场景等于全簇系数"""
        inst = make_instance(rng, 4, 2)
        table = build_scenarios(inst, select_neighbors(inst, 3))
        full = Cluster.full(4)
        for i in range(4):
            np.testing.assert_array_equal(table.beta_off[i], table.beta_on[i])
            for u, j in enumerate(table.users[i]):
                assert table.beta_on[i][-1, u] == pytest.approx(
                    coupling_coeff(inst, full, i, int(j)), rel=1e-12
                )

    def test_sandwich_every_cluster(self, make_instance, rng) -> None:
        """任意簇诱导的场景上 β̌ ≤ b ≤ β̂"""
        for _ in range(5):
            inst = make_instance(rng, 5, 2)
            table = build_scenarios(inst, select_neighbors(inst, 2))
            for mask in range(1, 32):
                s = Cluster(mask)
                for i in s.members:
                    e = table.scenario_of(i, mask)
                    for u, j in enumerate(table.users[i]):
                        b = coupling_coeff(inst, s, i, int(j))
                        assert table.beta_off[i][e, u] <= b * (1 + 1e-12)
                        assert b <= table.beta_on[i][e, u] * (1 + 1e-12)

    def test_monotone_in_scenario_bits(self, make_instance, rng) -> None:
        """激活的邻区越多 β 越大"""
        inst = make_instance(rng, 4, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        for mode in LocalMode:
            for plane in table.beta(mode):
                for e in range(len(plane)):
                    for t in range(2):
                        assert np.all(plane[e] <= plane[e | 1 << t])

    def test_tables_are_read_only(self, make_instance, rng) -> None:
        """场景表构建后不可修改"""
        inst = make_instance(rng, 2, 1)
        table = build_scenarios(inst, select_neighbors(inst, 1))
        with pytest.raises(ValueError):
            table.beta_off[0][0, 0] = 0.0

    def test_neighbor_count_mismatch(self, make_instance, rng) -> None:
        """邻区集合与实例不匹配"""
        small = make_instance(rng, 2, 1)
        large = make_instance(rng, 3, 1)
        with pytest.raises(DomainError):
            build_scenarios(large, select_neighbors(small, 1))


# ============================================================================
# 局部枚举定价
# ============================================================================


class TestSolvePricingLocal:
    """局部枚举定价的精确求解"""

    def test_search_matches_exhaustive(self, make_instance, rng) -> None:
        """深度优先搜索、向量化穷举与逐个 z 枚举的最优值一致"""
        for _ in range(8):
            inst = make_instance(rng, 7, 2)
            table = build_scenarios(inst, select_neighbors(inst, 2))
            duals = rng.uniform(0.0, 3.0, size=inst.user_count)
            for mode in LocalMode:
                dfs = solve_pricing_local(inst, table, duals, 0.0, mode)
                flat = solve_pricing_local(
                    inst, table, duals, 0.0, mode, strategy=SearchStrategy.EXHAUSTIVE
                )
                mask, value = brute_force_local_pricing(inst, table, duals, mode)
                assert dfs.objective == pytest.approx(value, rel=1e-9, abs=1e-12)
                assert flat.objective == pytest.approx(value, rel=1e-9, abs=1e-12)
                assert dfs.cluster.mask == flat.cluster.mask == mask

    def test_mixed_neighbor_sizes(self, make_instance, rng) -> None:
        """逐小区不同的 M_i"""
        inst = make_instance(rng, 6, 2)
        table = build_scenarios(inst, select_neighbors(inst, [0, 1, 2, 3, 4, 5]))
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        result = solve_pricing_local(inst, table, duals, 0.0, LocalMode.ON)
        mask, value = brute_force_local_pricing(inst, table, duals, LocalMode.ON)
        assert result.cluster.mask == mask
        assert result.objective == pytest.approx(value, rel=1e-9, abs=1e-12)

    def test_full_scope_matches_exact_pricing(self, make_instance, rng) -> None:
        """M = I−1 时两种模式都与精确定价一致"""
        for _ in range(5):
            inst = make_instance(rng, 5, 2)
            table = build_scenarios(inst, select_neighbors(inst, 4))
            duals = rng.uniform(0.0, 3.0, size=inst.user_count)
            exact = price_all(inst, duals, -0.3)
            for mode in LocalMode:
                local = solve_pricing_local(inst, table, duals, -0.3, mode)
                assert local.reduced_cost == pytest.approx(exact.reduced_cost, rel=1e-9)
                assert local.cluster == exact.column.cluster

    def test_reduced_cost_is_negated_objective(self, make_instance, rng) -> None:
        """p_s − ω − λ = −F(z*) − λ"""
        inst = make_instance(rng, 4, 2)
        table = build_scenarios(inst, select_neighbors(inst, 1))
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        result = solve_pricing_local(inst, table, duals, -0.7, LocalMode.OFF)
        assert result.reduced_cost == pytest.approx(-result.objective + 0.7, rel=1e-9)

    def test_scenarios_consistent_with_cluster(self, make_instance, rng) -> None:
        """每个激活小区恰好处于 z 在 L_i 上诱导的场景"""
        inst = make_instance(rng, 6, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        result = solve_pricing_local(inst, table, duals, 0.0, LocalMode.ON)
        mask = result.cluster.mask
        assert set(result.scenarios) == set(result.cluster.members)
        for i, e in result.scenarios.items():
            assert e == table.scenario_of(i, mask)
        np.testing.assert_allclose(
            result.column.rates, table.rates(inst, LocalMode.ON, result.cluster)
        )

    def test_zero_duals_pick_cheapest_cell(self, make_instance, rng) -> None:
        """π = 0 时最优 z 为功率最小的单个小区"""
        inst = make_instance(rng, 5, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        result = solve_pricing_local(inst, table, np.zeros(inst.user_count), -1.0, "off")
        cheapest = int(np.argmin(inst.cell_power))
        assert result.cluster == Cluster.of([cheapest])
        assert result.reduced_cost == pytest.approx(inst.cell_power[cheapest] + 1.0)

    def test_pruning_visits_fewer_nodes(self, make_instance, rng) -> None:
        """剪枝后访问节点数不超过完整二叉树"""
        inst = make_instance(rng, 8, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        result = solve_pricing_local(inst, table, duals, 0.0, LocalMode.OFF)
        assert result.nodes <= (1 << 9) - 1


class TestLocalPricingEngine:
    """引擎封装"""

    def test_factory_builds_table(self, make_instance, rng) -> None:
        """工厂按 M 策略构建场景表"""
        inst = make_instance(rng, 3, 2)
        engine = create_pricing_engine(inst, "le_off", policy=1)
        assert isinstance(engine, LocalPricing)
        assert engine.mode is LocalMode.OFF
        assert engine.table.neighbors.sizes == (1, 1, 1)

    def test_engine_matches_function(self, make_instance, rng) -> None:
        """引擎结果与函数接口一致"""
        inst = make_instance(rng, 4, 2)
        table = build_scenarios(inst, select_neighbors(inst, 2))
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        engine = LocalPricing(inst, table, "on")
        priced = engine.price(duals, -0.1)
        direct = solve_pricing_local(inst, table, duals, -0.1, LocalMode.ON)
        assert priced.column.key == direct.column.key
        assert priced.reduced_cost == direct.reduced_cost
        np.testing.assert_array_equal(
            engine.cluster_rates(direct.cluster), direct.column.rates
        )
