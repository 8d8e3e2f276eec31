"""精确定价测试"""

import numpy as np
import pytest

from cellsched.core.model import (
    Cluster,
    NetworkInstance,
    cluster_power,
    coupling_coeff,
)
from cellsched.core.oracle import brute_force_cluster_omega, brute_force_price_all
from cellsched.core.pricing import (
    ExactPricing,
    create_pricing_engine,
    evaluate,
    price_all,
    price_cluster,
)
from cellsched.errors import ConfigError, SizeLimitError


def _one_cell_two_users() -> NetworkInstance:
    """两个用户的顶点速率都为 1"""
    return NetworkInstance(
        users_of_cell=((0, 1),),
        gain=[[1.0, 1.0]],
        tx_power_per_ru=[1.0],
        circuit_power=5.0,
        ru_count=1,
        ru_bandwidth=1.0,
        noise=1.0,
        load=[1.0],
        demand=[1.0, 1.0],
        deadline=4.0,
    )


class TestPriceCluster:
    """单簇定价"""

    def test_argmax_user(self) -> None:
        """π·r = (3, 5) 时服务第二个用户，ω = 5"""
        inst = _one_cell_two_users()
        result = price_cluster(inst, Cluster.of([0]), np.array([3.0, 5.0]), 0.0)
        assert result.column.served_user == {0: 1}
        assert result.omega == pytest.approx(5.0)
        assert result.reduced_cost == pytest.approx(6.0 - 5.0)

    def test_zero_duals_pick_lowest_user(self, make_instance, rng) -> None:
        """π = 0 时检验数为 p_s − λ，每小区取编号最小的用户"""
        inst = make_instance(rng, 3, 3)
        s = Cluster.of([0, 2])
        result = price_cluster(inst, s, np.zeros(inst.user_count), -0.5)
        assert result.column.served_user == {0: 0, 2: 6}
        assert result.reduced_cost == pytest.approx(cluster_power(inst, s) + 0.5)

    def test_matches_vertex_enumeration(self, make_instance, rng) -> None:
        """ω_s 等于全部顶点上 Σ π r 的最大值"""
        for _ in range(10):
            inst = make_instance(rng, 3, 3)
            duals = rng.uniform(0.0, 3.0, size=inst.user_count)
            for mask in range(1, 8):
                s = Cluster(mask)
                result = price_cluster(inst, s, duals, 0.0)
                assert result.omega == pytest.approx(
                    brute_force_cluster_omega(inst, s, duals), rel=1e-12
                )

    def test_reduced_cost_recomputed_from_column(self, make_instance, rng) -> None:
        """检验数可由返回的列重新计算得到"""
        inst = make_instance(rng, 3, 2)
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        result = price_cluster(inst, Cluster.full(3), duals, -0.25)
        again = evaluate(result.column, duals, -0.25)
        assert again.reduced_cost == pytest.approx(result.reduced_cost, rel=1e-12)

    def test_vertex_dominates_random_rate_points(self, make_instance, rng) -> None:
        """可行速率域内任意点的 Σ π r 不超过 ω_s"""
        inst = make_instance(rng, 3, 3)
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        s = Cluster.of([0, 1])
        omega = price_cluster(inst, s, duals, 0.0).omega
        for _ in range(200):
            rates = np.zeros(inst.user_count)
            for i in s.members:
                users = inst.users_of_cell[i]
                weights = rng.dirichlet(np.ones(len(users))) * rng.uniform(0.0, 1.0)
                for w, j in zip(weights, users, strict=True):
                    rates[j] = w * inst.load[i] * inst.wb / coupling_coeff(inst, s, i, j)
            assert duals @ rates <= omega * (1 + 1e-12)


class TestPriceAll:
    """全部簇定价"""

    def test_single_cell_matches_cluster(self, unit_instance) -> None:
        """单小区网络只有一个簇"""
        duals = np.array([2.0])
        best = price_all(unit_instance, duals, 0.0)
        direct = price_cluster(unit_instance, Cluster.of([0]), duals, 0.0)
        assert best.column.key == direct.column.key
        assert best.reduced_cost == direct.reduced_cost

    def test_matches_brute_force(self, make_instance, rng) -> None:
        """与逐簇暴力枚举的最小检验数一致"""
        for _ in range(10):
            inst = make_instance(rng, 5, 2)
            duals = rng.uniform(0.0, 3.0, size=inst.user_count)
            time_dual = float(-rng.uniform(0.0, 1.0))
            best = price_all(inst, duals, time_dual)
            mask, reduced = brute_force_price_all(inst, duals, time_dual)
            assert best.reduced_cost == pytest.approx(reduced, rel=1e-9, abs=1e-12)
            assert best.column.cluster.mask == mask

    def test_seven_cells_match_brute_force(self, hex7_instance) -> None:
        """7 小区生成实例"""
        inst = hex7_instance
        rng = np.random.default_rng(7)
        # 对偶量级与 焦耳/比特 相当
        duals = rng.uniform(0.0, 5e-5, size=inst.user_count)
        best = price_all(inst, duals, 0.0)
        mask, reduced = brute_force_price_all(inst, duals, 0.0)
        assert best.reduced_cost == pytest.approx(reduced, rel=1e-9)
        assert best.column.cluster.mask == mask

    def test_decoupled_pair_is_additive(self) -> None:
        """交叉增益为零时二元簇检验数等于两个单簇之和"""
        inst = NetworkInstance(
            users_of_cell=((0,), (1,)),
            gain=np.eye(2),
            tx_power_per_ru=[1.0, 1.0],
            circuit_power=1.0,
            ru_count=1,
            ru_bandwidth=1.0,
            noise=1.0,
            load=[1.0, 1.0],
            demand=[1.0, 1.0],
            deadline=4.0,
        )
        duals = np.array([1.5, 3.0])
        single = [price_cluster(inst, Cluster.of([i]), duals, 0.0) for i in (0, 1)]
        pair = price_cluster(inst, Cluster.full(2), duals, 0.0)
        assert pair.reduced_cost == pytest.approx(
            single[0].reduced_cost + single[1].reduced_cost
        )
        best = price_all(inst, duals, 0.0)
        assert best.reduced_cost == pytest.approx(
            min(single[0].reduced_cost, single[1].reduced_cost, pair.reduced_cost)
        )

    def test_zero_duals_pick_cheapest_singleton(self, make_instance, rng) -> None:
        """π = 0 时最优为功率最小的单小区簇"""
        inst = make_instance(rng, 4, 2)
        best = price_all(inst, np.zeros(inst.user_count), 0.0)
        cheapest = int(np.argmin(inst.cell_power))
        assert best.column.cluster == Cluster.of([cheapest])
        assert best.reduced_cost == pytest.approx(inst.cell_power[cheapest])

    def test_unit_cost(self, make_instance, rng) -> None:
        """单位费用时检验数为 1 − ω − λ"""
        inst = make_instance(rng, 3, 2)
        duals = rng.uniform(0.0, 1.0, size=inst.user_count)
        best = price_all(inst, duals, 0.0, unit_cost=True)
        assert best.reduced_cost == pytest.approx(1.0 - best.omega)
        for mask in range(1, 8):
            omega = price_cluster(inst, Cluster(mask), duals, 0.0).omega
            assert best.omega >= omega * (1 - 1e-12)

    def test_restricted_masks(self, make_instance, rng) -> None:
        """只在给定簇中定价"""
        inst = make_instance(rng, 3, 2)
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        best = price_all(inst, duals, 0.0, masks=[Cluster.full(3).mask])
        assert best.column.cluster == Cluster.full(3)

    def test_workers_match_serial(self, make_instance, rng) -> None:
        """多线程分块结果与串行一致"""
        inst = make_instance(rng, 13, 1)
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        serial = price_all(inst, duals, 0.0)
        parallel = price_all(inst, duals, 0.0, workers=4)
        assert parallel.column.key == serial.column.key
        assert parallel.reduced_cost == serial.reduced_cost

    def test_size_limit(self, make_instance, rng) -> None:
        """小区数超过上限"""
        inst = make_instance(rng, 3, 1)
        with pytest.raises(SizeLimitError):
            price_all(inst, np.zeros(3), 0.0, limit=2)
        with pytest.raises(SizeLimitError):
            ExactPricing(inst, limit=2)


class TestFactory:
    """定价引擎工厂"""

    def test_exact_engine(self, make_instance, rng) -> None:
        """exact 引擎与函数接口一致"""
        inst = make_instance(rng, 3, 2)
        duals = rng.uniform(0.0, 3.0, size=inst.user_count)
        engine = create_pricing_engine(inst, "EXACT")
        assert isinstance(engine, ExactPricing)
        assert engine.price(duals, 0.0).column.key == price_all(inst, duals, 0.0).column.key

    def test_unknown_kind(self, unit_instance) -> None:
        """未知类型"""
        with pytest.raises(ConfigError, match="未知定价引擎类型"):
            create_pricing_engine(unit_instance, "milp")

    def test_local_needs_policy(self, unit_instance) -> None:
        """局部枚举缺少 M 策略"""
        with pytest.raises(ConfigError, match="M 策略"):
            create_pricing_engine(unit_instance, "le_on")
