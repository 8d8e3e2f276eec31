"""网络模型、耦合系数与调度校验测试"""

import math

import numpy as np
import pytest

from cellsched.core.model import (
    Cluster,
    Schedule,
    aggregate_columns,
    cluster_power,
    cluster_vertex_rates,
    coupling_coeff,
    make_column,
    schedule_stats,
    served_bits,
    tdma_time,
    tdma_user_times,
    validate_schedule,
    vertex_rate,
)
from cellsched.errors import DomainError

# ============================================================================
# NetworkInstance
# ============================================================================


class TestNetworkInstance:
    """实例构造与不变量"""

    def test_shapes_and_derived(self, two_cell_instance) -> None:
        """测试形状与派生量"""
        inst = two_cell_instance
        assert inst.cell_count == 2
        assert inst.user_count == 2
        assert inst.cell_of_user.tolist() == [0, 1]
        assert inst.wb == 1.0
        np.testing.assert_allclose(inst.cell_power, [6.0, 6.0])

    def test_arrays_are_read_only(self, two_cell_instance) -> None:
        """测试数组只读"""
        with pytest.raises(ValueError):
            two_cell_instance.gain[0, 0] = 2.0

    def test_rejects_bad_partition(self, two_cell_instance) -> None:
        """测试用户划分非法"""
        from dataclasses import replace

        with pytest.raises(DomainError, match="划分"):
            replace(two_cell_instance, users_of_cell=((0,), (0,)))

    def test_rejects_zero_serving_gain(self, two_cell_instance) -> None:
        """测试服务增益为零"""
        from dataclasses import replace

        gain = np.ones((2, 2))
        gain[1, 1] = 0.0
        with pytest.raises(DomainError, match="增益"):
            replace(two_cell_instance, gain=gain)

    def test_rejects_bad_load(self, two_cell_instance) -> None:
        """测试负载越界"""
        from dataclasses import replace

        with pytest.raises(DomainError, match="负载"):
            replace(two_cell_instance, load=[1.5, 1.0])

    def test_with_deadline(self, two_cell_instance) -> None:
        """测试替换时限"""
        assert two_cell_instance.with_deadline(3.0).deadline == 3.0
        assert two_cell_instance.deadline == 10.0


# ============================================================================
# Cluster
# ============================================================================


class TestCluster:
    """簇位掩码"""

    def test_canonical_encoding(self) -> None:
        """测试规范编码"""
        assert Cluster.of([2, 0]) == Cluster.of([0, 2]) == Cluster(0b101)
        assert Cluster.of([0, 2]).members == (0, 2)
        assert len(Cluster.full(3)) == 3

    def test_membership(self) -> None:
        """测试成员判断"""
        s = Cluster.of([1, 3])
        assert 1 in s
        assert 0 not in s
        assert Cluster.of([1]).issubset(s)
        assert str(s) == "{1,3}"

    def test_empty_rejected(self) -> None:
        """测试空簇"""
        with pytest.raises(DomainError):
            Cluster(0)

    def test_check_against_instance(self, two_cell_instance) -> None:
        """测试越界小区"""
        with pytest.raises(DomainError, match="不存在"):
            Cluster.of([0, 2]).check(two_cell_instance)


# ============================================================================
# 耦合系数
# ============================================================================


class TestCouplingCoefficient:
    """b_ij^s 与顶点速率"""

    def test_singleton_unit(self, two_cell_instance) -> None:
        """单小区簇、单位参数时 b = 1"""
        assert coupling_coeff(two_cell_instance, Cluster.of([0]), 0, 0) == pytest.approx(1.0)
        assert vertex_rate(two_cell_instance, Cluster.of([0]), 0, 0) == pytest.approx(1.0)

    def test_two_cell_value(self, two_cell_instance) -> None:
        """双小区簇 b = 1/log2(1.5)"""
        b = coupling_coeff(two_cell_instance, Cluster.of([0, 1]), 0, 0)
        assert b == pytest.approx(1.0 / math.log2(1.5))
        assert b == pytest.approx(1.7095, abs=1e-4)
        rate = vertex_rate(two_cell_instance, Cluster.of([0, 1]), 0, 0)
        assert rate == pytest.approx(0.5850, abs=1e-4)

    def test_half_load_scales_rate(self, unit_instance) -> None:
        """速率与负载成正比"""
        from dataclasses import replace

        inst = replace(unit_instance, load=[0.5])
        assert vertex_rate(inst, Cluster.of([0]), 0, 0) == pytest.approx(0.5)

    def test_zero_cross_gain_equals_singleton(self, two_cell_instance) -> None:
        """无交叉增益时与单小区相同"""
        from dataclasses import replace

        inst = replace(two_cell_instance, gain=np.eye(2))
        assert coupling_coeff(inst, Cluster.of([0, 1]), 0, 0) == pytest.approx(
            coupling_coeff(inst, Cluster.of([0]), 0, 0)
        )

    def test_membership_errors(self, two_cell_instance) -> None:
        """测试小区或用户不匹配"""
        with pytest.raises(DomainError, match="不在簇"):
            coupling_coeff(two_cell_instance, Cluster.of([1]), 0, 0)
        with pytest.raises(DomainError, match="不属于"):
            coupling_coeff(two_cell_instance, Cluster.of([0, 1]), 0, 1)

    def test_monotone_in_membership(self, rng, make_instance) -> None:
        """干扰小区越多，系数越大（速率越小）"""
        for _ in range(20):
            inst = make_instance(rng, 4, 2)
            for mask in range(1, 16):
                s = Cluster(mask)
                for extra in range(4):
                    bigger = Cluster(mask | 1 << extra)
                    for i in s.members:
                        for j in inst.users_of_cell[i]:
                            assert coupling_coeff(inst, s, i, j) <= coupling_coeff(
                                inst, bigger, i, j
                            )

    def test_load_budget_identity(self, rng, make_instance) -> None:
        """Σ_j b_ij r_j = l_i·W·B 对每个成员小区成立"""
        inst = make_instance(rng, 3, 2)
        s = Cluster.full(3)
        column = make_column(inst, s, {0: 1, 1: 2, 2: 4})
        for i, j in column.served:
            value = coupling_coeff(inst, s, i, j) * column.rates[j]
            assert value == pytest.approx(inst.load[i] * inst.wb, rel=1e-9)


class TestClusterPower:
    """簇功率"""

    def test_table_values(self, hex7_instance) -> None:
        """p0 = 5 W、W = 25、p = 1 W 时单小区 30 W，7 小区 210 W"""
        assert cluster_power(hex7_instance, Cluster.of([0])) == pytest.approx(30.0)
        assert cluster_power(hex7_instance, Cluster.full(7)) == pytest.approx(210.0)

    def test_half_load(self, hex7_instance) -> None:
        """l = 0.5 时 17.5 W"""
        from dataclasses import replace

        inst = replace(hex7_instance, load=np.full(7, 0.5))
        assert cluster_power(inst, Cluster.of([3])) == pytest.approx(17.5)


# ============================================================================
# 列、调度与校验
# ============================================================================


class TestColumnsAndSchedules:
    """列构造、调度校验与合并"""

    def test_make_column(self, two_cell_instance) -> None:
        """测试列字段"""
        column = make_column(two_cell_instance, Cluster.of([0, 1]), {0: 0, 1: 1})
        assert column.served_user == {0: 0, 1: 1}
        assert column.power == pytest.approx(12.0)
        assert column.key == (0b11, ((0, 0), (1, 1)))
        np.testing.assert_allclose(column.rates, [math.log2(1.5)] * 2)

    def test_make_column_requires_cover(self, two_cell_instance) -> None:
        """服务映射必须覆盖簇"""
        with pytest.raises(DomainError, match="覆盖"):
            make_column(two_cell_instance, Cluster.of([0, 1]), {0: 0})

    def test_empty_schedule_infeasible(self, two_cell_instance) -> None:
        """空调度不满足任何需求"""
        report = validate_schedule(two_cell_instance, Schedule())
        assert not report.feasible
        assert report.unmet_users == (0, 1)

    def test_tdma_schedule_feasible(self, two_cell_instance) -> None:
        """TDMA 调度在时限内可行"""
        times = tdma_user_times(two_cell_instance)
        np.testing.assert_allclose(times, [1.0, 1.0])
        sched = Schedule.from_pairs(
            (make_column(two_cell_instance, Cluster.of([i]), {i: i}), times[i])
            for i in range(2)
        )
        report = validate_schedule(two_cell_instance, sched)
        assert report.feasible
        assert report.total_energy == pytest.approx(12.0)
        assert tdma_time(two_cell_instance) == pytest.approx(2.0)

    def test_time_violation_reported(self, two_cell_instance) -> None:
        """超出时限以报告给出"""
        column = make_column(two_cell_instance, Cluster.of([0]), {0: 0})
        report = validate_schedule(
            two_cell_instance.with_deadline(0.5), Schedule.from_pairs([(column, 1.0)])
        )
        assert not report.feasible
        assert report.time_slack == pytest.approx(-0.5)

    @pytest.mark.parametrize(
        ("demand", "shortfall", "feasible"),
        [
            (1.0, 5e-7, True),
            (1.0, 2e-6, False),
            (2e6, 1.0, True),
            (2e6, 6.0, False),
        ],
    )
    def test_tolerance_scales_with_demand(
        self, two_cell_instance, demand, shortfall, feasible
    ) -> None:
        """需求缺口按 max(1, d_j) 放大的容差判定"""
        inst = two_cell_instance.with_demand([demand, demand]).with_deadline(1e7)
        sched = Schedule.from_pairs(
            (make_column(inst, Cluster.of([i]), {i: i}), demand - shortfall)
            for i in range(2)
        )
        report = validate_schedule(inst, sched)
        assert report.feasible is feasible
        np.testing.assert_allclose(report.demand_slack, [-shortfall, -shortfall])

    def test_time_tolerance_scales_with_deadline(self, two_cell_instance) -> None:
        """时限超出按 max(1, T) 放大的容差判定"""
        inst = two_cell_instance.with_demand([500.0, 500.0])
        sched = Schedule.from_pairs(
            (make_column(inst, Cluster.of([i]), {i: i}), 500.0) for i in range(2)
        )
        within = validate_schedule(inst.with_deadline(999.9995), sched)
        beyond = validate_schedule(inst.with_deadline(999.998), sched)
        assert within.feasible
        assert not beyond.feasible

    def test_aggregate_identity(self, two_cell_instance) -> None:
        """单列合并为自身"""
        column = make_column(two_cell_instance, Cluster.of([0]), {0: 0})
        merged = aggregate_columns([(column, 2.0)])
        assert merged.duration == 2.0
        np.testing.assert_allclose(merged.rates, column.rates)

    def test_aggregate_preserves_bits(self, rng, make_instance) -> None:
        """合并后逐用户服务比特不变"""
        inst = make_instance(rng, 2, 3)
        s = Cluster.full(2)
        entries = [
            (make_column(inst, s, {0: a, 1: b}), float(rng.uniform(0.1, 1.0)))
            for a in range(3)
            for b in range(3, 6)
        ]
        merged = aggregate_columns(entries)
        direct = served_bits(inst, Schedule.from_pairs(entries), exact=False)
        np.testing.assert_allclose(merged.rates * merged.duration, direct, rtol=1e-12)

    def test_aggregate_rejects_mixed(self, two_cell_instance) -> None:
        """不同簇不能合并"""
        a = make_column(two_cell_instance, Cluster.of([0]), {0: 0})
        b = make_column(two_cell_instance, Cluster.of([1]), {1: 1})
        with pytest.raises(DomainError, match="同一簇"):
            aggregate_columns([(a, 1.0), (b, 1.0)])

    def test_schedule_stats(self, two_cell_instance) -> None:
        """激活次数与平均速率"""
        inst = two_cell_instance
        sched = Schedule.from_pairs(
            [
                (make_column(inst, Cluster.of([0]), {0: 0}), 1.0),
                (make_column(inst, Cluster.of([0, 1]), {0: 0, 1: 1}), 2.0),
            ]
        )
        stats = schedule_stats(inst, sched)
        assert stats.activations.tolist() == [2, 1]
        assert stats.mean_activations == pytest.approx(1.5)
        assert stats.active_columns == 2
        expected0 = (1.0 + 2.0 * math.log2(1.5)) / 3.0
        assert stats.user_rate[0] == pytest.approx(expected0)
        assert stats.user_rate[1] == pytest.approx(math.log2(1.5))

    def test_cluster_vertex_rates_outside_zero(self, two_cell_instance) -> None:
        """簇外用户速率为 0"""
        rates = cluster_vertex_rates(two_cell_instance, Cluster.of([1]))
        assert rates[0] == 0.0
        assert rates[1] == pytest.approx(1.0)
