"""求解指标测试"""

import pytest

from cellsched.core.algorithms import tdma
from cellsched.metrics import SolverMetrics, get_metrics


class TestSolverMetrics:
    """Prometheus 计数器与快照"""

    def test_counters_and_snapshot(self) -> None:
        """计数器与快照同步"""
        metrics = SolverMetrics()
        metrics.inc("pricing_rounds_total")
        metrics.inc("pricing_rounds_total", 2)
        metrics.inc("columns_added_total")
        assert metrics["pricing_rounds_total"] == 3
        assert metrics["columns_added_total"] == 1
        assert metrics["lp_solves_total"] == 0
        assert "cellsched_pricing_rounds_total 3.0" in metrics.render()

    def test_unknown_counter(self) -> None:
        """未知计数器"""
        with pytest.raises(KeyError):
            SolverMetrics().inc("columns_removed_total")

    def test_record_solve(self) -> None:
        """按算法与终止原因计数，并累计耗时"""
        metrics = SolverMetrics()
        metrics.record_solve(algorithm="ocs", termination="converged", seconds=0.2)
        metrics.record_solve(algorithm="ocs", termination="converged", seconds=0.3)
        metrics.record_solve(algorithm="tdma", termination="infeasible", seconds=0.0)
        solves = metrics["solves_total"]
        assert solves[("ocs", "converged")] == 2
        assert solves[("tdma", "infeasible")] == 1
        assert metrics["solve_seconds_count"] == 3
        assert metrics["solve_seconds_sum"] == pytest.approx(0.5)
        text = metrics.render()
        assert 'cellsched_solves_total{algorithm="ocs",termination="converged"} 2.0' in text
        assert "cellsched_solve_seconds_count 3.0" in text

    def test_snapshot_is_copy(self) -> None:
        """快照中的字典不能改动内部状态"""
        metrics = SolverMetrics()
        metrics.record_solve(algorithm="ocs", termination="converged", seconds=0.1)
        metrics["solves_total"].clear()
        assert metrics["solves_total"] == {("ocs", "converged"): 1}
        assert set(metrics) >= {"lp_solves_total", "solves_total"}

    def test_write_textfile(self, tmp_path) -> None:
        """写出 node-exporter 文本格式"""
        metrics = SolverMetrics()
        metrics.inc("lp_solves_total", 4)
        path = tmp_path / "metrics" / "cellsched.prom"
        metrics.write_textfile(path)
        assert "cellsched_lp_solves_total 4.0" in path.read_text(encoding="utf-8")

    def test_global_metrics_record_solves(self, unit_instance) -> None:
        """算法结束时记录到全局指标"""
        metrics = get_metrics()
        assert get_metrics() is metrics
        before = metrics["solves_total"].get(("tdma", "converged"), 0)
        tdma(unit_instance)
        assert metrics["solves_total"][("tdma", "converged")] == before + 1

    def test_recording_and_merge(self) -> None:
        """记录块内的增量，并在另一个实例上复现"""
        worker = SolverMetrics()
        worker.inc("lp_solves_total")
        with worker.recording() as delta:
            worker.inc("lp_solves_total", 2)
            worker.inc("pricing_rounds_total")
            worker.record_solve(algorithm="ocs", termination="converged", seconds=0.25)
        worker.inc("lp_solves_total")
        assert delta.counters == {"lp_solves_total": 2, "pricing_rounds_total": 1}
        assert delta.solves == [("ocs", "converged", 0.25)]

        parent = SolverMetrics()
        parent.merge(delta)
        assert parent["lp_solves_total"] == 2
        assert parent["pricing_rounds_total"] == 1
        assert parent["solves_total"] == {("ocs", "converged"): 1}
        assert parent["solve_seconds_sum"] == pytest.approx(0.25)
        assert "cellsched_solve_seconds_count 1.0" in parent.render()
