"""实验工具模块

批量生成实例，在 T 与 M 的扫描上运行各算法，输出 CSV 与汇总表。

Usage:
    # 使用配置文件运行
    config = ExperimentConfig.load("config/experiment.example.yaml")
    result = run_experiment(config)
    write_experiment(result, config.out)

    # 命令行启动
    $ cellsched run --layout hex7 --algos ocs,tdma --T 1,2 --instances 10
"""

from .cli import main
from .config import ExperimentConfig, SolverConfig
from .models import BoundRow, ResultRow
from .runner import (
    BoundResult,
    ExperimentResult,
    InstanceTask,
    run_bounds,
    run_experiment,
    write_bounds,
    write_experiment,
)

__all__ = [
    # CLI
    "main",
    # Config
    "ExperimentConfig",
    "SolverConfig",
    # Models
    "ResultRow",
    "BoundRow",
    # Runner
    "InstanceTask",
    "ExperimentResult",
    "BoundResult",
    "run_experiment",
    "run_bounds",
    "write_experiment",
    "write_bounds",
]
