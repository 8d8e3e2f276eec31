"""命令行入口

子命令：
  gen    生成实例文件
  solve  在单个实例上运行一个算法
  run    批量实验（T、M 扫描）
  bound  局部枚举能量区间
  tmin   最短完成时间
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from .. import __version__
from ..core.algorithms import (
    Algorithm,
    BoundReport,
    SolveReport,
    SolverOptions,
    all_on,
    bound,
    local_bound,
    min_completion_time,
    near,
    ocs,
    tdma,
)
from ..core.instance_io import load_instance, save_instance
from ..core.model import NetworkInstance, schedule_stats, validate_schedule
from ..core.netgen import GenConfig, generate, layout_centers
from ..core.pricing import LocalMode, build_scenarios, select_neighbors
from ..errors import ConfigError, DomainError, SizeLimitError, SolverFault
from ..logging_utils import configure_logging
from ..metrics import get_metrics
from ..settings import get_settings
from .config import (
    EXACT_CELL_THRESHOLD,
    LE_MODE_SIDES,
    LE_MODES,
    LOCAL_ALGORITHMS,
    ExperimentConfig,
    config_to_dict,
    deep_merge,
)
from .runner import run_bounds, run_experiment, write_bounds, write_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3

SOLVE_ALGORITHMS = tuple(a.value for a in Algorithm)


# ---------------------------------------------------------------------------
# 参数
# ---------------------------------------------------------------------------


def _add_generator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--layout",
        choices=["hex7", "hex19", "single"],
        default=None,
        help="小区布局（默认: hex7）",
    )
    parser.add_argument("--radius", type=float, default=None, help="小区半径 (m)")
    parser.add_argument("--users", type=int, default=None, help="每小区用户数")
    parser.add_argument("--demand", type=float, default=None, help="每用户需求 (bit)")
    parser.add_argument("--seed", type=int, default=None, help="随机种子")
    parser.add_argument(
        "-c",
        "--config",
        type=str,
        default=None,
        help="配置文件路径 (YAML 格式)",
    )


def _add_batch_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--T", dest="deadlines", default=None, help="时限列表 (s)，逗号分隔")
    parser.add_argument(
        "--M",
        dest="policies",
        default=None,
        help="M 策略列表，逗号分隔（整数或 neighbor）",
    )
    parser.add_argument("--instances", type=int, default=None, help="实例数")
    parser.add_argument("--jobs", type=int, default=None, help="并行进程数")
    parser.add_argument("--out", type=str, default=None, help="输出目录")
    parser.add_argument(
        "--force-exact",
        action="store_true",
        default=None,
        help=f"允许在超过 {EXACT_CELL_THRESHOLD} 个小区的网络上运行 ocs",
    )
    parser.add_argument(
        "--le-mode", choices=LE_MODES, default=None, help="局部枚举计算的一侧或两侧"
    )


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    parser = argparse.ArgumentParser(
        prog="cellsched",
        description="多小区 OFDMA 节能簇调度",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  # 7 小区批量实验
  cellsched run --layout hex7 --algos ocs,near,allon,tdma --T 1,1.5,2 --M 5 \\
      --instances 100 --seed 42 --out results/

  # 19 小区能量区间
  cellsched bound --layout hex19 --M 1,3,5,7,neighbor --instances 20

  # 生成实例后单独求解
  cellsched gen --layout hex7 --seed 7 --out inst.cs1
  cellsched solve inst.cs1 --algo ocs --T 2
        """,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="启用详细日志输出")
    parser.add_argument(
        "--metrics-out", type=str, default=None, help="Prometheus 文本指标输出路径"
    )
    parser.add_argument("--version", action="version", version=f"cellsched {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="生成实例文件")
    _add_generator_flags(gen)
    gen.add_argument("--T", dest="deadline", type=float, default=None, help="实例时限 (s)")
    gen.add_argument("--instances", type=int, default=1, help="实例数")
    gen.add_argument(
        "--out",
        type=str,
        required=True,
        help="输出文件；实例数大于 1 时为目录",
    )

    solve = sub.add_parser("solve", help="在单个实例上运行一个算法")
    solve.add_argument("instance", type=str, help="实例文件路径")
    solve.add_argument("--algo", choices=SOLVE_ALGORITHMS, default="ocs", help="算法")
    solve.add_argument("--T", dest="deadline", type=float, default=None, help="覆盖实例时限 (s)")
    solve.add_argument("--M", dest="policy", default="5", help="M 策略（局部枚举算法）")
    solve.add_argument(
        "--le-mode",
        choices=LE_MODES,
        default=None,
        help="在报告后附加该 M 策略下的局部枚举能量区间",
    )

    run = sub.add_parser("run", help="批量实验")
    _add_generator_flags(run)
    _add_batch_flags(run)
    run.add_argument("--algos", default=None, help="算法列表，逗号分隔")

    bound = sub.add_parser("bound", help="局部枚举能量区间")
    _add_generator_flags(bound)
    _add_batch_flags(bound)

    tmin = sub.add_parser("tmin", help="最短完成时间")
    tmin.add_argument("instance", type=str, help="实例文件路径")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """命令行中显式给出的值，按 ExperimentConfig 字典结构组织"""
    data: dict[str, Any] = {}
    generator = {
        key: value
        for key, value in (
            ("layout", args.layout),
            ("radius_m", args.radius),
            ("users_per_cell", args.users),
            ("demand_bits", args.demand),
            ("seed", args.seed),
        )
        if value is not None
    }
    if generator:
        data["generator"] = generator
    for key in ("algos", "deadlines", "policies", "instances", "jobs", "out", "le_mode"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "force_exact", None):
        data["force_exact"] = True
    return data


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """配置文件 + 环境变量 + 命令行，后者优先"""
    base = config_to_dict(ExperimentConfig.load(args.config))
    return ExperimentConfig.from_dict(deep_merge(base, _overrides(args)))


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------


def _report_config_errors(errors: list[str]) -> int:
    for error in errors:
        logger.error(f"配置错误: {error}")
    return EXIT_CONFIG


def cmd_gen(args: argparse.Namespace) -> int:
    data: dict[str, Any] = {}
    if args.config:
        data = GenConfig.from_yaml(args.config).model_dump(exclude_unset=True)
    data.update(_overrides(args).get("generator", {}))
    if args.deadline is not None:
        data["deadline_s"] = args.deadline
    cfg = GenConfig.from_dict(data)
    if args.instances < 1:
        raise ConfigError(f"实例数必须大于 0: {args.instances}")

    if args.instances == 1:
        path = save_instance(generate(cfg), args.out)
        print(f"已生成实例: {path}")
        return EXIT_OK
    out = Path(args.out)
    for index in range(args.instances):
        save_instance(generate(cfg, index), out / f"inst-{index:03d}.yaml")
    print(f"已生成 {args.instances} 个实例: {out}")
    return EXIT_OK


def _solve_one(inst: NetworkInstance, algo: str, policy: str) -> SolveReport:
    options = SolverOptions.from_settings(recover_infeasible=True)
    algorithm = Algorithm(algo)
    if algorithm is Algorithm.OCS:
        return ocs(inst, options)
    if algorithm is Algorithm.TDMA:
        return tdma(inst)
    if algorithm is Algorithm.ALL_ON:
        return all_on(inst, options)
    if algorithm is Algorithm.MIN_TIME:
        return min_completion_time(inst, options)
    table = build_scenarios(inst, select_neighbors(inst, policy))
    if algorithm is Algorithm.NEAR:
        return near(inst, options=options, table=table)
    mode = LocalMode.OFF if algorithm is Algorithm.LE_OFF else LocalMode.ON
    return local_bound(inst, table, mode, options)


def _print_report(inst: NetworkInstance, report: SolveReport) -> None:
    print("=" * 50)
    print(f"算法:       {report.algorithm}")
    print(f"小区/用户:  {inst.cell_count} / {inst.user_count}")
    print(f"时限 T:     {inst.deadline:g} s")
    print(f"终止原因:   {report.termination}")
    print(f"能量:       {report.energy:.6f} J")
    print(f"完成时间:   {report.completion_time:.6f} s")
    print(f"定价轮数:   {report.iterations}")
    print(f"激活列数:   {report.active_columns}")
    if report.feasible and report.active_columns > 0:
        stats = schedule_stats(inst, report.schedule)
        print(f"平均激活:   {stats.mean_activations:.3f} 次/小区")
        print(f"平均速率:   {stats.mean_user_rate / 1e6:.3f} Mbit/s")
        if report.algorithm is not Algorithm.MIN_TIME:
            check = validate_schedule(
                inst, report.schedule, tol=get_settings().feasibility_tolerance
            )
            print(f"精确速率校验: {'通过' if check.feasible else '未通过'}")
    print("=" * 50)


def _print_bound(result: BoundReport) -> None:
    print(f"能量区间 (M = {result.policy}):")
    if result.lower is not None:
        print(f"下界:       {result.lower_energy:.6f} J")
    if result.upper is not None:
        print(f"near:       {result.near_energy:.6f} J")
        print(f"上界:       {result.upper_energy:.6f} J")
    if result.lower is not None and result.upper is not None:
        print(f"相对间隙:   {result.gap:.4%}")
    print("=" * 50)


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    if args.deadline is not None:
        inst = inst.with_deadline(args.deadline)
    report = _solve_one(inst, args.algo, args.policy)
    _print_report(inst, report)
    if args.le_mode is not None:
        result = bound(
            inst,
            args.policy,
            SolverOptions.from_settings(recover_infeasible=True),
            modes=LE_MODE_SIDES[args.le_mode],
        )
        _print_bound(result)
    return EXIT_OK


def cmd_tmin(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    report = min_completion_time(inst, SolverOptions.from_settings())
    print(f"最短完成时间: {report.completion_time:.9g} s")
    print(f"对应能量:     {report.energy:.6f} J")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment(args)
    if args.algos is None and "ocs" in config.algos and not config.force_exact:
        cells = len(layout_centers(config.gen_config()))
        if cells > EXACT_CELL_THRESHOLD:
            config.algos = [a for a in config.algos if a != "ocs"]
            logger.info(f"{cells} 个小区的网络默认不运行 ocs（可用 --force-exact 与 --algos 开启）")
    errors = config.validate()
    if errors:
        return _report_config_errors(errors)

    logger.info(
        f"开始批量实验: {config.instances} 个实例, 算法 {config.algos}, "
        f"T {config.deadlines}, M {config.policies}"
    )
    result = run_experiment(config)
    write_experiment(result, config.out)
    print(result.aggregate.to_string(index=False))
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    config = load_experiment(args)
    config.algos = list(LOCAL_ALGORITHMS)
    errors = config.validate()
    if errors:
        return _report_config_errors(errors)

    logger.info(
        f"开始能量区间实验: {config.instances} 个实例, 模式 {config.le_mode}, "
        f"M {config.policies}"
    )
    result = run_bounds(config)
    write_bounds(result, config.out)
    print(result.aggregate.to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "run": cmd_run,
    "bound": cmd_bound,
    "tmin": cmd_tmin,
}


def main(argv: list[str] | None = None) -> int:
    """CLI 入口点

    Returns:
        0 成功，2 配置错误，3 内部错误
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(
        "cellsched",
        level="DEBUG" if args.verbose else settings.log,
        log_format=settings.log_format,
    )

    try:
        code = COMMANDS[args.command](args)
    except (ConfigError, DomainError, SizeLimitError) as e:
        logger.error(f"配置错误: {e}")
        return EXIT_CONFIG
    except FileNotFoundError as e:
        logger.error(f"文件未找到: {e}")
        return EXIT_CONFIG
    except KeyboardInterrupt:
        logger.info("用户中断")
        return EXIT_FAULT
    except SolverFault as e:
        logger.exception(f"求解失败: {e}")
        return EXIT_FAULT
    except Exception as e:
        logger.exception(f"运行失败: {e}")
        return EXIT_FAULT

    metrics_path = args.metrics_out or settings.metrics_path
    if metrics_path:
        get_metrics().write_textfile(metrics_path)
        logger.info(f"指标已写入: {metrics_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
