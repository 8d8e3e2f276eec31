"""实验配置管理

支持从 YAML 文件和环境变量加载配置，环境变量优先级更高；命令行参数再覆盖二者。
"""

import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..core.algorithms import SolverOptions
from ..core.master import ColumnPreset
from ..core.netgen import GenConfig, layout_centers
from ..core.pricing import LocalMode, SearchStrategy
from ..core.pricing.local import NEIGHBOR_POLICY
from ..errors import ConfigError
from ..settings import Settings

logger = logging.getLogger(__name__)

RUN_ALGORITHMS = ("ocs", "near", "allon", "tdma", "le_off", "le_on")
LOCAL_ALGORITHMS = ("near", "le_off", "le_on")
LE_MODES = ("both", "off", "on")
# 各 le_mode 计算的局部枚举一侧
LE_MODE_SIDES = {
    "both": (LocalMode.OFF, LocalMode.ON),
    "off": (LocalMode.OFF,),
    "on": (LocalMode.ON,),
}
DEFAULT_DEADLINES = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
# 超过该小区数时 OCS 需要 --force-exact
EXACT_CELL_THRESHOLD = 7


def split_list(value: str | list[Any] | tuple[Any, ...]) -> list[str]:
    """把逗号分隔字符串或列表统一为字符串列表"""
    if isinstance(value, list | tuple):
        return [str(v).strip() for v in value if str(v).strip()]
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.lower() in ("true", "1", "yes")
    return bool(value)


def _optional(value: Any, cast: type) -> Any:
    return None if value is None or value == "" else cast(value)


@dataclass
class SolverConfig:
    """实验使用的列生成参数

    iteration_cap、rc_tolerance、workers 为 None 时取进程设置
    （CELLSCHED_ITERATION_CAP、CELLSCHED_RC_TOLERANCE、CELLSCHED_PRICING_WORKERS）。

    Attributes:
        iteration_cap: 定价轮数上限
        rc_tolerance: 检验数容差
        initial_columns: 初始列集合（default / pairs / full_only）
        recover_infeasible: 初始主问题不可行时先求最短完成时间再重试
        local_search: 局部枚举搜索策略（dfs / exhaustive）
        workers: 精确定价线程数
    """

    iteration_cap: int | None = None
    rc_tolerance: float | None = None
    initial_columns: str = ColumnPreset.PAIRS.value
    recover_infeasible: bool = True
    local_search: str = SearchStrategy.DFS.value
    workers: int | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SolverConfig":
        """从字典创建配置"""
        return cls(
            iteration_cap=_optional(data.get("iteration_cap"), int),
            rc_tolerance=_optional(data.get("rc_tolerance"), float),
            initial_columns=str(data.get("initial_columns", ColumnPreset.PAIRS.value)),
            recover_infeasible=_as_bool(data.get("recover_infeasible", True)),
            local_search=str(data.get("local_search", SearchStrategy.DFS.value)),
            workers=_optional(data.get("workers"), int),
        )

    def to_options(self, settings: Settings | None = None) -> SolverOptions:
        """未在 solver 段给出的字段由进程设置补齐"""
        overrides: dict[str, Any] = {
            key: value
            for key, value in (
                ("iteration_cap", self.iteration_cap),
                ("rc_tolerance", self.rc_tolerance),
                ("workers", self.workers),
            )
            if value is not None
        }
        return SolverOptions.from_settings(
            settings,
            initial_columns=ColumnPreset(self.initial_columns),
            recover_infeasible=self.recover_infeasible,
            local_search=SearchStrategy(self.local_search),
            **overrides,
        )


@dataclass
class ExperimentConfig:
    """实验主配置

    Attributes:
        generator: 实例生成配置（GenConfig 字段）
        algos: 运行的算法
        deadlines: 时限 T 的取值 (s)
        policies: M 策略（整数或 neighbor）
        instances: 实例数
        jobs: 并行进程数
        out: 输出目录
        force_exact: 允许大网络上运行 OCS
        le_mode: 局部枚举计算的一侧或两侧（run 与 bound）
        solver: 列生成参数
    """

    generator: dict[str, Any] = field(default_factory=dict)
    algos: list[str] = field(default_factory=lambda: ["ocs", "near", "allon", "tdma"])
    deadlines: list[float] = field(default_factory=lambda: list(DEFAULT_DEADLINES))
    policies: list[str] = field(default_factory=lambda: ["5"])
    instances: int = 1
    jobs: int = 1
    out: str = "results"
    force_exact: bool = False
    le_mode: str = "both"
    solver: SolverConfig = field(default_factory=SolverConfig)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """从字典创建配置"""
        defaults = cls()
        deadlines = data.get("deadlines", defaults.deadlines)
        try:
            parsed_deadlines = [float(t) for t in split_list(deadlines)]
        except ValueError as e:
            raise ConfigError(f"时限列表无法解析: {deadlines!r}") from e
        return cls(
            generator=dict(data.get("generator", {})),
            algos=[a.lower() for a in split_list(data.get("algos", defaults.algos))],
            deadlines=parsed_deadlines,
            policies=[p.lower() for p in split_list(data.get("policies", defaults.policies))],
            instances=int(data.get("instances", 1)),
            jobs=int(data.get("jobs", 1)),
            out=str(data.get("out", "results")),
            force_exact=_as_bool(data.get("force_exact", False)),
            le_mode=str(data.get("le_mode", "both")).lower(),
            solver=SolverConfig.from_dict(data.get("solver", {})),
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        """从 YAML 文件加载配置

        Raises:
            FileNotFoundError: 配置文件不存在
            ConfigError: 顶层不是映射
        """
        config_path = Path(path)
        if not config_path.exists():
            raise FileNotFoundError(f"配置文件不存在: {config_path}")

        with open(config_path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件顶层必须是映射: {config_path}")

        logger.info(f"从 YAML 加载配置: {config_path}")
        return cls.from_dict(data)

    @classmethod
    def from_env(cls, prefix: str = "CELLSCHED_RUN") -> "ExperimentConfig":
        """从环境变量加载配置

        环境变量命名规则: {prefix}_{KEY}，生成器字段为 {prefix}_GEN_{KEY}
        例如: CELLSCHED_RUN_ALGOS, CELLSCHED_RUN_GEN_LAYOUT
        """
        data = _env_to_dict(prefix)
        logger.info(f"从环境变量加载配置 (前缀: {prefix})")
        return cls.from_dict(data)

    @classmethod
    def load(
        cls,
        config_path: str | Path | None = None,
        env_prefix: str = "CELLSCHED_RUN",
    ) -> "ExperimentConfig":
        """加载配置 (YAML + 环境变量)

        优先级: 环境变量 > YAML 配置文件 > 默认值
        """
        if config_path:
            base_data = config_to_dict(cls.from_yaml(config_path))
        else:
            base_data = {}

        env_data = _env_to_dict(env_prefix)
        merged_data = deep_merge(base_data, env_data)

        logger.info("配置加载完成")
        return cls.from_dict(merged_data)

    def gen_config(self) -> GenConfig:
        return GenConfig.from_dict(self.generator)

    def solver_options(self, settings: Settings | None = None) -> SolverOptions:
        return self.solver.to_options(settings)

    def validate(self) -> list[str]:
        """验证配置有效性

        Returns:
            错误信息列表，空列表表示验证通过
        """
        errors: list[str] = []

        unknown = [a for a in self.algos if a not in RUN_ALGORITHMS]
        if unknown:
            errors.append(f"未知算法: {unknown}，支持: {list(RUN_ALGORITHMS)}")
        if not self.algos:
            errors.append("至少需要一个算法")

        if not self.deadlines:
            errors.append("至少需要一个时限 T")
        if any(t <= 0 for t in self.deadlines):
            errors.append(f"时限必须为正: {self.deadlines}")

        for policy in self.policies:
            if policy != NEIGHBOR_POLICY and not policy.isdigit():
                errors.append(f"M 策略必须是非负整数或 {NEIGHBOR_POLICY}: {policy}")
        if not self.policies and any(a in LOCAL_ALGORITHMS for a in self.algos):
            errors.append("near / le_off / le_on 需要至少一个 M 策略")

        if self.instances < 1:
            errors.append(f"实例数必须大于 0: {self.instances}")
        if self.jobs < 1:
            errors.append(f"并行进程数必须大于 0: {self.jobs}")
        if self.le_mode not in LE_MODES:
            errors.append(f"le_mode 必须是 {list(LE_MODES)} 之一: {self.le_mode}")

        if self.solver.initial_columns not in {p.value for p in ColumnPreset}:
            errors.append(f"未知初始列集合: {self.solver.initial_columns}")
        if self.solver.local_search not in {s.value for s in SearchStrategy}:
            errors.append(f"未知搜索策略: {self.solver.local_search}")
        if self.solver.iteration_cap is not None and self.solver.iteration_cap < 1:
            errors.append(f"定价轮数上限必须大于 0: {self.solver.iteration_cap}")
        if self.solver.rc_tolerance is not None and self.solver.rc_tolerance <= 0:
            errors.append(f"检验数容差必须大于 0: {self.solver.rc_tolerance}")

        try:
            gen = self.gen_config()
        except ConfigError as e:
            errors.append(str(e))
        else:
            cells = len(layout_centers(gen))
            if cells > EXACT_CELL_THRESHOLD and "ocs" in self.algos and not self.force_exact:
                errors.append(
                    f"{cells} 个小区的网络上运行 ocs 需要 --force-exact（耗时很长）"
                )

        return errors


def _env_to_dict(prefix: str = "CELLSCHED_RUN") -> dict[str, Any]:
    """读取环境变量覆盖项，只返回显式设置的键。"""
    data: dict[str, Any] = {}

    for key in ("algos", "deadlines", "policies", "out", "le_mode"):
        if env_val := os.getenv(f"{prefix}_{key.upper()}"):
            data[key] = env_val
    if env_val := os.getenv(f"{prefix}_INSTANCES"):
        data["instances"] = int(env_val)
    if env_val := os.getenv(f"{prefix}_JOBS"):
        data["jobs"] = int(env_val)
    if env_val := os.getenv(f"{prefix}_FORCE_EXACT"):
        data["force_exact"] = _as_bool(env_val)

    generator_data: dict[str, Any] = {}
    if env_val := os.getenv(f"{prefix}_GEN_LAYOUT"):
        generator_data["layout"] = env_val
    if env_val := os.getenv(f"{prefix}_GEN_SEED"):
        generator_data["seed"] = int(env_val)
    if env_val := os.getenv(f"{prefix}_GEN_RADIUS_M"):
        generator_data["radius_m"] = float(env_val)
    if env_val := os.getenv(f"{prefix}_GEN_USERS_PER_CELL"):
        generator_data["users_per_cell"] = int(env_val)
    if env_val := os.getenv(f"{prefix}_GEN_DEMAND_BITS"):
        generator_data["demand_bits"] = float(env_val)
    if generator_data:
        data["generator"] = generator_data

    solver_data: dict[str, Any] = {}
    if env_val := os.getenv(f"{prefix}_SOLVER_INITIAL_COLUMNS"):
        solver_data["initial_columns"] = env_val
    if env_val := os.getenv(f"{prefix}_SOLVER_RECOVER_INFEASIBLE"):
        solver_data["recover_infeasible"] = _as_bool(env_val)
    if env_val := os.getenv(f"{prefix}_SOLVER_LOCAL_SEARCH"):
        solver_data["local_search"] = env_val
    if env_val := os.getenv(f"{prefix}_SOLVER_ITERATION_CAP"):
        solver_data["iteration_cap"] = int(env_val)
    if solver_data:
        data["solver"] = solver_data

    return data


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    return asdict(config)


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """深度合并两个字典，override 中的值覆盖 base"""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = value
    return result
