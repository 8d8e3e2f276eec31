"""项目配置读取"""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """进程级配置，环境变量前缀 CELLSCHED_"""

    model_config = SettingsConfigDict(
        env_prefix="CELLSCHED_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log: str = Field("INFO", description="日志级别（CELLSCHED_LOG）")
    log_format: Literal["json", "text"] = Field(
        "json",
        description="日志输出格式",
    )

    exact_pricing_limit: int = Field(
        20, ge=1, le=20, description="精确定价允许的最大小区数"
    )
    iteration_cap: int = Field(10_000, ge=1, description="列生成定价轮数上限")
    rc_tolerance: float = Field(1e-7, gt=0, description="终止判定的检验数容差")
    feasibility_tolerance: float = Field(
        1e-6, gt=0, description="调度校验容差，按 max(1, d_j) 与 max(1, T) 放大"
    )
    pricing_workers: int = Field(1, ge=1, description="精确定价的并行线程数")
    metrics_path: Path | None = Field(
        None,
        description="Prometheus 文本指标输出路径，为空则不写出",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """获取缓存的配置实例"""
    return Settings.model_validate({})
