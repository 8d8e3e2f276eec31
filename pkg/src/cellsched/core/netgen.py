"""合成网络实例生成

六边形小区布局、COST-231-HATA 路损与对数正态阴影衰落。
默认参数：半径 500 m，2 GHz，W = 25 个 180 kHz 的 RU，每小区 5 个用户，
需求 2 Mbit，每 RU 1 W，电路功率 5 W，噪声 −174 dBm/Hz，阴影 σ = 8 dB，满负载。
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from numpy.typing import NDArray
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from ..errors import ConfigError
from .model import NetworkInstance

logger = logging.getLogger(__name__)

# COST-231-HATA 适用的载频范围 (MHz)
HATA_FREQUENCY_RANGE = (1500.0, 2000.0)
MIN_DISTANCE_M = 1.0

# 环境修正量 C (dB)
ENVIRONMENT_CORRECTION = {"medium_city": 0.0, "metropolitan": 3.0}

# 平顶六边形的轴坐标方向
_AXIAL_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))

Layout = Literal["hex7", "hex19", "single", "custom"]


class GenConfig(BaseModel):
    """实例生成配置"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    layout: Layout = "hex7"
    centers: tuple[tuple[float, float], ...] | None = Field(
        None, description="custom 布局的小区中心 (m)"
    )
    radius_m: float = Field(500.0, gt=0, description="小区半径（中心到顶点）")
    users_per_cell: int = Field(5, ge=1)
    demand_bits: float = Field(2e6, gt=0)
    frequency_mhz: float = Field(2000.0, description="载频 (MHz)")
    ru_count: int = Field(25, ge=1)
    ru_bandwidth_hz: float = Field(180e3, gt=0)
    tx_power_per_ru_w: float = Field(1.0, gt=0)
    circuit_power_w: float = Field(5.0, gt=0)
    noise_density_dbm_hz: float = -174.0
    shadowing_sigma_db: float = Field(8.0, ge=0)
    load: float | tuple[float, ...] = 1.0
    bs_height_m: float = Field(30.0, gt=0)
    ue_height_m: float = Field(1.5, gt=0)
    environment: Literal["medium_city", "metropolitan"] = "medium_city"
    deadline_s: float = Field(1.0, gt=0)
    seed: int = Field(0, ge=0)

    @field_validator("frequency_mhz")
    @classmethod
    def _frequency_in_range(cls, value: float) -> float:
        low, high = HATA_FREQUENCY_RANGE
        if not low <= value <= high:
            raise ValueError(f"COST-231-HATA 要求载频在 [{low}, {high}] MHz 内")
        return value

    @field_validator("load")
    @classmethod
    def _load_in_range(cls, value: float | tuple[float, ...]) -> float | tuple[float, ...]:
        values = value if isinstance(value, tuple) else (value,)
        if any(not 0 < v <= 1 for v in values):
            raise ValueError("负载必须在 (0, 1] 内")
        return value

    @model_validator(mode="after")
    def _custom_needs_centers(self) -> GenConfig:
        if self.layout == "custom" and not self.centers:
            raise ValueError("custom 布局需要给出 centers")
        return self

    @property
    def pitch_m(self) -> float:
        """相邻小区中心距 √3·R"""
        return math.sqrt(3.0) * self.radius_m

    @property
    def environment_db(self) -> float:
        return ENVIRONMENT_CORRECTION[self.environment]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GenConfig:
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"生成器配置无效: {e}") from e

    @classmethod
    def from_yaml(cls, path: str | Path) -> GenConfig:
        config_path = Path(path)
        if not config_path.exists():
            raise FileNotFoundError(f"配置文件不存在: {config_path}")
        with open(config_path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        return cls.from_dict(data.get("generator", data))


# ---------------------------------------------------------------------------
# 几何
# ---------------------------------------------------------------------------


def _hex_ring(radius: int) -> list[tuple[int, int]]:
    if radius == 0:
        return [(0, 0)]
    q, r = 0, -radius  # 方向 4 上距离 radius 处
    cells = []
    for dq, dr in _AXIAL_DIRECTIONS:
        for _ in range(radius):
            cells.append((q, r))
            q, r = q + dq, r + dr
    return cells


def hex_centers(rings: int, radius_m: float) -> NDArray[np.float64]:
    """平顶六边形网格的小区中心，中心小区在前，其后逐环排列"""
    axial = [cell for k in range(rings + 1) for cell in _hex_ring(k)]
    q = np.array([a[0] for a in axial], dtype=np.float64)
    r = np.array([a[1] for a in axial], dtype=np.float64)
    x = 1.5 * radius_m * q
    y = math.sqrt(3.0) * radius_m * (r + q / 2.0)
    return np.column_stack([x, y])


def layout_centers(cfg: GenConfig) -> NDArray[np.float64]:
    if cfg.layout == "single":
        return np.zeros((1, 2))
    if cfg.layout == "hex7":
        return hex_centers(1, cfg.radius_m)
    if cfg.layout == "hex19":
        return hex_centers(2, cfg.radius_m)
    assert cfg.centers is not None
    return np.asarray(cfg.centers, dtype=np.float64)


def in_hexagon(offset: NDArray[np.float64], radius_m: float) -> NDArray[np.bool_]:
    """相对中心的偏移是否落在平顶六边形内"""
    x, y = np.abs(offset[..., 0]), np.abs(offset[..., 1])
    half_height = math.sqrt(3.0) / 2.0 * radius_m
    return (y <= half_height) & (math.sqrt(3.0) * x + y <= math.sqrt(3.0) * radius_m)


def _sample_in_hexagon(rng: np.random.Generator, radius_m: float) -> NDArray[np.float64]:
    half_height = math.sqrt(3.0) / 2.0 * radius_m
    while True:
        point = np.array(
            [rng.uniform(-radius_m, radius_m), rng.uniform(-half_height, half_height)]
        )
        if in_hexagon(point, radius_m):
            return point


# ---------------------------------------------------------------------------
# 路损
# ---------------------------------------------------------------------------


def pathloss_db(d_m: float | NDArray[np.float64], cfg: GenConfig) -> NDArray[np.float64]:
    """COST-231-HATA 路损 (dB)，距离低于 1 m 时按 1 m 计算

    PL = 46.3 + 33.9 lg f − 13.82 lg h_b − a(h_m) + (44.9 − 6.55 lg h_b) lg d_km + C
    a(h_m) = (1.1 lg f − 0.7) h_m − (1.56 lg f − 0.8)
    """
    lg_f = math.log10(cfg.frequency_mhz)
    lg_hb = math.log10(cfg.bs_height_m)
    a_hm = (1.1 * lg_f - 0.7) * cfg.ue_height_m - (1.56 * lg_f - 0.8)
    d_km = np.maximum(np.asarray(d_m, dtype=np.float64), MIN_DISTANCE_M) / 1000.0
    return (
        46.3
        + 33.9 * lg_f
        - 13.82 * lg_hb
        - a_hm
        + (44.9 - 6.55 * lg_hb) * np.log10(d_km)
        + cfg.environment_db
    )


def noise_power_w(cfg: GenConfig) -> float:
    """每 RU 噪声功率 η = N0 · B"""
    return 10 ** ((cfg.noise_density_dbm_hz - 30.0) / 10.0) * cfg.ru_bandwidth_hz


# ---------------------------------------------------------------------------
# 生成
# ---------------------------------------------------------------------------


def generate(cfg: GenConfig, index: int = 0) -> NetworkInstance:
    """按配置生成一个实例

    每个小区使用独立的 PCG64 子流：先在六边形内拒绝采样用户位置，
    再为该用户到每个小区的链路抽取阴影衰落。改变每小区用户数不影响已有用户。

    Args:
        cfg: 生成配置
        index: 批次中的实例编号，与 cfg.seed 一起决定随机流
    """
    centers = layout_centers(cfg)
    cells = len(centers)
    streams = np.random.SeedSequence([cfg.seed, index]).spawn(cells)
    positions = np.empty((cells * cfg.users_per_cell, 2))
    shadowing = np.empty((cells, cells * cfg.users_per_cell))
    users_of_cell = []
    for i, seq in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(seq))
        members = []
        for u in range(cfg.users_per_cell):
            j = i * cfg.users_per_cell + u
            positions[j] = centers[i] + _sample_in_hexagon(rng, cfg.radius_m)
            shadowing[:, j] = rng.normal(0.0, cfg.shadowing_sigma_db, size=cells)
            members.append(j)
        users_of_cell.append(tuple(members))

    distance = np.linalg.norm(centers[:, None, :] - positions[None, :, :], axis=2)
    gain = 10 ** (-(pathloss_db(distance, cfg) + shadowing) / 10.0)
    load = (
        np.full(cells, cfg.load)
        if isinstance(cfg.load, float | int)
        else np.asarray(cfg.load, dtype=np.float64)
    )
    if load.shape != (cells,):
        raise ConfigError(f"load 长度应为小区数 {cells}")

    metadata = {
        "generator": "netgen",
        "layout": cfg.layout,
        "seed": cfg.seed,
        "index": index,
        "radius_m": cfg.radius_m,
        "pitch": cfg.pitch_m,
        "centers": centers.tolist(),
        "positions": positions.tolist(),
        "frequency_mhz": cfg.frequency_mhz,
        "bs_height_m": cfg.bs_height_m,
        "ue_height_m": cfg.ue_height_m,
        "environment_db": cfg.environment_db,
        "shadowing_sigma_db": cfg.shadowing_sigma_db,
    }
    inst = NetworkInstance(
        users_of_cell=tuple(users_of_cell),
        gain=gain,
        tx_power_per_ru=np.full(cells, cfg.tx_power_per_ru_w),
        circuit_power=cfg.circuit_power_w,
        ru_count=cfg.ru_count,
        ru_bandwidth=cfg.ru_bandwidth_hz,
        noise=noise_power_w(cfg),
        load=load,
        demand=np.full(cells * cfg.users_per_cell, cfg.demand_bits),
        deadline=cfg.deadline_s,
        metadata=metadata,
    )
    logger.debug(
        f"生成实例: 布局 {cfg.layout}, {inst.cell_count} 个小区, "
        f"{inst.user_count} 个用户, seed={cfg.seed}, index={index}"
    )
    return inst


def generate_batch(cfg: GenConfig, count: int) -> list[NetworkInstance]:
    return [generate(cfg, index) for index in range(count)]
