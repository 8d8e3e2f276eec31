"""Pytest 全局测试配置。"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from cellsched.core.model import NetworkInstance, tdma_time
from cellsched.core.netgen import GenConfig, generate


def pytest_configure(config: pytest.Config) -> None:
    """在 pytest 启动时显式注册自定义 markers。"""
    config.addinivalue_line(
        "markers",
        "unit: 纯单元测试，只依赖内存中的小实例",
    )
    config.addinivalue_line(
        "markers",
        "integration: 集成测试，覆盖列生成与命令行的模块协作",
    )
    config.addinivalue_line(
        "markers",
        "slow: 批量实例上的统计性质检验，耗时较长",
    )


def random_instance(
    rng: np.random.Generator,
    cells: int,
    users_per_cell: int,
    *,
    deadline_factor: float | None = None,
    cross_scale: float = 0.5,
) -> NetworkInstance:
    """W·B = 1 的归一化随机实例

    deadline_factor 给出时 T = factor × TDMA 总时长，否则 T = 1。
    """
    users = cells * users_per_cell
    users_of_cell = tuple(
        tuple(range(i * users_per_cell, (i + 1) * users_per_cell)) for i in range(cells)
    )
    gain = rng.uniform(0.0, cross_scale, size=(cells, users))
    for i, cell in enumerate(users_of_cell):
        gain[i, list(cell)] = rng.uniform(1.0, 8.0, size=len(cell))
    inst = NetworkInstance(
        users_of_cell=users_of_cell,
        gain=gain,
        tx_power_per_ru=rng.uniform(0.5, 2.0, size=cells),
        circuit_power=1.0,
        ru_count=1,
        ru_bandwidth=1.0,
        noise=1.0,
        load=np.ones(cells),
        demand=rng.uniform(0.5, 2.0, size=users),
        deadline=1.0,
    )
    if deadline_factor is not None:
        inst = inst.with_deadline(deadline_factor * tdma_time(inst))
    return inst


@pytest.fixture
def rng() -> np.random.Generator:
    """固定种子的随机数发生器"""
    return np.random.default_rng(20240601)


@pytest.fixture
def make_instance() -> Callable[..., NetworkInstance]:
    """随机小实例工厂"""
    return random_instance


@pytest.fixture
def unit_instance() -> NetworkInstance:
    """1 小区 1 用户，p = g = η = W·B = l = d = 1"""
    return NetworkInstance(
        users_of_cell=((0,),),
        gain=[[1.0]],
        tx_power_per_ru=[1.0],
        circuit_power=5.0,
        ru_count=1,
        ru_bandwidth=1.0,
        noise=1.0,
        load=[1.0],
        demand=[1.0],
        deadline=2.0,
    )


@pytest.fixture
def two_cell_instance() -> NetworkInstance:
    """2 小区各 1 用户，全部增益为 1"""
    return NetworkInstance(
        users_of_cell=((0,), (1,)),
        gain=np.ones((2, 2)),
        tx_power_per_ru=[1.0, 1.0],
        circuit_power=5.0,
        ru_count=1,
        ru_bandwidth=1.0,
        noise=1.0,
        load=[1.0, 1.0],
        demand=[1.0, 1.0],
        deadline=10.0,
    )


@pytest.fixture(scope="session")
def hex7_instance() -> NetworkInstance:
    """按默认参数生成的 7 小区实例，每小区 2 个用户以控制耗时"""
    return generate(GenConfig(layout="hex7", users_per_cell=2, seed=3))
