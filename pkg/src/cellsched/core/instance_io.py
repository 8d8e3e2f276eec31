"""实例文件读写

自描述的 YAML 文本，字段与 NetworkInstance 一一对应；
增益以 J×I 稠密矩阵（线性刻度）存储，格式版本字段为 "cellsched-instance/1"。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..errors import DomainError
from .model import NetworkInstance

logger = logging.getLogger(__name__)

FORMAT_VERSION = "cellsched-instance/1"


def instance_to_dict(inst: NetworkInstance) -> dict[str, Any]:
    """转换为可 YAML 序列化的字典（浮点数以 repr 精度写出，可无损读回）"""
    return {
        "format": FORMAT_VERSION,
        "cell_count": inst.cell_count,
        "users_of_cell": [list(cell) for cell in inst.users_of_cell],
        "gain": inst.gain.T.tolist(),
        "tx_power_per_ru": inst.tx_power_per_ru.tolist(),
        "circuit_power": float(inst.circuit_power),
        "ru_count": int(inst.ru_count),
        "ru_bandwidth": float(inst.ru_bandwidth),
        "noise": float(inst.noise),
        "load": inst.load.tolist(),
        "demand": inst.demand.tolist(),
        "deadline": float(inst.deadline),
        "metadata": _plain(dict(inst.metadata)),
    }


def instance_from_dict(data: dict[str, Any]) -> NetworkInstance:
    """从字典创建实例

    Raises:
        DomainError: 版本不符、字段缺失或违反实例不变量
    """
    version = data.get("format")
    if version != FORMAT_VERSION:
        raise DomainError(f"不支持的实例格式版本: {version!r}，期望 {FORMAT_VERSION}")
    try:
        users_of_cell = [tuple(cell) for cell in data["users_of_cell"]]
        if int(data["cell_count"]) != len(users_of_cell):
            raise DomainError("cell_count 与 users_of_cell 不一致")
        gain = np.asarray(data["gain"], dtype=np.float64)
        return NetworkInstance(
            users_of_cell=tuple(users_of_cell),
            gain=gain.T if gain.ndim == 2 else gain,
            tx_power_per_ru=data["tx_power_per_ru"],
            circuit_power=float(data["circuit_power"]),
            ru_count=int(data["ru_count"]),
            ru_bandwidth=float(data["ru_bandwidth"]),
            noise=float(data["noise"]),
            load=data["load"],
            demand=data["demand"],
            deadline=float(data["deadline"]),
            metadata=data.get("metadata") or {},
        )
    except KeyError as e:
        raise DomainError(f"实例文件缺少字段: {e.args[0]}") from e


def save_instance(inst: NetworkInstance, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as f:
        yaml.safe_dump(instance_to_dict(inst), f, sort_keys=False)
    logger.debug(f"实例已写入: {target}")
    return target


def load_instance(path: str | Path) -> NetworkInstance:
    """读取实例文件

    Raises:
        FileNotFoundError: 文件不存在
        DomainError: 内容无效
    """
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"实例文件不存在: {source}")
    with open(source, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise DomainError(f"实例文件顶层必须是映射: {source}")
    return instance_from_dict(data)


def _plain(value: Any) -> Any:
    """把 numpy 标量/数组与元组转换为 YAML safe_dump 可接受的类型"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value
