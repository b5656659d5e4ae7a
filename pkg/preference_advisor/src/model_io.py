# preference_advisor/src/model_io.py
"""
模型文件读写

UTF-8 文本、按行组织：

    PAMODEL v1
    layers: 8,30,8
    learning_rate: 0.2
    momentum: 0.5
    use_bias: false
    w <l> <j> <i> <value>      # 每个权重一行，value 为可精确还原的最短十进制表示
"""
import os
from typing import Dict, List

import numpy as np

from .errors import ConfigError, ModelFormatError, ModelVersionError
from .logger import logger
from .nnet import Network, NetworkConfig, expected_weight_shapes

MAGIC = "PAMODEL"
VERSION = "v1"
HEADER_KEYS = ("layers", "learning_rate", "momentum", "use_bias")


def save_model(net: Network) -> bytes:
    """序列化网络；同一网络总是得到逐字节相同的结果"""
    cfg = net.config
    lines = [
        f"{MAGIC} {VERSION}",
        f"layers: {','.join(str(s) for s in cfg.layer_sizes)}",
        f"learning_rate: {float(cfg.learning_rate)!r}",
        f"momentum: {float(cfg.momentum)!r}",
        f"use_bias: {'true' if cfg.use_bias else 'false'}",
    ]
    for l, w in enumerate(net.weights):
        for j, i in np.ndindex(*w.shape):
            # repr(float) 即最短且可往返的十进制表示
            lines.append(f"w {l} {j} {i} {float(w[j, i])!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_float(text: str, field: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelFormatError(f"无法解析数值 '{text}'", field=field) from None


def load_model(payload: bytes) -> Network:
    """反序列化网络；格式错误抛出 ModelFormatError，版本不符抛出 ModelVersionError"""
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelFormatError(f"不是合法的 UTF-8 文本: {e}", field="encoding") from None

    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ModelFormatError("内容为空", field="header")

    magic, _, version = lines[0].partition(" ")
    if magic != MAGIC:
        raise ModelFormatError(f"首行应为 '{MAGIC} {VERSION}'，实际为 '{lines[0]}'", field="header")
    if version.strip() != VERSION:
        raise ModelVersionError(f"不支持的模型版本 '{version.strip()}'，仅支持 {VERSION}", field="version")

    header: Dict[str, str] = {}
    body_start = 1
    for body_start in range(1, len(lines) + 1):
        if body_start == len(lines) or lines[body_start].startswith("w "):
            break
        key, sep, value = lines[body_start].partition(":")
        key = key.strip()
        if not sep:
            raise ModelFormatError(f"无法识别的行 '{lines[body_start]}'", field=key or "header")
        if key not in HEADER_KEYS:
            raise ModelFormatError("未知的键", field=key)
        if key in header:
            raise ModelFormatError("键重复出现", field=key)
        header[key] = value.strip()

    for key in HEADER_KEYS:
        if key not in header:
            raise ModelFormatError("缺少必需的键", field=key)

    try:
        layer_sizes = tuple(int(s) for s in header["layers"].split(","))
    except ValueError:
        raise ModelFormatError(f"无法解析层尺寸 '{header['layers']}'", field="layers") from None
    if header["use_bias"] not in ("true", "false"):
        raise ModelFormatError(f"应为 true 或 false，实际为 '{header['use_bias']}'", field="use_bias")

    try:
        config = NetworkConfig(
            layer_sizes=layer_sizes,
            learning_rate=_parse_float(header["learning_rate"], "learning_rate"),
            momentum=_parse_float(header["momentum"], "momentum"),
            use_bias=header["use_bias"] == "true",
        )
    except ConfigError as e:
        raise ModelFormatError(str(e), field="header") from None

    shapes = expected_weight_shapes(config)
    weights: List[np.ndarray] = [np.full(shape, np.nan) for shape in shapes]
    seen = 0
    for line in lines[body_start:]:
        parts = line.split()
        if len(parts) != 5 or parts[0] != "w":
            raise ModelFormatError(f"无法识别的权重行 '{line}'", field="w")
        try:
            l, j, i = (int(p) for p in parts[1:4])
        except ValueError:
            raise ModelFormatError(f"权重下标不是整数: '{line}'", field="w") from None
        if not (0 <= l < len(shapes) and 0 <= j < shapes[l][0] and 0 <= i < shapes[l][1]):
            raise ModelFormatError(f"权重下标越界: '{line}'", field=f"w {l} {j} {i}")
        if not np.isnan(weights[l][j, i]):
            raise ModelFormatError("权重重复出现", field=f"w {l} {j} {i}")
        value = _parse_float(parts[4], f"w {l} {j} {i}")
        if not np.isfinite(value):
            raise ModelFormatError(f"权重必须为有限值，实际为 '{parts[4]}'", field=f"w {l} {j} {i}")
        weights[l][j, i] = value
        seen += 1

    expected_count = sum(r * c for r, c in shapes)
    if seen != expected_count:
        raise ModelFormatError(f"权重数量应为 {expected_count}，实际为 {seen}（文件可能被截断）", field="w")

    return Network(config=config, weights=weights)


def write_model_file(net: Network, path: str) -> None:
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, "wb") as f:
        f.write(save_model(net))
    logger.info(f"模型已保存到 {path}")


def read_model_file(path: str) -> Network:
    if not os.path.exists(path):
        raise ConfigError(f"模型文件 '{path}' 不存在，请先执行 train")
    with open(path, "rb") as f:
        return load_model(f.read())
