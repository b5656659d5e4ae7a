# preference_advisor/src/config_loader.py
import yaml
import os
from typing import Dict, Any, List, Optional
from .errors import ConfigError
from .logger import logger

# 配置文件路径的环境变量兜底
CONFIG_ENV_VAR = "PREFADVISOR_CONFIG"

# 未显式指定路径且环境变量为空时，按顺序查找的位置
DEFAULT_CONFIG_PATHS: List[str] = [
    "preference_advisor/config.yaml",  # 从项目根目录运行
    os.path.join(os.path.dirname(__file__), "../config.yaml"),  # 从 src 目录运行
]

# 配置缓存
_config_cache: Optional[Dict[str, Any]] = None
_config_path_cache: Optional[str] = None


def resolve_config_path(config_path: Optional[str] = None) -> Optional[str]:
    """
    确定要读取的配置文件路径

    优先级：显式路径 > 环境变量 PREFADVISOR_CONFIG > 默认位置。
    显式路径或环境变量指向的文件不存在时报错；默认位置都不存在时返回 None（全部使用默认值）。
    """
    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError(f"配置文件 '{config_path}' 未找到")
        return config_path

    env_path = os.environ.get(CONFIG_ENV_VAR, "").strip()
    if env_path:
        if not os.path.exists(env_path):
            raise ConfigError(f"环境变量 {CONFIG_ENV_VAR} 指向的配置文件 '{env_path}' 未找到")
        return env_path

    for path in DEFAULT_CONFIG_PATHS:
        if os.path.exists(path):
            return path
    return None


def load_config(config_path: str = None, force_reload: bool = False) -> Dict[str, Any]:
    """
    加载 YAML 配置文件，支持缓存以提高性能

    Args:
        config_path: 配置文件路径（可选）
        force_reload: 是否强制重新加载（忽略缓存）

    Returns:
        配置字典；找不到任何配置文件时返回空字典
    """
    global _config_cache, _config_path_cache

    path = resolve_config_path(config_path)

    if _config_cache is not None and not force_reload and path == _config_path_cache:
        return _config_cache

    if path is None:
        logger.debug("未找到配置文件，使用内置默认值")
        config: Dict[str, Any] = {}
    else:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            logger.error(f"错误: 解析配置文件 '{path}' 失败: {e}")
            raise ConfigError(f"解析配置文件 '{path}' 失败: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"配置文件 '{path}' 的顶层必须是映射")
        logger.debug(f"已加载配置文件: {path}")

    _config_cache = config
    _config_path_cache = path
    return config


def get_config(key: str, default: Any = None, config: Optional[Dict[str, Any]] = None) -> Any:
    """获取配置项的值，支持嵌套键（使用点号分隔），未传入 config 时使用缓存"""
    if config is None:
        config = load_config()
    value: Any = config
    try:
        for k in key.split('.'):
            value = value[k]
    except (KeyError, TypeError):
        return default
    return value


def clear_config_cache():
    """清除配置缓存"""
    global _config_cache, _config_path_cache
    _config_cache = None
    _config_path_cache = None


def update_recursive(original: Dict[str, Any], new_data: Dict[str, Any]):
    """递归更新字典，保留原有的结构；值为 None 的新数据不覆盖原值"""
    for key, value in new_data.items():
        if value is None:
            continue
        if key in original and isinstance(original[key], dict) and isinstance(value, dict):
            update_recursive(original[key], value)
        else:
            original[key] = value
