import logging

import pytest

from src import config_loader
from src.config_loader import get_config, load_config, resolve_config_path, update_recursive
from src.errors import ConfigError
from src.logger import logger, set_log_level


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_no_file_gives_empty_config():
    assert resolve_config_path() is None
    assert load_config() == {}
    assert get_config("network.seed", 3) == 3


def test_explicit_path_and_dotted_lookup(tmp_path):
    path = write(tmp_path, "c.yaml", "network:\n  seed: 9\n  layer_sizes: [8, 30, 8]\n")
    config = load_config(path)
    assert get_config("network.seed", config=config) == 9
    assert get_config("network.layer_sizes", config=config) == [8, 30, 8]
    assert get_config("network.missing", "x", config=config) == "x"
    assert get_config("network.seed.deeper", None, config=config) is None


def test_cache_and_force_reload(tmp_path):
    path = write(tmp_path, "c.yaml", "logging:\n  level: INFO\n")
    first = load_config(path)
    (tmp_path / "c.yaml").write_text("logging:\n  level: DEBUG\n", encoding="utf-8")
    assert load_config(path) is first
    assert load_config(path, force_reload=True)["logging"]["level"] == "DEBUG"


def test_env_var_fallback(tmp_path, monkeypatch):
    path = write(tmp_path, "env.yaml", "report:\n  format: text\n")
    monkeypatch.setenv(config_loader.CONFIG_ENV_VAR, path)
    assert resolve_config_path() == path
    assert get_config("report.format") == "text"
    monkeypatch.setenv(config_loader.CONFIG_ENV_VAR, str(tmp_path / "missing.yaml"))
    with pytest.raises(ConfigError):
        load_config(force_reload=True)


def test_default_paths_are_searched(tmp_path, monkeypatch):
    path = write(tmp_path, "config.yaml", "expert:\n  nn_weight: 0.5\n")
    monkeypatch.setattr(config_loader, "DEFAULT_CONFIG_PATHS", [str(tmp_path / "nope.yaml"), path])
    assert resolve_config_path() == path


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "broken.yaml", "network: [1, 2\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "list.yaml", "- a\n- b\n"))


def test_update_recursive_skips_none():
    original = {"network": {"seed": 1, "momentum": 0.5}, "report": {"out": None}}
    update_recursive(original, {"network": {"seed": None, "momentum": 0.2}, "report": {"out": "r.tsv"}})
    assert original == {"network": {"seed": 1, "momentum": 0.2}, "report": {"out": "r.tsv"}}


def test_set_log_level():
    set_log_level("debug")
    assert logger.level == logging.DEBUG
    set_log_level("INFO")
    with pytest.raises(ValueError):
        set_log_level("LOUD")
