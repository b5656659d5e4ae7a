# preference_advisor/tests/conftest.py
import os
import tempfile
import time

# 必须在导入 src.logger 之前设置，测试日志不写入项目目录
os.environ.setdefault("PREFADVISOR_LOG_DIR", tempfile.mkdtemp(prefix="prefadvisor-logs-"))

import pytest

from src import config_loader
from src.dataio import EVAL_CATALOG, expand_counts, fixture_table, to_training_pairs
from src.nnet import NetworkConfig, init_weights, train

TRAIN_SEED = 7
TRAIN_EPOCHS = 300


@pytest.fixture(autouse=True)
def hermetic_config(monkeypatch):
    """不读取开发者本地的 config.yaml 和环境变量"""
    monkeypatch.delenv(config_loader.CONFIG_ENV_VAR, raising=False)
    monkeypatch.setattr(config_loader, "DEFAULT_CONFIG_PATHS", [])
    config_loader.clear_config_cache()
    yield
    config_loader.clear_config_cache()


@pytest.fixture(scope="session")
def table2():
    return fixture_table("table2")


@pytest.fixture(scope="session")
def fixture_pairs(table2):
    return to_training_pairs(expand_counts(table2), EVAL_CATALOG)


@pytest.fixture(scope="session")
def timed_eval_training(fixture_pairs):
    """(网络, 训练报告, 耗时秒数)：8-30-8，默认学习率与动量"""
    config = NetworkConfig.from_preset("eval8", seed=TRAIN_SEED, max_epochs=TRAIN_EPOCHS)
    start = time.perf_counter()
    net, report = train(init_weights(config), fixture_pairs)
    return net, report, time.perf_counter() - start


@pytest.fixture(scope="session")
def trained_eval(timed_eval_training):
    return timed_eval_training[0], timed_eval_training[1]


@pytest.fixture(scope="session")
def trained_eval_net(trained_eval):
    return trained_eval[0]
