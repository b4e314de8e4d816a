import os

import numpy as np
import pytest

from rigidlab.catalog import CATALOG

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


# 定义测试数据路径
@pytest.fixture(scope="session")
def fixtures_path():
    return os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def configs_path(fixtures_path):
    return os.path.join(fixtures_path, "configs")


# 随仓库发布的实验配置
@pytest.fixture(scope="session")
def experiments_path():
    return os.path.join(ROOT_DIR, "config", "experiments")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def catalog():
    return CATALOG
