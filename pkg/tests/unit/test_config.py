"""
配置测试
"""

import os
import unittest
from unittest.mock import patch

from rigidlab.config import NumericDefaults, Settings, get_settings, settings


class TestSettings(unittest.TestCase):
    """测试环境变量配置"""

    def test_singleton(self):
        self.assertIs(get_settings(), settings)
        self.assertIs(get_settings(), get_settings())

    @patch.dict(os.environ, {"RIGIDLAB_THREADS": "3", "RIGIDLAB_LOG_LEVEL": "debug"})
    def test_reads_environment(self):
        s = Settings()
        self.assertEqual(s.THREADS, 3)
        self.assertEqual(s.LOG_LEVEL, "DEBUG")

    @patch.dict(os.environ, {"RIGIDLAB_THREADS": "many"})
    def test_invalid_threads_fall_back(self):
        self.assertEqual(Settings().THREADS, os.cpu_count() or 1)

    @patch.dict(os.environ, {"RIGIDLAB_THREADS": "-2"})
    def test_threads_are_at_least_one(self):
        self.assertEqual(Settings().THREADS, 1)

    def test_as_dict(self):
        data = Settings().as_dict()
        self.assertEqual(set(data), {"threads", "log_level", "numeric"})
        self.assertEqual(data["numeric"]["integrator_dt"], 1e-3)


def test_numeric_defaults():
    numeric = NumericDefaults()
    assert numeric.integrator_tolerance == 1e-12
    assert numeric.integrator_max_iterations == 50
    assert numeric.minmax_resolution == 64
    assert numeric.min_grid_resolution == 8
    assert numeric.schedule_shells == 6
    assert numeric.schedule_samples == 32
