"""Общие фикстуры тестов верстака."""

import os
import sys

import numpy as np
import pytest

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(TESTS_DIR)
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app.lll import LllParams
from app.oracle import EnumFamily, OracleTrace

GOLDEN_DIR = os.path.join(TESTS_DIR, "golden")


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def small_trace():
    # стадии входа: 3 на 5, 1 на 2, 6 на 9
    return OracleTrace.of([(3, 5), (1, 2), (6, 9)], horizon=12)


@pytest.fixture
def small_family():
    """Четыре следа, не больше трёх элементов в каждом"""
    return EnumFamily((
        OracleTrace.of([(0, 1), (4, 3)], horizon=8),
        OracleTrace.of([(2, 0), (5, 6), (7, 2)], horizon=8),
        OracleTrace.of([], horizon=8),
        OracleTrace.of([(1, 4)], horizon=8),
    ))


@pytest.fixture
def rich_family():
    """Один след из 20 элементов, все входят на стадии 0"""
    return EnumFamily((OracleTrace.of([(m, 0) for m in range(20)], horizon=0),))


@pytest.fixture
def lll_params():
    return LllParams(seed=11)


@pytest.fixture
def golden_path():
    def path(name: str) -> str:
        return os.path.join(GOLDEN_DIR, name)
    return path
