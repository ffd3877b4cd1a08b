"""
Shared pytest setup: sys.path bootstrap onto src/ and the repository root,
and the opt-in switch for slow benchmark tests.
"""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Add src to Python path
sys.path.insert(0, os.path.join(ROOT, 'src'))
sys.path.insert(0, ROOT)

RUN_SLOW = os.getenv('OPTOMECH_RUN_SLOW') == '1'


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running benchmark (set OPTOMECH_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set OPTOMECH_RUN_SLOW=1 to run slow tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
