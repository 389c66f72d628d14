from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402


@pytest.fixture
def trizone():
    return helpers.trizone()


@pytest.fixture
def twozone():
    return helpers.twozone()
