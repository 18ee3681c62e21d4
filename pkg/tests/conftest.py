"""Shared pytest configuration.

Kept deliberately thin: builders live in treegen.py and oracles in
oracles.py so each test module imports exactly what it uses.
"""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20250825)
