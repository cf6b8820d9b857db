"""Shared fixtures: code/interleaver/layout bundles at two sizes.

The desk-scale system matches the harness defaults; the small system keeps
unit tests fast. Both are deterministic and session-cached because the code
construction dominates setup time.
"""

import numpy as np
import pytest

from mimophn.bicm import make_constellation, make_interleaver, make_layout
from mimophn.harness import ScenarioConfig, build_system
from mimophn.ldpc import construct_regular


@pytest.fixture(scope="session")
def desk_system():
    """(code, interleaver, constellation, layout) at the harness defaults:
    2x2, 16-QAM, block 1024 with degrees (4, 32), pilot spacing 14."""
    return build_system(ScenarioConfig(base_seed=3))


@pytest.fixture(scope="session")
def small_system():
    """Fast bundle: block 256 with degrees (4, 32), 2x2, 16-QAM, pilots
    every 7 instants."""
    code = construct_regular(256, 4, 32, seed=[17, 0])
    cst = make_constellation(16)
    layout = make_layout(code.block_len, 2, cst.bits_per_symbol, 7)
    il = make_interleaver(layout.total_bits, seed=[17, 1])
    return code, il, cst, layout


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
