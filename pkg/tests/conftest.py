"""
Shared fixtures: the D0 configuration and the sweep scenarios
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from geometry.fields import Chart  # noqa: E402
from geometry.kahler_base import build_base, flat_base  # noqa: E402
from geometry.metric import MetricParams  # noqa: E402
from geometry.oracle import KoszulContext  # noqa: E402

ROOT = Path(__file__).parent.parent
SCENARIO_DIR = ROOT / 'scenarios'

ORIGIN = (0.0, 0.0, 0.0, 0.0)
SAMPLE_POINTS = [
    (0.0, 0.0, 0.0, 0.0),
    (0.3, -0.2, 0.1, 0.5),
    (-0.7, 0.4, -0.3, 0.2),
    (0.5, 0.9, 0.6, -0.8),
]
SWEEP_POINTS = [tuple(row) for row in np.random.default_rng(7).uniform(-1, 1, size=(20, 4))]

# family, sigma, alpha, beta, gamma
SCENARIOS = {
    'd0': ('flat', '1', '1', '0', ('0', '0')),
    'sigma_exp_t': ('flat', 'exp(t)', '1', '0', ('0', '0')),
    'gamma_x1': ('flat', '1', '2 + sin(x2)', 'x1*t', ('x1', '0')),
    'warped': ('warped', 'exp(s/2)', '1', 'x2', ('1', 'x1')),
    'conformal': ('conformal', '1 + t^2', '1', '0', ('0', '1')),
    'generic': ('warped', 'exp((s + t)/2)', '2 + sin(x2)', 'x1*t', ('1', 'x1')),
}


def make_params(base, sigma='1', alpha='1', beta='0', gamma=('0', '0'), mode='exact'):
    return MetricParams.from_expressions(sigma, alpha, beta, list(gamma), base.chart, mode)


def make_context(name: str, mode: str = 'exact', richardson: bool = False) -> KoszulContext:
    family, sigma, alpha, beta, gamma = SCENARIOS[name]
    base = build_base(family, 2, Chart(2), mode)
    params = make_params(base, sigma, alpha, beta, gamma, mode)
    return KoszulContext(base=base, params=params, mode=mode, richardson=richardson)


@pytest.fixture
def flat():
    return flat_base()


@pytest.fixture
def d0_params(flat):
    return make_params(flat)


@pytest.fixture
def d0_ctx():
    return make_context('d0')


@pytest.fixture(params=['d0', 'sigma_exp_t', 'gamma_x1', 'warped', 'conformal'])
def scenario_ctx(request):
    return make_context(request.param)
