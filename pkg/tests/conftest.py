import numpy as np
import pytest

from incomedist import EffectiveParams, build_ccdf, micro_from_effective, sample

BASELINE = dict(T=37e3, T1=37e3, m0=1.6e5, m1=3e5, alpha=2.8643, alpha1=0.70,
            m_init=1e3)


@pytest.fixture(scope="session")
def baseline_params():
    return EffectiveParams(**BASELINE)


@pytest.fixture(scope="session")
def baseline_micro(baseline_params):
    return micro_from_effective(baseline_params, b=1.0)


@pytest.fixture(scope="session")
def bg_params():
    # crossovers pushed far above every probed income: pure exponential law
    return EffectiveParams(T=37e3, T1=37e3, m0=1e9, m1=2e9,
                           alpha=1.000001, alpha1=1.000001, m_init=1e3)


@pytest.fixture(scope="session")
def baseline_draws(baseline_params):
    return sample(200_000, baseline_params, seed=11)


@pytest.fixture(scope="session")
def baseline_ecdf(baseline_draws):
    return build_ccdf(baseline_draws)


def weibull_positions(n: int) -> np.ndarray:
    return 1.0 - np.arange(1, n + 1) / (n + 1)
