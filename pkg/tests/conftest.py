import numpy as np
import pytest

from type2_sensing.common.enums import DetectorVariant
from type2_sensing.common.schemas import DetectorConfig, TrialPlan
from type2_sensing.scenario import build_scenario


@pytest.fixture(scope="session")
def strong_interferer():
    """SIR 0 dB, SNR 6 dB, N=142."""
    return build_scenario({"sir_db": 0.0, "snr_db": 6.0})


@pytest.fixture(scope="session")
def weak_interferer():
    """SIR 6 dB, SNR 12 dB, N=142."""
    return build_scenario({"sir_db": 6.0, "snr_db": 12.0})


@pytest.fixture(scope="session")
def short_block():
    return build_scenario({"sir_db": 0.0, "snr_db": 6.0, "n_samples": 8})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_plan():
    def _make(scenario, variant, threshold_param=None, **kwargs):
        variant = DetectorVariant(variant)
        if threshold_param is None:
            threshold_param = 0.05 if variant.threshold_is_probability else 0.0
        return TrialPlan(
            scenario=scenario,
            detector=DetectorConfig(variant=variant, threshold_param=threshold_param),
            **kwargs,
        )

    return _make
