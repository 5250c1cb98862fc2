import logging

import numpy as np
import pytest
from scipy import stats

from type2_sensing.common.tools import (
    Stream,
    circular_gaussian,
    db_to_linear,
    linear_to_db,
    measure,
    trial_stream,
)


class TestDecibels:
    @pytest.mark.parametrize(
        "value_db, expected", [(0.0, 1.0), (10.0, 10.0), (-20.0, 0.01), (3.0, 1.9953)]
    )
    def test_db_to_linear(self, value_db, expected):
        assert db_to_linear(value_db) == pytest.approx(expected, rel=1e-4)

    def test_inverse(self):
        assert linear_to_db(db_to_linear(6.0)) == pytest.approx(6.0)


class TestTrialStream:
    def test_same_key_same_stream(self):
        a = trial_stream(7, 3, Stream.Null).standard_normal(5)
        b = trial_stream(7, 3, Stream.Null).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize(
        "other", [(8, 3, Stream.Null), (7, 4, Stream.Null), (7, 3, Stream.Alt)]
    )
    def test_different_key_different_stream(self, other):
        a = trial_stream(7, 3, Stream.Null).standard_normal(5)
        b = trial_stream(*other).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_large_seed(self):
        trial_stream(2**64 - 1, 10**6, Stream.Fading).standard_normal()


class TestCircularGaussian:
    def test_scalar_is_complex(self, rng):
        assert isinstance(circular_gaussian(rng, 1.0), complex)

    def test_moments(self, rng):
        draws = circular_gaussian(rng, 2.0, size=200_000)
        assert np.mean(np.abs(draws) ** 2) == pytest.approx(2.0, rel=0.02)
        assert np.var(draws.real) == pytest.approx(1.0, rel=0.02)
        assert abs(np.mean(draws.real * draws.imag)) < 0.02

    def test_power_is_exponential(self, rng):
        power = np.abs(circular_gaussian(rng, 3.0, size=5_000)) ** 2
        assert stats.kstest(power, stats.expon(scale=3.0).cdf).pvalue > 1e-3


class TestMeasure:
    def test_elapsed_is_recorded(self, caplog):
        with caplog.at_level(logging.DEBUG, logger="type2_sensing"):
            with measure("block") as timer:
                sum(range(1000))
        assert timer.elapsed >= 0
        assert any(r.label == "block" for r in caplog.records)
