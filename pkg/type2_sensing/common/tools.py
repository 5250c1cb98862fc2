import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)


class Stream(IntEnum):
    """Purpose keys for the independent random streams of one trial."""

    Fading = 0
    EstimateNull = 1
    EstimateAlt = 2
    Null = 3
    Alt = 4


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear units: 10^(dB/10)."""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * np.log10(value)


def trial_stream(seed: int, trial: int, purpose: Stream) -> np.random.Generator:
    """
    Random generator keyed by (seed, trial index, purpose).

    Streams derived this way are independent of the order in which trials are
    executed, so results do not depend on parallelism.

    Args:
        seed (int): Experiment seed.
        trial (int): Trial index.
        purpose (Stream): What the stream is used for inside the trial.

    Returns:
        np.random.Generator: A PCG64 generator.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(trial, int(purpose)))
    return np.random.default_rng(sequence)


def circular_gaussian(
    rng: np.random.Generator, variance: float, size: int | None = None
) -> complex | np.ndarray:
    """Draw CN(0, variance): real and imaginary parts each with variance/2."""
    scale = np.sqrt(variance / 2.0)
    draw = rng.standard_normal(size=(2,) if size is None else (2, size))
    value = scale * (draw[0] + 1j * draw[1])
    return complex(value) if size is None else value


class Timer:
    elapsed: float = 0.0


@contextmanager
def measure(label: str) -> Iterator[Timer]:
    """
    Measure wall-clock time using time.perf_counter()

    Args:
        label (str): used to denote the measured block in the debug log.
    """
    timer = Timer()
    start = time.perf_counter()
    try:
        yield timer
    finally:
        timer.elapsed = time.perf_counter() - start
        logger.debug("Measured", extra={"label": label, "elapsed_s": timer.elapsed})
