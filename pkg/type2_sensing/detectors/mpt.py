"""
Most powerful test between H1' and H2 with known channels.

Given h1 and h2 the samples are i.i.d. Gaussian mixtures over the transmitted
symbols; since the format is drawn once per block, the block density averages
the product over samples across the M formats. Everything is evaluated in the
log domain, since a product of N=142 densities underflows.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np

from ..common.enums import DetectorVariant
from ..common.schemas import SensingScenario
from ..scenario import ModulationAlphabet, ObservationBlock, policy_alphabets
from ..specfun import log_sum_exp
from .base import BaseDetector, TestStatistic, decide

logger = logging.getLogger(__name__)


def _block_log_likelihood(
    samples: np.ndarray, means: np.ndarray, sigma_n_sq: float
) -> float:
    """Σ_i log[(1/|means|) Σ_m f_n(y_i − m)] for a uniform mixture of CN(m, σn²)."""
    distance = np.abs(samples[:, None] - means[None, :]) ** 2
    per_sample = log_sum_exp(-distance / sigma_n_sq, axis=1)
    log_norm = -math.log(math.pi * sigma_n_sq) - math.log(means.size)
    return float(np.sum(per_sample) + samples.size * log_norm)


def mpt_log_densities(
    block: ObservationBlock | np.ndarray,
    h1: complex,
    h2: complex,
    scenario: SensingScenario,
    formats: Sequence[ModulationAlphabet],
) -> tuple[float, float]:
    """
    Log joint densities of a block under H1' and H2.

    Args:
        block (ObservationBlock | np.ndarray): Block or its raw samples.
        h1 (complex): Serving channel.
        h2 (complex): Interfering channel.
        scenario (SensingScenario): Supplies σn² and Ex.
        formats (Sequence[ModulationAlphabet]): The M alphabets averaged over,
            used for both transmitters.

    Returns:
        tuple[float, float]: (log p(y | H1'), log p(y | H2)).
    """
    if not formats:
        raise ValueError("at least one modulation format is required")
    samples = block.samples if isinstance(block, ObservationBlock) else block
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        raise ValueError("block must hold at least one sample")

    amplitude = math.sqrt(scenario.symbol_energy)
    sigma_n_sq = scenario.sigma_n_sq
    serving = [h1 * amplitude * alphabet.points for alphabet in formats]
    interfering = [h2 * amplitude * alphabet.points for alphabet in formats]
    log_m = math.log(len(formats))

    logp_h1prime = log_sum_exp(
        [_block_log_likelihood(samples, means, sigma_n_sq) for means in serving]
    ) - log_m

    logp_h2 = log_sum_exp(
        [
            _block_log_likelihood(
                samples, (x1[:, None] + x2[None, :]).ravel(), sigma_n_sq
            )
            for x1 in serving
            for x2 in interfering
        ]
    ) - 2 * log_m

    return logp_h1prime, logp_h2


def mpt_decide(logp_h1prime: float, logp_h2: float, log_threshold: float) -> TestStatistic:
    """Decide H2 when log p(y|H2) − log p(y|H1') > log t."""
    return decide(logp_h2 - logp_h1prime, log_threshold)


class MPTDetector(BaseDetector):
    """
    Genie-aided likelihood-ratio test: it reads the true h1 and h2 from the
    block's fading draw and averages over the scenario's modulation formats.
    """

    variant = DetectorVariant.MPT

    def __init__(self, scenario: SensingScenario):
        super().__init__(scenario)
        self._formats = policy_alphabets(scenario.modulation_policy)

    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        return decide(self.score(block), threshold_param)

    def score(self, block: ObservationBlock) -> float:
        logp_h1prime, logp_h2 = mpt_log_densities(
            block, block.fading.h1, block.fading.h2, self.scenario, self._formats
        )
        return logp_h2 - logp_h1prime

    def level(self, threshold_param: float) -> float:
        return threshold_param

    def param(self, level: float) -> float:
        return level
