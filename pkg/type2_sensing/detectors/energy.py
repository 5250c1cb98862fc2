"""
Energy detectors.

All variants share the statistic e = (2/σn²) Σ |y_i|². ED1 compares it with a
fixed threshold t1; ED2 uses the serving-channel estimate to move the
threshold with the non-centrality λ1 = (2N·Ex/σn²)|h1_est|², either exactly
(Marcum-Q inverse at a per-realization false-alarm rate δ) or linearly
(t2 + E[e | H1']). The Type-1 baseline tests noise against interferer on
unoccupied resources with a central chi-square threshold.
"""

import logging
import math

import numpy as np
from scipy import special

from ..common.enums import DetectorVariant
from ..common.schemas import SensingScenario, Tolerance
from ..scenario import ObservationBlock
from ..specfun import central_chi2_sf, inv_marcum_q_threshold, marcum_q
from .base import BaseDetector, TestStatistic, decide

logger = logging.getLogger(__name__)


def energy_statistic(block: ObservationBlock | np.ndarray, sigma_n_sq: float) -> float:
    """
    Normalized received energy (2/σn²) Σ |y_i|².

    Args:
        block (ObservationBlock | np.ndarray): Block or its raw samples.
        sigma_n_sq (float): Noise variance, > 0.

    Returns:
        float: Non-negative statistic; chi-square with 2N dof under pure noise.
    """
    if sigma_n_sq <= 0:
        raise ValueError("sigma_n_sq must be positive")
    samples = block.samples if isinstance(block, ObservationBlock) else block
    samples = np.asarray(samples)
    return float(2.0 * np.sum(samples.real**2 + samples.imag**2) / sigma_n_sq)


def ed1_decide(statistic: float, t1: float) -> TestStatistic:
    return decide(statistic, t1)


def noncentrality(scenario: SensingScenario, h1_est: complex) -> float:
    """λ1 = (2N·Ex/σn²)|h1_est|²."""
    return scenario.noncentrality_scale * abs(h1_est) ** 2


def ed2_exact_threshold(
    scenario: SensingScenario,
    h1_est: complex,
    delta: float,
    tol: Tolerance | None = None,
) -> float:
    """
    Threshold t(λ1, δ) with Q_N(√λ1, √t) = δ.

    Under H1' and a correct estimate, e2 is non-central chi-square with
    non-centrality λ1, so every channel realization sees false-alarm rate δ.
    """
    return inv_marcum_q_threshold(
        scenario.n_samples, noncentrality(scenario, h1_est), delta, tol
    )


def ed2_exact_pvalue(
    scenario: SensingScenario,
    h1_est: complex,
    statistic: float,
    tol: Tolerance | None = None,
) -> float:
    """Q_N(√λ1, √e2): the H1' tail probability of the observed statistic."""
    return marcum_q(
        scenario.n_samples,
        math.sqrt(noncentrality(scenario, h1_est)),
        math.sqrt(statistic),
        tol,
    )


def ed2_linear_threshold(
    scenario: SensingScenario, h1_est: complex, t2: float
) -> float:
    """t2 + λ1 + 2N, i.e. t2 above the H1' mean of the statistic."""
    return t2 + noncentrality(scenario, h1_est) + 2 * scenario.n_samples


def type1_threshold(scenario: SensingScenario, delta: float) -> float:
    """Central chi-square (2N dof) quantile t with P(e > t | H0) = δ."""
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    return float(2.0 * special.gammainccinv(scenario.n_samples, delta))


class ED1Detector(BaseDetector):
    variant = DetectorVariant.ED1

    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        return ed1_decide(self.score(block), threshold_param)

    def score(self, block: ObservationBlock) -> float:
        return energy_statistic(block, self.scenario.sigma_n_sq)

    def level(self, threshold_param: float) -> float:
        return threshold_param

    def param(self, level: float) -> float:
        return level


class ED2ExactDetector(BaseDetector):
    """
    ED2 with the exact Marcum-Q inverse threshold.

    Sweeps run on the p-value: `score` is −log Q_N(√λ1, √e2) and `level(δ)` is
    −log δ, which decides exactly like e2 > t(λ1, δ) without inverting Q_N
    once per trial and threshold.
    """

    variant = DetectorVariant.ED2Exact

    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        statistic = energy_statistic(block, self.scenario.sigma_n_sq)
        threshold = ed2_exact_threshold(
            self.scenario, block.fading.h1_est, threshold_param
        )
        return decide(statistic, threshold)

    def score(self, block: ObservationBlock) -> float:
        statistic = energy_statistic(block, self.scenario.sigma_n_sq)
        pvalue = ed2_exact_pvalue(self.scenario, block.fading.h1_est, statistic)
        return -math.log(pvalue) if pvalue > 0 else math.inf

    def level(self, threshold_param: float) -> float:
        return -math.log(threshold_param)

    def param(self, level: float) -> float:
        return math.exp(-level)


class ED2LinearDetector(BaseDetector):
    variant = DetectorVariant.ED2Linear

    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        statistic = energy_statistic(block, self.scenario.sigma_n_sq)
        threshold = ed2_linear_threshold(
            self.scenario, block.fading.h1_est, threshold_param
        )
        return decide(statistic, threshold)

    def score(self, block: ObservationBlock) -> float:
        # e2 − λ1 − 2N, so the linear threshold reduces to t2
        statistic = energy_statistic(block, self.scenario.sigma_n_sq)
        return statistic - ed2_linear_threshold(self.scenario, block.fading.h1_est, 0.0)

    def level(self, threshold_param: float) -> float:
        return threshold_param

    def param(self, level: float) -> float:
        return level


class Type1Detector(BaseDetector):
    variant = DetectorVariant.Type1ED

    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        return decide(self.score(block), self.level(threshold_param))

    def score(self, block: ObservationBlock) -> float:
        return energy_statistic(block, self.scenario.sigma_n_sq)

    def level(self, threshold_param: float) -> float:
        return type1_threshold(self.scenario, threshold_param)

    def param(self, level: float) -> float:
        return central_chi2_sf(self.scenario.n_samples, max(level, 0.0))
