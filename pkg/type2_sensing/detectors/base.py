from abc import ABC, abstractmethod
from typing import NamedTuple

from ..common.enums import Decision, DetectorVariant
from ..common.schemas import SensingScenario
from ..scenario import ObservationBlock


class TestStatistic(NamedTuple):
    value: float
    threshold_used: float
    decision: Decision


def decide(value: float, threshold: float) -> TestStatistic:
    """H_high iff value > threshold; ties decide H_low."""
    decision = Decision.High if value > threshold else Decision.Low
    return TestStatistic(
        value=float(value), threshold_used=float(threshold), decision=decision
    )


class BaseDetector(ABC):
    """Base class for all detectors, bound to one scenario"""

    variant: DetectorVariant

    def __init__(self, scenario: SensingScenario):
        self._scenario = scenario

    @property
    def scenario(self) -> SensingScenario:
        return self._scenario

    @abstractmethod
    def decide(self, block: ObservationBlock, threshold_param: float) -> TestStatistic:
        """
        Apply the decision rule to one block.

        Args:
            block (ObservationBlock): Received samples with their fading draw.
            threshold_param (float): t1, δ, t2 or log t depending on the variant.

        Returns:
            TestStatistic: Statistic and threshold in the variant's natural units.
        """

    @abstractmethod
    def score(self, block: ObservationBlock) -> float:
        """
        Threshold-free statistic of one block.

        For every threshold parameter, `decide(block, p)` is H_high exactly when
        `score(block) > level(p)`, so one score per trial serves a whole sweep.
        """

    @abstractmethod
    def level(self, threshold_param: float) -> float:
        """Threshold parameter mapped to score units; non-decreasing in the
        strictness of the test."""

    @abstractmethod
    def param(self, level: float) -> float:
        """Inverse of `level`."""

    def decide_score(self, score: float, threshold_param: float) -> TestStatistic:
        return decide(score, self.level(threshold_param))
