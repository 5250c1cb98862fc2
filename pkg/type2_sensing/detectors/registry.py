from ..common.enums import DetectorVariant
from ..common.schemas import DetectorConfig, SensingScenario
from .base import BaseDetector
from .energy import ED1Detector, ED2ExactDetector, ED2LinearDetector, Type1Detector
from .mpt import MPTDetector

DETECTORS: dict[DetectorVariant, type[BaseDetector]] = {
    DetectorVariant.ED1: ED1Detector,
    DetectorVariant.ED2Exact: ED2ExactDetector,
    DetectorVariant.ED2Linear: ED2LinearDetector,
    DetectorVariant.MPT: MPTDetector,
    DetectorVariant.Type1ED: Type1Detector,
}


def make_detector(
    config: DetectorConfig | DetectorVariant, scenario: SensingScenario
) -> BaseDetector:
    variant = config.variant if isinstance(config, DetectorConfig) else config
    return DETECTORS[DetectorVariant(variant)](scenario)
