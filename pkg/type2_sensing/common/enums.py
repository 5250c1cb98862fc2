import sys

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - backport of the 3.11 stdlib StrEnum
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self), format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()


class Hypothesis(StrEnum):
    H0 = "H0"  # noise only
    H1 = "H1"  # interferer + noise
    H1Prime = "H1'"  # serving + noise
    H2 = "H2"  # serving + interferer + noise

    @property
    def has_serving(self) -> bool:
        return self in {Hypothesis.H1Prime, Hypothesis.H2}

    @property
    def has_interferer(self) -> bool:
        return self in {Hypothesis.H1, Hypothesis.H2}


class HypothesisPair(StrEnum):
    Type1 = "H0,H1"
    Type2 = "H1',H2"

    @property
    def null(self) -> Hypothesis:
        return Hypothesis.H0 if self == HypothesisPair.Type1 else Hypothesis.H1Prime

    @property
    def alternative(self) -> Hypothesis:
        return Hypothesis.H1 if self == HypothesisPair.Type1 else Hypothesis.H2


class ModulationName(StrEnum):
    QAM4 = "qam4"
    QAM16 = "qam16"
    QAM64 = "qam64"

    @property
    def order(self) -> int:
        return int(self.value.removeprefix("qam"))


class PolicyKind(StrEnum):
    Fixed = "fixed"
    Uniform = "uniform"


class DetectorVariant(StrEnum):
    ED1 = "ed1"
    ED2Exact = "ed2_exact"
    ED2Linear = "ed2_linear"
    MPT = "mpt"
    Type1ED = "type1_ed"

    @property
    def threshold_is_probability(self) -> bool:
        return self in {DetectorVariant.ED2Exact, DetectorVariant.Type1ED}

    @property
    def hypothesis_pair(self) -> HypothesisPair:
        if self == DetectorVariant.Type1ED:
            return HypothesisPair.Type1
        return HypothesisPair.Type2


class Decision(StrEnum):
    Low = "H_low"
    High = "H_high"


class Estimation(StrEnum):
    Ideal = "ideal"
    Nmse = "nmse"


class QuadratureKind(StrEnum):
    GaussLaguerre = "gauss-laguerre"
    AdaptiveTruncated = "adaptive-truncated"


class AnalyticMethod(StrEnum):
    ClosedForm = "closed-form"
    Quadrature = "quadrature"


class RocSource(StrEnum):
    MonteCarlo = "monte-carlo"
    Both = "both"
