from __future__ import annotations

import math
from typing import Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from .enums import (
    DetectorVariant,
    Estimation,
    HypothesisPair,
    ModulationName,
    PolicyKind,
)


class ModulationPolicy(BaseModel):
    """Which alphabets the transmitters draw from, one format per block."""

    kind: PolicyKind = PolicyKind.Fixed
    formats: tuple[ModulationName, ...] = (ModulationName.QAM4,)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_formats(self):
        if not self.formats:
            raise ValueError("modulation policy needs at least one format")

        if len(set(self.formats)) != len(self.formats):
            raise ValueError("modulation formats must be unique")

        if self.kind == PolicyKind.Fixed and len(self.formats) != 1:
            raise ValueError("a fixed modulation policy takes exactly one format")

        return self

    @classmethod
    def fixed(cls, name: ModulationName) -> ModulationPolicy:
        return cls(kind=PolicyKind.Fixed, formats=(name,))

    @classmethod
    def uniform(
        cls, formats: tuple[ModulationName, ...] | None = None
    ) -> ModulationPolicy:
        return cls(kind=PolicyKind.Uniform, formats=formats or tuple(ModulationName))


class SensingScenario(BaseModel):
    """All parameters of the resource-block observation model (linear units)."""

    sigma1_sq: float = Field(gt=0)  # serving-cell channel variance
    sigma2_sq: float = Field(gt=0)  # interfering-cell channel variance
    sigma_n_sq: float = Field(gt=0)  # noise variance
    symbol_energy: float = Field(default=1.0, gt=0)
    n_samples: int = Field(default=142, ge=1)
    modulation_policy: ModulationPolicy = Field(default_factory=ModulationPolicy)

    model_config = ConfigDict(frozen=True)

    @field_validator("sigma1_sq", "sigma2_sq", "sigma_n_sq", "symbol_energy")
    @classmethod
    def check_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v

    @computed_field
    @property
    def sir(self) -> float:
        return self.sigma1_sq / self.sigma2_sq

    @computed_field
    @property
    def snr(self) -> float:
        return self.sigma1_sq / self.sigma_n_sq

    @property
    def noncentrality_scale(self) -> float:
        """2N·Ex/σn², the factor turning a channel power into λ."""
        return 2 * self.n_samples * self.symbol_energy / self.sigma_n_sq

    def with_samples(self, n_samples: int) -> SensingScenario:
        return self.model_validate({**self.model_dump(), "n_samples": n_samples})


class Tolerance(BaseModel):
    abs_tol: float = Field(default=1e-10, gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)
    max_terms: int = Field(default=1_000_000, ge=1)

    model_config = ConfigDict(frozen=True)


class DetectorConfig(BaseModel):
    """Detector variant and its threshold parameter.

    The meaning of `threshold_param` depends on the variant: t1 for ED1,
    δ_Pf for ED2_EXACT and TYPE1_ED, t2 for ED2_LINEAR and log t for MPT.
    """

    variant: DetectorVariant
    threshold_param: float = 0.0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_threshold(self):
        if not math.isfinite(self.threshold_param):
            raise ValueError("threshold_param must be finite")

        if self.variant.threshold_is_probability and not (
            0 < self.threshold_param < 1
        ):
            raise ValueError(
                f"{self.variant} requires threshold_param (delta) in (0, 1)"
            )
        return self


class TrialPlan(BaseModel):
    scenario: SensingScenario
    detector: DetectorConfig
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    estimation: Estimation = Estimation.Ideal
    hypothesis_pair: HypothesisPair

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="before")
    @classmethod
    def default_pair(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("hypothesis_pair") is None:
            detector = DetectorConfig.model_validate(data.get("detector"))
            data = {**data, "hypothesis_pair": detector.variant.hypothesis_pair}
        return data

    @model_validator(mode="after")
    def check_pair(self):
        expected = self.detector.variant.hypothesis_pair
        if self.hypothesis_pair != expected:
            raise ValueError(
                f"{self.detector.variant} works on {expected}, "
                f"not {self.hypothesis_pair}"
            )
        return self

    def with_changes(self, **changes: Any) -> TrialPlan:
        return self.model_validate({**dict(self), **changes})


class ExperimentConfig(BaseModel):
    """Flat key=value experiment configuration as read from a config file."""

    sir_db: float = 0.0
    snr_db: float = 6.0
    n_samples: int = Field(default=142, ge=1)
    symbol_energy: float = Field(default=1.0, gt=0)
    # None: 10000 for the energy detectors, 2000 for the mpt
    trials: int | None = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    modulation: str | None = None
    formats: tuple[ModulationName, ...] | None = None
    # None: ed2_linear for the estimation study, ed2_exact otherwise
    detector: DetectorVariant | None = None
    target_pf: float = Field(default=0.05, gt=0, lt=1)
    threshold_param: float | None = None
    thresholds: tuple[float, ...] | None = None
    threshold_count: int | None = Field(default=None, ge=1)
    threshold_min: float | None = None
    threshold_max: float | None = None
    estimation: Estimation = Estimation.Ideal
    workers: int = Field(default=1, ge=1)
    # negative-control hook for `validate`: noise variance seen by the
    # simulation path only
    corrupt_sigma_n_sq: float | None = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("modulation", mode="before")
    @classmethod
    def normalize_modulation(cls, v: Any) -> Any:
        if isinstance(v, str):
            v = v.strip().lower()
            if v and v != "uniform" and v not in set(ModulationName):
                raise ValueError("modulation must be qam4, qam16, qam64 or uniform")
            return v or None
        return v

    @field_validator("formats", "thresholds", mode="before")
    @classmethod
    def split_list(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(i.strip().lower() for i in v.split(",") if i.strip())
        return v

    @field_validator("detector", "estimation", mode="before")
    @classmethod
    def lower(cls, v: Any) -> Any:
        return v.strip().lower() if isinstance(v, str) else v

    @model_validator(mode="after")
    def check_threshold_range(self):
        if self.threshold_count is not None and (
            self.threshold_min is None or self.threshold_max is None
        ):
            raise ValueError("threshold_count needs threshold_min and threshold_max")
        return self


class RunManifest(BaseModel):
    """Header embedded into every output file."""

    config: dict[str, Any]
    tool_version: str
    duration_s: float | None = None

    def header_lines(self) -> list[str]:
        lines = [f"# {key}={_format_value(value)}" for key, value in self.config.items()]
        lines.append(f"# tool_version={self.tool_version}")
        if self.duration_s is not None:
            lines.append(f"# duration_s={self.duration_s!r}")
        return lines


def _format_value(value: Any) -> str:
    if isinstance(value, tuple | list):
        return ",".join(_format_value(i) for i in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
