import pytest
from pydantic import ValidationError

from type2_sensing.common.enums import (
    DetectorVariant,
    Estimation,
    HypothesisPair,
    ModulationName,
    PolicyKind,
)
from type2_sensing.common.schemas import (
    DetectorConfig,
    ExperimentConfig,
    ModulationPolicy,
    RunManifest,
    SensingScenario,
    TrialPlan,
)


class TestModulationPolicy:
    def test_default_is_fixed_qam4(self):
        policy = ModulationPolicy()
        assert policy.kind == PolicyKind.Fixed
        assert policy.formats == (ModulationName.QAM4,)

    def test_uniform_defaults_to_all_formats(self):
        policy = ModulationPolicy.uniform()
        assert policy.formats == tuple(ModulationName)

    def test_fixed_takes_one_format(self):
        with pytest.raises(ValidationError):
            ModulationPolicy(
                kind=PolicyKind.Fixed,
                formats=(ModulationName.QAM4, ModulationName.QAM16),
            )

    def test_duplicate_formats_raise(self):
        with pytest.raises(ValidationError):
            ModulationPolicy.uniform((ModulationName.QAM4, ModulationName.QAM4))

    def test_empty_formats_raise(self):
        with pytest.raises(ValidationError):
            ModulationPolicy(kind=PolicyKind.Uniform, formats=())


class TestSensingScenario:
    def test_ratios(self):
        s = SensingScenario(sigma1_sq=2.0, sigma2_sq=1.0, sigma_n_sq=0.5)
        assert s.sir == 2.0
        assert s.snr == 4.0

    def test_noncentrality_scale(self):
        s = SensingScenario(
            sigma1_sq=1.0, sigma2_sq=1.0, sigma_n_sq=0.5, n_samples=10, symbol_energy=2
        )
        assert s.noncentrality_scale == pytest.approx(2 * 10 * 2 / 0.5)

    @pytest.mark.parametrize(
        "field, value",
        [
            ("sigma1_sq", 0.0),
            ("sigma2_sq", -1.0),
            ("sigma_n_sq", float("inf")),
            ("n_samples", 0),
        ],
    )
    def test_invalid_values_raise(self, field, value):
        params = {"sigma1_sq": 1.0, "sigma2_sq": 1.0, "sigma_n_sq": 1.0, field: value}
        with pytest.raises(ValidationError):
            SensingScenario(**params)

    def test_frozen(self):
        s = SensingScenario(sigma1_sq=1.0, sigma2_sq=1.0, sigma_n_sq=1.0)
        with pytest.raises(ValidationError):
            s.sigma1_sq = 2.0

    def test_with_samples(self):
        s = SensingScenario(sigma1_sq=1.0, sigma2_sq=1.0, sigma_n_sq=1.0)
        assert s.with_samples(100).n_samples == 100
        assert s.n_samples == 142


class TestDetectorConfig:
    @pytest.mark.parametrize("variant", ["ed2_exact", "type1_ed"])
    @pytest.mark.parametrize("delta", [0.0, 1.0, 1.5, -0.1])
    def test_probability_variants_need_delta_in_unit_interval(self, variant, delta):
        with pytest.raises(ValidationError):
            DetectorConfig(variant=variant, threshold_param=delta)

    def test_energy_threshold_may_be_negative(self):
        config = DetectorConfig(variant="ed2_linear", threshold_param=-50.0)
        assert config.threshold_param == -50.0


class TestTrialPlan:
    def test_pair_follows_variant(self, strong_interferer):
        plan = TrialPlan(
            scenario=strong_interferer,
            detector=DetectorConfig(variant="type1_ed", threshold_param=0.1),
        )
        assert plan.hypothesis_pair == HypothesisPair.Type1

        plan = plan.with_changes(
            detector=DetectorConfig(variant="mpt", threshold_param=0.0),
            hypothesis_pair=None,
        )
        assert plan.hypothesis_pair == HypothesisPair.Type2

    def test_mismatched_pair_raises(self, strong_interferer):
        with pytest.raises(ValidationError):
            TrialPlan(
                scenario=strong_interferer,
                detector=DetectorConfig(variant="ed1", threshold_param=1.0),
                hypothesis_pair=HypothesisPair.Type1,
            )

    def test_seed_is_64_bit(self, strong_interferer):
        with pytest.raises(ValidationError):
            TrialPlan(
                scenario=strong_interferer,
                detector=DetectorConfig(variant="ed1"),
                seed=2**64,
            )


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.n_samples == 142
        assert config.detector is None
        assert config.estimation == Estimation.Ideal
        assert config.trials is None

    def test_string_values_are_parsed(self):
        config = ExperimentConfig.model_validate(
            {
                "detector": " ED1 ",
                "modulation": "Uniform",
                "formats": "qam4, qam16",
                "thresholds": "300,400.5",
                "estimation": "NMSE",
            }
        )
        assert config.detector == DetectorVariant.ED1
        assert config.modulation == "uniform"
        assert config.formats == (ModulationName.QAM4, ModulationName.QAM16)
        assert config.thresholds == (300.0, 400.5)
        assert config.estimation == Estimation.Nmse

    def test_empty_threshold_list(self):
        assert ExperimentConfig(thresholds="").thresholds == ()

    def test_unknown_key_raises(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"snr": 6})

    def test_unknown_modulation_raises(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(modulation="qam256")

    def test_threshold_count_needs_range(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(threshold_count=5, threshold_min=0.0)

    @pytest.mark.parametrize("target_pf", [0.0, 1.0, 1.5])
    def test_target_pf_range(self, target_pf):
        with pytest.raises(ValidationError):
            ExperimentConfig(target_pf=target_pf)


class TestRunManifest:
    def test_header_lines(self):
        manifest = RunManifest(
            config={"snr_db": 6.0, "formats": ["qam4", "qam16"], "detector": "ed1"},
            tool_version="0.1.0",
            duration_s=1.5,
        )
        assert manifest.header_lines() == [
            "# snr_db=6.0",
            "# formats=qam4,qam16",
            "# detector=ed1",
            "# tool_version=0.1.0",
            "# duration_s=1.5",
        ]

    def test_floats_round_trip(self):
        value = 0.1 + 0.2
        line = RunManifest(config={"x": value}, tool_version="0").header_lines()[0]
        assert float(line.split("=")[1]) == value
