import math

import numpy as np
import pytest

from type2_sensing.analysis import calibrate_threshold, pd_ed2_exact, pf_ed1_closed
from type2_sensing.common.enums import DetectorVariant, Estimation, RocSource
from type2_sensing.common.errors import ConfigError, NumericalError
from type2_sensing.common.schemas import DetectorConfig, TrialPlan
from type2_sensing.detectors.energy import ED1Detector
from type2_sensing.montecarlo import (
    CSV_COLUMNS,
    TrialScores,
    collect_scores,
    default_thresholds,
    estimate_rates,
    estimation_error_study,
    pd_at_pf,
    roc_sweep,
    wilson_estimate,
)
from type2_sensing.scenario import build_scenario


def binomial_band(p, trials, sigmas=3):
    return sigmas * math.sqrt(p * (1 - p) / trials)


class TestWilsonEstimate:
    def test_interval_contains_estimate(self):
        estimate = wilson_estimate(37, 1000)
        assert estimate.ci_low <= estimate.p_hat <= estimate.ci_high
        assert estimate.p_hat == 0.037
        assert estimate.trials == 1000

    @pytest.mark.parametrize("successes", [0, 1000])
    def test_boundaries(self, successes):
        estimate = wilson_estimate(successes, 1000)
        assert 0.0 <= estimate.ci_low <= estimate.p_hat <= estimate.ci_high <= 1.0
        assert estimate.covers(successes / 1000)

    def test_few_trials_report_no_interval(self):
        estimate = wilson_estimate(10, 50)
        assert (estimate.ci_low, estimate.ci_high) == (0.0, 1.0)

    def test_width_shrinks_with_trials(self):
        small = wilson_estimate(50, 100)
        large = wilson_estimate(5000, 10_000)
        assert large.ci_high - large.ci_low < small.ci_high - small.ci_low


class TestCollectScores:
    def test_independent_of_workers(self, short_block, make_plan):
        plan = make_plan(short_block, "ed2_linear", trials=700, seed=9)
        serial = collect_scores(plan, workers=1)
        parallel = collect_scores(plan, workers=4)
        np.testing.assert_array_equal(serial.null, parallel.null)
        np.testing.assert_array_equal(serial.alternative, parallel.alternative)

    def test_seed_changes_scores(self, short_block, make_plan):
        a = collect_scores(make_plan(short_block, "ed1", trials=50, seed=1))
        b = collect_scores(make_plan(short_block, "ed1", trials=50, seed=2))
        assert not np.array_equal(a.null, b.null)

    def test_zero_nmse_reproduces_ideal(self, strong_interferer, make_plan):
        ideal = make_plan(strong_interferer, "ed2_exact", trials=200, seed=4)
        noisy = ideal.with_changes(estimation=Estimation.Nmse)
        a = collect_scores(ideal)
        b = collect_scores(noisy, nmse=(0.0, 0.0))
        np.testing.assert_array_equal(a.null, b.null)
        np.testing.assert_array_equal(a.alternative, b.alternative)
        c = collect_scores(noisy)
        assert not np.array_equal(a.null, c.null)

    def test_failure_carries_trial(self, short_block, make_plan, monkeypatch):
        import type2_sensing.montecarlo as montecarlo

        original = montecarlo.synthesize_pair

        def failing(scenario, pair, seed, trial, nmse=None):
            if trial == 7:
                raise NumericalError("boom", operation="marcum_q")
            return original(scenario, pair, seed, trial, nmse)

        monkeypatch.setattr(montecarlo, "synthesize_pair", failing)
        with pytest.raises(NumericalError) as e:
            collect_scores(make_plan(short_block, "ed1", trials=20))
        assert e.value.trial == 7
        assert e.value.operation == "marcum_q"
        assert "trial 7" in str(e.value)


class TestEstimateRates:
    def test_infinite_threshold(self, strong_interferer, make_plan):
        plan = make_plan(strong_interferer, "ed1", threshold_param=1e9, trials=300)
        pf, pd = estimate_rates(plan)
        assert pf.p_hat == 0.0
        assert pd.p_hat == 0.0

    def test_ed1_calibrated_false_alarm(self, strong_interferer, make_plan):
        t1 = calibrate_threshold(DetectorVariant.ED1, 0.05, strong_interferer)
        plan = make_plan(strong_interferer, "ed1", threshold_param=t1, trials=4000)
        pf, _ = estimate_rates(plan, workers=2)
        assert pf.p_hat == pytest.approx(0.05, abs=binomial_band(0.05, 4000))

    def test_type1_false_alarm(self, strong_interferer, make_plan):
        plan = make_plan(strong_interferer, "type1_ed", threshold_param=0.1, trials=4000)
        pf, pd = estimate_rates(plan)
        assert pf.p_hat == pytest.approx(0.1, abs=binomial_band(0.1, 4000))
        assert pd.p_hat > pf.p_hat


class TestRocSweep:
    def test_monotone_and_ordered(self, strong_interferer, make_plan):
        plan = make_plan(strong_interferer, "ed1", trials=500)
        thresholds = [3000.0, 300.0, 900.0, 1500.0]
        curve = roc_sweep(plan, thresholds)
        assert [p.threshold_param for p in curve.points] == sorted(thresholds)
        pf = [p.pf_mc.p_hat for p in curve.points]
        pd = [p.pd_mc.p_hat for p in curve.points]
        assert pf == sorted(pf, reverse=True)
        assert pd == sorted(pd, reverse=True)
        assert curve.source == RocSource.Both
        assert curve.points[0].pf_analytic == pf_ed1_closed(300.0, strong_interferer)

    def test_delta_variants_ordered_by_decreasing_delta(self, short_block, make_plan):
        plan = make_plan(short_block, "ed2_exact", trials=300)
        curve = roc_sweep(plan, [0.01, 0.5, 0.1], workers=2)
        assert [p.threshold_param for p in curve.points] == [0.5, 0.1, 0.01]
        pf = [p.pf_mc.p_hat for p in curve.points]
        assert pf == sorted(pf, reverse=True)

    def test_mpt_has_no_analytic_columns(self, short_block, make_plan):
        plan = make_plan(short_block, "mpt", trials=100)
        curve = roc_sweep(plan, [-1.0, 0.0, 1.0])
        assert curve.source == RocSource.MonteCarlo
        frame = curve.to_frame()
        assert list(frame.columns) == CSV_COLUMNS
        assert frame["pf_analytic"].isna().all()

    def test_nmse_has_no_analytic_columns(self, short_block, make_plan):
        plan = make_plan(short_block, "ed2_linear", trials=100, estimation="nmse")
        assert roc_sweep(plan, [0.0]).source == RocSource.MonteCarlo

    def test_empty_thresholds(self, short_block, make_plan):
        with pytest.raises(ConfigError):
            roc_sweep(make_plan(short_block, "ed1", trials=10), [])

    def test_invalid_delta(self, short_block, make_plan):
        with pytest.raises(ConfigError):
            roc_sweep(make_plan(short_block, "ed2_exact", trials=10), [0.1, 1.5])

    def test_default_thresholds(self, short_block, make_plan):
        plan = make_plan(short_block, "ed2_exact", trials=400)
        scores = collect_scores(plan)
        thresholds = default_thresholds(scores, count=10)
        assert thresholds == sorted(thresholds)
        assert all(0 < d < 1 for d in thresholds)
        curve = roc_sweep(plan, scores=scores)
        assert len(curve.points) == len(default_thresholds(scores))


class TestPdAtPf:
    def test_operating_point(self, strong_interferer):
        scores = TrialScores(
            detector=ED1Detector(strong_interferer),
            null=np.arange(100, dtype=float),
            alternative=np.arange(100, dtype=float) + 50,
        )
        # at most 5 null scores above the level: level = 94
        assert pd_at_pf(scores, 0.05).p_hat == pytest.approx(55 / 100)

    def test_target_range(self, strong_interferer):
        scores = TrialScores(ED1Detector(strong_interferer), np.zeros(3), np.ones(3))
        with pytest.raises(ValueError):
            pd_at_pf(scores, 0.0)


class TestEstimationStudy:
    def test_needs_ed2(self, short_block):
        with pytest.raises(ConfigError):
            estimation_error_study(
                short_block, DetectorConfig(variant="ed1"), trials=10, seed=0
            )

    def test_curves(self, short_block):
        study = estimation_error_study(
            short_block,
            DetectorConfig(variant="ed2_linear"),
            trials=200,
            seed=1,
            thresholds=[-20.0, 0.0, 20.0],
        )
        assert study.ideal.source == RocSource.Both
        assert study.nmse.source == RocSource.MonteCarlo
        assert len(study.nmse_short.points) == 3
        assert study.pd_ideal.trials == 200


@pytest.fixture(scope="module")
def pd_at_five_percent(strong_interferer):
    """Pd at Pf = 0.05 for SIR 0 dB, SNR 6 dB, N=142; one trial pass per variant."""
    cache = {}

    def run(variant, trials=10_000):
        if (variant, trials) not in cache:
            plan = TrialPlan(
                scenario=strong_interferer,
                detector=DetectorConfig(
                    variant=variant,
                    threshold_param=0.05 if variant == "ed2_exact" else 0.0,
                ),
                trials=trials,
                seed=2013,
            )
            cache[variant, trials] = pd_at_pf(collect_scores(plan, workers=4), 0.05)
        return cache[variant, trials]

    return run


@pytest.mark.slow
class TestOperatingPoints:
    def test_ed2_exact_matches_analysis(self, pd_at_five_percent, strong_interferer):
        analytic = pd_ed2_exact(0.05, strong_interferer).value
        assert analytic == pytest.approx(0.908, abs=0.005)
        assert pd_at_five_percent("ed2_exact").p_hat == pytest.approx(
            analytic, abs=0.02
        )

    def test_ed1_is_far_below_ed2(self, pd_at_five_percent):
        ed1 = pd_at_five_percent("ed1").p_hat
        ed2 = pd_at_five_percent("ed2_exact").p_hat
        assert ed1 < ed2 - 0.1

    def test_linear_close_to_exact(self, pd_at_five_percent):
        linear = pd_at_five_percent("ed2_linear").p_hat
        exact = pd_at_five_percent("ed2_exact").p_hat
        assert abs(linear - exact) < 0.02

    def test_mpt_dominates(self):
        uniform = build_scenario({"sir_db": 0.0, "snr_db": 6.0, "modulation": "uniform"})
        scores = {
            variant: collect_scores(
                TrialPlan(
                    scenario=uniform,
                    detector=DetectorConfig(variant=variant, threshold_param=threshold),
                    trials=2_000,
                    seed=2013,
                ),
                workers=4,
            )
            for variant, threshold in (("mpt", 0.0), ("ed2_exact", 0.05))
        }
        assert pd_at_pf(scores["mpt"], 0.05).p_hat > 0.90
        for target in (0.01, 0.05, 0.1):
            mpt = pd_at_pf(scores["mpt"], target)
            ed2 = pd_at_pf(scores["ed2_exact"], target)
            assert mpt.p_hat >= ed2.p_hat - 2 * math.hypot(mpt.std_error, ed2.std_error)


@pytest.mark.slow
class TestAnalyticAgreement:
    @pytest.mark.parametrize("scenario_name", ["strong_interferer", "weak_interferer"])
    @pytest.mark.parametrize("variant", ["ed1", "ed2_linear"])
    def test_rates_within_interval(self, request, make_plan, scenario_name, variant):
        scenario = request.getfixturevalue(scenario_name)
        thresholds = [
            calibrate_threshold(DetectorVariant(variant), pf, scenario)
            for pf in (0.9, 0.7, 0.5, 0.3, 0.2, 0.1, 0.05, 0.03, 0.02, 0.01)
        ]
        plan = make_plan(scenario, variant, trials=10_000, seed=7)
        curve = roc_sweep(plan, thresholds, workers=4)
        pf_hits = sum(p.pf_mc.covers(p.pf_analytic.value) for p in curve.points)
        pd_hits = sum(p.pd_mc.covers(p.pd_analytic.value) for p in curve.points)
        assert pf_hits >= 9
        assert pd_hits >= 8


@pytest.mark.slow
@pytest.mark.parametrize(
    "variant, estimation_drop, samples_drop",
    [("ed2_exact", 0.483, 0.006), ("ed2_linear", 0.47, 0.001)],
)
def test_estimation_error_lowers_detection(
    strong_interferer, variant, estimation_drop, samples_drop
):
    study = estimation_error_study(
        strong_interferer,
        DetectorConfig(variant=variant, threshold_param=0.05),
        trials=10_000,
        seed=3,
        workers=4,
    )
    assert study.pd_ideal.p_hat == pytest.approx(0.905, abs=0.03)
    assert study.estimation_drop == pytest.approx(estimation_drop, abs=0.04)
    assert study.samples_drop == pytest.approx(samples_drop, abs=0.03)
