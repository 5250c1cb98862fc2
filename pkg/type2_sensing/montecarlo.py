from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats

from .analysis import AnalyticResult, analytic_rates
from .common.enums import DetectorVariant, Estimation, RocSource
from .common.errors import ConfigError, NumericalError
from .common.schemas import DetectorConfig, SensingScenario, TrialPlan
from .common.tools import measure
from .detectors.base import BaseDetector
from .detectors.registry import make_detector
from .scenario import nmse_from_sinr, sinr_for_hypothesis, synthesize_pair

logger = logging.getLogger(__name__)

MIN_TRIALS_FOR_CI = 100
CONFIDENCE_LEVEL = 0.95
CHUNK_SIZE = 250
DEFAULT_SWEEP_POINTS = 20
SHORT_BLOCK_SAMPLES = 100
MPT_DEFAULT_TRIALS = 2_000

CSV_COLUMNS = [
    "threshold",
    "pf_analytic",
    "pd_analytic",
    "pf_mc",
    "pf_ci_low",
    "pf_ci_high",
    "pd_mc",
    "pd_ci_low",
    "pd_ci_high",
]


class RateEstimate(NamedTuple):
    p_hat: float
    ci_low: float
    ci_high: float
    trials: int

    @property
    def std_error(self) -> float:
        return math.sqrt(self.p_hat * (1 - self.p_hat) / self.trials)

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def wilson_estimate(successes: int, trials: int) -> RateEstimate:
    """
    Empirical rate with its 95% Wilson interval.

    Below MIN_TRIALS_FOR_CI trials no interval is reported and [0, 1] is
    returned instead.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p_hat = successes / trials
    if trials < MIN_TRIALS_FOR_CI:
        return RateEstimate(p_hat=p_hat, ci_low=0.0, ci_high=1.0, trials=trials)

    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=CONFIDENCE_LEVEL, method="wilson"
    )
    return RateEstimate(
        p_hat=p_hat,
        ci_low=float(min(max(ci.low, 0.0), p_hat)),
        ci_high=float(max(min(ci.high, 1.0), p_hat)),
        trials=trials,
    )


class RocPoint(NamedTuple):
    threshold_param: float
    pf_mc: RateEstimate
    pd_mc: RateEstimate
    pf_analytic: AnalyticResult | None = None
    pd_analytic: AnalyticResult | None = None


class RocCurve(NamedTuple):
    """ROC points ordered by decision level, i.e. by strictness of the test."""

    variant: DetectorVariant
    points: tuple[RocPoint, ...]
    source: RocSource

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.points:
            rows.append(
                {
                    "threshold": p.threshold_param,
                    "pf_analytic": p.pf_analytic.value if p.pf_analytic else None,
                    "pd_analytic": p.pd_analytic.value if p.pd_analytic else None,
                    "pf_mc": p.pf_mc.p_hat,
                    "pf_ci_low": p.pf_mc.ci_low,
                    "pf_ci_high": p.pf_mc.ci_high,
                    "pd_mc": p.pd_mc.p_hat,
                    "pd_ci_low": p.pd_mc.ci_low,
                    "pd_ci_high": p.pd_mc.ci_high,
                }
            )
        return pd.DataFrame(rows, columns=CSV_COLUMNS)


class TrialScores(NamedTuple):
    """Per-trial detector scores of the null and the alternative block."""

    detector: BaseDetector
    null: np.ndarray
    alternative: np.ndarray

    @property
    def trials(self) -> int:
        return self.null.size

    def rates(self, threshold_param: float) -> tuple[RateEstimate, RateEstimate]:
        level = self.detector.level(threshold_param)
        return (
            wilson_estimate(int(np.count_nonzero(self.null > level)), self.trials),
            wilson_estimate(
                int(np.count_nonzero(self.alternative > level)), self.trials
            ),
        )


def plan_nmse(plan: TrialPlan) -> tuple[float, float] | None:
    """NMSE of the h1 estimate under the null and the alternative hypothesis."""
    if plan.estimation == Estimation.Ideal:
        return None
    pair = plan.hypothesis_pair
    return (
        nmse_from_sinr(sinr_for_hypothesis(plan.scenario, pair.null)),
        nmse_from_sinr(sinr_for_hypothesis(plan.scenario, pair.alternative)),
    )


def _score_chunk(
    plan: TrialPlan,
    detector: BaseDetector,
    nmse: tuple[float, float] | None,
    start: int,
    stop: int,
) -> tuple[int, np.ndarray, np.ndarray]:
    null = np.empty(stop - start)
    alternative = np.empty(stop - start)
    for i, trial in enumerate(range(start, stop)):
        try:
            blocks = synthesize_pair(
                plan.scenario, plan.hypothesis_pair, plan.seed, trial, nmse
            )
            null[i] = detector.score(blocks.null)
            alternative[i] = detector.score(blocks.alternative)
        except NumericalError as e:
            raise NumericalError(
                e.args[0],
                operation=e.operation,
                partial=e.partial,
                bound=e.bound,
                trial=trial,
            ) from e
        except (ArithmeticError, ValueError) as e:
            raise NumericalError(
                str(e), operation=f"{detector.variant} score", trial=trial
            ) from e
    return start, null, alternative


def collect_scores(
    plan: TrialPlan,
    workers: int = 1,
    nmse: tuple[float, float] | None = None,
) -> TrialScores:
    """
    Run all trials of a plan once and keep the detector score of every block.

    Trials are split into chunks executed on a thread pool; each trial draws
    from streams keyed by (seed, trial), and chunk results are written back
    at their trial indices, so the scores do not depend on `workers`.

    Args:
        plan (TrialPlan): Scenario, detector, trial count, seed, estimation.
        workers (int): Thread-pool size.
        nmse (tuple[float, float] | None): Override of the NMSE model for the
            (null, alternative) estimates; (0, 0) is equivalent to ideal.

    Raises:
        NumericalError: A trial failed; carries the trial index.

    Returns:
        TrialScores: Scores aligned by trial index.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    detector = make_detector(plan.detector, plan.scenario)
    nmse = nmse if nmse is not None else plan_nmse(plan)

    null = np.empty(plan.trials)
    alternative = np.empty(plan.trials)
    bounds = [
        (start, min(start + CHUNK_SIZE, plan.trials))
        for start in range(0, plan.trials, CHUNK_SIZE)
    ]

    with measure("collect_scores") as timer:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_score_chunk, plan, detector, nmse, start, stop)
                for start, stop in bounds
            ]
            for future in futures:
                start, chunk_null, chunk_alt = future.result()
                null[start : start + chunk_null.size] = chunk_null
                alternative[start : start + chunk_alt.size] = chunk_alt

    logger.info(
        "Trials finished",
        extra={
            "variant": str(plan.detector.variant),
            "trials": plan.trials,
            "seed": plan.seed,
            "estimation": str(plan.estimation),
            "nmse": nmse,
            "workers": workers,
            "elapsed_s": timer.elapsed,
        },
    )
    return TrialScores(detector=detector, null=null, alternative=alternative)


def estimate_rates(
    plan: TrialPlan, workers: int = 1
) -> tuple[RateEstimate, RateEstimate]:
    """
    Empirical false-alarm and detection rates at the plan's threshold.

    Returns:
        tuple[RateEstimate, RateEstimate]: (pf from the null hypothesis,
            pd from the alternative).
    """
    scores = collect_scores(plan, workers)
    return scores.rates(plan.detector.threshold_param)


def _valid_param(variant: DetectorVariant, value: float) -> bool:
    if not math.isfinite(value):
        return False
    return not variant.threshold_is_probability or 0 < value < 1


def default_thresholds(
    scores: TrialScores, count: int = DEFAULT_SWEEP_POINTS
) -> list[float]:
    """
    Threshold parameters spread over the empirical null-score quantiles, so
    that the sweep covers false-alarm rates from about 0.999 down to 1e-3.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pf_grid = np.geomspace(0.999, 1e-3, count)
    levels = np.quantile(scores.null, 1.0 - pf_grid)
    variant = scores.detector.variant
    params = {
        float(scores.detector.param(level))
        for level in np.unique(levels)
        if math.isfinite(level)
    }
    return sorted(p for p in params if _valid_param(variant, p))


def roc_sweep(
    plan: TrialPlan,
    thresholds: Sequence[float] | None = None,
    workers: int = 1,
    scores: TrialScores | None = None,
    analytic_scenario: SensingScenario | None = None,
) -> RocCurve:
    """
    ROC over a set of threshold parameters from one pass of trials.

    Each trial's score is computed once and every threshold is applied to the
    same cached scores, so the empirical rates are exactly monotone along the
    curve. Analytical rates are attached for ideal estimation whenever the
    variant has them.

    Args:
        plan (TrialPlan): Trial plan; its threshold_param is ignored.
        thresholds (Sequence[float] | None): Threshold parameters; derived from
            the null-score quantiles when None.
        workers (int): Thread-pool size for the trial pass.
        scores (TrialScores | None): Reuse scores of an earlier pass.
        analytic_scenario (SensingScenario | None): Scenario for the analytical
            columns, the plan's scenario by default.

    Raises:
        ConfigError: `thresholds` is empty or holds invalid values.

    Returns:
        RocCurve: Points ordered by decision level.
    """
    variant = plan.detector.variant
    if thresholds is not None:
        thresholds = [float(i) for i in thresholds]
        if not thresholds:
            raise ConfigError("threshold list is empty")
        for value in thresholds:
            try:
                DetectorConfig(variant=variant, threshold_param=value)
            except ValueError as e:
                raise ConfigError(f"invalid threshold {value!r}: {e}") from e

    scores = scores or collect_scores(plan, workers)
    if thresholds is None:
        thresholds = default_thresholds(scores)
        if not thresholds:
            raise ConfigError("could not derive thresholds from the scores")

    with_analytic = (
        plan.estimation == Estimation.Ideal and variant != DetectorVariant.MPT
    )
    analytic_scenario = analytic_scenario or plan.scenario

    points = []
    for value in sorted(set(thresholds), key=scores.detector.level):
        pf, pd_ = scores.rates(value)
        rates = (
            analytic_rates(variant, value, analytic_scenario) if with_analytic else None
        )
        points.append(
            RocPoint(
                threshold_param=value,
                pf_mc=pf,
                pd_mc=pd_,
                pf_analytic=rates[0] if rates else None,
                pd_analytic=rates[1] if rates else None,
            )
        )

    logger.info(
        "ROC sweep finished",
        extra={"variant": str(variant), "points": len(points), "trials": plan.trials},
    )
    return RocCurve(
        variant=variant,
        points=tuple(points),
        source=RocSource.Both if with_analytic else RocSource.MonteCarlo,
    )


def pd_at_pf(scores: TrialScores, target_pf: float) -> RateEstimate:
    """
    Empirical detection rate at the least strict level whose empirical
    false-alarm rate does not exceed target_pf.
    """
    if not 0 < target_pf < 1:
        raise ValueError("target_pf must be in (0, 1)")
    allowed = int(math.floor(target_pf * scores.trials))
    ranked = np.sort(scores.null)[::-1]
    level = ranked[min(allowed, ranked.size - 1)]
    return wilson_estimate(
        int(np.count_nonzero(scores.alternative > level)), scores.trials
    )


class EstimationStudy(NamedTuple):
    ideal: RocCurve
    nmse: RocCurve
    nmse_short: RocCurve
    pd_ideal: RateEstimate
    pd_nmse: RateEstimate
    pd_nmse_short: RateEstimate

    @property
    def estimation_drop(self) -> float:
        return self.pd_ideal.p_hat - self.pd_nmse.p_hat

    @property
    def samples_drop(self) -> float:
        return self.pd_nmse.p_hat - self.pd_nmse_short.p_hat


def estimation_error_study(
    scenario: SensingScenario,
    detector: DetectorConfig,
    trials: int,
    seed: int,
    workers: int = 1,
    target_pf: float = 0.05,
    thresholds: Sequence[float] | None = None,
) -> EstimationStudy:
    """
    Effect of channel-estimation errors on ED2 and of shortening the block.

    Runs the ROC under ideal and NMSE-model estimates at the scenario's N and
    under NMSE-model estimates at N=100, and reports Pd at target_pf for each.

    Raises:
        ConfigError: The detector is not an ED2 variant.
    """
    if detector.variant not in {DetectorVariant.ED2Exact, DetectorVariant.ED2Linear}:
        raise ConfigError("estimation error study needs ed2_exact or ed2_linear")

    ideal_plan = TrialPlan(
        scenario=scenario,
        detector=detector,
        trials=trials,
        seed=seed,
        estimation=Estimation.Ideal,
    )
    nmse_plan = ideal_plan.with_changes(estimation=Estimation.Nmse)
    short_plan = nmse_plan.with_changes(
        scenario=scenario.with_samples(SHORT_BLOCK_SAMPLES)
    )

    curves = []
    operating = []
    for plan in (ideal_plan, nmse_plan, short_plan):
        scores = collect_scores(plan, workers)
        curves.append(roc_sweep(plan, thresholds, scores=scores))
        operating.append(pd_at_pf(scores, target_pf))

    study = EstimationStudy(*curves, *operating)
    logger.info(
        "Estimation study finished",
        extra={
            "variant": str(detector.variant),
            "estimation_drop": study.estimation_drop,
            "samples_drop": study.samples_drop,
        },
    )
    return study
