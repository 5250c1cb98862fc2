"""
Analytical false-alarm and detection probabilities in Rayleigh fading.

Given the channel powers, every energy statistic is non-central chi-square
with 2N degrees of freedom and non-centrality λ = c·γ, c = 2N·Ex/σn²; the
rates below average the Marcum-Q tail over the exponential channel powers.
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .common.enums import AnalyticMethod, DetectorVariant
from .common.errors import CalibrationError, ConfigError
from .common.schemas import SensingScenario
from .detectors.energy import type1_threshold
from .specfun import (
    DEFAULT_TOLERANCE,
    QuadratureRule,
    adaptive_rule,
    gauss_laguerre_rule,
    inv_marcum_q_threshold,
    marcum_q,
    rayleigh_double_expectation,
    rayleigh_expectation,
    rayleigh_sum_expectation,
)

logger = logging.getLogger(__name__)

GAUSS_LAGUERRE_NODES = 96
# weights below this are dropped; all integrands are bounded by 1
NODE_PRUNE = 1e-16
INNER_BREAKPOINTS = 9

CALIBRATION_TOL = 1e-6
_CALIBRATION_XTOL = 1e-9
_CALIBRATION_LIMIT = 1e12


def inner_rule() -> QuadratureRule:
    """Adaptive rule over γ2; vector-valued over the γ1 nodes."""
    return adaptive_rule(abs_tol=1e-11, rel_tol=1e-9)


class AnalyticResult(NamedTuple):
    value: float
    method: AnalyticMethod
    est_abs_error: float


def _result(value: float, method: AnalyticMethod, error: float) -> AnalyticResult:
    return AnalyticResult(
        value=float(np.clip(value, 0.0, 1.0)), method=method, est_abs_error=error
    )


def _error_budget(rule: QuadratureRule | None = None) -> float:
    quadrature = rule.abs_tol if rule is not None else 0.0
    return DEFAULT_TOLERANCE.abs_tol + quadrature


def _outer_rule(nodes: int) -> QuadratureRule:
    return gauss_laguerre_rule(nodes, prune=NODE_PRUNE)


def rayleigh_energy_tail(t: float, n_samples: int, p_sq: float) -> float:
    """
    P(e > t) when e given γ is χ²_{2N}(c·γ) and γ is exponential.

    Closed form with p² = σn²/(N·Ex·E[γ]), x = t/2 and y = x/(1+p²):

        Pf = S_{N−1}(x) + (1+p²)^{N−1} e^{−x} [e^{y} − Σ_{n<N−1} y^n/n!]

    The bracket is e^{y}·P(N−1, y). For y < N−1 it is rewritten through
    Kummer's function, (1+p²)^{N−1} e^{−x+y} P(N−1, y) =
    x^{N−1} e^{−x}/(N−1)! · ₁F₁(1; N; y), which neither overflows nor loses the
    lower incomplete gamma function to underflow.
    """
    if t <= 0:
        return 1.0
    x = t / 2.0
    y = x / (1.0 + p_sq)
    a = n_samples - 1
    if a == 0:
        return math.exp(y - x)

    head = special.gammaincc(a, x)
    if y < a:
        log_tail = (
            special.xlogy(a, x)
            - x
            - special.gammaln(a + 1)
            + math.log(special.hyp1f1(1.0, a + 1.0, y))
        )
    else:
        log_tail = a * math.log1p(p_sq) - x + y + math.log(special.gammainc(a, y))
    return float(np.clip(head + math.exp(log_tail), 0.0, 1.0))


def _p_sq(scenario: SensingScenario, channel_variance: float) -> float:
    return scenario.sigma_n_sq / (
        scenario.n_samples * scenario.symbol_energy * channel_variance
    )


def _energy_threshold(name: str, value: float) -> float:
    """Finite threshold on a non-negative statistic; values below zero act as zero."""
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if value < 0:
        logger.warning(
            "negative energy threshold, clamping to zero", extra={name: value}
        )
        return 0.0
    return value


def pf_ed1_closed(t1: float, scenario: SensingScenario) -> AnalyticResult:
    """Closed-form false-alarm rate of ED1 (H1': serving power only)."""
    t1 = _energy_threshold("t1", t1)
    value = rayleigh_energy_tail(
        t1, scenario.n_samples, _p_sq(scenario, scenario.sigma1_sq)
    )
    return _result(value, AnalyticMethod.ClosedForm, 1e-14)


def _transition(t: float, scenario: SensingScenario) -> list[float]:
    """Channel power where the mean of the statistic crosses t."""
    point = (t - 2 * scenario.n_samples) / scenario.noncentrality_scale
    return [point] if point > 0 else []


def pf_ed1_quadrature(
    t1: float, scenario: SensingScenario, rule: QuadratureRule | None = None
) -> AnalyticResult:
    """
    ED1 false-alarm rate as E_γ1[Q_N(√(c·γ1), √t1)].

    Args:
        t1 (float): Threshold, >= 0.
        scenario (SensingScenario): Model parameters.
        rule (QuadratureRule | None): Adaptive-truncated by default.
    """
    t1 = _energy_threshold("t1", t1)
    rule = rule or adaptive_rule()
    n, c = scenario.n_samples, scenario.noncentrality_scale
    b = math.sqrt(t1)

    value = rayleigh_expectation(
        lambda g: marcum_q(n, np.sqrt(c * g), b),
        scenario.sigma1_sq,
        rule,
        breakpoints=_transition(t1, scenario),
    )
    return _result(value, AnalyticMethod.Quadrature, _error_budget(rule))


def pd_ed1(
    t1: float, scenario: SensingScenario, rule: QuadratureRule | None = None
) -> AnalyticResult:
    """
    ED1 detection rate as E[Q_N(√(c·(γ1+γ2)), √t1)].

    The integrand depends on γ1 + γ2 only, so the double expectation is
    taken against the density of the sum.
    """
    t1 = _energy_threshold("t1", t1)
    rule = rule or adaptive_rule()
    n, c = scenario.n_samples, scenario.noncentrality_scale
    b = math.sqrt(t1)

    value = rayleigh_sum_expectation(
        lambda s: marcum_q(n, np.sqrt(c * s), b),
        scenario.sigma1_sq,
        scenario.sigma2_sq,
        rule,
        breakpoints=_transition(t1, scenario),
    )
    return _result(value, AnalyticMethod.Quadrature, _error_budget(rule))


def pf_ed2_exact(delta: float) -> AnalyticResult:
    """δ: the exact threshold holds the false-alarm rate per realization."""
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    return _result(delta, AnalyticMethod.ClosedForm, 0.0)


def _inner_breakpoints(points: np.ndarray) -> list[float]:
    points = points[points > 0]
    if points.size == 0:
        return []
    quantiles = np.quantile(points, np.linspace(0.0, 1.0, INNER_BREAKPOINTS))
    return sorted(set(quantiles.tolist()))


def pd_ed2_exact(
    delta: float,
    scenario: SensingScenario,
    nodes: int = GAUSS_LAGUERRE_NODES,
    inner: QuadratureRule | None = None,
) -> AnalyticResult:
    """
    ED2 (exact threshold) detection rate.

    The ED1 double expectation with t1 replaced by t(c·γ1, δ). Thresholds are
    inverted once per γ1 node of the outer Gauss-Laguerre rule.

    Args:
        delta (float): Per-realization false-alarm rate in (0, 1).
        scenario (SensingScenario): Model parameters.
        nodes (int): Outer Gauss-Laguerre nodes over γ1.
        inner (QuadratureRule | None): Rule over γ2, adaptive by default.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    n, c = scenario.n_samples, scenario.noncentrality_scale
    outer = _outer_rule(nodes)
    inner = inner or inner_rule()

    gamma1 = scenario.sigma1_sq * outer.nodes
    thresholds = np.array(
        [inv_marcum_q_threshold(n, c * g, delta) for g in gamma1]
    )
    logger.debug(
        "Threshold cache built", extra={"nodes": gamma1.size, "delta": delta}
    )
    root_thresholds = np.sqrt(thresholds)

    value = rayleigh_double_expectation(
        lambda g1, g2: marcum_q(n, np.sqrt(c * (g1 + g2)), root_thresholds),
        scenario.sigma1_sq,
        scenario.sigma2_sq,
        outer,
        inner,
        breakpoints=_inner_breakpoints((thresholds - 2 * n) / c - gamma1),
    )
    return _result(value, AnalyticMethod.Quadrature, _error_budget(inner))


def _linear_thresholds(t2: float, scenario: SensingScenario, gamma1: np.ndarray):
    n, c = scenario.n_samples, scenario.noncentrality_scale
    thresholds = t2 + 2 * n + c * gamma1
    if np.any(thresholds < 0):
        logger.warning(
            "negative linear threshold, clamping to zero",
            extra={"t2": t2, "clamped_nodes": int(np.sum(thresholds < 0))},
        )
    return np.maximum(thresholds, 0.0)


def pf_ed2_linear(
    t2: float, scenario: SensingScenario, nodes: int = GAUSS_LAGUERRE_NODES
) -> AnalyticResult:
    """ED2 (linear threshold) false-alarm rate, E_γ1[Q_N(√(c·γ1), √(t2 + 2N + c·γ1))]."""
    if not math.isfinite(t2):
        raise ValueError("t2 must be finite")
    n, c = scenario.n_samples, scenario.noncentrality_scale
    rule = _outer_rule(nodes)
    gamma1 = scenario.sigma1_sq * rule.nodes

    values = marcum_q(
        n, np.sqrt(c * gamma1), np.sqrt(_linear_thresholds(t2, scenario, gamma1))
    )
    return _result(
        float(np.dot(rule.weights, values)),
        AnalyticMethod.Quadrature,
        _error_budget(),
    )


def pd_ed2_linear(
    t2: float,
    scenario: SensingScenario,
    nodes: int = GAUSS_LAGUERRE_NODES,
    inner: QuadratureRule | None = None,
) -> AnalyticResult:
    """ED2 (linear threshold) detection rate; outer γ1 by Gauss-Laguerre, inner γ2 adaptive."""
    if not math.isfinite(t2):
        raise ValueError("t2 must be finite")
    n, c = scenario.n_samples, scenario.noncentrality_scale
    outer = _outer_rule(nodes)
    inner = inner or inner_rule()

    gamma1 = scenario.sigma1_sq * outer.nodes
    root_thresholds = np.sqrt(_linear_thresholds(t2, scenario, gamma1))

    # the statistic crosses t2 + 2N + c·γ1 near γ2 = t2 / c for every γ1
    value = rayleigh_double_expectation(
        lambda g1, g2: marcum_q(n, np.sqrt(c * (g1 + g2)), root_thresholds),
        scenario.sigma1_sq,
        scenario.sigma2_sq,
        outer,
        inner,
        breakpoints=[t2 / c] if t2 > 0 else [],
    )
    return _result(value, AnalyticMethod.Quadrature, _error_budget(inner))


def pf_type1(delta: float) -> AnalyticResult:
    return pf_ed2_exact(delta)


def pd_type1(delta: float, scenario: SensingScenario) -> AnalyticResult:
    """Type-1 detection rate: the ED1 closed form with the interferer power σ2²."""
    threshold = type1_threshold(scenario, delta)
    value = rayleigh_energy_tail(
        threshold, scenario.n_samples, _p_sq(scenario, scenario.sigma2_sq)
    )
    return _result(value, AnalyticMethod.ClosedForm, 1e-14)


def analytic_rates(
    variant: DetectorVariant, threshold_param: float, scenario: SensingScenario
) -> tuple[AnalyticResult, AnalyticResult] | None:
    """(Pf, Pd) of a variant at one threshold parameter; None for the MPT."""
    match DetectorVariant(variant):
        case DetectorVariant.ED1:
            return pf_ed1_closed(threshold_param, scenario), pd_ed1(
                threshold_param, scenario
            )
        case DetectorVariant.ED2Exact:
            return pf_ed2_exact(threshold_param), pd_ed2_exact(
                threshold_param, scenario
            )
        case DetectorVariant.ED2Linear:
            return pf_ed2_linear(threshold_param, scenario), pd_ed2_linear(
                threshold_param, scenario
            )
        case DetectorVariant.Type1ED:
            return pf_type1(threshold_param), pd_type1(threshold_param, scenario)
        case _:
            return None


def _solve_decreasing(pf, target: float, lower: float, upper: float) -> float:
    """Root of pf(x) = target for pf non-increasing on [lower, upper]."""
    return optimize.bisect(
        lambda x: pf(x) - target,
        lower,
        upper,
        xtol=_CALIBRATION_XTOL,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )


def _expand_upper(pf, target: float, start: float, step: float) -> float:
    upper = start + step
    while pf(upper) > target:
        step *= 2
        upper = start + step
        if step > _CALIBRATION_LIMIT:
            raise CalibrationError(
                f"false-alarm rate {target} not reachable: threshold grew past "
                f"{_CALIBRATION_LIMIT:g}"
            )
    return upper


def _expand_lower(pf, target: float, start: float, step: float) -> float:
    lower = start - step
    while pf(lower) < target:
        step *= 2
        lower = start - step
        if step > _CALIBRATION_LIMIT:
            raise CalibrationError(
                f"false-alarm rate {target} not reachable: threshold fell below "
                f"{-_CALIBRATION_LIMIT:g}"
            )
    return lower


def calibrate_threshold(
    variant: DetectorVariant, target_pf: float, scenario: SensingScenario
) -> float:
    """
    Threshold parameter whose analytical false-alarm rate equals target_pf.

    ED2_EXACT and TYPE1_ED are parameterized by the rate itself and return
    target_pf; ED1 and ED2_LINEAR are solved by bisection on the monotone Pf.

    Raises:
        CalibrationError: The target is outside the achievable range or the
            solution misses it by more than 1e-6.
        ConfigError: The variant has no analytical false-alarm rate (MPT).

    Returns:
        float: t1, t2 or δ.
    """
    variant = DetectorVariant(variant)
    if not 0 < target_pf < 1:
        raise ValueError("target_pf must be in (0, 1)")

    n = scenario.n_samples
    mean = 2 * n + scenario.noncentrality_scale * scenario.sigma1_sq

    match variant:
        case DetectorVariant.ED2Exact | DetectorVariant.Type1ED:
            return target_pf
        case DetectorVariant.ED1:

            def pf(t: float) -> float:
                return pf_ed1_closed(t, scenario).value

            lower = 0.0
            if pf(lower) < target_pf:
                raise CalibrationError(
                    f"false-alarm rate {target_pf} above the maximum {pf(lower)}"
                )
            upper = _expand_upper(pf, target_pf, lower, mean)
        case DetectorVariant.ED2Linear:

            def pf(t: float) -> float:
                return pf_ed2_linear(t, scenario).value

            lower = _expand_lower(pf, target_pf, 0.0, float(2 * n))
            upper = _expand_upper(pf, target_pf, 0.0, math.sqrt(4 * mean))
        case _:
            raise ConfigError(f"{variant} has no analytical false-alarm rate")

    threshold = _solve_decreasing(pf, target_pf, lower, upper)
    achieved = pf(threshold)
    if abs(achieved - target_pf) > CALIBRATION_TOL:
        raise CalibrationError(
            f"calibration reached pf={achieved!r} for target {target_pf}"
        )

    logger.info(
        "Threshold calibrated",
        extra={"variant": str(variant), "target_pf": target_pf, "threshold": threshold},
    )
    return threshold
