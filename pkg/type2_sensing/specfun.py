"""
Special functions behind the analytical detection probabilities.

Q_N(a, b) is evaluated as a Poisson mixture of central chi-square tails,

    Q_N(a, b) = Σ_j e^{−a²/2} (a²/2)^j / j! · S_{N+j}(b²/2),

with S_m(u) = e^{−u} Σ_{n<m} u^n / n! the regularized upper incomplete gamma
function at integer order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from functools import cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize, special, stats

from .common.enums import QuadratureKind
from .common.errors import NumericalError
from .common.schemas import Tolerance

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = Tolerance()

# e^{-u} below this is dropped by the truncated rules
_TAIL_CUTOFF = 1e-16
_BRACKET_LIMIT = 1e15
_INVERSION_XTOL = 1e-10

Integrand = Callable[..., float | np.ndarray]


class QuadratureRule(NamedTuple):
    """
    Rule for integrals against the weight e^{−u} on [0, ∞).

    Gauss-Laguerre rules carry their nodes and weights; adaptive-truncated
    rules integrate on [0, cutoff] with `scipy.integrate.quad_vec`.
    """

    kind: QuadratureKind
    nodes: np.ndarray
    weights: np.ndarray
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    cutoff: float = -math.log(_TAIL_CUTOFF)


@cache
def gauss_laguerre_rule(n: int = 96, prune: float = 0.0) -> QuadratureRule:
    """
    n-node Gauss-Laguerre rule.

    Args:
        n (int): Number of nodes.
        prune (float): Drop nodes whose weight is below this value. Only valid
            for bounded integrands, where the dropped mass bounds the error.
    """
    nodes, weights = special.roots_laguerre(n)
    keep = weights >= prune
    return QuadratureRule(
        kind=QuadratureKind.GaussLaguerre, nodes=nodes[keep], weights=weights[keep]
    )


def adaptive_rule(abs_tol: float = 1e-12, rel_tol: float = 1e-10) -> QuadratureRule:
    empty = np.empty(0)
    return QuadratureRule(
        kind=QuadratureKind.AdaptiveTruncated,
        nodes=empty,
        weights=empty,
        abs_tol=abs_tol,
        rel_tol=rel_tol,
    )


def _poisson_window(
    mu: np.ndarray, tail: float
) -> tuple[np.ndarray, np.ndarray]:
    """Index range holding all but `tail` of the Poisson(mu) mass."""
    lo = np.zeros(mu.shape, dtype=np.int64)
    hi = np.zeros(mu.shape, dtype=np.int64)
    positive = mu > 0
    if positive.any():
        lo[positive] = stats.poisson.ppf(tail / 2, mu[positive]).astype(np.int64)
        hi[positive] = stats.poisson.isf(tail / 2, mu[positive]).astype(np.int64)
    return np.maximum(lo, 0), hi


def marcum_q(
    order: int,
    a: float | np.ndarray,
    b: float | np.ndarray,
    tol: Tolerance | None = None,
) -> float | np.ndarray:
    """
    Generalized Marcum Q-function Q_N(a, b) for integer order N.

    Q_N(a, b) = P(X > b²) for X non-central chi-square with 2N degrees of
    freedom and non-centrality a². The Poisson series is truncated to the
    index window holding all but `abs_tol` of the mixing mass, which bounds
    the truncation error by `abs_tol`.

    Args:
        order (int): N >= 1.
        a (float | np.ndarray): Non-centrality amplitude, >= 0.
        b (float | np.ndarray): Threshold amplitude, >= 0. Broadcast with `a`.
        tol (Tolerance | None): Truncation tolerance and term limit.

    Raises:
        NumericalError: The window exceeds `max_terms`; carries the partial
            value and the bound on the neglected mass.

    Returns:
        float | np.ndarray: Probability in [0, 1]; float for scalar input.
    """
    tol = tol or DEFAULT_TOLERANCE
    if order < 1:
        raise ValueError("order must be a positive integer")

    a_arr, b_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise ValueError("marcum_q arguments must be finite")
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ValueError("marcum_q arguments must be non-negative")

    mu = (a_arr.ravel() ** 2) / 2
    u = (b_arr.ravel() ** 2) / 2

    lo, hi = _poisson_window(mu, tol.abs_tol)
    width = int((hi - lo).max()) + 1 if mu.size else 1
    terms = min(width, tol.max_terms)

    j = lo[:, None] + np.arange(terms)[None, :]
    log_pmf = special.xlogy(j, mu[:, None]) - mu[:, None] - special.gammaln(j + 1)
    weights = np.where(j <= hi[:, None], np.exp(log_pmf), 0.0)
    value = np.sum(weights * special.gammaincc(order + j, u[:, None]), axis=1)
    value = np.clip(np.where(u == 0, 1.0, value), 0.0, 1.0)

    if width > tol.max_terms:
        below = np.where(lo > 0, special.pdtr(lo - 1, mu), 0.0)
        missing = below + special.pdtrc(lo + terms - 1, mu)
        worst = int(np.argmax(missing))
        raise NumericalError(
            "series did not converge within max_terms",
            operation="marcum_q",
            partial=float(value[worst]),
            bound=float(missing[worst]),
        )

    if a_arr.ndim == 0:
        return float(value[0])
    return value.reshape(a_arr.shape)


def central_chi2_sf(dof_half: int, t: float | np.ndarray) -> float | np.ndarray:
    """Survival of a chi-square with 2N dof: e^{−t/2} Σ_{n<N} (t/2)^n / n!."""
    if dof_half < 1:
        raise ValueError("dof_half must be a positive integer")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    value = special.gammaincc(dof_half, t / 2)
    return float(value) if value.ndim == 0 else value


def inv_marcum_q_threshold(
    order: int,
    lam: float,
    delta: float,
    tol: Tolerance | None = None,
) -> float:
    """
    Threshold u with Q_N(√λ, √u) = δ.

    Q_N is strictly decreasing in its second argument, so the root is
    bracketed on [0, upper] with `upper` grown geometrically from 2N + λ (the
    mean of the statistic) and then located by bisection.

    Args:
        order (int): N >= 1.
        lam (float): Non-centrality λ >= 0.
        delta (float): Target tail probability in (0, 1).
        tol (Tolerance | None): Tolerance forwarded to marcum_q.

    Raises:
        NumericalError: The bracket grows past the overflow guard.

    Returns:
        float: The threshold u.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if lam < 0 or not math.isfinite(lam):
        raise ValueError("lambda must be finite and non-negative")

    amplitude = math.sqrt(lam)

    def excess(u: float) -> float:
        return marcum_q(order, amplitude, math.sqrt(u), tol) - delta

    lower, upper = 0.0, 2.0 * order + lam
    while excess(upper) >= 0:
        lower, upper = upper, 2.0 * upper
        if upper > _BRACKET_LIMIT:
            raise NumericalError(
                "threshold bracket exceeded overflow guard",
                operation="inv_marcum_q_threshold",
                partial=lower,
            )

    return optimize.bisect(excess, lower, upper, xtol=_INVERSION_XTOL, maxiter=500)


def _finish(result: np.ndarray) -> float | np.ndarray:
    result = np.asarray(result, dtype=float)
    return float(result) if result.ndim == 0 else result


def rayleigh_expectation(
    integrand: Integrand,
    scale: float,
    rule: QuadratureRule | None = None,
    breakpoints: Sequence[float] = (),
) -> float | np.ndarray:
    """
    E[f(γ)] for γ exponential with mean `scale` (the power of a Rayleigh channel).

    Computes ∫_0^∞ f(γ) (1/scale) e^{−γ/scale} dγ through u = γ/scale.

    Args:
        integrand (Integrand): f(γ); receives an array of nodes under a
            Gauss-Laguerre rule and a float under the adaptive rule.
        scale (float): Mean channel power, > 0.
        rule (QuadratureRule | None): Defaults to the adaptive-truncated rule.
        breakpoints (Sequence[float]): γ values where f changes quickly.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rule = rule or adaptive_rule()

    if rule.kind == QuadratureKind.GaussLaguerre:
        values = np.asarray(integrand(scale * rule.nodes), dtype=float)
        return _finish(np.tensordot(rule.weights, values, axes=(0, 0)))

    points = sorted({p / scale for p in breakpoints if 0 < p / scale < rule.cutoff})
    result, _ = integrate.quad_vec(
        lambda u: np.asarray(integrand(scale * u), dtype=float) * math.exp(-u),
        0.0,
        rule.cutoff,
        epsabs=rule.abs_tol,
        epsrel=rule.rel_tol,
        norm="max",
        points=points or None,
    )
    return _finish(result)


def _sum_density(s: float, scale1: float, scale2: float) -> float:
    """Density of γ1 + γ2 for independent exponentials with the given means."""
    big, small = max(scale1, scale2), min(scale1, scale2)
    if math.isclose(big, small, rel_tol=1e-9):
        mean = (big + small) / 2
        return s * math.exp(-s / mean) / mean**2
    return (
        -math.exp(-s / big) * math.expm1(-s * (1 / small - 1 / big)) / (big - small)
    )


def rayleigh_sum_expectation(
    integrand: Integrand,
    scale1: float,
    scale2: float,
    rule: QuadratureRule | None = None,
    breakpoints: Sequence[float] = (),
) -> float:
    """
    E[f(γ1 + γ2)] for independent exponential γ1, γ2 with means scale1, scale2.

    The adaptive rule integrates against the (hypoexponential) density of the
    sum; a Gauss-Laguerre rule evaluates the tensor product over both powers.
    """
    if scale1 <= 0 or scale2 <= 0:
        raise ValueError("scales must be positive")
    rule = rule or adaptive_rule()

    if rule.kind == QuadratureKind.GaussLaguerre:
        total = scale1 * rule.nodes[:, None] + scale2 * rule.nodes[None, :]
        values = np.asarray(integrand(total), dtype=float)
        return float(rule.weights @ values @ rule.weights)

    # the Gamma(2) tail needs a little more room than e^{-u}
    upper = max(scale1, scale2) * (rule.cutoff + math.log(rule.cutoff + 1) + 1)
    points = sorted({p for p in breakpoints if 0 < p < upper})
    result, _ = integrate.quad_vec(
        lambda s: float(integrand(s)) * _sum_density(s, scale1, scale2),
        0.0,
        upper,
        epsabs=rule.abs_tol,
        epsrel=rule.rel_tol,
        norm="max",
        points=points or None,
    )
    return float(result)


def rayleigh_double_expectation(
    integrand: Integrand,
    scale1: float,
    scale2: float,
    outer: QuadratureRule,
    inner: QuadratureRule | None = None,
    breakpoints: Sequence[float] = (),
) -> float:
    """
    E[f(γ1, γ2)] for independent exponential γ1, γ2.

    The outer expectation over γ1 uses the nodes of a Gauss-Laguerre rule; the
    inner one over γ2 is evaluated for all γ1 nodes at once, adaptively by
    default, so `integrand(γ1_nodes, γ2)` must broadcast over the γ1 array.

    Args:
        integrand (Integrand): f(γ1, γ2).
        scale1 (float): Mean of γ1.
        scale2 (float): Mean of γ2.
        outer (QuadratureRule): Gauss-Laguerre rule for γ1.
        inner (QuadratureRule | None): Rule for γ2, adaptive by default.
        breakpoints (Sequence[float]): γ2 values where f changes quickly.
    """
    if outer.kind != QuadratureKind.GaussLaguerre:
        raise ValueError("outer rule must be gauss-laguerre")

    gamma1 = scale1 * outer.nodes
    inner_values = rayleigh_expectation(
        lambda gamma2: integrand(gamma1, gamma2)
        if np.ndim(gamma2) == 0
        else integrand(gamma1[None, :], np.asarray(gamma2)[:, None]),
        scale2,
        inner,
        breakpoints,
    )
    return float(np.dot(outer.weights, inner_values))


def log_sum_exp(
    values: Sequence[float] | np.ndarray, axis: int | None = None
) -> float | np.ndarray:
    """log Σ e^{v_i}, shifted by the maximum so it neither over- nor underflows.

    With `axis` the reduction runs along that axis of an array.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("log_sum_exp needs at least one value")
    return _finish(special.logsumexp(values, axis=axis))
