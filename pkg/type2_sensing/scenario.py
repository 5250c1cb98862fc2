from __future__ import annotations

import logging
from collections.abc import Mapping
from functools import cache
from typing import Any, NamedTuple

import numpy as np
from pydantic import ValidationError

from .common.enums import Hypothesis, HypothesisPair, ModulationName, PolicyKind
from .common.errors import ConfigError
from .common.schemas import ModulationPolicy, SensingScenario
from .common.tools import (
    Stream,
    circular_gaussian,
    db_to_linear,
    linear_to_db,
    trial_stream,
)

logger = logging.getLogger(__name__)

# fit range of the CRS-LS estimation-error model
NMSE_SINR_RANGE_DB = (0.0, 30.0)
NMSE_OFFSET = -0.26


class ModulationAlphabet(NamedTuple):
    """Unit-energy constellation; Ex is applied at synthesis."""

    name: ModulationName
    points: np.ndarray


class FadingDraw(NamedTuple):
    h1: complex  # serving channel
    h2: complex  # interfering channel
    h1_est: complex  # estimate of h1 seen by channel-aware detectors


class ObservationBlock(NamedTuple):
    samples: np.ndarray
    truth: Hypothesis
    fading: FadingDraw
    formats_used: tuple[ModulationName | None, ModulationName | None]


class BlockPair(NamedTuple):
    null: ObservationBlock
    alternative: ObservationBlock


@cache
def qam_alphabet(name: ModulationName) -> ModulationAlphabet:
    """
    Square QAM constellation normalized to unit mean power.

    Args:
        name (ModulationName): QAM4, QAM16 or QAM64.

    Returns:
        ModulationAlphabet: points ordered row by row over the I/Q grid.
    """
    side = int(np.sqrt(name.order))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    real, imag = np.meshgrid(levels, levels)
    points = (real + 1j * imag).ravel()
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    return ModulationAlphabet(name=name, points=points)


def build_scenario(params: Mapping[str, Any]) -> SensingScenario:
    """
    Build a validated scenario from raw parameters, possibly given in dB.

    Ratios are accepted as `sir_db` (σ1²/σ2²) and `snr_db` (σ1²/σn²) and
    converted with 10^(dB/10); σ1² is normalized to 1 unless `sigma1_sq` is
    given. Linear `sigma2_sq` / `sigma_n_sq` override the dB ratios.

    Args:
        params (Mapping[str, Any]): sir_db, snr_db, sigma1_sq, sigma2_sq,
            sigma_n_sq, symbol_energy, n_samples, modulation, formats.

    Raises:
        ConfigError: naming the invalid field.

    Returns:
        SensingScenario: The validated scenario.
    """
    params = dict(params)
    for key in ("sir_db", "snr_db"):
        if key in params and params[key] is not None:
            value = float(params[key])
            if not np.isfinite(value):
                raise ConfigError(f"invalid scenario parameter '{key}': must be finite")
            params[key] = value

    sigma1_sq = float(params.get("sigma1_sq", 1.0))
    data = {
        "sigma1_sq": sigma1_sq,
        "sigma2_sq": params.get("sigma2_sq"),
        "sigma_n_sq": params.get("sigma_n_sq"),
        "symbol_energy": params.get("symbol_energy", 1.0),
        "n_samples": params.get("n_samples", 142),
    }
    if data["sigma2_sq"] is None:
        data["sigma2_sq"] = sigma1_sq / db_to_linear(params.get("sir_db", 0.0))
    if data["sigma_n_sq"] is None:
        data["sigma_n_sq"] = sigma1_sq / db_to_linear(params.get("snr_db", 0.0))

    modulation = params.get("modulation")
    try:
        data["modulation_policy"] = parse_modulation(modulation, params.get("formats"))
    except ValueError as e:
        known = {"", PolicyKind.Uniform, *ModulationName}
        field = "formats" if modulation is None or modulation in known else "modulation"
        raise ConfigError(f"invalid scenario parameter '{field}': {e}") from e

    try:
        scenario = SensingScenario.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(i) for i in error["loc"])
        raise ConfigError(
            f"invalid scenario parameter '{field}': {error['msg']}"
        ) from e

    logger.debug("Scenario built", extra={"scenario": scenario.model_dump()})
    return scenario


def parse_modulation(
    modulation: str | ModulationName | None,
    formats: tuple[str, ...] | None = None,
) -> ModulationPolicy:
    """Map a config value (qam4|qam16|qam64|uniform) to a modulation policy."""
    if modulation is None or modulation == "":
        modulation = PolicyKind.Uniform if formats else ModulationName.QAM4

    if modulation == PolicyKind.Uniform:
        names = tuple(ModulationName(i) for i in formats) if formats else None
        return ModulationPolicy.uniform(names)

    return ModulationPolicy.fixed(ModulationName(modulation))


def policy_alphabets(policy: ModulationPolicy) -> list[ModulationAlphabet]:
    return [qam_alphabet(name) for name in policy.formats]


def draw_fading(scenario: SensingScenario, rng: np.random.Generator) -> FadingDraw:
    """Draw h1 ~ CN(0, σ1²) and h2 ~ CN(0, σ2²); the estimate starts ideal."""
    h1 = circular_gaussian(rng, scenario.sigma1_sq)
    h2 = circular_gaussian(rng, scenario.sigma2_sq)
    return FadingDraw(h1=h1, h2=h2, h1_est=h1)


def draw_symbols(
    alphabet: ModulationAlphabet, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n i.i.d. unit-energy symbols uniformly from the alphabet."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return alphabet.points[rng.integers(alphabet.points.size, size=n)]


def _draw_format(
    policy: ModulationPolicy, rng: np.random.Generator
) -> ModulationAlphabet:
    if policy.kind == PolicyKind.Fixed:
        return qam_alphabet(policy.formats[0])
    return qam_alphabet(policy.formats[rng.integers(len(policy.formats))])


def synthesize_block(
    scenario: SensingScenario,
    fading: FadingDraw,
    truth: Hypothesis,
    rng: np.random.Generator,
) -> ObservationBlock:
    """
    Synthesize N subcarrier-domain samples under one hypothesis.

    H0: n_i; H1: h2·x2i + n_i; H1': h1·x1i + n_i; H2: h1·x1i + h2·x2i + n_i,
    with n_i ~ CN(0, σn²) and symbols scaled to energy Ex. One format is drawn
    per block and per transmitter.

    Args:
        scenario (SensingScenario): Model parameters.
        fading (FadingDraw): Channel realization shared by the block.
        truth (Hypothesis): Ground-truth hypothesis.
        rng (np.random.Generator): Random stream for formats, symbols and noise.

    Returns:
        ObservationBlock: The synthesized block.
    """
    truth = Hypothesis(truth)
    n = scenario.n_samples
    amplitude = np.sqrt(scenario.symbol_energy)

    # fixed draw order: formats, serving symbols, interferer symbols, noise
    serving = _draw_format(scenario.modulation_policy, rng)
    interferer = _draw_format(scenario.modulation_policy, rng)

    samples = np.zeros(n, dtype=complex)
    if truth.has_serving:
        samples += fading.h1 * amplitude * draw_symbols(serving, n, rng)
    if truth.has_interferer:
        samples += fading.h2 * amplitude * draw_symbols(interferer, n, rng)
    samples += circular_gaussian(rng, scenario.sigma_n_sq, size=n)

    return ObservationBlock(
        samples=samples,
        truth=truth,
        fading=fading,
        formats_used=(
            serving.name if truth.has_serving else None,
            interferer.name if truth.has_interferer else None,
        ),
    )


def nmse_from_sinr(sinr_db: float) -> float:
    """
    Normalized MSE of the CRS-LS channel estimate as a function of SINR.

    log10(σ_nmse²) = −SINR(dB)/10 − 0.26, valid over 0..30 dB; inputs outside
    the fit range are clamped to its boundary and a warning is logged.
    """
    low, high = NMSE_SINR_RANGE_DB
    clamped = min(max(sinr_db, low), high)
    if clamped != sinr_db:
        logger.warning(
            "sinr outside nmse fit range, clamping",
            extra={"sinr_db": sinr_db, "clamped_db": clamped},
        )
    return 10.0 ** (-clamped / 10.0 + NMSE_OFFSET)


def sinr_for_hypothesis(scenario: SensingScenario, truth: Hypothesis) -> float:
    """SINR (dB) seen by serving-channel estimation under a hypothesis."""
    interference = scenario.sigma2_sq if truth == Hypothesis.H2 else 0.0
    return linear_to_db(scenario.sigma1_sq / (interference + scenario.sigma_n_sq))


def corrupt_channel_estimate(
    fading: FadingDraw,
    nmse: float,
    sigma1_sq: float,
    rng: np.random.Generator,
) -> FadingDraw:
    """
    Replace h1_est by h1 + e with e ~ CN(0, nmse·σ1²); h1 and h2 stay untouched.

    Args:
        fading (FadingDraw): True channels.
        nmse (float): Normalized mean-square error, >= 0.
        sigma1_sq (float): Serving channel variance the NMSE is normalized by.
        rng (np.random.Generator): Random stream for the error.
    """
    if nmse < 0:
        raise ValueError("nmse must be >= 0")
    if nmse == 0:
        return fading._replace(h1_est=fading.h1)
    return fading._replace(h1_est=fading.h1 + circular_gaussian(rng, nmse * sigma1_sq))


def synthesize_pair(
    scenario: SensingScenario,
    pair: HypothesisPair,
    seed: int,
    trial: int,
    nmse: tuple[float, float] | None = None,
) -> BlockPair:
    """
    Synthesize the null and the alternative block of one trial.

    Both blocks share one fading draw; every random quantity comes from its own
    stream keyed by (seed, trial, purpose), so estimation errors never shift
    the symbol or noise draws.

    Args:
        scenario (SensingScenario): Model parameters.
        pair (HypothesisPair): (H0, H1) or (H1', H2).
        seed (int): Experiment seed.
        trial (int): Trial index.
        nmse (tuple[float, float] | None): NMSE for the null and alternative
            estimates; None for ideal estimation.
    """
    fading = draw_fading(scenario, trial_stream(seed, trial, Stream.Fading))
    null_fading = alt_fading = fading
    if nmse is not None:
        null_fading = corrupt_channel_estimate(
            fading,
            nmse[0],
            scenario.sigma1_sq,
            trial_stream(seed, trial, Stream.EstimateNull),
        )
        alt_fading = corrupt_channel_estimate(
            fading,
            nmse[1],
            scenario.sigma1_sq,
            trial_stream(seed, trial, Stream.EstimateAlt),
        )

    return BlockPair(
        null=synthesize_block(
            scenario, null_fading, pair.null, trial_stream(seed, trial, Stream.Null)
        ),
        alternative=synthesize_block(
            scenario,
            alt_fading,
            pair.alternative,
            trial_stream(seed, trial, Stream.Alt),
        ),
    )
