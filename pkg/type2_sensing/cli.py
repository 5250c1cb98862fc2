import argparse
import io
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import ValidationError

from . import __version__
from .analysis import (
    calibrate_threshold,
    pf_ed1_closed,
    pf_ed2_exact,
    pf_ed2_linear,
    pf_type1,
)
from .common.enums import DetectorVariant, Estimation, PolicyKind
from .common.errors import CalibrationError, ConfigError, NumericalError
from .common.schemas import DetectorConfig, ExperimentConfig, RunManifest, TrialPlan
from .common.tools import measure
from .logger import setup_logging
from .montecarlo import MPT_DEFAULT_TRIALS, RocCurve, estimation_error_study, roc_sweep
from .scenario import build_scenario
from .specfun import central_chi2_sf, inv_marcum_q_threshold, marcum_q

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_UNREACHABLE = 4

ENERGY_DEFAULT_TRIALS = 10_000
VALIDATE_PASS_FRACTION = 0.9
VALIDATE_DEFAULT_PF = (0.9, 0.7, 0.5, 0.3, 0.2, 0.1, 0.05, 0.03, 0.02, 0.01)

# manifest entries that describe a run rather than configure it
_MANIFEST_ONLY = {"tool_version", "duration_s"}

PARAM_NAMES = {
    DetectorVariant.ED1: "t1",
    DetectorVariant.ED2Exact: "delta",
    DetectorVariant.ED2Linear: "t2",
    DetectorVariant.MPT: "log_t",
    DetectorVariant.Type1ED: "delta",
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """
    Read a flat key=value configuration.

    A CSV written by this tool is accepted too: its `# key=value` header lines
    are the configuration that produced it.

    Raises:
        ConfigError: The file is unreadable or a value is invalid.
    """
    if path is None:
        return ExperimentConfig()

    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config '{path}': {e}") from e

    if Path(path).suffix == ".csv":
        lines = text.splitlines()
        text = "\n".join(
            line[2:] for line in lines if line.startswith("# ") and "=" in line
        )

    values = {
        key: value
        for key, value in dotenv_values(stream=io.StringIO(text)).items()
        if value is not None and key not in _MANIFEST_ONLY
    }

    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(i) for i in error["loc"])
        raise ConfigError(f"invalid config key '{field}': {error['msg']}") from e


def _override(config: ExperimentConfig, **changes) -> ExperimentConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return config
    try:
        return ExperimentConfig.model_validate(
            {**config.model_dump(exclude_none=True), **changes}
        )
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(i) for i in error["loc"])
        raise ConfigError(f"invalid option '{field}': {error['msg']}") from e


def resolve_config(
    config: ExperimentConfig, detector: DetectorVariant = DetectorVariant.ED2Exact
) -> ExperimentConfig:
    """Fill the detector and the detector-dependent defaults (trials, modulation)."""
    changes = {}
    if config.detector is None:
        changes["detector"] = detector
    is_mpt = changes.get("detector", config.detector) == DetectorVariant.MPT
    if config.trials is None:
        changes["trials"] = MPT_DEFAULT_TRIALS if is_mpt else ENERGY_DEFAULT_TRIALS
    if config.modulation is None:
        changes["modulation"] = PolicyKind.Uniform.value if is_mpt else "qam4"
        if config.formats and not is_mpt:
            changes["modulation"] = PolicyKind.Uniform.value
    return config.model_copy(update=changes)


def _scenario(config: ExperimentConfig, simulation: bool = False):
    params = config.model_dump(
        include={
            "sir_db",
            "snr_db",
            "n_samples",
            "symbol_energy",
            "modulation",
            "formats",
        }
    )
    scenario = build_scenario(params)
    if simulation and config.corrupt_sigma_n_sq is not None:
        logger.warning(
            "simulation noise variance overridden",
            extra={
                "sigma_n_sq": scenario.sigma_n_sq,
                "corrupt_sigma_n_sq": config.corrupt_sigma_n_sq,
            },
        )
        scenario = scenario.model_copy(
            update={"sigma_n_sq": config.corrupt_sigma_n_sq}
        )
    return scenario


def _plan(config: ExperimentConfig, threshold_param: float | None = None) -> TrialPlan:
    variant = config.detector
    if threshold_param is None:
        threshold_param = 0.5 if variant.threshold_is_probability else 0.0
    try:
        detector = DetectorConfig(variant=variant, threshold_param=threshold_param)
    except ValidationError as e:
        raise ConfigError(f"invalid threshold_param: {e.errors()[0]['msg']}") from e
    return TrialPlan(
        scenario=_scenario(config, simulation=True),
        detector=detector,
        trials=config.trials,
        seed=config.seed,
        estimation=config.estimation,
    )


def thresholds_from_config(config: ExperimentConfig) -> list[float] | None:
    """Explicit list, or an even grid from threshold_count over [min, max]."""
    if config.thresholds is not None:
        if not config.thresholds:
            raise ConfigError("threshold list is empty")
        return [float(i) for i in config.thresholds]
    if config.threshold_count is not None:
        return np.linspace(
            config.threshold_min, config.threshold_max, config.threshold_count
        ).tolist()
    if config.threshold_param is not None:
        return [config.threshold_param]
    return None


def write_csv(
    output: str | Path, frame: pd.DataFrame, config: ExperimentConfig, duration: float
):
    manifest = RunManifest(
        config=config.model_dump(mode="json", exclude_none=True),
        tool_version=__version__,
        duration_s=duration,
    )
    with open(output, "w", newline="") as f:
        f.write("\n".join(manifest.header_lines()) + "\n")
        frame.to_csv(f, index=False, na_rep="", lineterminator="\n")
    logger.info("Results written", extra={"output": str(output), "rows": len(frame)})


def cmd_roc(args: argparse.Namespace) -> int:
    config = resolve_config(_override(load_config(args.config), workers=args.workers))
    with measure("roc") as timer:
        curve = roc_sweep(
            _plan(config),
            thresholds_from_config(config),
            workers=config.workers,
            analytic_scenario=_scenario(config),
        )
    write_csv(args.output, curve.to_frame(), config, timer.elapsed)
    return EXIT_OK


def _validation_table(curve: RocCurve) -> pd.DataFrame:
    frame = curve.to_frame()
    frame["pass"] = [
        p.pf_mc.covers(p.pf_analytic.value) and p.pd_mc.covers(p.pd_analytic.value)
        for p in curve.points
    ]
    return frame


def cmd_validate(args: argparse.Namespace) -> int:
    """Analytical against simulated rates; exit 1 when fewer than 90% of rows agree."""
    config = resolve_config(_override(load_config(args.config), workers=args.workers))
    if config.detector not in {DetectorVariant.ED1, DetectorVariant.ED2Linear}:
        raise ConfigError("validate supports ed1 and ed2_linear")
    if config.estimation != Estimation.Ideal:
        raise ConfigError("validate needs ideal estimation")

    analytic_scenario = _scenario(config)
    thresholds = thresholds_from_config(config)
    if thresholds is None:
        thresholds = [
            calibrate_threshold(config.detector, pf, analytic_scenario)
            for pf in VALIDATE_DEFAULT_PF
        ]

    with measure("validate") as timer:
        curve = roc_sweep(
            _plan(config),
            thresholds,
            workers=config.workers,
            analytic_scenario=analytic_scenario,
        )
    frame = _validation_table(curve)
    write_csv(args.output, frame, config, timer.elapsed)

    passed = float(frame["pass"].mean())
    logger.info(
        "Validation finished",
        extra={"variant": str(config.detector), "pass_fraction": passed},
    )
    print(f"pass_fraction={passed!r}")
    return EXIT_OK if passed >= VALIDATE_PASS_FRACTION else EXIT_VALIDATION_FAILED


def _analytic_pf(variant: DetectorVariant, value: float, scenario) -> float:
    match variant:
        case DetectorVariant.ED1:
            return pf_ed1_closed(value, scenario).value
        case DetectorVariant.ED2Linear:
            return pf_ed2_linear(value, scenario).value
        case DetectorVariant.Type1ED:
            return pf_type1(value).value
        case _:
            return pf_ed2_exact(value).value


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = resolve_config(
        _override(
            load_config(args.config), detector=args.detector, target_pf=args.target_pf
        )
    )
    scenario = _scenario(config)
    value = calibrate_threshold(config.detector, config.target_pf, scenario)
    print(f"{PARAM_NAMES[config.detector]}={value!r}")
    print(f"pf={_analytic_pf(config.detector, value, scenario)!r}")
    return EXIT_OK


SPECFUN = {
    "marcum_q": (lambda n, a, b: marcum_q(int(n), a, b), 3),
    "inv_marcum_q": (lambda n, lam, delta: inv_marcum_q_threshold(int(n), lam, delta), 3),
    "chi2_sf": (lambda n, t: central_chi2_sf(int(n), t), 2),
}


def cmd_specfun(args: argparse.Namespace) -> int:
    function, arity = SPECFUN[args.name]
    if len(args.values) != arity:
        raise ConfigError(f"{args.name} takes {arity} arguments")
    try:
        values = [float(i) for i in args.values]
        if not values[0].is_integer():
            raise ValueError("order must be an integer")
        result = function(*values)
    except ValueError as e:
        raise ConfigError(f"{args.name}: {e}") from e
    print(repr(float(result)))
    return EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    config = resolve_config(
        _override(load_config(args.config), workers=args.workers),
        DetectorVariant.ED2Linear,
    )
    plan = _plan(config, config.threshold_param)

    with measure("study") as timer:
        study = estimation_error_study(
            plan.scenario,
            plan.detector,
            plan.trials,
            plan.seed,
            workers=config.workers,
            target_pf=config.target_pf,
            thresholds=thresholds_from_config(config),
        )

    frames = []
    for name, curve in (
        ("ideal", study.ideal),
        ("nmse", study.nmse),
        ("nmse_short", study.nmse_short),
    ):
        frame = curve.to_frame()
        frame.insert(0, "curve", name)
        frames.append(frame)
    write_csv(args.output, pd.concat(frames, ignore_index=True), config, timer.elapsed)

    print(f"pd_ideal={study.pd_ideal.p_hat!r}")
    print(f"pd_nmse={study.pd_nmse.p_hat!r}")
    print(f"pd_nmse_short={study.pd_nmse_short.p_hat!r}")
    print(f"estimation_drop={study.estimation_drop!r}")
    print(f"samples_drop={study.samples_drop!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="type2-sensing",
        description="Type-2 in-band spectrum sensing: detectors, analytics and ROC runs.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--log-config",
        default="logging_config.yaml",
        help="logging dictConfig YAML file",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def experiment(name: str, handler, help_: str):
        sub = commands.add_parser(name, help=help_)
        sub.add_argument("config", help="key=value config file or a CSV written by this tool")
        sub.add_argument("output", help="CSV output path")
        sub.add_argument("--workers", type=int, default=None)
        sub.set_defaults(handler=handler)

    experiment("roc", cmd_roc, "ROC sweep with analytical and Monte-Carlo rates")
    experiment("validate", cmd_validate, "compare analytical and simulated rates")
    experiment("study", cmd_study, "channel-estimation error study for ED2")

    calibrate = commands.add_parser("calibrate", help="threshold for a target Pf")
    calibrate.add_argument("config", nargs="?", default=None)
    calibrate.add_argument("--detector", default=None)
    calibrate.add_argument("--target-pf", type=float, default=None)
    calibrate.set_defaults(handler=cmd_calibrate)

    specfun = commands.add_parser("specfun", help="evaluate a special function")
    specfun.add_argument("name", choices=sorted(SPECFUN))
    specfun.add_argument("values", nargs="*")
    specfun.set_defaults(handler=cmd_specfun)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logging(args.log_config)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("Invalid configuration", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as e:
        logger.error("Target unreachable", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except NumericalError as e:
        logger.error(
            "Numerical failure",
            extra={"operation": e.operation, "trial": e.trial, "bound": e.bound},
        )
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error("Invalid argument", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
