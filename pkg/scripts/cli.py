"""pcsim command line.

    python -m scripts.cli <subcommand> [--config run.json] [--out DIR] [--seed N]
                          [--workers N] [--no-plots] [--quiet]

Exit codes: 0 success, 2 configuration error, 3 simulation error. Every run
writes ``manifest.json`` into the output directory, failed runs included.
"""
import argparse
import contextlib
import difflib
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent))
from config.settings import DEFAULT_WORKERS, DEFAULTS, FIGURES, OUTPUT_DIR, SHAPER_DEFAULTS, VERSION
from scripts import build_report
from scripts.channel import Constraint, calibration_waveform
from scripts.dsp import PulseShaper, ShaperKind, taps_for
from scripts.errors import ConfigError, PcsError, SimulationError
from scripts.experiments import (
    SAME_MODULATION,
    SAME_ROLLOFF,
    SweepConfig,
    delta_relation_series,
    expand_grid,
    expand_modulations,
    fit_series,
    measure_papr,
    ngmi_sweep,
    rate_adaptation_curve,
    records_frame,
    scenario,
    sweep_thresholds,
)
from scripts.figures import PlotSpec, run_figure
from scripts.generate_charts import PLOTS_FILE
from scripts.metrics import ccdf, papr_at_clip, papr_deterministic
from scripts.outputs import COLUMNS, MANIFEST_NAME, RunManifest
from scripts.plots import render_svg
from scripts.source import average_energy, distribution_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3

SHAPER_KEYS = ("kind", "rolloff", "span", "oversampling", "tilt_db", "tilt_edge")
DELTA_MODES = (SAME_MODULATION, SAME_ROLLOFF, "both")


def _number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _integer(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _grid(value) -> bool:
    expand_grid(value)
    return True


def _shaper_dict(value) -> bool:
    if not isinstance(value, dict):
        return False
    _reject_unknown(value, SHAPER_KEYS, "shaper")
    return True


# key -> (check, default, constraint description)
SCHEMA = {
    "modulations": (lambda v: isinstance(v, list) and len(v) > 0, None, "a non-empty list"),
    "family": (lambda v: v in ("uniform", "mb", "as-mb", "r-mb"), None, "one of uniform, mb, as-mb, r-mb"),
    "order": (lambda v: _integer(v) and v >= 2, None, "an integer M ≥ 2"),
    "entropy": (_number, None, "a number in bit/symbol"),
    "entropies": (_grid, None, "a list or {start, stop, step}"),
    "polarity": (lambda v: v in ("bipolar", "unipolar"), None, "bipolar or unipolar"),
    "bias": (_number, None, "a number ≥ M-1"),
    "shaper": (_shaper_dict, {}, "an object with kind, rolloff, span, oversampling, tilt_db, tilt_edge"),
    "constraint": (lambda v: v in ("apc", "ppc", "ppc-clip"), "apc", "apc, ppc or ppc-clip"),
    "quality_grid_db": (_grid, None, "a list or {start, stop, step} in dB"),
    "search_grid_db": (_grid, DEFAULTS["search_grid_db"], "a list or {start, stop, step} in dB"),
    "ngmi_threshold": (lambda v: _number(v) and 0 < v < 1, DEFAULTS["ngmi_threshold"], "in (0, 1)"),
    "code_rate": (lambda v: _number(v) and 0 < v <= 1, DEFAULTS["code_rate"], "in (0, 1]"),
    "samples_per_point": (lambda v: _integer(v) and v >= 10_000, DEFAULTS["samples_per_point"], "an integer ≥ 10000"),
    "seed": (lambda v: _integer(v) and v >= 0, DEFAULTS["seed"], "a non-negative integer"),
    "clip_ratio": (lambda v: _number(v) and 0 < v <= 0.1, DEFAULTS["clip_ratio"], "in (0, 0.1]"),
    "calibration_samples": (lambda v: _integer(v) and v >= 1, DEFAULTS["calibration_samples"], "a positive integer"),
    "equal_average_power": (lambda v: isinstance(v, bool), False, "true or false"),
    "entropy_step": (lambda v: _number(v) and 0 < v <= 0.05, DEFAULTS["entropy_step"], "in (0, 0.05]"),
    "psnr_ref_db": (_number, DEFAULTS["psnr_ref_db"], "a number in dB"),
    "power": (lambda v: _number(v) and v > 0, 1.0, "a positive number"),
    "rolloffs": (lambda v: isinstance(v, list) and all(r is None or _number(r) for r in v), None,
                 "a list of roll-offs (null for no filter)"),
    "delta_mode": (lambda v: v in DELTA_MODES, "both", " or ".join(DELTA_MODES)),
    "scenario": (lambda v: v in (1, 2, 3), None, "1, 2 or 3"),
    "figure": (lambda v: isinstance(v, str) and v in FIGURES, None, f"one of {', '.join(FIGURES)}"),
    "shaping_rate_loss": (lambda v: _number(v) and v >= 0, 0.0, "a non-negative number"),
}


def _reject_unknown(data: dict, known, where: str) -> None:
    for key in data:
        if key not in known:
            close = difflib.get_close_matches(key, list(known), n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown {where} key {key!r}{hint}")


def validate_config(data: dict) -> dict:
    """Check every key against SCHEMA and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(data, SCHEMA, "config")

    config = {}
    for key, (check, default, expected) in SCHEMA.items():
        if key not in data:
            config[key] = default
            continue
        value = data[key]
        try:
            ok = check(value)
        except PcsError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if not ok:
            raise ConfigError(f"{key} must be {expected}, got {value!r}")
        config[key] = value

    if config["modulations"] is None and config["family"] is not None:
        if config["order"] is None:
            raise ConfigError("family given without order")
        single = {"family": config["family"], "order": config["order"]}
        for key in ("entropy", "entropies", "polarity", "bias"):
            if config[key] is not None:
                single[key] = config[key]
        config["modulations"] = [single]
    if config["modulations"] is not None:
        expand_modulations(config["modulations"])
    return config


def parse_config(path: Path | None) -> dict:
    """Load a JSON run configuration; ``None`` gives the defaults."""
    if path is None:
        return validate_config({})
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return validate_config(data)


def _shaper(config: dict) -> PulseShaper:
    settings = {"kind": "none", **SHAPER_DEFAULTS, **(config["shaper"] or {})}
    return PulseShaper(**settings)


def _modulations(config: dict):
    if config["modulations"] is None:
        raise ConfigError("no modulation configured; set modulations or family/order")
    return expand_modulations(config["modulations"])


def _require(config: dict, key: str, command: str):
    if config[key] is None:
        raise ConfigError(f"{command} needs {key}")
    return config[key]


def sweep_config(config: dict) -> SweepConfig:
    return SweepConfig(
        modulations=_modulations(config),
        quality_grid_db=_require(config, "quality_grid_db", "sweep"),
        constraint=Constraint(config["constraint"]),
        shaper=_shaper(config),
        ngmi_threshold=config["ngmi_threshold"],
        code_rate=config["code_rate"],
        samples_per_point=config["samples_per_point"],
        seed=config["seed"],
        clip_ratio=config["clip_ratio"],
        calibration_samples=config["calibration_samples"],
        equal_average_power=config["equal_average_power"],
        power=config["power"],
    )


class Emitter:
    """Writes tables, plots and sidecars for one command through the manifest."""

    def __init__(self, manifest: RunManifest, plots: bool):
        self.manifest = manifest
        self.plots = plots
        self.specs: list[dict] = []

    def table(self, frame: pd.DataFrame, name: str, schema: str | None = None) -> None:
        self.manifest.csv(frame, f"{name}.csv", schema)
        print(f"  {name}.csv ({len(frame)} rows)")

    def plot(self, frame: pd.DataFrame, csv_name: str, spec: PlotSpec) -> None:
        self.specs.append({**asdict(spec), "csv": f"{csv_name}.csv"})
        if self.plots:
            path = render_svg(frame, spec, self.manifest.path_for(f"{spec.name}.svg"))
            self.manifest.add_output(path)

    def summary(self, data: dict) -> None:
        self.manifest.json(data, build_report.SUMMARY_FILE)

    def finish(self) -> None:
        if self.specs:
            self.manifest.json(self.specs, PLOTS_FILE)


def cmd_dist(args, config, out: Emitter) -> None:
    frames, summary = [], {}
    for modulation in _modulations(config):
        source = modulation.source()
        frames.append(distribution_table(source).assign(
            modulation=modulation.label, entropy=source.entropy, **{"lambda": source.distribution.lam},
        ))
        summary[modulation.label] = {
            "entropy": source.entropy,
            "lambda": source.distribution.lam,
            "average_energy": average_energy(source),
            "papr_db": papr_deterministic(source).papr_db,
        }
    out.table(pd.concat(frames, ignore_index=True), "dist", "dist")
    out.summary(summary)


def cmd_taps(args, config, out: Emitter) -> None:
    shaper = _shaper(config)
    h = taps_for(shaper)
    n = len(h) - 1
    frame = pd.DataFrame({
        "index": np.arange(len(h)),
        "time": (np.arange(len(h)) - n / 2) / shaper.oversampling,
        "tap": h,
        "shaper": shaper.label,
    })
    out.table(frame, "taps", "taps")
    out.plot(frame, "taps", PlotSpec("taps", "taps", "time", "tap", "shaper", "Filter taps",
                                     "time (symbols)", "tap"))
    out.summary({"shaper": shaper.to_dict(), "taps": len(h), "energy": float(np.sum(h * h))})


def cmd_papr(args, config, out: Emitter) -> None:
    shaper = _shaper(config)
    rows = []
    for modulation in _modulations(config):
        source = modulation.source()
        reports = [("deterministic", papr_deterministic(source))]
        if shaper.kind is ShaperKind.NONE:
            reports.append((shaper.label, papr_at_clip(source, config["clip_ratio"])))
        else:
            reports.append((shaper.label, measure_papr(
                source, shaper, config["clip_ratio"], config["calibration_samples"], config["seed"]
            )))
        for label, report in reports:
            rows.append({"signal": modulation.label, "shaper": label, **report.to_dict()})
    out.table(pd.DataFrame(rows), "papr", "papr")


def cmd_ccdf(args, config, out: Emitter) -> None:
    shaper = _shaper(config)
    frames = []
    for modulation in _modulations(config):
        source = modulation.source()
        if shaper.kind is ShaperKind.NONE:
            table = ccdf(source)
        else:
            waveform = calibration_waveform(source, shaper, config["calibration_samples"], config["seed"])
            table = ccdf(waveform, min_clip_ratio=config["clip_ratio"])
        frames.append(table.to_frame().assign(modulation=modulation.label, shaper=shaper.label, mode=table.mode.value))
    frame = pd.concat(frames, ignore_index=True)
    out.table(frame, "ccdf", "ccdf")
    out.plot(frame, "ccdf", PlotSpec("ccdf", "ccdf", "power_db", "ccdf", "modulation", "Power CCDF",
                                     "power / mean power (dB)", "Pr(|X|² ≥ x)", logy=True))


def cmd_sweep(args, config, out: Emitter) -> None:
    cfg = sweep_config(config)
    frame = records_frame(ngmi_sweep(cfg, args.workers))
    out.table(frame, "sweep", "sweep")
    xlabel = "SNR (dB)" if cfg.constraint is Constraint.APC else "PSNR (dB)"
    out.plot(frame, "sweep", PlotSpec("sweep", "sweep", "quality_db", "ngmi", "modulation", "NGMI sweep", xlabel, "NGMI"))
    failed = int(frame["error"].notna().sum())
    out.summary({"points": len(frame), "failed_points": failed})


def cmd_threshold(args, config, out: Emitter) -> None:
    cfg = sweep_config({**config, "quality_grid_db": config["quality_grid_db"] or config["search_grid_db"]})
    for modulation in cfg.modulations:
        modulation.source()
    frame = sweep_thresholds(cfg, config["search_grid_db"], workers=args.workers)
    out.table(frame, "threshold", "threshold")
    failed = frame[frame["error"].notna()]
    if len(failed):
        raise SimulationError("; ".join(f"{m}: {e}" for m, e in zip(failed["modulation"], failed["error"])))


def cmd_rate_adapt(args, config, out: Emitter) -> None:
    grid = _require(config, "quality_grid_db", "rate-adapt")
    frames, thresholds = [], []
    for modulation in _modulations(config):
        curve = rate_adaptation_curve(
            modulation.family, modulation.order, grid,
            constraint=Constraint(config["constraint"]),
            shaper=_shaper(config),
            ngmi_threshold=config["ngmi_threshold"],
            code_rate=config["code_rate"],
            entropy_step=config["entropy_step"],
            samples_per_point=config["samples_per_point"],
            seed=config["seed"],
            polarity=modulation.polarity,
            bias=modulation.bias,
            clip_ratio=config["clip_ratio"],
            calibration_samples=config["calibration_samples"],
            shaping_rate_loss=config["shaping_rate_loss"],
        )
        label = f"{modulation.family.display} PAM-{modulation.order}"
        frames.append(curve.table.assign(modulation=label))
        thresholds.append(curve.thresholds.assign(modulation=label))
    frame = pd.concat(frames, ignore_index=True)
    out.table(frame, "rate_adaptation", "rate_adaptation")
    out.table(pd.concat(thresholds, ignore_index=True), "rate_thresholds")
    xlabel = "SNR (dB)" if config["constraint"] == "apc" else "PSNR (dB)"
    out.plot(frame, "rate_adaptation", PlotSpec("rate_adaptation", "rate_adaptation", "quality_db", "air",
                                                "modulation", "Rate adaptation", xlabel, "AIR (bit/symbol)"))


def cmd_delta_check(args, config, out: Emitter) -> None:
    rolloffs = _require(config, "rolloffs", "delta-check")
    modes = (SAME_MODULATION, SAME_ROLLOFF) if config["delta_mode"] == "both" else (config["delta_mode"],)
    shaper = config["shaper"] or {}
    kwargs = {
        "ngmi_threshold": config["ngmi_threshold"],
        "search_grid_db": config["search_grid_db"],
        "samples_per_point": config["samples_per_point"],
        "seed": config["seed"],
        "clip_ratio": config["clip_ratio"],
        "calibration_samples": config["calibration_samples"],
        "span": shaper.get("span"),
        "oversampling": shaper.get("oversampling"),
    }
    series = pd.concat(
        [delta_relation_series(mode, _modulations(config), rolloffs, **kwargs).assign(mode=mode) for mode in modes],
        ignore_index=True,
    )
    out.table(series, "delta", "delta")
    fits = fit_series(series)
    out.table(fits, "delta_fit", "delta_fit")
    out.plot(series, "delta", PlotSpec("delta", "delta", "delta_papr_db", "delta_psnr_star_db", "series",
                                       "ΔPSNR* vs ΔPAPR", "ΔPAPR (dB)", "ΔPSNR* (dB)", markers=True))
    out.summary({row["series"]: {"slope": row["slope"], "intercept": row["intercept"]} for _, row in fits.iterrows()})


def cmd_scenario(args, config, out: Emitter) -> None:
    scenario_id = args.id if args.id is not None else _require(config, "scenario", "scenario")
    overrides = {
        key: config[key]
        for key in ("ngmi_threshold", "code_rate", "samples_per_point", "seed", "clip_ratio", "calibration_samples")
    }
    if config["shaper"]:
        overrides["shaper"] = config["shaper"]
    if config["modulations"] is not None:
        overrides["modulations"] = config["modulations"]
    if config["quality_grid_db"] is not None:
        overrides["quality_grid_db"] = config["quality_grid_db"]
    report = scenario(scenario_id, overrides, args.workers)
    frame = records_frame(report.records)
    out.table(frame, "sweep", "sweep")
    out.table(report.thresholds, "threshold", "threshold")
    out.table(report.papr_table, "papr_table")
    out.plot(frame, "sweep", PlotSpec("scenario_ngmi", "sweep", "psnr_db", "ngmi", "modulation",
                                      f"Scenario {scenario_id}: {report.name}", "PSNR (dB)", "NGMI"))
    out.summary(report.summary())


def cmd_fig(args, config, out: Emitter) -> None:
    name = args.name or _require(config, "figure", "fig")
    overrides = {
        key: config[key]
        for key in ("samples_per_point", "seed", "clip_ratio", "calibration_samples", "ngmi_threshold",
                    "code_rate", "entropy_step", "psnr_ref_db", "search_grid_db")
    }
    for key in ("modulations", "quality_grid_db", "rolloffs"):
        if config[key] is not None:
            overrides[key] = config[key]
    if config["entropies"] is not None:
        overrides["entropies"] = config["entropies"]
    result = run_figure(name, overrides, args.workers)
    for table_name, frame in result.tables.items():
        if table_name == "ngmi":
            # pinned leading columns, figure-specific ones after
            lead = COLUMNS["fig_ngmi"]
            frame = frame[lead + [c for c in frame.columns if c not in lead]]
        out.table(frame, f"fig{result.name}_{table_name}")
    for spec in result.plots:
        csv_name = f"fig{result.name}_{spec.table}"
        out.plot(result.tables[spec.table], csv_name, PlotSpec(**{**asdict(spec), "name": f"fig{result.name}_{spec.name}"}))
    out.summary(result.summary)


def cmd_report(args, config, out: Emitter) -> None:
    run_dir = Path(args.run_dir).resolve()
    if not (run_dir / MANIFEST_NAME).exists():
        raise ConfigError(f"{run_dir} has no {MANIFEST_NAME}; not a run directory")
    build_report.build(run_dir, out.manifest.out_dir)
    out.manifest.add_output(out.manifest.path_for(build_report.REPORT_NAME))


COMMANDS = {
    "dist": (cmd_dist, "Symbol distribution, entropy and λ for the configured modulations"),
    "taps": (cmd_taps, "Dump the configured RC/RRC filter taps"),
    "papr": (cmd_papr, "Deterministic and clip-ratio PAPR"),
    "ccdf": (cmd_ccdf, "Power CCDF of symbols or shaped waveform"),
    "sweep": (cmd_sweep, "NGMI sweep over modulations and a quality grid"),
    "threshold": (cmd_threshold, "SNR*/PSNR* at the NGMI threshold"),
    "rate-adapt": (cmd_rate_adapt, "Rate-adaptation (AIR) curve"),
    "delta-check": (cmd_delta_check, "Fit ΔPSNR* against ΔPAPR across roll-offs"),
    "scenario": (cmd_scenario, "Run a pre-emphasis scenario (1, 2 or 3)"),
    "fig": (cmd_fig, "Reproduce a figure preset"),
    "report": (cmd_report, "Build an HTML report for a run directory"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: $PCSIM_OUT_DIR/<command>)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--workers", type=int, default=DEFAULT_WORKERS, help="sweep worker processes")
    common.add_argument("--no-plots", action="store_true", help="skip SVG plots")
    common.add_argument("--quiet", action="store_true", help="no progress output")

    parser = argparse.ArgumentParser(prog="pcsim", description="PCS PAM simulation under power constraints")
    parser.add_argument("--version", action="version", version=f"pcsim {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "scenario":
            p.add_argument("id", nargs="?", type=int, choices=(1, 2, 3))
        elif name == "fig":
            p.add_argument("name", nargs="?", choices=sorted(FIGURES))
        elif name == "report":
            p.add_argument("run_dir", type=Path)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = (args.out or OUTPUT_DIR / args.command).resolve()
    if args.command == "report":
        run_dir = args.run_dir.resolve()
        if args.out is None:
            out_dir = run_dir / "report"
        elif out_dir == run_dir:
            # the report manifest would replace the run manifest
            print("ERROR: report output must not be the run directory itself", file=sys.stderr)
            return EXIT_CONFIG
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=args.command, argv=list(argv if argv is not None else sys.argv[1:]),
                           config={}, seed=None, out_dir=out_dir)
    emitter = Emitter(manifest, plots=not args.no_plots)

    code = EXIT_OK
    with contextlib.redirect_stdout(io.StringIO()) if args.quiet else contextlib.nullcontext():
        try:
            config = parse_config(args.config)
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError(f"seed must be non-negative, got {args.seed}")
                config["seed"] = args.seed
            if args.workers < 1:
                raise ConfigError(f"workers must be at least 1, got {args.workers}")
            manifest.config = config
            manifest.seed = config["seed"]

            print("=" * 50)
            print(f"pcsim {args.command}")
            print("=" * 50)
            handler, _ = COMMANDS[args.command]
            handler(args, config, emitter)
            emitter.finish()
            print(f"Results written to {out_dir}")
        except ConfigError as exc:
            code = EXIT_CONFIG
            manifest.fail(exc)
            print(f"ERROR: {exc}", file=sys.stderr)
        except SimulationError as exc:
            code = EXIT_SIMULATION
            manifest.fail(exc)
            print(f"ERROR: {exc}", file=sys.stderr)
        except Exception as exc:
            manifest.fail(exc)
            print(f"ERROR: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
            raise
        finally:
            manifest.write()
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
