"""Figure presets: each turns a preset from config/presets.json into result tables and plot descriptions."""
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from config.settings import DEFAULTS, FIGURES, figure_preset
from scripts.channel import Constraint, calibration_waveform
from scripts.dsp import PulseShaper, ShaperKind, excess_kurtosis, no_shaper, waveform_histogram
from scripts.errors import InvalidParameterError
from scripts.experiments import (
    SAME_MODULATION,
    SAME_ROLLOFF,
    SweepConfig,
    delta_relation_series,
    distance_vs_entropy,
    expand_modulations,
    fit_series,
    intensity_vs_entropy,
    measure_papr,
    ngmi_sweep,
    papr_vs_entropy,
    rate_adaptation_curve,
    records_frame,
)
from scripts.metrics import air, ccdf, gaussian_ccdf

# run-level keys a caller may override on any preset
RUN_KEYS = (
    "samples_per_point",
    "seed",
    "clip_ratio",
    "calibration_samples",
    "ngmi_threshold",
    "code_rate",
    "entropy_step",
    "psnr_ref_db",
    "search_grid_db",
)


@dataclass(frozen=True)
class PlotSpec:
    name: str
    table: str
    x: str
    y: str
    group: str
    title: str
    xlabel: str
    ylabel: str
    logy: bool = False
    markers: bool = False


@dataclass(frozen=True, eq=False)
class FigureResult:
    name: str
    kind: str
    tables: dict[str, pd.DataFrame]
    plots: list[PlotSpec]
    summary: dict = field(default_factory=dict)


def _run_settings(preset: dict) -> dict:
    return {key: preset.get(key, DEFAULTS[key]) for key in RUN_KEYS}


def _sweep_kwargs(run: dict) -> dict:
    return {
        "ngmi_threshold": float(run["ngmi_threshold"]),
        "code_rate": float(run["code_rate"]),
        "samples_per_point": int(run["samples_per_point"]),
        "seed": int(run["seed"]),
        "clip_ratio": float(run["clip_ratio"]),
        "calibration_samples": int(run["calibration_samples"]),
    }


def _shaper(rolloff) -> PulseShaper:
    return no_shaper() if rolloff is None else PulseShaper(ShaperKind.RRC, float(rolloff))


def _apc_curves(preset: dict, run: dict, workers: int) -> FigureResult:
    kwargs = _sweep_kwargs(run)
    config = SweepConfig(
        modulations=preset["modulations"],
        quality_grid_db=preset["quality_grid_db"],
        constraint=Constraint.APC,
        **kwargs,
    )
    ngmi = records_frame(ngmi_sweep(config, workers))

    print("  Rate adaptation (APC)")
    curves, frames = {}, []
    for family, order in ((preset["family"], preset["order"]), ("uniform", 4)):
        curve = rate_adaptation_curve(
            family, order, config.quality_grid_db, Constraint.APC,
            entropy_step=float(run["entropy_step"]),
            **{k: kwargs[k] for k in ("ngmi_threshold", "code_rate", "samples_per_point", "seed")},
        )
        label = f"{family} PAM-{order}"
        curves[label] = curve
        frames.append(curve.table.assign(modulation=label).rename(columns={"quality_db": "snr_db"}))

    # shaping gain read where uniform PAM-4 just meets the threshold
    pcs, ref = (curves[label] for label in curves)
    code_rate = kwargs["code_rate"]
    ref_snr = ref.quality_at(2.0)
    ref_air = air(2.0, code_rate, 4)
    summary = {"reference_snr_star_db": ref_snr, "air_gain_bits": float("nan"), "snr_gain_db": float("nan")}
    if math.isfinite(ref_snr):
        entropy = pcs.entropy_at(ref_snr)
        if math.isfinite(entropy):
            summary["air_gain_bits"] = air(entropy, code_rate, preset["order"]) - ref_air
        same_rate_entropy = ref_air + (1 - code_rate) * math.log2(preset["order"])
        summary["snr_gain_db"] = ref_snr - pcs.quality_at(same_rate_entropy)

    return FigureResult(
        name="",
        kind="apc_curves",
        tables={"ngmi": ngmi, "rate_adaptation": pd.concat(frames, ignore_index=True)},
        plots=[
            PlotSpec("ngmi", "ngmi", "snr_db", "ngmi", "modulation", "NGMI under APC", "SNR (dB)", "NGMI"),
            PlotSpec("air", "rate_adaptation", "snr_db", "air", "modulation", "Rate adaptation",
                     "SNR (dB)", "AIR (bit/symbol)"),
        ],
        summary=summary,
    )


def _ppc_curves(preset: dict, run: dict, workers: int) -> FigureResult:
    config = SweepConfig(
        modulations=preset["modulations"],
        quality_grid_db=preset["quality_grid_db"],
        constraint=Constraint.PPC,
        **_sweep_kwargs(run),
    )
    ngmi = records_frame(ngmi_sweep(config, workers))
    shaped = ngmi[(ngmi["family"] != "uniform") & ngmi["error"].isna()]
    spread = shaped.groupby("psnr_db")["ngmi"].agg(lambda v: v.max() - v.min())
    return FigureResult(
        name="",
        kind="ppc_curves",
        tables={"ngmi": ngmi},
        plots=[PlotSpec("ngmi", "ngmi", "psnr_db", "ngmi", "modulation", "NGMI under PPC", "PSNR (dB)", "NGMI")],
        summary={"max_entropy_spread": float(spread.max()) if len(spread) else float("nan")},
    )


def _distance(preset: dict, run: dict, workers: int) -> FigureResult:
    common = {
        "family": preset["family"],
        "order": preset["order"],
        "entropies": preset["entropies"],
        "bias": preset.get("bias"),
        "clip_ratio": float(run["clip_ratio"]),
        "calibration_samples": int(run["calibration_samples"]),
        "seed": int(run["seed"]),
    }
    frames = []
    if "apc_power" in preset:
        frames.append(distance_vs_entropy(constraint=Constraint.APC, power=float(preset["apc_power"]), **common))
    if "rolloffs" in preset:
        for rolloff in preset["rolloffs"]:
            print(f"  Calibrating {_shaper(rolloff).label}")
            frames.append(distance_vs_entropy(
                constraint=Constraint.PPC_CLIP, power=float(preset["ppc_power"]), shaper=_shaper(rolloff), **common
            ))
    elif "ppc_power" in preset:
        frames.append(distance_vs_entropy(constraint=Constraint.PPC, power=float(preset["ppc_power"]), **common))
    table = pd.concat(frames, ignore_index=True)
    table["curve"] = table["constraint"].str.upper() + " " + table["shaper"]
    return FigureResult(
        name="",
        kind="distance",
        tables={"distance": table},
        plots=[PlotSpec("distance", "distance", "entropy", "min_distance", "curve",
                        "Minimum Euclidean distance", "H(X) (bit/symbol)", "2Δ", markers=True)],
    )


def _papr_entropy(preset: dict, run: dict, workers: int) -> FigureResult:
    frames = []
    for rolloff in preset.get("rolloffs", [None]):
        shaper = _shaper(rolloff)
        print(f"  PAPR vs entropy: {shaper.label}")
        frames.append(papr_vs_entropy(
            preset["family"], preset["order"], preset["entropies"], shaper,
            clip_ratio=float(run["clip_ratio"]),
            psnr_ref_db=float(run["psnr_ref_db"]),
            calibration_samples=int(run["calibration_samples"]),
            seed=int(run["seed"]),
            bias=preset.get("bias"),
        ))
    table = pd.concat(frames, ignore_index=True)
    return FigureResult(
        name="",
        kind="papr_entropy",
        tables={"papr_entropy": table},
        plots=[
            PlotSpec("papr", "papr_entropy", "entropy", "papr_db", "shaper", "PAPR vs entropy",
                     "H(X) (bit/symbol)", "PAPR (dB)"),
            PlotSpec("snr", "papr_entropy", "entropy", "snr_db", "shaper",
                     f"SNR at PSNR = {float(run['psnr_ref_db']):g} dB", "H(X) (bit/symbol)", "SNR (dB)"),
        ],
    )


def _intensity(preset: dict, run: dict, workers: int) -> FigureResult:
    table = intensity_vs_entropy(preset["order"], preset["entropies"], preset.get("bias"))
    return FigureResult(
        name="",
        kind="intensity",
        tables={"intensity": table},
        plots=[PlotSpec("intensity", "intensity", "entropy", "mean_intensity", "family",
                        "Mean intensity vs entropy", "H(X) (bit/symbol)", "E[X]")],
    )


def _pdf_ccdf(preset: dict, run: dict, workers: int) -> FigureResult:
    samples = int(run["calibration_samples"])
    seed = int(run["seed"])
    clip = float(run["clip_ratio"])
    pdf_frames, ccdf_frames, stats_rows = [], [], []
    for modulation in expand_modulations(preset["modulations"]):
        source = modulation.source()
        for rolloff in preset["rolloffs"]:
            shaper = _shaper(rolloff)
            print(f"  {modulation.label}, {shaper.label}")
            waveform = calibration_waveform(source, shaper, samples, seed)
            labels = {"modulation": modulation.label, "shaper": shaper.label}
            pdf_frames.append(waveform_histogram(waveform, bins=int(preset.get("bins", 241))).assign(**labels))
            table = ccdf(source) if shaper.kind is ShaperKind.NONE else ccdf(waveform)
            ccdf_frames.append(table.to_frame().assign(**labels))
            stats_rows.append({
                **labels,
                "papr_db": measure_papr(source, shaper, clip, samples, seed).papr_db,
                "excess_kurtosis": excess_kurtosis(waveform),
            })

    reference_db = np.linspace(-20.0, 12.0, 321)
    ccdf_frames.append(pd.DataFrame({
        "power": 10 ** (reference_db / 10),
        "power_db": reference_db,
        "ccdf": gaussian_ccdf(10 ** (reference_db / 10), 1.0),
        "modulation": "Gaussian",
        "shaper": "reference",
    }))
    pdf = pd.concat(pdf_frames, ignore_index=True)
    pdf["curve"] = pdf["modulation"] + " / " + pdf["shaper"]
    tail = pd.concat(ccdf_frames, ignore_index=True)
    tail["curve"] = tail["modulation"] + " / " + tail["shaper"]
    return FigureResult(
        name="",
        kind="pdf_ccdf",
        tables={"pdf": pdf, "ccdf": tail, "waveform_stats": pd.DataFrame(stats_rows)},
        plots=[
            PlotSpec("pdf", "pdf", "amplitude", "density", "curve", "Amplitude PDF", "normalized amplitude", "PDF"),
            PlotSpec("ccdf", "ccdf", "power_db", "ccdf", "curve", "Power CCDF",
                     "power / mean power (dB)", "Pr(|X|² ≥ x)", logy=True),
        ],
    )


def _rolloff_comparison(preset: dict, run: dict, workers: int) -> FigureResult:
    kwargs = _sweep_kwargs(run)
    frames = []
    for rolloff in preset["rolloffs"]:
        shaper = _shaper(rolloff)
        print(f"  Sweep with {shaper.label}")
        config = SweepConfig(
            modulations=preset["modulations"],
            quality_grid_db=preset["quality_grid_db"],
            constraint=Constraint.PPC_CLIP,
            shaper=shaper,
            **kwargs,
        )
        frames.append(records_frame(ngmi_sweep(config, workers)))
    ngmi = pd.concat(frames, ignore_index=True)
    ngmi["curve"] = ngmi["modulation"] + " / " + ngmi["shaper"]

    rolloffs = [r for r in preset["rolloffs"] if r is not None]
    series_kwargs = {
        "ngmi_threshold": kwargs["ngmi_threshold"],
        "search_grid_db": run["search_grid_db"],
        "samples_per_point": kwargs["samples_per_point"],
        "seed": kwargs["seed"],
        "clip_ratio": kwargs["clip_ratio"],
        "calibration_samples": kwargs["calibration_samples"],
    }
    print("  Delta relations")
    delta = pd.concat([
        delta_relation_series(SAME_MODULATION, preset["modulations"], rolloffs, **series_kwargs).assign(mode=SAME_MODULATION),
        delta_relation_series(SAME_ROLLOFF, preset["modulations"], rolloffs, **series_kwargs).assign(mode=SAME_ROLLOFF),
    ], ignore_index=True)
    fits = fit_series(delta)
    return FigureResult(
        name="",
        kind="rolloff_comparison",
        tables={"ngmi": ngmi, "delta": delta, "fits": fits},
        plots=[
            PlotSpec("ngmi", "ngmi", "psnr_db", "ngmi", "curve", "NGMI vs PSNR across roll-offs", "PSNR (dB)", "NGMI"),
            PlotSpec("delta", "delta", "delta_papr_db", "delta_psnr_star_db", "series", "ΔPSNR* vs ΔPAPR",
                     "ΔPAPR (dB)", "ΔPSNR* (dB)", markers=True),
        ],
        summary={row["series"]: {k: row[k] for k in ("slope", "intercept")} for _, row in fits.iterrows()},
    )


BUILDERS = {
    "apc_curves": _apc_curves,
    "ppc_curves": _ppc_curves,
    "distance": _distance,
    "papr_entropy": _papr_entropy,
    "intensity": _intensity,
    "pdf_ccdf": _pdf_ccdf,
    "rolloff_comparison": _rolloff_comparison,
}


def run_figure(name: str, overrides: dict | None = None, workers: int = 1) -> FigureResult:
    """Reproduce one figure preset; ``overrides`` replace preset or run-level keys."""
    try:
        preset = figure_preset(str(name))
    except KeyError:
        raise InvalidParameterError(f"unknown figure {name!r}; known: {', '.join(sorted(FIGURES))}") from None
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(preset) - set(RUN_KEYS)
    if unknown:
        raise InvalidParameterError(f"figure {name} does not take {sorted(unknown)}")
    preset.update(overrides)
    run = _run_settings(preset)

    print(f"Figure {name} ({preset['kind']})")
    result = BUILDERS[preset["kind"]](preset, run, workers)
    return FigureResult(name=str(name), kind=result.kind, tables=result.tables, plots=result.plots, summary=result.summary)
