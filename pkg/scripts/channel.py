"""Constraint-aware constellation scaling and the AWGN channel.

A link is peak-power constrained (PPC) when the transmitter or the intensity
modulator limits max|X|², average-power constrained (APC) otherwise. PPC-clip
is the PPC variant for filtered signals, where the peak is the ε-clip level of
the shaped waveform instead of the largest symbol.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from config.settings import DEFAULTS
from scripts.dsp import PulseShaper, ShaperKind, Waveform, no_shaper, shape_waveform
from scripts.errors import InconsistentSpecError, InsufficientSamplesError, InvalidParameterError
from scripts.metrics import (
    PaprReport,
    draw_channel_inputs,
    noise_variance,
    papr_at_clip,
    papr_deterministic,
    required_samples,
    snr_from_psnr,
)
from scripts.seeding import CALIBRATION, derive_seed
from scripts.source import ShapedSource, SymbolStream, average_energy, sample_symbols


class Constraint(str, Enum):
    APC = "apc"
    PPC = "ppc"
    PPC_CLIP = "ppc-clip"


class QualityMetric(str, Enum):
    SNR = "snr"
    PSNR = "psnr"


def quality_for(constraint: Constraint) -> QualityMetric:
    return QualityMetric.SNR if constraint is Constraint.APC else QualityMetric.PSNR


@dataclass(frozen=True)
class ChannelSpec:
    constraint: Constraint
    quality_db: float
    quality: QualityMetric | None = None
    power: float = 1.0
    seed: int = int(DEFAULTS["seed"])
    shaper: PulseShaper = field(default_factory=no_shaper)
    clip_ratio: float = float(DEFAULTS["clip_ratio"])
    calibration_samples: int = int(DEFAULTS["calibration_samples"])

    def __post_init__(self):
        try:
            object.__setattr__(self, "constraint", Constraint(self.constraint))
            quality = quality_for(self.constraint) if self.quality is None else QualityMetric(self.quality)
        except ValueError as exc:
            raise InvalidParameterError(str(exc)) from None
        object.__setattr__(self, "quality", quality)

        if not math.isfinite(self.power) or self.power <= 0:
            raise InvalidParameterError(f"power constraint must be positive, got {self.power!r}")
        if not math.isfinite(self.quality_db):
            raise InvalidParameterError(f"channel quality must be finite, got {self.quality_db!r}")
        if self.constraint is Constraint.APC and quality is QualityMetric.PSNR:
            raise InconsistentSpecError("PSNR is defined for peak-power constrained links; use SNR with apc")
        if self.constraint is not Constraint.APC and quality is QualityMetric.SNR:
            raise InconsistentSpecError(f"{self.constraint.value} links are specified by PSNR, not SNR")
        if self.constraint is Constraint.PPC and self.shaper.kind is not ShaperKind.NONE:
            raise InconsistentSpecError("a pulse-shaped PPC link uses the ppc-clip constraint")


def normalize_apc(source: ShapedSource, p_avg: float) -> float:
    """Factor that brings E[|ΔX|²] to ``p_avg``."""
    energy = average_energy(source)
    if energy <= 0:
        raise InvalidParameterError("source has zero average energy")
    return math.sqrt(p_avg / energy)


def normalize_ppc(source: ShapedSource, p_peak: float) -> float:
    """Factor that puts the largest alphabet level at √p_peak; independent of the distribution."""
    return math.sqrt(p_peak) / (source.scale * source.alphabet.peak_level)


def calibration_waveform(source: ShapedSource, shaper: PulseShaper, samples: int, seed: int) -> Waveform:
    """Shaped waveform of at least ``samples`` samples, drawn on the calibration stream."""
    span = shaper.effective_span
    n_symbols = max(math.ceil(samples / shaper.oversampling) + span, 4 * span, 1)
    stream = sample_symbols(source, n_symbols, derive_seed(seed, CALIBRATION))
    return shape_waveform(stream.indices, source.levels, shaper, origin={"source": source.label, "seed": seed})


@lru_cache(maxsize=256)
def clip_papr(source: ShapedSource, shaper: PulseShaper, clip_ratio: float, samples: int, seed: int) -> PaprReport:
    """PAPR(ε) of ``source`` through ``shaper``; exact when nothing is filtered. Memoized per process."""
    if shaper.kind is ShaperKind.NONE:
        return papr_at_clip(source, clip_ratio)
    if samples < required_samples(clip_ratio):
        raise InsufficientSamplesError(samples, required_samples(clip_ratio), clip_ratio)
    return papr_at_clip(calibration_waveform(source, shaper, samples, seed), clip_ratio)


def normalize_ppc_clip(
    source: ShapedSource,
    shaper: PulseShaper,
    p_peak: float,
    clip_ratio: float,
    calibration_samples: int,
    seed: int,
) -> float:
    """Factor that puts the ε-clip power of the shaped waveform at ``p_peak`` (σ² scales with Δ²)."""
    report = clip_papr(source, shaper, clip_ratio, calibration_samples, seed)
    return math.sqrt(p_peak / report.clip_power)


def constraint_papr(source: ShapedSource, spec: ChannelSpec) -> PaprReport:
    """The PAPR that links PSNR and SNR for ``spec``: true peak, or ε-clip level once filtered."""
    if spec.shaper.kind is ShaperKind.NONE and spec.constraint is not Constraint.PPC_CLIP:
        return papr_deterministic(source)
    return clip_papr(source, spec.shaper, spec.clip_ratio, spec.calibration_samples, spec.seed)


def scale_to_constraint(source: ShapedSource, spec: ChannelSpec) -> ShapedSource:
    if spec.constraint is Constraint.APC:
        factor = normalize_apc(source, spec.power)
    elif spec.constraint is Constraint.PPC:
        factor = normalize_ppc(source, spec.power)
    else:
        factor = normalize_ppc_clip(
            source, spec.shaper, spec.power, spec.clip_ratio, spec.calibration_samples, spec.seed
        )
    return source.with_scale(source.scale * factor)


def resolve_snr(spec: ChannelSpec, papr_db: float | None = None) -> float:
    """Symbol SNR in dB that sets the noise variance."""
    if spec.quality is QualityMetric.SNR:
        return spec.quality_db
    if papr_db is None:
        raise InvalidParameterError("a PSNR-specified link needs the signal PAPR")
    return snr_from_psnr(spec.quality_db, papr_db)


@dataclass(frozen=True, eq=False)
class Transmission:
    source: ShapedSource
    stream: SymbolStream
    received: np.ndarray
    noise_variance: float
    snr_db: float
    papr_db: float


def transmit_awgn(source: ShapedSource, spec: ChannelSpec, n: int, papr_db: float | None = None) -> Transmission:
    """Scale ``source`` to the constraint and pass n symbols through real AWGN.

    ``papr_db`` overrides the measured PAPR (equal-average-power comparisons).
    """
    scaled = scale_to_constraint(source, spec)
    if papr_db is None:
        papr_db = constraint_papr(scaled, spec).papr_db
    snr_db = resolve_snr(spec, papr_db)
    variance = noise_variance(scaled, snr_db)
    stream, noise = draw_channel_inputs(scaled, n, spec.seed)
    received = scaled.levels[stream.indices] + math.sqrt(variance) * noise
    return Transmission(scaled, stream, received, variance, snr_db, papr_db)
