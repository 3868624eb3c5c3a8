"""Pulse-shaping chain used to measure PAPR enhancement.

Symbols are zero-stuffed by the oversampling factor L, filtered with an RC or
RRC FIR of span·L + 1 taps and, optionally, given a zero-phase pre-emphasis
tilt. Time is measured in symbol periods throughout.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy import signal, stats

from config.settings import SHAPER_DEFAULTS
from scripts.errors import InvalidParameterError, TooFewSymbolsError

DEFAULT_SPAN = int(SHAPER_DEFAULTS["span"])
DEFAULT_OVERSAMPLING = int(SHAPER_DEFAULTS["oversampling"])
MIN_SPAN = 8
_SINGULAR_ATOL = 1e-12


class ShaperKind(str, Enum):
    RC = "rc"
    RRC = "rrc"
    NONE = "none"


class TiltEdge(str, Enum):
    """Where the pre-emphasis gain reaches its full tilt."""
    NYQUIST = "nyquist"  # sampling Nyquist frequency, 0.5 cycles/sample
    BAND = "band"  # signal spectral edge (1+ρ)/2 symbol rate, held flat above


@dataclass(frozen=True)
class PulseShaper:
    kind: ShaperKind = ShaperKind.NONE
    rolloff: float = 1.0
    span: int = DEFAULT_SPAN
    oversampling: int = DEFAULT_OVERSAMPLING
    tilt_db: float = 0.0
    tilt_edge: TiltEdge = TiltEdge.NYQUIST

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ShaperKind(self.kind))
        except ValueError:
            raise InvalidParameterError(f"unknown shaper kind {self.kind!r}; expected rc, rrc or none") from None
        try:
            object.__setattr__(self, "tilt_edge", TiltEdge(self.tilt_edge))
        except ValueError:
            raise InvalidParameterError(f"unknown tilt edge {self.tilt_edge!r}; expected nyquist or band") from None
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            raise InvalidParameterError(f"oversampling must be an integer ≥ 2, got {self.oversampling!r}")
        if not math.isfinite(self.tilt_db) or self.tilt_db < 0:
            raise InvalidParameterError(f"pre-emphasis tilt must be ≥ 0 dB, got {self.tilt_db!r}")
        if self.kind is ShaperKind.NONE:
            if self.tilt_db > 0:
                raise InvalidParameterError("pre-emphasis needs a band-limiting filter; kind 'none' has none")
            return
        _check_design(self.rolloff, self.span, self.oversampling)

    @property
    def effective_span(self) -> int:
        return 0 if self.kind is ShaperKind.NONE else int(self.span)

    @property
    def band_edge(self) -> float:
        """Spectral edge (1+ρ)/2 of the shaped signal in cycles/sample."""
        if self.kind is ShaperKind.NONE:
            return 0.5
        return (1.0 + self.rolloff) / (2.0 * self.oversampling)

    @property
    def tilt_edge_frequency(self) -> float:
        return self.band_edge if self.tilt_edge is TiltEdge.BAND else 0.5

    @property
    def label(self) -> str:
        if self.kind is ShaperKind.NONE:
            return "no filter"
        text = f"{self.kind.value.upper()} ρ={self.rolloff:g}"
        if self.tilt_db > 0:
            text += f" + {self.tilt_db:g} dB tilt"
            if self.tilt_edge is TiltEdge.BAND:
                text += " (band edge)"
        return text

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "rolloff": self.rolloff,
            "span": self.span,
            "oversampling": self.oversampling,
            "tilt_db": self.tilt_db,
            "tilt_edge": self.tilt_edge.value,
        }


def no_shaper(oversampling: int = DEFAULT_OVERSAMPLING) -> PulseShaper:
    return PulseShaper(ShaperKind.NONE, oversampling=oversampling)


def _check_design(rolloff: float, span: int, oversampling: int) -> None:
    if not 0 < rolloff <= 1:
        raise InvalidParameterError(f"roll-off must lie in (0, 1], got {rolloff!r}")
    if int(span) != span or span < MIN_SPAN or span % 2:
        raise InvalidParameterError(f"span must be an even integer ≥ {MIN_SPAN}, got {span!r}")
    if int(oversampling) != oversampling or oversampling < 2:
        raise InvalidParameterError(f"oversampling must be an integer ≥ 2, got {oversampling!r}")


def _tap_times(span: int, oversampling: int) -> np.ndarray:
    n = int(span) * int(oversampling)
    return (np.arange(n + 1) - n / 2) / oversampling


def rrc_taps(rolloff: float, span: int = DEFAULT_SPAN, oversampling: int = DEFAULT_OVERSAMPLING) -> np.ndarray:
    """Root-raised-cosine taps, unit energy."""
    _check_design(rolloff, span, oversampling)
    t = _tap_times(span, oversampling)
    r = float(rolloff)

    at_zero = np.isclose(t, 0.0, atol=_SINGULAR_ATOL)
    at_edge = np.isclose(np.abs(t), 1.0 / (4.0 * r), atol=_SINGULAR_ATOL)
    regular = ~(at_zero | at_edge)

    h = np.empty_like(t)
    tr = t[regular]
    h[regular] = (
        np.sin(np.pi * tr * (1 - r)) + 4 * r * tr * np.cos(np.pi * tr * (1 + r))
    ) / (np.pi * tr * (1 - (4 * r * tr) ** 2))
    h[at_zero] = 1 - r + 4 * r / np.pi
    h[at_edge] = (r / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * r)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * r))
    )
    return h / np.sqrt(np.sum(h * h))


def rc_taps(rolloff: float, span: int = DEFAULT_SPAN, oversampling: int = DEFAULT_OVERSAMPLING) -> np.ndarray:
    """Raised-cosine taps, unit gain at the centre (symbol-instant) tap."""
    _check_design(rolloff, span, oversampling)
    t = _tap_times(span, oversampling)
    r = float(rolloff)

    at_edge = np.isclose(np.abs(t), 1.0 / (2.0 * r), atol=_SINGULAR_ATOL)
    h = np.empty_like(t)
    tr = t[~at_edge]
    h[~at_edge] = np.sinc(tr) * np.cos(np.pi * r * tr) / (1 - (2 * r * tr) ** 2)
    h[at_edge] = (np.pi / 4) * np.sinc(1.0 / (2.0 * r))
    return h / h[len(h) // 2]


def taps_for(shaper: PulseShaper) -> np.ndarray:
    if shaper.kind is ShaperKind.RRC:
        return rrc_taps(shaper.rolloff, shaper.span, shaper.oversampling)
    if shaper.kind is ShaperKind.RC:
        return rc_taps(shaper.rolloff, shaper.span, shaper.oversampling)
    return np.ones(1)


def filter_power_gain(shaper: PulseShaper) -> float:
    """Waveform average power per unit symbol energy: Σ taps² / L."""
    h = taps_for(shaper)
    return float(np.sum(h * h) / shaper.oversampling)


def pre_emphasis(samples: np.ndarray, tilt_db: float, edge: float = 0.5) -> np.ndarray:
    """Zero-phase magnitude tilt rising linearly in dB from 0 at DC to tilt_db at ``edge``.

    ``edge`` is in cycles/sample; the gain is held at tilt_db above it. The
    output is rescaled to the input's average power.
    """
    if not math.isfinite(tilt_db) or tilt_db < 0:
        raise InvalidParameterError(f"pre-emphasis tilt must be ≥ 0 dB, got {tilt_db!r}")
    if not 0 < edge <= 0.5:
        raise InvalidParameterError(f"tilt edge must lie in (0, 0.5] cycles/sample, got {edge!r}")
    x = np.asarray(samples, dtype=float)
    freqs = np.fft.rfftfreq(len(x))
    gain_db = tilt_db * np.minimum(freqs / edge, 1.0)
    y = np.fft.irfft(np.fft.rfft(x) * 10 ** (gain_db / 20), n=len(x))

    power_in = np.mean(x * x)
    power_out = np.mean(y * y)
    if power_out > 0:
        y *= np.sqrt(power_in / power_out)
    return y


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    oversampling: int
    first_symbol: int
    shaper: PulseShaper
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise InvalidParameterError("waveform contains non-finite samples")
        self.samples.setflags(write=False)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def active_samples(self) -> np.ndarray:
        """Samples that carry signal: symbol instants for an unfiltered impulse train, all samples otherwise."""
        if self.shaper.kind is ShaperKind.NONE:
            return self.samples[:: self.oversampling]
        return self.samples

    @property
    def mean_power(self) -> float:
        x = self.active_samples
        return float(np.mean(x * x))


def shape_waveform(
    symbols: np.ndarray,
    levels: np.ndarray,
    shaper: PulseShaper,
    trim: bool = True,
    origin: dict | None = None,
) -> Waveform:
    """Upsample symbol indices onto ``levels`` and filter them.

    With ``trim`` the first and last span·L samples of the full convolution
    are dropped, leaving (N - span)·L steady-state samples whose sample k·L is
    symbol ``first_symbol + k``.
    """
    indices = np.asarray(symbols)
    n_sym = len(indices)
    span = shaper.effective_span
    if n_sym < max(4 * span, 1):
        raise TooFewSymbolsError(f"{n_sym} symbols are too few for a span-{span} filter; need {4 * span}")

    L = shaper.oversampling
    values = np.asarray(levels, dtype=float)[indices]
    y = signal.upfirdn(taps_for(shaper), values, up=L)
    y = np.pad(y, (0, n_sym * L + span * L - len(y)))
    if trim:
        y = y[span * L: n_sym * L]
        first = span // 2
    else:
        first = -(span // 2)

    if shaper.tilt_db > 0:
        y = pre_emphasis(y, shaper.tilt_db, edge=shaper.tilt_edge_frequency)

    return Waveform(
        samples=np.ascontiguousarray(y),
        oversampling=L,
        first_symbol=first,
        shaper=shaper,
        origin=dict(origin or {}),
    )


@dataclass(frozen=True, eq=False)
class MatchedOutput:
    values: np.ndarray
    first_symbol: int
    phase: int


def matched_filter(waveform: Waveform) -> MatchedOutput:
    """RRC matched filter and symbol-rate sampling at the maximum-energy phase."""
    shaper = waveform.shaper
    L = waveform.oversampling
    if shaper.kind is ShaperKind.NONE:
        return MatchedOutput(waveform.samples[::L].copy(), waveform.first_symbol, 0)
    if shaper.kind is not ShaperKind.RRC:
        raise InvalidParameterError("matched filtering needs an RRC transmit filter")

    span_samples = shaper.span * L
    x = waveform.samples
    r = signal.fftconvolve(x, taps_for(shaper))
    # fully overlapped outputs; r[j] is aligned with x[j - span_samples/2]
    steady = r[span_samples: len(x)]
    energies = [np.mean(steady[ph::L] ** 2) for ph in range(L)]
    phase = int(np.argmax(energies))
    return MatchedOutput(
        values=steady[phase::L].copy(),
        first_symbol=waveform.first_symbol + shaper.span // 2,
        phase=phase,
    )


def excess_kurtosis(waveform: Waveform) -> float:
    return float(stats.kurtosis(waveform.active_samples, fisher=True))


def waveform_histogram(waveform: Waveform, bins: int = 241, limit: float = 4.0) -> pd.DataFrame:
    """PDF of the power-normalized amplitude next to the N(0, 1) reference."""
    x = waveform.active_samples / np.sqrt(waveform.mean_power)
    density, edges = np.histogram(x, bins=bins, range=(-limit, limit), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return pd.DataFrame({
        "amplitude": centers,
        "density": density,
        "gaussian_density": stats.norm.pdf(centers),
    })
