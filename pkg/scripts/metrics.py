"""PAPR/CCDF measurement, PSNR↔SNR arithmetic, NGMI estimation and AIR."""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from scipy import special

from config.settings import BOOTSTRAP_RESAMPLES
from scripts.dsp import Waveform
from scripts.errors import InsufficientSamplesError, InvalidParameterError, NonFiniteError
from scripts.seeding import BOOTSTRAP, NOISE, SYMBOLS, derive_seed, make_rng
from scripts.source import ShapedSource, SymbolStream, average_energy, sample_symbols

MIN_NGMI_SAMPLES = 10_000
MAX_CLIP_RATIO = 0.1
# exceedances needed per clip ratio for an empirical estimate
SAMPLES_PER_EXCEEDANCE = 100
CHUNK = 1 << 16
CCDF_POINTS = 400
LN2 = math.log(2.0)


class CcdfMode(str, Enum):
    EXACT = "exact-discrete"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class CcdfTable:
    thresholds: np.ndarray
    probabilities: np.ndarray
    mode: CcdfMode
    mean_power: float
    sample_count: int | None = None

    def at(self, x: float) -> float:
        """Pr(|X|² ≥ x) read off the step table (the next tabulated threshold at or above x)."""
        idx = int(np.searchsorted(self.thresholds, x, side="left"))
        if idx >= len(self.thresholds):
            return 0.0
        return float(self.probabilities[idx])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "power": self.thresholds,
            "power_db": 10 * np.log10(self.thresholds / self.mean_power),
            "ccdf": self.probabilities,
        })


@dataclass(frozen=True)
class PaprReport:
    clip_ratio: float
    clip_power: float
    mean_power: float

    @property
    def papr_db(self) -> float:
        return 10 * math.log10(self.clip_power / self.mean_power)

    def to_dict(self) -> dict:
        return {
            "clip_ratio": self.clip_ratio,
            "clip_power": self.clip_power,
            "mean_power": self.mean_power,
            "papr_db": self.papr_db,
        }


@dataclass(frozen=True)
class NgmiEstimate:
    entropy: float
    bits_per_symbol: int
    conditional_entropy: float
    sample_count: int
    gmi_stderr: float

    @property
    def gmi(self) -> float:
        return self.entropy - self.conditional_entropy

    @property
    def ngmi(self) -> float:
        return 1.0 - (self.entropy - self.gmi) / self.bits_per_symbol

    @property
    def stderr(self) -> float:
        return self.gmi_stderr / self.bits_per_symbol


def _check_clip_ratio(clip_ratio: float) -> None:
    if not 0 < clip_ratio <= MAX_CLIP_RATIO:
        raise InvalidParameterError(f"clip ratio must lie in (0, {MAX_CLIP_RATIO}], got {clip_ratio!r}")


def required_samples(clip_ratio: float) -> int:
    return math.ceil(SAMPLES_PER_EXCEEDANCE / clip_ratio)


def _sample_powers(signal) -> np.ndarray:
    x = signal.active_samples if isinstance(signal, Waveform) else np.asarray(signal, dtype=float)
    if x.size == 0:
        raise InvalidParameterError("cannot measure the power distribution of an empty signal")
    return x * x


def _support_powers(source: ShapedSource) -> tuple[np.ndarray, np.ndarray]:
    support = source.probabilities > 0
    return source.levels[support] ** 2, source.probabilities[support]


def papr_deterministic(source: ShapedSource) -> PaprReport:
    """True-peak PAPR of the unfiltered symbols: max support power over E[|ΔX|²]."""
    powers, _ = _support_powers(source)
    return PaprReport(0.0, float(powers.max()), average_energy(source))


def ccdf(signal, thresholds=None, min_clip_ratio: float | None = None, points: int = CCDF_POINTS) -> CcdfTable:
    """Pr(|X|² ≥ x) of a source (exact) or of a waveform / sample array (empirical).

    Empirical tables default to thresholds at order statistics spaced
    logarithmically in tail probability down to 1/N.
    """
    if isinstance(signal, ShapedSource):
        powers, p = _support_powers(signal)
        x = np.unique(powers) if thresholds is None else np.asarray(thresholds, dtype=float)
        probs = np.minimum((powers[None, :] >= x[:, None]) @ p, 1.0)
        return CcdfTable(x, probs, CcdfMode.EXACT, average_energy(signal))

    powers = np.sort(_sample_powers(signal))
    n = len(powers)
    if min_clip_ratio is not None:
        _check_clip_ratio(min_clip_ratio)
        if n < required_samples(min_clip_ratio):
            raise InsufficientSamplesError(n, required_samples(min_clip_ratio), min_clip_ratio)
    if thresholds is None:
        tail = np.geomspace(1.0, 1.0 / n, points)
        idx = np.clip(np.round(n * (1.0 - tail)).astype(int), 0, n - 1)
        x = np.unique(powers[idx])
    else:
        x = np.asarray(thresholds, dtype=float)
    probs = (n - np.searchsorted(powers, x, side="left")) / n
    return CcdfTable(x, probs, CcdfMode.EMPIRICAL, float(powers.mean()), n)


def papr_at_clip(signal, clip_ratio: float) -> PaprReport:
    """PAPR(ε): clip-limit power σ² exceeded with probability at most ε, over the mean power."""
    _check_clip_ratio(clip_ratio)
    if isinstance(signal, ShapedSource):
        powers, p = _support_powers(signal)
        levels = np.unique(powers)
        exceed = (powers[None, :] > levels[:, None]) @ p
        clip = levels[np.flatnonzero(exceed <= clip_ratio + 1e-15)[0]]
        return PaprReport(clip_ratio, float(clip), average_energy(signal))

    powers = _sample_powers(signal)
    n = len(powers)
    if n < required_samples(clip_ratio):
        raise InsufficientSamplesError(n, required_samples(clip_ratio), clip_ratio)
    # 1-based order statistic ⌈(1-ε)N⌉
    k = math.ceil(round((1.0 - clip_ratio) * n, 6))
    clip = np.partition(powers, k - 1)[k - 1]
    return PaprReport(clip_ratio, float(clip), float(powers.mean()))


def gaussian_ccdf(thresholds, mean_power: float) -> np.ndarray:
    """Pr(G² ≥ x) for real G ~ N(0, mean_power)."""
    x = np.asarray(thresholds, dtype=float)
    return special.erfc(np.sqrt(np.maximum(x, 0.0) / (2.0 * mean_power)))


def snr_from_psnr(psnr_db: float, papr_db: float) -> float:
    return psnr_db - papr_db


def psnr_from_snr(snr_db: float, papr_db: float) -> float:
    return snr_db + papr_db


def psnr_shift_from_loss(loss_db: float) -> float:
    """A power-budget change of Δγ dB moves the PSNR by -2Δγ dB (square-law detection)."""
    return -2.0 * loss_db


def loss_from_psnr_shift(psnr_shift_db: float, factor: float = 2.0) -> float:
    """Inverse of psnr_shift_from_loss; ``factor`` < 2 models signal-dependent receiver noise."""
    if factor <= 0:
        raise InvalidParameterError(f"PSNR/loss factor must be positive, got {factor!r}")
    return -psnr_shift_db / factor


def delta_psnr_star(delta_papr_db: float, delta_snr_star_db: float) -> float:
    return delta_papr_db + delta_snr_star_db


def air(shaping_rate: float, code_rate: float, order: int, shaping_rate_loss: float = 0.0) -> float:
    """Achievable information rate R_s - (1 - R_c)·log2 M in bit/symbol."""
    m = math.log2(order) if order >= 2 else float("nan")
    if not m.is_integer():
        raise InvalidParameterError(f"order must be a power of two ≥ 2, got {order!r}")
    if not 0 < code_rate <= 1:
        raise InvalidParameterError(f"code rate must lie in (0, 1], got {code_rate!r}")
    if not -1e-12 <= shaping_rate <= m + 1e-12:
        raise InvalidParameterError(f"shaping rate must lie in [0, {m:g}], got {shaping_rate!r}")
    if not 0 <= shaping_rate_loss <= shaping_rate:
        raise InvalidParameterError(f"shaping rate loss must lie in [0, R_s], got {shaping_rate_loss!r}")
    return (shaping_rate - shaping_rate_loss) - (1.0 - code_rate) * m


def noise_variance(source: ShapedSource, snr_db: float) -> float:
    """σ_n² = E[|ΔX|²] / 10^(SNR/10)."""
    with np.errstate(over="ignore", divide="ignore"):
        variance = float(average_energy(source) / np.power(10.0, snr_db / 10))
    if not math.isfinite(variance) or variance <= 0:
        raise NonFiniteError(f"SNR {snr_db!r} dB gives noise variance {variance!r}")
    return variance


def draw_channel_inputs(source: ShapedSource, n: int, seed: int) -> tuple[SymbolStream, np.ndarray]:
    """Symbol stream and unit-variance noise for one operating point."""
    if n < MIN_NGMI_SAMPLES:
        raise InvalidParameterError(f"NGMI estimation needs at least {MIN_NGMI_SAMPLES} samples, got {n}")
    stream = sample_symbols(source, n, derive_seed(seed, SYMBOLS))
    noise = make_rng(derive_seed(seed, NOISE)).standard_normal(int(n))
    return stream, noise


def _log_prior(source: ShapedSource) -> np.ndarray:
    p = source.probabilities
    with np.errstate(divide="ignore"):
        return np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)


def _bit_masks(source: ShapedSource) -> np.ndarray:
    return source.alphabet.label_bits.astype(bool)


def ngmi_from_received(
    source: ShapedSource,
    stream: SymbolStream,
    received: np.ndarray,
    variance: float,
    bootstrap_seed: int | None = None,
    resamples: int = BOOTSTRAP_RESAMPLES,
) -> NgmiEstimate:
    """GMI/NGMI from received samples with exact bitwise posteriors (log domain)."""
    y_all = np.asarray(received, dtype=float)
    n = len(y_all)
    levels = source.levels
    log_prior = _log_prior(source)
    masks = _bit_masks(source)
    m = source.alphabet.bits_per_symbol

    # -log2 P(b_i | y) summed over the bit positions, one entry per symbol
    info = np.empty(n)
    for start in range(0, n, CHUNK):
        y = y_all[start:start + CHUNK]
        bits = stream.bits[start:start + CHUNK].astype(bool)
        ll = -((y[:, None] - levels[None, :]) ** 2) / (2.0 * variance) + log_prior[None, :]
        total = special.logsumexp(ll, axis=1)
        acc = np.zeros(len(y))
        for i in range(m):
            one = special.logsumexp(np.where(masks[:, i], ll, -np.inf), axis=1)
            zero = special.logsumexp(np.where(masks[:, i], -np.inf, ll), axis=1)
            acc += total - np.where(bits[:, i], one, zero)
        info[start:start + CHUNK] = acc / LN2

    if not np.all(np.isfinite(info)):
        raise NonFiniteError(f"non-finite bit posteriors at noise variance {variance!r}")

    stderr = 0.0
    if bootstrap_seed is not None and resamples > 1:
        rng = make_rng(bootstrap_seed)
        means = [info[rng.integers(0, n, n)].mean() for _ in range(resamples)]
        stderr = float(np.std(means, ddof=1))

    return NgmiEstimate(
        entropy=source.entropy,
        bits_per_symbol=m,
        conditional_entropy=float(info.mean()),
        sample_count=n,
        gmi_stderr=stderr,
    )


def ngmi_estimate(
    source: ShapedSource,
    snr_db: float,
    n: int,
    seed: int,
    resamples: int = BOOTSTRAP_RESAMPLES,
) -> NgmiEstimate:
    """Monte-Carlo NGMI of ``source`` over real AWGN at symbol SNR ``snr_db``."""
    variance = noise_variance(source, snr_db)
    stream, noise = draw_channel_inputs(source, n, seed)
    received = source.levels[stream.indices] + math.sqrt(variance) * noise
    return ngmi_from_received(source, stream, received, variance, derive_seed(seed, BOOTSTRAP), resamples)


def ngmi_quadrature(source: ShapedSource, snr_db: float, order: int = 100) -> NgmiEstimate:
    """Gauss-Hermite evaluation of the same GMI integral; used as an oracle."""
    variance = noise_variance(source, snr_db)
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    levels = source.levels
    log_prior = _log_prior(source)
    masks = _bit_masks(source)
    m = source.alphabet.bits_per_symbol

    info = 0.0
    for j, p in enumerate(source.probabilities):
        if p <= 0:
            continue
        y = levels[j] + math.sqrt(2.0 * variance) * nodes
        ll = -((y[:, None] - levels[None, :]) ** 2) / (2.0 * variance) + log_prior[None, :]
        total = special.logsumexp(ll, axis=1)
        cond = np.zeros(order)
        for i in range(m):
            same = masks[:, i] == masks[j, i]
            cond += total - special.logsumexp(np.where(same, ll, -np.inf), axis=1)
        info += p * np.dot(weights, cond) / math.sqrt(math.pi)

    return NgmiEstimate(
        entropy=source.entropy,
        bits_per_symbol=m,
        conditional_entropy=float(info / LN2),
        sample_count=0,
        gmi_stderr=0.0,
    )
