"""PAM alphabets, shaping distributions and symbol sources.

Bipolar PAM-M uses the levels {±1, ±3, ..., ±(M-1)}; a unipolar alphabet is the
bipolar one shifted by a bias β ≥ M-1. Shaping distributions are Boltzmann
weights over the levels, computed in the log domain:

    uniform   P(x) = 1/M
    MB        P(x) ∝ exp(-λ x²)       x in bipolar coordinates (symmetric about β when unipolar)
    R-MB      P(x) ∝ exp(+λ x²)       bipolar alphabets only
    AS-MB     P(x⁺) ∝ exp(-λ (x⁺)²)   raw unipolar levels x⁺ = x + β
"""
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd
from scipy import special

from scripts.errors import (
    InvalidBiasError, InvalidParameterError, UnreachableEntropyError, UnsupportedFamilyError,
)
from scripts.seeding import make_rng

MIN_ORDER = 2
MAX_ORDER = 64
PROBABILITY_TOL = 1e-12
ENTROPY_TOL = 1e-9
MAX_BISECTION_STEPS = 200
MAX_LAMBDA = 2.0 ** 60


class Polarity(str, Enum):
    BIPOLAR = "bipolar"
    UNIPOLAR = "unipolar"


class Family(str, Enum):
    UNIFORM = "uniform"
    MB = "mb"
    ASMB = "as-mb"
    RMB = "r-mb"

    @property
    def display(self) -> str:
        return {"uniform": "Uniform", "mb": "MB", "as-mb": "AS-MB", "r-mb": "R-MB"}[self.value]


def _coerce(enum_cls, value, what: str):
    try:
        return enum_cls(value)
    except ValueError:
        known = ", ".join(e.value for e in enum_cls)
        raise InvalidParameterError(f"unknown {what} {value!r}; expected one of: {known}") from None


def gray_labels(order: int) -> tuple[int, ...]:
    """Binary-reflected Gray code over ascending level order."""
    return tuple(i ^ (i >> 1) for i in range(order))


@dataclass(frozen=True)
class PamAlphabet:
    order: int
    levels: tuple[float, ...]
    polarity: Polarity
    bias: float
    labels: tuple[int, ...]

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def level_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)

    @property
    def bipolar_levels(self) -> np.ndarray:
        """Levels with the bias removed (identical to the levels when bipolar)."""
        return self.level_array - self.bias

    @property
    def label_bits(self) -> np.ndarray:
        """(M, m) array of label bits, most significant bit first."""
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((np.asarray(self.labels)[:, None] >> shifts) & 1).astype(np.uint8)

    @property
    def peak_level(self) -> float:
        return float(np.max(np.abs(self.level_array)))

    @property
    def name(self) -> str:
        prefix = "unipolar " if self.polarity is Polarity.UNIPOLAR else ""
        return f"{prefix}PAM-{self.order}"


def pam_alphabet(order: int, polarity: Polarity | str = Polarity.BIPOLAR, bias: float | None = None) -> PamAlphabet:
    """Build a PAM-M alphabet with Gray labeling."""
    if isinstance(order, bool) or int(order) != order:
        raise InvalidParameterError(f"PAM order must be an integer, got {order!r}")
    order = int(order)
    if order < MIN_ORDER or order > MAX_ORDER or order & (order - 1):
        raise InvalidParameterError(
            f"PAM order must be a power of two in [{MIN_ORDER}, {MAX_ORDER}], got {order}"
        )
    polarity = _coerce(Polarity, polarity, "polarity")

    bipolar = np.arange(-(order - 1), order, 2, dtype=float)
    if polarity is Polarity.BIPOLAR:
        if bias not in (None, 0, 0.0):
            raise InvalidParameterError("a bipolar alphabet takes no bias")
        bias = 0.0
    else:
        bias = float(order - 1) if bias is None else float(bias)
        if not math.isfinite(bias) or bias < order - 1:
            raise InvalidBiasError(f"unipolar bias must be at least M-1 = {order - 1}, got {bias:g}")

    return PamAlphabet(
        order=order,
        levels=tuple(float(v) for v in bipolar + bias),
        polarity=polarity,
        bias=bias,
        labels=gray_labels(order),
    )


@dataclass(frozen=True)
class SymbolDistribution:
    probabilities: tuple[float, ...]
    family: Family
    lam: float
    entropy: float

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)


def entropy(dist: SymbolDistribution | np.ndarray) -> float:
    """H(X) = -Σ P log2 P in bit/symbol; zero-probability terms contribute 0."""
    p = dist.p if isinstance(dist, SymbolDistribution) else np.asarray(dist, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > PROBABILITY_TOL:
        raise InvalidParameterError("probabilities must be non-negative and sum to 1")
    return float(np.sum(special.entr(p)) / math.log(2))


def _build_distribution(p: np.ndarray, family: Family, lam: float) -> SymbolDistribution:
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    return SymbolDistribution(
        probabilities=tuple(float(v) for v in p),
        family=family,
        lam=float(lam),
        entropy=entropy(p),
    )


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise InvalidParameterError(f"shape parameter λ must be a finite value ≥ 0, got {lam!r}")
    return lam


def uniform_distribution(alphabet: PamAlphabet) -> SymbolDistribution:
    return _build_distribution(np.full(alphabet.order, 1.0 / alphabet.order), Family.UNIFORM, 0.0)


def mb_distribution(alphabet: PamAlphabet, lam: float) -> SymbolDistribution:
    """Maxwell-Boltzmann weights exp(-λx²) over bipolar coordinates."""
    lam = _check_lambda(lam)
    x = alphabet.bipolar_levels
    return _build_distribution(special.softmax(-lam * x * x), Family.MB, lam)


def rmb_distribution(alphabet: PamAlphabet, lam: float) -> SymbolDistribution:
    """Reverse MB weights exp(+λx²); favours the outer levels."""
    if alphabet.polarity is not Polarity.BIPOLAR:
        raise UnsupportedFamilyError("R-MB is defined on bipolar alphabets only")
    lam = _check_lambda(lam)
    x = alphabet.level_array
    return _build_distribution(special.softmax(lam * x * x), Family.RMB, lam)


def asmb_distribution(alphabet: PamAlphabet, lam: float) -> SymbolDistribution:
    """Asymmetric MB over raw unipolar levels; mass moves towards level 0."""
    if alphabet.polarity is not Polarity.UNIPOLAR:
        raise UnsupportedFamilyError("AS-MB is defined on unipolar alphabets only")
    lam = _check_lambda(lam)
    x = alphabet.level_array
    return _build_distribution(special.softmax(-lam * x * x), Family.ASMB, lam)


_BUILDERS = {
    Family.MB: mb_distribution,
    Family.RMB: rmb_distribution,
    Family.ASMB: asmb_distribution,
}


def make_distribution(family: Family | str, alphabet: PamAlphabet, lam: float = 0.0) -> SymbolDistribution:
    family = _coerce(Family, family, "distribution family")
    if family is Family.UNIFORM:
        return uniform_distribution(alphabet)
    return _BUILDERS[family](alphabet, lam)


def entropy_range(family: Family | str, alphabet: PamAlphabet) -> tuple[float, float]:
    """Achievable entropy interval (low, high] of a family on an alphabet."""
    family = _coerce(Family, family, "distribution family")
    top = float(alphabet.bits_per_symbol)
    if family is Family.UNIFORM:
        return top, top
    if family is Family.ASMB:
        return 0.0, top
    # symmetric families collapse onto one pair of levels
    return 1.0, top


def solve_lambda_for_entropy(family: Family | str, alphabet: PamAlphabet, target: float) -> float:
    """Find λ with H(family(λ)) = target by bisection on the monotone H(λ)."""
    family = _coerce(Family, family, "distribution family")
    make_distribution(family, alphabet, 0.0)  # family/alphabet compatibility
    low, high = entropy_range(family, alphabet)
    target = float(target)
    if abs(target - high) <= PROBABILITY_TOL:
        return 0.0
    if not low < target < high:
        raise UnreachableEntropyError(target, low, high, family.display)

    def h(lam: float) -> float:
        return make_distribution(family, alphabet, lam).entropy

    lam_lo, lam_hi = 0.0, 1.0
    while h(lam_hi) >= target:
        lam_lo, lam_hi = lam_hi, lam_hi * 2.0
        if lam_hi > MAX_LAMBDA:
            raise UnreachableEntropyError(target, low, high, family.display)

    best_lam, best_err = lam_hi, abs(h(lam_hi) - target)
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lam_lo + lam_hi)
        h_mid = h(mid)
        err = abs(h_mid - target)
        if err < best_err:
            best_lam, best_err = mid, err
        if err <= ENTROPY_TOL * 1e-2 or mid in (lam_lo, lam_hi):
            break
        if h_mid > target:
            lam_lo = mid
        else:
            lam_hi = mid
    return best_lam


@dataclass(frozen=True)
class ShapedSource:
    alphabet: PamAlphabet
    distribution: SymbolDistribution
    scale: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale <= 0:
            raise InvalidParameterError(f"scale Δ must be positive, got {self.scale!r}")
        if len(self.distribution.probabilities) != self.alphabet.order:
            raise InvalidParameterError("distribution length does not match the alphabet")

    @property
    def levels(self) -> np.ndarray:
        """Transmitted level set Δ·levels."""
        return self.scale * self.alphabet.level_array

    @property
    def probabilities(self) -> np.ndarray:
        return self.distribution.p

    @property
    def entropy(self) -> float:
        return self.distribution.entropy

    @property
    def family(self) -> Family:
        return self.distribution.family

    @property
    def label(self) -> str:
        if self.family is Family.UNIFORM:
            return f"Uniform {self.alphabet.name}"
        return f"{self.family.display} {self.alphabet.name} (H={self.entropy:.2f})"

    def with_scale(self, scale: float) -> "ShapedSource":
        return replace(self, scale=float(scale))


def shaped_source(
    family: Family | str,
    order: int,
    entropy_target: float | None = None,
    polarity: Polarity | str | None = None,
    bias: float | None = None,
    scale: float = 1.0,
) -> ShapedSource:
    """Convenience constructor: alphabet + distribution solved for a target entropy."""
    family = _coerce(Family, family, "distribution family")
    if polarity is None:
        polarity = Polarity.UNIPOLAR if family is Family.ASMB else Polarity.BIPOLAR
    alphabet = pam_alphabet(order, polarity, bias)
    if family is Family.UNIFORM:
        if entropy_target is not None and abs(entropy_target - alphabet.bits_per_symbol) > PROBABILITY_TOL:
            raise UnreachableEntropyError(entropy_target, alphabet.bits_per_symbol, alphabet.bits_per_symbol, "Uniform")
        lam = 0.0
    elif entropy_target is None:
        lam = 0.0
    else:
        lam = solve_lambda_for_entropy(family, alphabet, entropy_target)
    return ShapedSource(alphabet, make_distribution(family, alphabet, lam), scale)


@dataclass(frozen=True, eq=False)
class SymbolStream:
    indices: np.ndarray
    bits: np.ndarray
    seed: int

    def __len__(self) -> int:
        return len(self.indices)


def sample_symbols(source: ShapedSource, n: int, seed: int) -> SymbolStream:
    """Draw n i.i.d. symbol indices by inverse CDF over a Philox stream."""
    if n < 1:
        raise InvalidParameterError(f"sample count must be at least 1, got {n}")
    p = source.probabilities
    cdf = np.cumsum(p)
    cdf[np.flatnonzero(p > 0)[-1]:] = 1.0
    u = make_rng(seed).random(int(n))
    indices = np.searchsorted(cdf, u, side="right")
    np.minimum(indices, source.alphabet.order - 1, out=indices)
    return SymbolStream(indices=indices, bits=source.alphabet.label_bits[indices], seed=int(seed))


def average_energy(source: ShapedSource) -> float:
    """E[|ΔX|²] = Σ P(x)·(Δx)²."""
    return float(np.dot(source.probabilities, source.levels ** 2))


def mean_intensity(source: ShapedSource) -> float:
    """Mean of the intensity waveform Σ P(x⁺)·Δx⁺, an optical-power proxy."""
    if source.alphabet.polarity is not Polarity.UNIPOLAR:
        raise InvalidParameterError("mean intensity is defined for unipolar sources only")
    return float(np.dot(source.probabilities, source.levels))


def min_distance(source: ShapedSource) -> float:
    """Minimum Euclidean distance between adjacent transmitted levels."""
    return 2.0 * source.scale


def distribution_table(source: ShapedSource) -> pd.DataFrame:
    """One row per level: transmitted level, probability and Gray label."""
    m = source.alphabet.bits_per_symbol
    return pd.DataFrame({
        "level": source.levels,
        "probability": source.probabilities,
        "label_bits": [format(code, f"0{m}b") for code in source.alphabet.labels],
    })
