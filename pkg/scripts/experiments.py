"""Sweeps, threshold search, rate adaptation and the pre-emphasis scenarios.

Every operating point gets a seed derived from the master seed and the
modulation's position in the sweep, never from the quality index, so all
points of one curve share the same symbols and noise (common random numbers).
Work is spread over processes by modulation; results come back in the
configured order whatever the worker count.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np
import pandas as pd
from scipy import stats

from config.settings import BOOTSTRAP_RESAMPLES, DEFAULTS, SCENARIO_COMMON, scenario_preset
from scripts.channel import (
    ChannelSpec,
    Constraint,
    QualityMetric,
    clip_papr,
    normalize_apc,
    normalize_ppc,
    normalize_ppc_clip,
    quality_for,
)
from scripts.dsp import PulseShaper, ShaperKind, no_shaper
from scripts.errors import (
    DegenerateFitError,
    InvalidParameterError,
    NoCrossingError,
    PcsError,
)
from scripts.metrics import (
    NgmiEstimate,
    PaprReport,
    air,
    draw_channel_inputs,
    ngmi_from_received,
    noise_variance,
    papr_deterministic,
    psnr_from_snr,
)
from scripts.seeding import BOOTSTRAP, derive_seed
from scripts.source import (
    Family,
    Polarity,
    ShapedSource,
    _coerce,
    average_energy,
    entropy_range,
    mean_intensity,
    min_distance,
    pam_alphabet,
    shaped_source,
)

MODULATION_KEYS = ("family", "order", "entropy", "entropies", "polarity", "bias")


def expand_grid(spec) -> tuple[float, ...]:
    """A dB grid from a list or an inclusive {start, stop, step} range."""
    if isinstance(spec, dict):
        unknown = set(spec) - {"start", "stop", "step"}
        if unknown or not {"start", "stop", "step"} <= set(spec):
            raise InvalidParameterError(f"grid range needs exactly start, stop and step, got {sorted(spec)}")
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if step <= 0 or stop < start:
            raise InvalidParameterError(f"grid range must ascend with a positive step, got {spec}")
        count = math.floor((stop - start) / step + 1e-9) + 1
        values = np.round(start + step * np.arange(count), 10)
    else:
        values = np.asarray(list(spec), dtype=float)
    if values.size == 0:
        raise InvalidParameterError("grid is empty")
    if not np.all(np.isfinite(values)) or np.any(np.diff(values) <= 0):
        raise InvalidParameterError("grid values must be finite and strictly ascending")
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Modulation:
    family: Family
    order: int
    entropy: float | None = None
    polarity: Polarity | None = None
    bias: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", _coerce(Family, self.family, "distribution family"))
        if self.polarity is not None:
            object.__setattr__(self, "polarity", _coerce(Polarity, self.polarity, "polarity"))

    def source(self) -> ShapedSource:
        return shaped_source(self.family, self.order, self.entropy, self.polarity, self.bias)

    @property
    def label(self) -> str:
        prefix = "unipolar " if self.resolved_polarity is Polarity.UNIPOLAR else ""
        name = f"{self.family.display} {prefix}PAM-{self.order}"
        if self.entropy is not None and self.family is not Family.UNIFORM:
            name += f" H={self.entropy:g}"
        return name

    @property
    def resolved_polarity(self) -> Polarity:
        if self.polarity is not None:
            return self.polarity
        return Polarity.UNIPOLAR if self.family is Family.ASMB else Polarity.BIPOLAR

    @property
    def effective_entropy(self) -> float:
        if self.entropy is None:
            return float(math.log2(self.order))
        return float(self.entropy)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "order": self.order,
            "entropy": self.entropy,
            "polarity": self.resolved_polarity.value,
            "bias": self.bias,
        }


def expand_modulations(items) -> tuple[Modulation, ...]:
    """Turn config entries into Modulations; an ``entropies`` list expands to one per entropy."""
    result = []
    for item in items:
        if isinstance(item, Modulation):
            result.append(item)
            continue
        unknown = set(item) - set(MODULATION_KEYS)
        if unknown:
            raise InvalidParameterError(f"unknown modulation key(s) {sorted(unknown)}")
        if "family" not in item or "order" not in item:
            raise InvalidParameterError(f"modulation needs family and order, got {item}")
        base = {k: item[k] for k in ("family", "order", "polarity", "bias") if k in item}
        entropies = item.get("entropies")
        if entropies is None:
            result.append(Modulation(entropy=item.get("entropy"), **base))
        else:
            result.extend(Modulation(entropy=float(h), **base) for h in expand_grid(entropies))
    if not result:
        raise InvalidParameterError("at least one modulation is required")
    return tuple(result)


@dataclass(frozen=True)
class SweepConfig:
    modulations: tuple[Modulation, ...]
    quality_grid_db: tuple[float, ...]
    constraint: Constraint = Constraint.APC
    shaper: PulseShaper = field(default_factory=no_shaper)
    ngmi_threshold: float = float(DEFAULTS["ngmi_threshold"])
    code_rate: float = float(DEFAULTS["code_rate"])
    samples_per_point: int = int(DEFAULTS["samples_per_point"])
    seed: int = int(DEFAULTS["seed"])
    clip_ratio: float = float(DEFAULTS["clip_ratio"])
    calibration_samples: int = int(DEFAULTS["calibration_samples"])
    equal_average_power: bool = False
    power: float = 1.0
    bootstrap_resamples: int = BOOTSTRAP_RESAMPLES

    def __post_init__(self):
        object.__setattr__(self, "modulations", expand_modulations(self.modulations))
        object.__setattr__(self, "quality_grid_db", expand_grid(self.quality_grid_db))
        if not 0 < self.ngmi_threshold < 1:
            raise InvalidParameterError(f"NGMI threshold must lie in (0, 1), got {self.ngmi_threshold!r}")
        if not 0 < self.code_rate <= 1:
            raise InvalidParameterError(f"code rate must lie in (0, 1], got {self.code_rate!r}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be non-negative, got {self.seed!r}")
        # raises on inconsistent constraint / shaper combinations
        self.channel_spec(self.quality_grid_db[0])

    @property
    def quality(self) -> QualityMetric:
        return quality_for(self.constraint)

    def channel_spec(self, quality_db: float) -> ChannelSpec:
        return ChannelSpec(
            constraint=self.constraint,
            quality_db=quality_db,
            power=self.power,
            seed=self.seed,
            shaper=self.shaper,
            clip_ratio=self.clip_ratio,
            calibration_samples=self.calibration_samples,
        )

    def to_dict(self) -> dict:
        return {
            "modulations": [m.to_dict() for m in self.modulations],
            "quality_grid_db": list(self.quality_grid_db),
            "constraint": self.constraint.value,
            "shaper": self.shaper.to_dict(),
            "ngmi_threshold": self.ngmi_threshold,
            "code_rate": self.code_rate,
            "samples_per_point": self.samples_per_point,
            "seed": self.seed,
            "clip_ratio": self.clip_ratio,
            "calibration_samples": self.calibration_samples,
            "equal_average_power": self.equal_average_power,
        }


@dataclass(frozen=True)
class SweepRecord:
    modulation: str
    family: str
    order: int
    entropy: float
    shaper: str
    constraint: str
    quality_db: float
    snr_db: float
    psnr_db: float
    papr_db: float
    ngmi: float
    gmi: float
    ngmi_stderr: float
    gmi_stderr: float
    air: float
    decodable: bool
    scale: float
    seed: int
    samples: int
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def records_frame(records: list[SweepRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in records], columns=list(SweepRecord.__dataclass_fields__))


class CurveSampler:
    """Symbols and unit noise for one source, drawn once and reused at every SNR."""

    def __init__(self, source: ShapedSource, n: int, seed: int, resamples: int = BOOTSTRAP_RESAMPLES):
        self.source = source
        self.stream, self.noise = draw_channel_inputs(source, n, seed)
        self.clean = source.levels[self.stream.indices]
        self.bootstrap_seed = derive_seed(seed, BOOTSTRAP)
        self.resamples = resamples
        self._cache: dict[float, NgmiEstimate] = {}

    def estimate(self, snr_db: float) -> NgmiEstimate:
        if snr_db not in self._cache:
            variance = noise_variance(self.source, snr_db)
            received = self.clean + math.sqrt(variance) * self.noise
            self._cache[snr_db] = ngmi_from_received(
                self.source, self.stream, received, variance, self.bootstrap_seed, self.resamples
            )
        return self._cache[snr_db]


def ngmi_curve(source: ShapedSource, snr_grid_db, n: int, seed: int, resamples: int = BOOTSTRAP_RESAMPLES) -> pd.DataFrame:
    sampler = CurveSampler(source, n, seed, resamples)
    rows = []
    for snr in expand_grid(snr_grid_db):
        est = sampler.estimate(snr)
        rows.append({"snr_db": snr, "ngmi": est.ngmi, "gmi": est.gmi, "ngmi_stderr": est.stderr})
    return pd.DataFrame(rows)


def measure_papr(
    source: ShapedSource,
    shaper: PulseShaper,
    clip_ratio: float = float(DEFAULTS["clip_ratio"]),
    samples: int = int(DEFAULTS["calibration_samples"]),
    seed: int = int(DEFAULTS["seed"]),
) -> PaprReport:
    """PAPR of ``source`` at unit scale: true peak unfiltered, PAPR(ε) of the shaped waveform otherwise."""
    unit = source.with_scale(1.0)
    if shaper.kind is ShaperKind.NONE:
        return papr_deterministic(unit)
    return clip_papr(unit, shaper, float(clip_ratio), int(samples), int(seed))


@dataclass(frozen=True)
class _PointPlan:
    index: int
    modulation: Modulation
    source: ShapedSource | None
    papr_db: float
    measured_papr_db: float
    scale: float
    error: str | None


def _constraint_scale(source: ShapedSource, config: SweepConfig, report: PaprReport) -> float:
    if config.constraint is Constraint.APC:
        return normalize_apc(source, config.power)
    if config.constraint is Constraint.PPC:
        return normalize_ppc(source, config.power)
    return math.sqrt(config.power / report.clip_power)


def _equal_power_plan(plan: _PointPlan, papr_db: float, config: SweepConfig) -> _PointPlan:
    """Rescale to the average power that ``papr_db`` leaves under the peak limit."""
    unit = plan.source.with_scale(1.0)
    scale = plan.scale
    if config.constraint is not Constraint.APC:
        scale = math.sqrt(config.power / (10 ** (papr_db / 10) * average_energy(unit)))
    return replace(plan, source=unit.with_scale(scale), papr_db=papr_db, scale=scale)


def _plan(config: SweepConfig) -> list[_PointPlan]:
    """Build sources and their PAPRs up front; equal-average-power mode gives all the largest PAPR."""
    plans = []
    for index, modulation in enumerate(config.modulations):
        try:
            source = modulation.source()
            report = measure_papr(source, config.shaper, config.clip_ratio, config.calibration_samples, config.seed)
            scale = _constraint_scale(source, config, report)
            plans.append(
                _PointPlan(index, modulation, source.with_scale(scale), report.papr_db, report.papr_db, scale, None)
            )
        except PcsError as exc:
            nan = float("nan")
            plans.append(_PointPlan(index, modulation, None, nan, nan, nan, str(exc)))
    if config.equal_average_power:
        known = [p.papr_db for p in plans if p.error is None]
        if known:
            common = max(known)
            plans = [_equal_power_plan(p, common, config) if p.error is None else p for p in plans]
    return plans


def _snr_for(config: SweepConfig, quality_db: float, papr_db: float) -> float:
    if config.quality is QualityMetric.SNR:
        return quality_db
    return quality_db - papr_db


def _record(config, plan, quality_db, snr_db, seed, est=None, error=None) -> SweepRecord:
    modulation = plan.modulation
    entropy = modulation.effective_entropy if plan.source is None else plan.source.entropy
    if est is None:
        ngmi = gmi = ngmi_se = gmi_se = float("nan")
    else:
        ngmi, gmi, ngmi_se, gmi_se = est.ngmi, est.gmi, est.stderr, est.gmi_stderr
    return SweepRecord(
        modulation=modulation.label,
        family=modulation.family.value,
        order=modulation.order,
        entropy=entropy,
        shaper=config.shaper.label,
        constraint=config.constraint.value,
        quality_db=quality_db,
        snr_db=snr_db,
        psnr_db=psnr_from_snr(snr_db, plan.papr_db),
        papr_db=plan.papr_db,
        ngmi=ngmi,
        gmi=gmi,
        ngmi_stderr=ngmi_se,
        gmi_stderr=gmi_se,
        air=air(min(entropy, math.log2(modulation.order)), config.code_rate, modulation.order),
        decodable=bool(est is not None and ngmi >= config.ngmi_threshold),
        scale=plan.scale,
        seed=seed,
        samples=config.samples_per_point if est is not None else 0,
        error=error,
    )


def _run_curve(config: SweepConfig, plan: _PointPlan) -> list[SweepRecord]:
    seed = derive_seed(config.seed, plan.index)
    if plan.error is not None:
        return [
            _record(config, plan, q, _snr_for(config, q, plan.papr_db), seed, error=plan.error)
            for q in config.quality_grid_db
        ]
    records = []
    try:
        sampler = CurveSampler(plan.source, config.samples_per_point, seed, config.bootstrap_resamples)
    except PcsError as exc:
        return [
            _record(config, plan, q, _snr_for(config, q, plan.papr_db), seed, error=str(exc))
            for q in config.quality_grid_db
        ]
    for q in config.quality_grid_db:
        snr = _snr_for(config, q, plan.papr_db)
        try:
            records.append(_record(config, plan, q, snr, seed, est=sampler.estimate(snr)))
        except PcsError as exc:
            records.append(_record(config, plan, q, snr, seed, error=str(exc)))
    return records


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return list(map(fn, items))
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))


def ngmi_sweep(config: SweepConfig, workers: int = 1) -> list[SweepRecord]:
    """NGMI over modulations × quality grid; per-point failures are recorded, not raised."""
    plans = _plan(config)
    print(f"  Sweeping {len(plans)} modulation(s) x {len(config.quality_grid_db)} {config.quality.value.upper()} points")
    curves = _map(partial(_run_curve, config), plans, workers)
    records = [r for curve in curves for r in curve]
    for r in records:
        if r.error:
            print(f"  WARNING: {r.modulation} at {r.quality_db:g} dB: {r.error}")
    return records


@dataclass(frozen=True)
class ThresholdResult:
    label: str
    metric: QualityMetric
    quality_star_db: float
    snr_star_db: float
    papr_db: float
    ngmi_threshold: float
    curve: pd.DataFrame = field(compare=False, repr=False)

    @property
    def psnr_star_db(self) -> float:
        return psnr_from_snr(self.snr_star_db, self.papr_db)


def _crossing(evaluate, grid: tuple[float, ...], target: float, full_grid: bool) -> tuple[float, dict]:
    """Quality at which the running-max NGMI first reaches ``target``, refined once at the bracket midpoint."""
    seen: dict[float, float] = {}

    def value(q):
        if q not in seen:
            seen[q] = evaluate(q)
        return seen[q]

    running = np.maximum.accumulate([value(q) for q in grid]) if full_grid else None
    low = value(grid[0])
    high = float(running[-1]) if full_grid else value(grid[-1])
    if low >= target or high < target:
        raise NoCrossingError(target, grid[0], low, grid[-1], high)

    if full_grid:
        k = int(np.flatnonzero(running >= target)[0])
        va, vb = float(running[k - 1]), float(running[k])
    else:
        lo, hi = 0, len(grid) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if value(grid[mid]) >= target:
                hi = mid
            else:
                lo = mid
        k = hi
        va, vb = value(grid[lo]), value(grid[hi])

    qa, qb = grid[k - 1], grid[k]
    qm = 0.5 * (qa + qb)
    vm = min(max(value(qm), va), vb)
    if vm >= target:
        qb, vb = qm, vm
    else:
        qa, va = qm, vm
    if vb == va:
        return qb, seen
    return qa + (target - va) * (qb - qa) / (vb - va), seen


def threshold(
    source: ShapedSource,
    ngmi_threshold: float,
    grid_db,
    n: int,
    seed: int,
    papr_db: float = 0.0,
    metric: QualityMetric = QualityMetric.SNR,
    full_grid: bool = True,
    label: str | None = None,
) -> ThresholdResult:
    """SNR* or PSNR* at which NGMI reaches ``ngmi_threshold``.

    NGMI is evaluated with common random numbers; with ``full_grid`` every
    grid point is evaluated, otherwise the bracket is found by bisection over
    grid indices.
    """
    if not 0 < ngmi_threshold < 1:
        raise InvalidParameterError(f"NGMI threshold must lie in (0, 1), got {ngmi_threshold!r}")
    grid = expand_grid(grid_db)
    offset = papr_db if metric is QualityMetric.PSNR else 0.0
    sampler = CurveSampler(source, n, seed, resamples=0)
    star, seen = _crossing(lambda q: sampler.estimate(q - offset).ngmi, grid, ngmi_threshold, full_grid)
    curve = pd.DataFrame(
        [{"quality_db": q, "snr_db": q - offset, "ngmi": v} for q, v in sorted(seen.items())]
    )
    return ThresholdResult(
        label=label or source.label,
        metric=metric,
        quality_star_db=star,
        snr_star_db=star - offset,
        papr_db=papr_db,
        ngmi_threshold=ngmi_threshold,
        curve=curve,
    )


def _threshold_task(config: SweepConfig, grid, full_grid: bool, plan: _PointPlan):
    if plan.error is not None:
        return plan.error
    try:
        return threshold(
            plan.source,
            config.ngmi_threshold,
            grid,
            config.samples_per_point,
            derive_seed(config.seed, plan.index),
            papr_db=plan.papr_db,
            metric=config.quality,
            full_grid=full_grid,
            label=plan.modulation.label,
        )
    except PcsError as exc:
        return str(exc)


def sweep_thresholds(config: SweepConfig, grid_db=None, workers: int = 1, full_grid: bool = True) -> pd.DataFrame:
    """One threshold row per modulation; failures keep their row with an error message."""
    grid = expand_grid(grid_db) if grid_db is not None else config.quality_grid_db
    plans = _plan(config)
    results = _map(partial(_threshold_task, config, grid, full_grid), plans, workers)
    rows = []
    for plan, result in zip(plans, results):
        row = {
            "modulation": plan.modulation.label,
            "family": plan.modulation.family.value,
            "order": plan.modulation.order,
            "entropy": plan.modulation.effective_entropy,
            "shaper": config.shaper.label,
            "constraint": config.constraint.value,
            "ngmi_threshold": config.ngmi_threshold,
            "measured_papr_db": plan.measured_papr_db,
            "papr_db": plan.papr_db,
            "snr_star_db": float("nan"),
            "psnr_star_db": float("nan"),
            "air": air(plan.modulation.effective_entropy, config.code_rate, plan.modulation.order),
            "error": None,
        }
        if isinstance(result, ThresholdResult):
            row["snr_star_db"] = result.snr_star_db
            row["psnr_star_db"] = result.psnr_star_db
        else:
            row["error"] = result
            print(f"  WARNING: {plan.modulation.label}: {result}")
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class RateCurve:
    table: pd.DataFrame
    thresholds: pd.DataFrame

    @property
    def _monotone(self) -> tuple[np.ndarray, np.ndarray]:
        h = self.thresholds["entropy"].to_numpy()
        return h, np.maximum.accumulate(self.thresholds["quality_star_db"].to_numpy())

    def entropy_at(self, quality_db: float) -> float:
        """Largest entropy decodable at ``quality_db``, interpolated between grid entropies; NaN if none."""
        h, q_star = self._monotone
        ok = np.flatnonzero(q_star <= quality_db)
        if ok.size == 0:
            return float("nan")
        i = int(ok[-1])
        entropy = float(h[i])
        if i + 1 < len(h) and np.isfinite(q_star[i]) and np.isfinite(q_star[i + 1]) and q_star[i + 1] > q_star[i]:
            entropy += (quality_db - q_star[i]) / (q_star[i + 1] - q_star[i]) * (h[i + 1] - h[i])
        return entropy

    def quality_at(self, entropy: float) -> float:
        """Threshold quality for ``entropy``, interpolated between the solved entropies."""
        h, q_star = self._monotone
        finite = np.isfinite(q_star)
        if not finite.any():
            return float("nan")
        return float(np.interp(entropy, h[finite], q_star[finite]))


def _entropy_grid(family: Family, order: int, polarity, bias, step: float) -> np.ndarray:
    if not 0 < step <= 0.05 + 1e-12:
        raise InvalidParameterError(f"entropy step must lie in (0, 0.05] bit, got {step!r}")
    alphabet = pam_alphabet(order, polarity or (Polarity.UNIPOLAR if family is Family.ASMB else Polarity.BIPOLAR), bias)
    low, high = entropy_range(family, alphabet)
    if family is Family.UNIFORM:
        return np.array([high])
    grid = np.round(high - step * np.arange(math.ceil((high - low) / step)), 10)
    return grid[grid > low + 1e-9]


def rate_adaptation_curve(
    family,
    order: int,
    quality_grid_db,
    constraint: Constraint = Constraint.APC,
    shaper: PulseShaper | None = None,
    ngmi_threshold: float = float(DEFAULTS["ngmi_threshold"]),
    code_rate: float = float(DEFAULTS["code_rate"]),
    entropy_step: float = float(DEFAULTS["entropy_step"]),
    samples_per_point: int = int(DEFAULTS["samples_per_point"]),
    seed: int = int(DEFAULTS["seed"]),
    polarity=None,
    bias: float | None = None,
    clip_ratio: float = float(DEFAULTS["clip_ratio"]),
    calibration_samples: int = int(DEFAULTS["calibration_samples"]),
    shaping_rate_loss: float = 0.0,
) -> RateCurve:
    """Largest entropy meeting NGMI* at each quality point, mapped through the AIR.

    Thresholds are found per entropy from the top of the family's range down;
    once an entropy is decodable over the whole grid, lower ones are never
    picked and are skipped. Between grid entropies H is interpolated linearly
    in the threshold.
    """
    family = _coerce(Family, family, "distribution family")
    constraint = Constraint(constraint)
    shaper = shaper or no_shaper()
    grid = expand_grid(quality_grid_db)
    # raises on inconsistent constraint / shaper combinations
    ChannelSpec(constraint, grid[0], shaper=shaper, clip_ratio=clip_ratio)
    metric = quality_for(constraint)

    threshold_rows = []
    for index, h in enumerate(_entropy_grid(family, order, polarity, bias, entropy_step)):
        target = None if family is Family.UNIFORM else float(h)
        source = Modulation(family, order, target, polarity, bias).source()
        papr_db = measure_papr(source, shaper, clip_ratio, calibration_samples, seed).papr_db
        try:
            star = threshold(
                source, ngmi_threshold, grid, samples_per_point, derive_seed(seed, index),
                papr_db=papr_db, metric=metric, full_grid=False,
            ).quality_star_db
        except NoCrossingError as exc:
            star = -math.inf if exc.ngmi_low >= ngmi_threshold else math.inf
        threshold_rows.append({"entropy": source.entropy, "papr_db": papr_db, "quality_star_db": star})
        if star == -math.inf:
            break

    thresholds = pd.DataFrame(threshold_rows).sort_values("entropy").reset_index(drop=True)
    curve = RateCurve(pd.DataFrame(), thresholds)
    rows = []
    for q in grid:
        entropy = curve.entropy_at(q)
        rate = float("nan") if math.isnan(entropy) else air(entropy, code_rate, order, shaping_rate_loss)
        rows.append({"quality_db": q, "entropy": entropy, "air": rate})
    return RateCurve(pd.DataFrame(rows), thresholds)


def papr_vs_entropy(
    family,
    order: int,
    entropies,
    shaper: PulseShaper | None = None,
    clip_ratio: float = float(DEFAULTS["clip_ratio"]),
    psnr_ref_db: float = float(DEFAULTS["psnr_ref_db"]),
    calibration_samples: int = int(DEFAULTS["calibration_samples"]),
    seed: int = int(DEFAULTS["seed"]),
    polarity=None,
    bias: float | None = None,
) -> pd.DataFrame:
    """PAPR per entropy and the SNR left at a fixed reference PSNR."""
    shaper = shaper or no_shaper()
    rows = []
    for h in expand_grid(entropies):
        source = shaped_source(family, order, h, polarity, bias)
        papr = measure_papr(source, shaper, clip_ratio, calibration_samples, seed).papr_db
        rows.append({
            "entropy": h,
            "shaper": shaper.label,
            "papr_db": papr,
            "snr_db": psnr_ref_db - papr,
            "psnr_db": psnr_ref_db,
        })
    return pd.DataFrame(rows)


def distance_vs_entropy(
    family,
    order: int,
    entropies,
    constraint: Constraint,
    power: float,
    shaper: PulseShaper | None = None,
    clip_ratio: float = float(DEFAULTS["clip_ratio"]),
    calibration_samples: int = int(DEFAULTS["calibration_samples"]),
    seed: int = int(DEFAULTS["seed"]),
    polarity=None,
    bias: float | None = None,
) -> pd.DataFrame:
    """Scale Δ and minimum distance 2Δ per entropy under one power constraint."""
    constraint = Constraint(constraint)
    shaper = shaper or no_shaper()
    rows = []
    for h in expand_grid(entropies):
        source = shaped_source(family, order, h, polarity, bias)
        if constraint is Constraint.APC:
            scale = normalize_apc(source, power)
        elif constraint is Constraint.PPC:
            scale = normalize_ppc(source, power)
        else:
            scale = normalize_ppc_clip(source, shaper, power, clip_ratio, calibration_samples, seed)
        scaled = source.with_scale(scale)
        rows.append({
            "entropy": h,
            "constraint": constraint.value,
            "shaper": shaper.label,
            "power": power,
            "scale": scale,
            "min_distance": min_distance(scaled),
            "average_energy": average_energy(scaled),
        })
    return pd.DataFrame(rows)


def intensity_vs_entropy(order: int, entropies, bias: float | None = None) -> pd.DataFrame:
    """Mean intensity of AS-MB and of symmetric MB on the same unipolar alphabet."""
    rows = []
    for family in (Family.ASMB, Family.MB):
        for h in expand_grid(entropies):
            source = shaped_source(family, order, h, Polarity.UNIPOLAR, bias)
            rows.append({
                "entropy": h,
                "family": family.value,
                "mean_intensity": mean_intensity(source),
                "average_energy": average_energy(source),
                "papr_db": papr_deterministic(source).papr_db,
            })
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class LinearFit:
    slope: float
    intercept: float
    residuals: np.ndarray
    count: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "max_abs_residual": float(np.max(np.abs(self.residuals))) if self.count else float("nan"),
            "points": self.count,
        }


def delta_relation_check(points) -> LinearFit:
    """Least-squares line through (ΔPAPR, ΔPSNR*) points."""
    pairs = np.asarray(list(points), dtype=float).reshape(-1, 2)
    x, y = pairs[:, 0], pairs[:, 1]
    if len(np.unique(np.round(x, 12))) < 2:
        raise DegenerateFitError(f"a line needs at least two distinct ΔPAPR values, got {len(np.unique(x))}")
    fit = stats.linregress(x, y)
    residuals = y - (fit.slope * x + fit.intercept)
    return LinearFit(float(fit.slope), float(fit.intercept), residuals, len(x))


SAME_MODULATION = "same-modulation"
SAME_ROLLOFF = "same-rolloff"


def delta_relation_series(
    mode: str,
    modulations,
    rolloffs,
    ngmi_threshold: float = float(DEFAULTS["ngmi_threshold"]),
    search_grid_db=None,
    samples_per_point: int = int(DEFAULTS["samples_per_point"]),
    seed: int = int(DEFAULTS["seed"]),
    clip_ratio: float = float(DEFAULTS["clip_ratio"]),
    calibration_samples: int = int(DEFAULTS["calibration_samples"]),
    span: int | None = None,
    oversampling: int | None = None,
) -> pd.DataFrame:
    """(ΔPAPR, ΔPSNR*) points across roll-offs.

    same-modulation: each modulation against its own unfiltered signal.
    same-rolloff: every modulation after the first against the first, under the same filter.
    PSNR* is SNR* + PAPR, with SNR* solved once per modulation at symbol level.
    """
    if mode not in (SAME_MODULATION, SAME_ROLLOFF):
        raise InvalidParameterError(f"mode must be {SAME_MODULATION} or {SAME_ROLLOFF}, got {mode!r}")
    mods = expand_modulations(modulations)
    if mode == SAME_ROLLOFF and len(mods) < 2:
        raise InvalidParameterError("same-rolloff comparison needs a reference and at least one other modulation")
    grid = expand_grid(search_grid_db or DEFAULTS["search_grid_db"])
    shape_kwargs = {}
    if span is not None:
        shape_kwargs["span"] = span
    if oversampling is not None:
        shape_kwargs["oversampling"] = oversampling
    shapers = [no_shaper(**({"oversampling": oversampling} if oversampling else {}))]
    shapers += [PulseShaper(ShaperKind.RRC, float(r), **shape_kwargs) for r in rolloffs if r is not None]

    sources = [m.source() for m in mods]
    snr_star = [
        threshold(src, ngmi_threshold, grid, samples_per_point, derive_seed(seed, i)).snr_star_db
        for i, src in enumerate(sources)
    ]
    papr = [
        [measure_papr(src, sh, clip_ratio, calibration_samples, seed).papr_db for sh in shapers]
        for src in sources
    ]

    rows = []
    for j, shaper in enumerate(shapers):
        rolloff = float("nan") if shaper.kind is ShaperKind.NONE else shaper.rolloff
        if mode == SAME_MODULATION:
            pairs = [(i, 0, i, j) for i in range(len(mods))]
        else:
            pairs = [(0, j, i, j) for i in range(1, len(mods))]
        for ref_mod, ref_shaper, mod, sh in pairs:
            ref_psnr = snr_star[ref_mod] + papr[ref_mod][ref_shaper]
            psnr = snr_star[mod] + papr[mod][sh]
            rows.append({
                "series": mods[mod].label if mode == SAME_MODULATION else f"{mods[mod].label} vs {mods[ref_mod].label}",
                "rolloff": rolloff,
                "shaper": shaper.label,
                "papr_db": papr[mod][sh],
                "psnr_star_db": psnr,
                "delta_papr_db": papr[mod][sh] - papr[ref_mod][ref_shaper],
                "delta_psnr_star_db": psnr - ref_psnr,
            })
    return pd.DataFrame(rows)


def fit_series(series: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for name, group in series.groupby("series", sort=False):
        fit = delta_relation_check(zip(group["delta_papr_db"], group["delta_psnr_star_db"]))
        rows.append({"series": name, **fit.to_dict()})
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    scenario_id: int
    name: str
    symbol_rate_gbaud: float
    config: SweepConfig
    records: list[SweepRecord]
    thresholds: pd.DataFrame
    psnr_star_range_db: float
    rop_range_db: float
    shaping_gain_db: float

    @property
    def papr_table(self) -> pd.DataFrame:
        cols = ["modulation", "family", "order", "entropy", "shaper", "measured_papr_db", "papr_db"]
        return self.thresholds[cols].copy()

    def summary(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "name": self.name,
            "symbol_rate_gbaud": self.symbol_rate_gbaud,
            "shaper": self.config.shaper.to_dict(),
            "equal_average_power": self.config.equal_average_power,
            "psnr_star_range_db": self.psnr_star_range_db,
            "rop_range_db": self.rop_range_db,
            "shaping_gain_db": self.shaping_gain_db,
            "shaping_gain": bool(self.shaping_gain_db > 0),
        }


def scenario_config(scenario_id: int, overrides: dict | None = None) -> tuple[dict, SweepConfig]:
    try:
        preset = scenario_preset(int(scenario_id))
    except (KeyError, ValueError):
        raise InvalidParameterError(f"unknown scenario {scenario_id!r}; expected 1, 2 or 3") from None
    overrides = dict(overrides or {})
    shaper = PulseShaper(**{**preset["shaper"], **overrides.pop("shaper", {})})
    config = SweepConfig(
        modulations=overrides.pop("modulations", SCENARIO_COMMON["modulations"]),
        quality_grid_db=overrides.pop("quality_grid_db", SCENARIO_COMMON["quality_grid_db"]),
        constraint=Constraint.PPC_CLIP,
        shaper=shaper,
        equal_average_power=overrides.pop("equal_average_power", preset["equal_average_power"]),
        **overrides,
    )
    return preset, config


def scenario(scenario_id: int, overrides: dict | None = None, workers: int = 1) -> ScenarioReport:
    """Run one scenario chain: NGMI curves, PAPR table, thresholds and adaptation range."""
    preset, config = scenario_config(scenario_id, overrides)
    print(f"  Scenario {scenario_id}: {preset['name']} ({config.shaper.label})")
    records = ngmi_sweep(config, workers)
    thresholds = sweep_thresholds(config, workers=workers)

    ok = thresholds[thresholds["error"].isna()]
    pam8 = ok[(ok["order"] == 8)]
    spread = float(pam8["psnr_star_db"].max() - pam8["psnr_star_db"].min()) if len(pam8) > 1 else float("nan")

    pam4 = ok[(ok["order"] == 4) & (ok["family"] == Family.UNIFORM.value)]
    shaped = ok[(ok["order"] == 8) & (ok["family"] != Family.UNIFORM.value)]
    gain = float("nan")
    if len(pam4) and len(shaped):
        ref = pam4.iloc[0]
        candidates = shaped[shaped["air"] >= ref["air"] - 1e-9]
        if len(candidates):
            gain = float(ref["psnr_star_db"] - candidates["psnr_star_db"].min())

    return ScenarioReport(
        scenario_id=int(scenario_id),
        name=preset["name"],
        symbol_rate_gbaud=float(preset["symbol_rate_gbaud"]),
        config=config,
        records=records,
        thresholds=thresholds,
        psnr_star_range_db=spread,
        rop_range_db=spread / 2.0,
        shaping_gain_db=gain,
    )
