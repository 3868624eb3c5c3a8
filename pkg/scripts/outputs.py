"""Result files: CSV tables, JSON sidecars and the run manifest.

CSV column order is pinned per table name below; bump CSV_SCHEMA_VERSION
whenever a registered column list changes.
"""
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from config.settings import VERSION
from scripts.errors import ConfigError

CSV_SCHEMA_VERSION = "1"
CSV_FLOAT_FORMAT = "%.9g"
MANIFEST_NAME = "manifest.json"

SWEEP_COLUMNS = [
    "modulation", "family", "order", "entropy", "shaper", "constraint", "quality_db", "snr_db",
    "psnr_db", "papr_db", "ngmi", "gmi", "ngmi_stderr", "gmi_stderr", "air", "decodable", "scale",
    "seed", "samples", "error",
]

COLUMNS = {
    "dist": ["modulation", "entropy", "lambda", "level", "probability", "label_bits"],
    "taps": ["shaper", "index", "time", "tap"],
    "papr": ["signal", "shaper", "clip_ratio", "clip_power", "mean_power", "papr_db"],
    "ccdf": ["modulation", "shaper", "mode", "power", "power_db", "ccdf"],
    "sweep": SWEEP_COLUMNS,
    "threshold": [
        "modulation", "family", "order", "entropy", "shaper", "constraint", "ngmi_threshold",
        "measured_papr_db", "papr_db", "snr_star_db", "psnr_star_db", "air", "error",
    ],
    "rate_adaptation": ["modulation", "quality_db", "entropy", "air"],
    "delta": [
        "mode", "series", "rolloff", "shaper", "papr_db", "psnr_star_db", "delta_papr_db", "delta_psnr_star_db",
    ],
    "delta_fit": ["series", "slope", "intercept", "max_abs_residual", "points"],
    # figure tables
    "fig_ngmi": ["psnr_db", "snr_db", "entropy", "ngmi", "modulation", "shaper", "ngmi_stderr", "papr_db", "error"],
}


def _json_default(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _clean_float(float(obj))
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean_float(value: float):
    return value if math.isfinite(value) else None


def _clean(obj):
    """NaN/inf become null so the JSON stays strict."""
    if isinstance(obj, float):
        return _clean_float(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def safe_path(out_dir: Path, name: str) -> Path:
    """Resolve ``name`` inside ``out_dir``; anything escaping it is refused."""
    root = Path(out_dir).resolve()
    path = (root / name).resolve()
    if path != root and root not in path.parents:
        raise ConfigError(f"output {name!r} would be written outside {root}")
    return path


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_csv(frame: pd.DataFrame, path: Path, schema: str | None = None) -> Path:
    """Write a table with 9 significant digits and LF endings, in registered column order."""
    if schema is not None:
        columns = COLUMNS[schema]
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise KeyError(f"table for {schema!r} lacks columns {missing}")
        frame = frame[columns]
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(data, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        json.dump(_clean(json.loads(json.dumps(data, default=_json_default))), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    out_dir: Path
    version: str = VERSION
    csv_schema_version: str = CSV_SCHEMA_VERSION
    python: str = field(default_factory=lambda: sys.version.split()[0])
    outputs: dict[str, str] = field(default_factory=dict)
    error: dict | None = None
    wall_clock_seconds: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def path_for(self, name: str) -> Path:
        return safe_path(self.out_dir, name)

    def add_output(self, path: Path) -> None:
        relative = Path(path).resolve().relative_to(Path(self.out_dir).resolve())
        self.outputs[relative.as_posix()] = sha256_file(path)

    def csv(self, frame: pd.DataFrame, name: str, schema: str | None = None) -> Path:
        path = write_csv(frame, self.path_for(name), schema)
        self.add_output(path)
        return path

    def json(self, data, name: str) -> Path:
        path = write_json(data, self.path_for(name))
        self.add_output(path)
        return path

    def fail(self, exc: Exception) -> None:
        self.error = {"type": type(exc).__name__, "message": str(exc)}

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("_started")
        data.pop("out_dir")
        data["outputs"] = dict(sorted(self.outputs.items()))
        return data

    def write(self) -> Path:
        self.wall_clock_seconds = round(time.perf_counter() - self._started, 3)
        return write_json(self.to_dict(), self.path_for(MANIFEST_NAME))
