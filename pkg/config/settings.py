"""Central configuration for pcsim."""
import json
import os
from pathlib import Path

VERSION = "1.0.0"

ROOT_DIR = Path(__file__).parent.parent
CONFIG_DIR = ROOT_DIR / "config"
SITE_DIR = ROOT_DIR / "site"
TEMPLATES_DIR = SITE_DIR / "templates"
OUTPUT_DIR = Path(os.getenv("PCSIM_OUT_DIR", str(ROOT_DIR / "results")))

DEFAULT_WORKERS = int(os.getenv("PCSIM_WORKERS", "1"))
BOOTSTRAP_RESAMPLES = int(os.getenv("PCSIM_BOOTSTRAP", "50"))

with open(CONFIG_DIR / "presets.json") as f:
    _config = json.load(f)

DEFAULTS = _config["defaults"]
SHAPER_DEFAULTS = _config["shaper"]
SCENARIOS = {int(k): v for k, v in _config["scenarios"].items()}
SCENARIO_COMMON = _config["scenario_common"]
FIGURES = _config["figures"]

# Plot styling shared by the SVG and HTML renderers
FAMILY_COLORS = _config["colors"]


def figure_preset(name: str) -> dict:
    """Return a copy of a figure preset, or raise KeyError listing the known names."""
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; known: {', '.join(sorted(FIGURES))}")
    return json.loads(json.dumps(FIGURES[name]))


def scenario_preset(scenario_id: int) -> dict:
    """Return a copy of a scenario chain definition."""
    if scenario_id not in SCENARIOS:
        raise KeyError(f"unknown scenario {scenario_id!r}; known: {sorted(SCENARIOS)}")
    return json.loads(json.dumps(SCENARIOS[scenario_id]))


def list_run_directories(directory: Path) -> list[Path]:
    """Return child directories holding a manifest, sorted ascending by name."""
    if not directory.exists():
        return []
    return sorted(d for d in directory.iterdir() if d.is_dir() and (d / "manifest.json").exists())


def load_run_file(directory: Path, filename: str) -> dict | str | None:
    """Load a file from a run directory; JSON files are parsed."""
    path = directory / filename
    if not path.exists():
        return None

    if filename.endswith(".json"):
        with open(path) as f:
            return json.load(f)

    with open(path) as f:
        return f.read()
