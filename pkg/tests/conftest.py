import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from scripts.dsp import PulseShaper, ShaperKind  # noqa: E402
from scripts.source import shaped_source  # noqa: E402

# Monte-Carlo sizes small enough for the default (non-slow) run
FAST_N = 20_000
FAST_CALIBRATION = 200_000
FAST_CLIP = 1e-3


@pytest.fixture
def uniform8():
    return shaped_source("uniform", 8)


@pytest.fixture
def uniform4():
    return shaped_source("uniform", 4)


@pytest.fixture
def mb8_22():
    return shaped_source("mb", 8, 2.2)


@pytest.fixture
def short_rrc():
    return PulseShaper(ShaperKind.RRC, 0.2, span=16, oversampling=4)


@pytest.fixture
def write_config(tmp_path):
    """Write a dict as a JSON run config and return its path."""
    def _write(data: dict, name: str = "run.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write
