import json

import pandas as pd
import pytest

from scripts import build_report
from scripts.dsp import PulseShaper, ShaperKind
from scripts.generate_charts import build_charts, build_line_chart, build_summary_table


@pytest.fixture
def run_dir(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    pd.DataFrame({
        "modulation": ["A", "A", "B", "B"],
        "quality_db": [5.0, 10.0, 5.0, 10.0],
        "ngmi": [0.5, 0.9, 0.4, float("nan")],
    }).to_csv(d / "sweep.csv", index=False)
    spec = {"name": "sweep", "table": "sweep", "x": "quality_db", "y": "ngmi", "group": "modulation",
            "title": "NGMI sweep", "xlabel": "SNR (dB)", "ylabel": "NGMI", "logy": False, "markers": False,
            "csv": "sweep.csv"}
    (d / "plots.json").write_text(json.dumps([spec, {**spec, "name": "lost", "csv": "missing.csv"}]))
    (d / "summary.json").write_text(json.dumps({"points": 4, "gain_db": 0.98123}))
    (d / "manifest.json").write_text(json.dumps({
        "command": "sweep", "seed": 7, "version": "1.0.0", "csv_schema_version": "1",
        "wall_clock_seconds": 1.5, "outputs": {"sweep.csv": "ab" * 32}, "error": None, "config": {"seed": 7},
    }))
    return d


def test_charts_skip_missing_tables(run_dir):
    charts = build_charts(run_dir)
    assert list(charts) == ["sweep"]


def test_line_chart_without_finite_points():
    frame = pd.DataFrame({"x": [1.0], "y": [float("nan")], "g": ["a"]})
    spec = {"x": "x", "y": "y", "group": "g", "title": "t", "xlabel": "x", "ylabel": "y"}
    assert "No finite values" in build_line_chart(frame, spec)


def test_summary_table_formats_floats():
    table = build_summary_table({"gain_db": 0.98123})
    assert "0.9812" in table
    assert build_summary_table({}) == ""


def test_summary_table_flattens_nested_values():
    shaper = PulseShaper(ShaperKind.RRC, 0.2, tilt_db=3.0, tilt_edge="band").to_dict()
    table = build_summary_table({"shaper": shaper, "Uniform PAM-8 vs MB": {"slope": 1.0}})
    assert "RRC ρ=0.2 + 3 dB tilt (band edge)" in table
    assert "Uniform PAM-8 vs MB.slope" in table
    assert "{" not in table


def test_describe_manifest_lists_failure():
    text = build_report.describe_manifest({"command": "threshold", "error": {"type": "NoCrossingError", "message": "never"}})
    assert "**Run failed:** NoCrossingError: never" in text


def test_build(run_dir, tmp_path):
    path = build_report.build(run_dir, tmp_path / "out")
    page = path.read_text()
    assert "pcsim: sweep" in page
    assert "NGMI sweep" in page
    assert "0.9812" in page
    assert "sweep.csv" in page


def test_build_requires_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        build_report.build(tmp_path, tmp_path / "out")
