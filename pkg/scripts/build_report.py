"""Build a static HTML report for one run directory."""
import sys
from pathlib import Path

import markdown
from jinja2 import Environment, FileSystemLoader, select_autoescape

sys.path.insert(0, str(Path(__file__).parent.parent))
from config.settings import OUTPUT_DIR, TEMPLATES_DIR, VERSION, list_run_directories, load_run_file
from scripts.generate_charts import build_charts, build_summary_table

SUMMARY_FILE = "summary.json"
NOTES_FILE = "notes.md"
REPORT_NAME = "report.html"


def describe_manifest(manifest: dict) -> str:
    """Markdown paragraph summarizing how the run was produced."""
    lines = [
        f"Command `{manifest.get('command', '?')}` with seed `{manifest.get('seed')}`, "
        f"pcsim {manifest.get('version', '?')}, CSV schema {manifest.get('csv_schema_version', '?')}.",
        "",
        f"Wall clock: {manifest.get('wall_clock_seconds', 0):.1f} s.",
    ]
    error = manifest.get("error")
    if error:
        lines += ["", f"**Run failed:** {error.get('type')}: {error.get('message')}"]
    outputs = manifest.get("outputs", {})
    if outputs:
        lines += ["", "| file | sha256 |", "|---|---|"]
        lines += [f"| {name} | `{digest[:16]}…` |" for name, digest in outputs.items()]
    return "\n".join(lines)


def build(run_dir: Path, out_dir: Path) -> Path:
    """Render ``report.html`` for ``run_dir`` into ``out_dir``."""
    manifest = load_run_file(run_dir, "manifest.json")
    if manifest is None:
        raise FileNotFoundError(f"{run_dir} has no manifest.json; not a run directory")

    env = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=select_autoescape(["html", "xml"]),
    )
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = load_run_file(run_dir, SUMMARY_FILE) or {}
    notes_md = load_run_file(run_dir, NOTES_FILE)
    charts = build_charts(run_dir)

    tpl = env.get_template("report.html")
    page = tpl.render(
        title=f"pcsim: {manifest.get('command', 'run')}",
        version=VERSION,
        run_name=run_dir.name,
        manifest_html=markdown.markdown(describe_manifest(manifest), extensions=["tables"]),
        notes_html=markdown.markdown(notes_md) if notes_md else None,
        summary_table=build_summary_table(summary),
        charts=charts,
        config=manifest.get("config", {}),
    )
    path = out_dir / REPORT_NAME
    with open(path, "w") as f:
        f.write(page)

    print(f"Report built to {path} ({len(charts)} chart(s))")
    return path


def main(run_dir: Path | None = None, out_dir: Path | None = None) -> Path:
    if run_dir is None:
        runs = list_run_directories(OUTPUT_DIR)
        if not runs:
            raise FileNotFoundError(f"No runs found under {OUTPUT_DIR}. Run the CLI first.")
        run_dir = runs[-1]
    return build(run_dir, out_dir or run_dir)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else None)
