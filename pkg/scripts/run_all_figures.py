"""Full local pipeline: every figure preset, every scenario, then a report per run.

Results land in $PCSIM_OUT_DIR/fig<name>/ and $PCSIM_OUT_DIR/scenario<id>/.
With the default sample counts this takes hours; pass --fast for a
smoke-sized pass.
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import DEFAULT_WORKERS, FIGURES, OUTPUT_DIR, SCENARIOS
from scripts.cli import EXIT_OK, run

FAST_SETTINGS = ["--seed", "1"]
FAST_CONFIG = {"samples_per_point": 20000, "calibration_samples": 200000, "clip_ratio": 1e-3}


def _fast_config(out_root: Path) -> Path:
    path = out_root / "fast.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(FAST_CONFIG, indent=2) + "\n")
    return path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Reproduce every figure and scenario")
    parser.add_argument("--out", type=Path, default=OUTPUT_DIR)
    parser.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    parser.add_argument("--fast", action="store_true", help="small sample counts for a quick check")
    args = parser.parse_args(argv)

    common = ["--workers", str(args.workers)]
    if args.fast:
        common += FAST_SETTINGS + ["--config", str(_fast_config(args.out))]

    print("=" * 50)
    print("FULL FIGURE PIPELINE")
    print("=" * 50)

    jobs = [(f"fig{name}", ["fig", name]) for name in FIGURES]
    jobs += [(f"scenario{sid}", ["scenario", str(sid)]) for sid in SCENARIOS]

    failed = []
    for step, (run_name, command) in enumerate(jobs, start=1):
        out_dir = args.out / run_name
        print(f"\n--- Step {step}: {' '.join(command)} ---")
        code = run(command + ["--out", str(out_dir)] + common)
        if code != EXIT_OK:
            print(f"  ERROR: {run_name} exited with {code}")
            failed.append(run_name)
            continue
        run(["report", str(out_dir), "--out", str(out_dir / "report"), "--quiet"])

    print("\n" + "=" * 50)
    print("FULL FIGURE PIPELINE COMPLETE")
    print("=" * 50)
    if failed:
        print(f"\nFailed runs: {', '.join(failed)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
