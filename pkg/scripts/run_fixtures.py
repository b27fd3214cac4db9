"""Run the full pipeline on the synthetic fixtures and print a summary table.

    python scripts/run_fixtures.py --out runs/ [--full] [--seed 0] [name ...]

Desk-scale settings are used unless ``--full`` is given.
"""

import argparse
import json
import logging
import time
from pathlib import Path

from pasgrip.config import PipelineConfig
from pasgrip.fixtures import DESK, fixtures, write_fixture_config
from pasgrip.pipeline import PipelineError, run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", help="fixtures to run (default: all)")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--full", action="store_true", help="use the full-resolution defaults")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)

    table = fixtures()
    rows = []
    for name in args.names or list(table):
        root = Path(args.out) / name
        cfg_path = write_fixture_config(table[name], root, seed=args.seed, **({} if args.full else DESK))
        t0 = time.perf_counter()
        try:
            code = run_pipeline(PipelineConfig.load(cfg_path))
        except PipelineError as e:
            code = e.exit_code
        dt = time.perf_counter() - t0
        out = root / "out"
        row = {"fixture": name, "exit": code, "seconds": round(dt, 1)}
        if (out / "gcs.json").is_file():
            row["ranked_gcs"] = len(json.loads((out / "gcs.json").read_text())["ranked"])
        if (out / "trajopt.json").is_file():
            s = json.loads((out / "trajopt.json").read_text())
            row.update(attempted=len(s["attempted"]), best_gc=s["best"])
        if (out / "topopt.json").is_file():
            t = json.loads((out / "topopt.json").read_text())
            row.update(compliance=round(t["final_compliance"], 4), gripper_cm3=round(t["gripper_volume"] * 1e6, 2))
        rows.append(row)

    keys = ["fixture", "exit", "seconds", "ranked_gcs", "attempted", "best_gc", "compliance", "gripper_cm3"]
    print("\t".join(keys))
    for r in rows:
        print("\t".join(str(r.get(k, "-")) for k in keys))


if __name__ == "__main__":
    main()
