#!/usr/bin/env python3
"""End-to-end demo on a fresh synthetic universe.

Generates the data tree, runs ingest -> features -> backtest -> ensemble ->
report with the default model zoo, and leaves everything under --workdir.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from stackcast import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/synthetic_demo")
    parser.add_argument("--stocks", type=int, default=20)
    parser.add_argument("--years", type=int, default=6)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    work = Path(args.workdir)
    data = work / "data"
    run = work / "run"
    work.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    rc = cli.main(["synth", "--out", str(data), "--stocks", str(args.stocks),
                   "--years", str(args.years), "--seed", str(args.seed)])
    if rc != 0:
        return rc

    end_year = 2000 + args.years - 1
    config = {
        "seed": args.seed,
        "data_dir": str(data),
        "run_dir": str(run),
        "start": "2000-01-01",
        "end": f"{end_year}-12-31",
        "min_years": min(5, args.years - 1),
        "specs": "default",
    }
    config_path = work / "run.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")

    for command in ("ingest", "features", "backtest", "ensemble", "report"):
        print(f"== {command} ({time.time() - t0:.0f}s elapsed)")
        rc = cli.main([command, "--config", str(config_path)])
        if rc != 0:
            return rc
    print(f"done in {time.time() - t0:.0f}s; see {run / 'metrics_summary.txt'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
