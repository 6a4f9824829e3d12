#!/usr/bin/env python3
"""Run one preset at desk scale and print the summary."""

import argparse
import json
from pathlib import Path

from scarsim.classical import PRESETS
from scarsim.pipeline import RunConfig, run_pipeline


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="No7")
    ap.add_argument("--p0", type=float, default=60.0)
    ap.add_argument("--sigma0", type=float, default=0.15)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    out = args.out or Path("runs") / f"{args.preset.lower()}_p{args.p0:g}"
    cfg = RunConfig(preset=args.preset, p0=args.p0, sigma0=args.sigma0)
    result = run_pipeline(cfg, out)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    print(f"artifacts in {out}")


if __name__ == "__main__":
    main()
