"""Run every figure preset and summarize the headline numbers.

    python3 scripts/reproduce_all.py [--out runs] [--workers 1]
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from mollow_cqed.cli import main as cli
from mollow_cqed.presets import PRESETS
from mollow_cqed.sweep import read_records
from mollow_cqed.transition import line_fit, segmented_regression, transition_locator


def summarize(name, records_csv):
    recs = [r for r in read_records(records_csv) if not r.failed]
    for variant in dict.fromkeys(r.variant for r in recs):
        rows = [r for r in recs if r.variant == variant]
        x = np.array([r.omega_sq for r in rows])
        y = np.array([r.lower_fwhm for r in rows])
        seg = segmented_regression(x, y)
        _, _, r2 = line_fit(x, y)
        ratios = [r.area_ratio for r in rows if r.area_ratio is not None]
        print(
            f"{name:6s} {variant:15s} fwhm {y.min():6.2f}..{y.max():6.2f} GHz  R^2 {r2:.3f}  "
            f"hinge {seg.knee:6.0f} GHz^2 (ratio {seg.slope_ratio:+.2f})  "
            f"transition {transition_locator(x, y=y)}  max area ratio {max(ratios):.2f}"
        )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    worst = 0
    for name in sorted(PRESETS):
        out = args.out / name
        code = cli(["reproduce", name, "--out", str(out), "--workers", str(args.workers)])
        worst = max(worst, code)
        if code == 0:
            summarize(name, out / "records.csv")
    return worst


if __name__ == "__main__":
    sys.exit(main())
