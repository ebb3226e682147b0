"""Recover the phonon rates from synthetic linewidth curves, one line per seed.

    python3 scripts/calibrate_synthetic.py --seeds 10 --noise 0.03 --delta-cx 42
"""
import argparse
import time

import numpy as np

from mollow_cqed.calibration import fit_phonon_rates, synthetic_curve
from mollow_cqed.model import paper_params


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.03)
    ap.add_argument("--delta-cx", type=float, default=42.0)
    ap.add_argument("--points", type=int, default=12)
    ap.add_argument("--fock", type=int, default=6)
    ap.add_argument("--rates", type=float, nargs=2, default=(0.19, 0.28))
    args = ap.parse_args(argv)
    fixed = paper_params(args.delta_cx, frame="displaced", fock_dim=args.fock)
    omegas = np.linspace(15, 70, args.points)
    hits = 0
    for seed in range(args.seeds):
        t0 = time.time()
        data = synthetic_curve(fixed, omegas, tuple(args.rates), noise=args.noise, seed=seed)
        fit = fit_phonon_rates(data)
        ok = abs(fit.gamma_ph_ads - args.rates[0]) <= 0.03 and abs(fit.gamma_ph_asp - args.rates[1]) <= 0.05
        hits += ok
        print(
            f"seed {seed:3d}: ads {fit.gamma_ph_ads:.4f} +- {fit.sigma_ads:.4f}  "
            f"asp {fit.gamma_ph_asp:.4f} +- {fit.sigma_asp:.4f}  chi {fit.residual_norm:.3f}  "
            f"{'ok ' if ok else 'off'} {'clamped' if fit.clamped else ''} ({time.time() - t0:.0f} s)"
        )
    print(f"{hits}/{args.seeds} within +-0.03 / +-0.05 GHz")


if __name__ == "__main__":
    main()
