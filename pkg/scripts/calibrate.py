"""Sweep the price-field knobs and report what a client could save per fill
and where dynamic prices settle.

    python scripts/calibrate.py configs/paper_like.conf --lam 3 5 --sigma 0.3 0.4 --seeds 3
"""

import argparse
import itertools
import statistics
import sys
from dataclasses import replace

from gpit_sim.config import load_config
from gpit_sim.experiments import deal_histogram, prepare, run_mode


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--lam", type=float, nargs="+", help="variance scales (default from config)")
    ap.add_argument("--sigma", type=float, nargs="+", help="price noise sigmas (default from config)")
    ap.add_argument("--detour", type=float, nargs="+", help="detour radii in miles (default from config)")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args(argv)

    base = load_config(args.config)
    lams = args.lam or [base.prices.variance_scale]
    sigmas = args.sigma or [base.prices.noise_sigma]
    detours = args.detour or [base.sim.detour_radius]
    print("lambda,sigma_n,detour,mean_saving,dynamic_mean_price,mode_bins")
    for lam, sigma, detour in itertools.product(lams, sigmas, detours):
        cfg = replace(
            base,
            prices=replace(base.prices, variance_scale=lam, noise_sigma=sigma),
            sim=replace(base.sim, detour_radius=detour),
        )
        savings, prices, modes = [], [], []
        for seed in range(1, args.seeds + 1):
            rep = prepare(cfg, seed)
            savings += [r.potential_savings for refs in rep.plan.refuels.values() for r in refs]
            res = run_mode(cfg, rep, None)
            h = deal_histogram(d.price for d in res.deals if d.outcome == "deal")
            prices += h.prices
            modes.append("-" if h.mode_bin is None else f"{h.mode_bin[0]:.2f}")
        mean_price = statistics.fmean(prices) if prices else float("nan")
        print(f"{lam},{sigma},{detour},{statistics.fmean(savings):.3f},{mean_price:.3f},{' '.join(modes)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
