"""CH4-air at n_t = 2: where the implicit Carleman step stops being usable.

Runs each dt to the horizon (or until divergence) and compares against the
oracle when it finishes.
"""
import argparse
from pathlib import Path

from carleman_kinetics.experiments import RunConfig, sweep, write_sweep_csv

CONFIG = Path(__file__).parents[1] / "configs" / "ch4_air.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--dt", type=float, nargs="+", default=[1e-8, 2e-8, 4e-8])
    ap.add_argument("--nt", type=int, nargs="+", default=[2])
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="out/ch4_air")
    args = ap.parse_args()

    cfg = RunConfig.load(args.config)
    rows = sweep(cfg, args.dt, args.nt, workers=args.workers)
    write_sweep_csv(Path(args.out) / "sweep.csv", rows)
    for r in rows:
        if r.diverged:
            print(f"dt={r.dt:g} n_t={r.n_t}: diverged at t={r.diverged_at:.3g}")
        else:
            print(f"dt={r.dt:g} n_t={r.n_t}: max rel. error of majors {r.relative_error:.2%}")


if __name__ == "__main__":
    main()
