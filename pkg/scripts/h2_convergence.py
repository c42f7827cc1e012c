"""H2-air convergence over (dt, n_t) against the small-step Euler oracle.

Prints the max relative error of the major species per run and writes the
sweep table plus the oracle and production trajectories (mole fractions).
"""
import argparse
from pathlib import Path

from carleman_kinetics.experiments import (
    RunConfig,
    build,
    reference_for,
    run,
    sweep,
    write_sweep_csv,
    write_trajectory_csv,
)

CONFIG = Path(__file__).parents[1] / "configs" / "h2_air.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--dt", type=float, nargs="+", default=[5e-8, 2.5e-8, 1.25e-8])
    ap.add_argument("--nt", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--t-end", type=float, help="override the config horizon")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="out/h2_air")
    args = ap.parse_args()

    cfg = RunConfig.load(args.config)
    if args.t_end:
        cfg = cfg.with_integration(t_end=args.t_end)
    out = Path(args.out)

    rows = sweep(cfg, args.dt, args.nt, workers=args.workers)
    write_sweep_csv(out / "sweep.csv", rows)
    print(f"{'dt':>9} {'n_t':>3} {'rel. error':>10} {'abs error':>10} {'dim':>5}")
    for r in rows:
        rel = "diverged" if r.diverged else f"{r.relative_error:.2%}"
        ab = "" if r.diverged else f"{r.max_abs_error:.2e}"
        print(f"{r.dt:9.3g} {r.n_t:3d} {rel:>10} {ab:>10} {r.dim:5d}")

    built = build(cfg)
    tr = run(cfg, built)
    ref = reference_for(cfg, built)
    write_trajectory_csv(out / "carleman.csv", tr, built.names, concentrations=False)
    write_trajectory_csv(out / "reference.csv", ref, built.names, concentrations=False)
    print(f"wrote {out}/sweep.csv, carleman.csv, reference.csv")


if __name__ == "__main__":
    main()
