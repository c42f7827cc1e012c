"""Lifted size and per-step cost of the implicit Carleman step versus truncation order.

Assembly and factorization are timed once; the per-step figure is a cached
block back substitution.
"""
import argparse
import time

from carleman_kinetics.carleman import assemble, lift
from carleman_kinetics.experiments import MechanismProblem, build, cost_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mechanism", default="h2_air_9sp")
    ap.add_argument("--fuel", default="H2")
    ap.add_argument("--max-nt", type=int, default=4)
    ap.add_argument("--dt", type=float, default=1e-8)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    built = build(MechanismProblem(args.mechanism, equivalence_ratio=0.8, fuel=args.fuel))
    n = built.system.n_state
    nnz = [a.nnz for a in built.system.coeffs]
    print(f"{'n_t':>3} {'dim':>7} {'ratio':>6} {'nnz':>8} {'bound':>8} {'assemble':>9} {'factor':>9} {'step':>9}")
    for n_t in range(1, args.max_nt + 1):
        est = cost_estimate(n, n_t, nnz)
        t0 = time.perf_counter()
        cs = assemble(built.system, n_t)
        t1 = time.perf_counter()
        factor = cs.implicit_operator(args.dt).factor
        t2 = time.perf_counter()
        X = lift(built.x0, n_t)
        for _ in range(args.repeat):
            factor.solve(X)
        step = (time.perf_counter() - t2) / args.repeat
        ratio = "" if est.ratio_to_prev_order is None else f"{est.ratio_to_prev_order:.3f}"
        print(f"{n_t:3d} {cs.dim:7d} {ratio:>6} {cs.nnz:8d} {est.nnz_estimate:8d} {t1 - t0:9.2e} {t2 - t1:9.2e} {step:9.2e}")


if __name__ == "__main__":
    main()
