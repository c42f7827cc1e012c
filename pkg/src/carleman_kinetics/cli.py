"""Command line entry point ``carleman-kin``.

Exit codes: 0 success, 1 usage error, 2 parse/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .carleman import assemble, block_offsets_text
from .experiments import (
    ConfigError,
    RunConfig,
    build,
    cost_estimate,
    reference_for,
    run,
    sweep,
    write_sweep_csv,
    write_trajectory_csv,
)
from .integrators import DivergenceDetected
from .kinetics import KineticsError, element_imbalance, element_totals, to_polynomial
from .mech_parser import MechanismParseError, load_mechanism
from .sparse_core import DimensionOverflow, SingularMatrix, write_matrix_market

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carleman-kin", description="Carleman-linearized kinetics runs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate a config and write the trajectory CSV")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="CSV path (default <output dir>/trajectory.csv)")
    s.add_argument("--concentrations", action="store_true", help="write mol/cm^3 instead of mole fractions")

    s = sub.add_parser("sweep", help="error table over a (dt, n_t) grid")
    s.add_argument("config")
    s.add_argument("--dt", type=float, nargs="+", required=True)
    s.add_argument("--nt", type=int, nargs="+", required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--workers", type=int)

    s = sub.add_parser("reference", help="small-step Euler oracle run")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.add_argument("--dt-ref", type=float, help="override the reference step")
    s.add_argument("--concentrations", action="store_true")

    s = sub.add_parser("assemble", help="assemble A_c and report its size")
    s.add_argument("config")
    s.add_argument("--dump", action="store_true", help="write A_c as MatrixMarket plus a block-offset sidecar")
    s.add_argument("-o", "--output", help="MatrixMarket path (default <output dir>/a_c.mtx)")

    s = sub.add_parser("estimate", help="lifted dimension for N species at order n_t")
    s.add_argument("--species", type=int, required=True)
    s.add_argument("--nt", type=int, required=True)

    s = sub.add_parser("check", help="parse a mechanism and report invariants")
    s.add_argument("mechanism")
    s.add_argument("--thermo")
    s.add_argument("-T", "--temperature", type=float, default=2000.0)
    return p


def _out(cfg: RunConfig, given: str | None, default: str) -> Path:
    return Path(given) if given else Path(cfg.output.directory) / default


def _simulate(args) -> int:
    cfg = RunConfig.load(args.config)
    built = build(cfg)
    tr = run(cfg, built)
    conc = args.concentrations or cfg.output.concentrations or built.mechanism is None
    path = write_trajectory_csv(_out(cfg, args.output, "trajectory.csv"), tr, built.names, concentrations=conc)
    print(f"wrote {path} ({len(tr.times)} rows)")
    if tr.diverged:
        print(f"diverged at t={tr.diverged_at:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    rows = sweep(cfg, args.dt, args.nt, workers=args.workers)
    path = write_sweep_csv(_out(cfg, args.output, "sweep.csv"), rows)
    for r in rows:
        err = "diverged" if r.diverged else f"{r.representative_error:+.3e}"
        print(f"dt={r.dt:g} n_t={r.n_t} error={err} dim={r.dim}")
    print(f"wrote {path}")
    return EXIT_OK


def _reference(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.dt_ref is not None:
        cfg = RunConfig(cfg.problem, cfg.integration, cfg.output, args.dt_ref)
    built = build(cfg)
    tr = reference_for(cfg, built)
    conc = args.concentrations or cfg.output.concentrations or built.mechanism is None
    path = write_trajectory_csv(_out(cfg, args.output, "reference.csv"), tr, built.names, concentrations=conc)
    print(f"wrote {path} ({len(tr.times)} rows)")
    return EXIT_NUMERIC if tr.diverged else EXIT_OK


def _assemble(args) -> int:
    cfg = RunConfig.load(args.config)
    built = build(cfg)
    cs = assemble(built.system, cfg.integration.n_t)
    print(f"n_state={cs.n_state} n_t={cs.n_t} dim={cs.dim} nnz={cs.nnz}")
    if args.dump:
        path = _out(cfg, args.output, "a_c.mtx")
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            write_matrix_market(cs.flat, fh, comment=f"Carleman A_c n_t={cs.n_t}")
        side = path.with_suffix(".offsets.txt")
        side.write_text(block_offsets_text(cs))
        print(f"wrote {path} and {side}")
    return EXIT_OK


def _estimate(args) -> int:
    est = cost_estimate(args.species, args.nt)
    ratio = "" if est.ratio_to_prev_order is None else f" ratio={est.ratio_to_prev_order:.4g}"
    print(f"dim={est.dim}{ratio}")
    return EXIT_OK


def _check(args) -> int:
    mech = load_mechanism(args.mechanism, args.thermo)
    print(f"elements: {' '.join(mech.elements)}")
    print(f"species: {len(mech.species)} ({' '.join(mech.species_names)})")
    print(f"reactions: {len(mech.reactions)}")
    bad = [r.equation for r in mech.reactions if any(element_imbalance(mech, r).values())]
    if bad:
        raise KineticsError("unbalanced reactions: " + "; ".join(bad))
    sys_ = to_polynomial(mech, args.temperature)
    print(f"polynomial degree {sys_.degree}, nnz per A_j: {[a.nnz for a in sys_.coeffs]}")
    x = np.linspace(1.0, 2.0, len(mech.species)) * 1e-6
    rate = sys_.eval(x)
    drift = max(abs(v) for v in element_totals(mech, rate).values())
    print(f"elemental rate residual at a sample state: {drift:.2e}")
    print("ok")
    return EXIT_OK


COMMANDS = {
    "simulate": _simulate,
    "sweep": _sweep,
    "reference": _reference,
    "assemble": _assemble,
    "estimate": _estimate,
    "check": _check,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MechanismParseError as exc:
        for d in exc.diagnostics:
            print(f"{args.__dict__.get('mechanism') or args.__dict__.get('config')}: {d}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, KineticsError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceDetected, SingularMatrix, DimensionOverflow, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
