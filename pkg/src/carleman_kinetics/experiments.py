"""Run configuration, error metrics, sweeps, cost model and CSV output.

A run is described by one JSON document::

    {
      "problem": {"kind": "scalar", "alpha": 1.0, "y0": 1.0},
      "integration": {"dt": 1e-3, "t_end": 10.0, "method": "implicit_carleman", "n_t": 3},
      "reference": {"dt": 1e-10},
      "output": {"directory": "out", "concentrations": false}
    }

or, for chemistry, ``"problem": {"kind": "mechanism", "mechanism": "h2_air_9sp",
"T": 2000, "P": 1.0, "equivalence_ratio": 0.8, "fuel": "H2"}``. ``mechanism`` is a
bundled name or a path relative to the config file; ``mole_fractions`` may
replace ``equivalence_ratio``. See ``configs/`` for complete examples.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .carleman import assemble, lifted_dim
from .integrators import IntegrationConfig, Trajectory, reference_integrate, simulate, step_count
from .kinetics import (
    Mechanism,
    concentrations_from_mole_fractions,
    initial_concentrations,
    mole_fractions,
    to_polynomial,
)
from .mech_parser import BUILTIN, load_mechanism
from .poly_ode import PolynomialSystem
from .sparse_core import SparseMatrix, check_dim

WORKERS_ENV = "CARLEMAN_WORKERS"
DEFAULT_REFERENCE_DT = 1e-10

__all__ = [
    "BuiltProblem",
    "ConfigError",
    "CostEstimate",
    "ErrorReport",
    "MechanismProblem",
    "OutputConfig",
    "Problem",
    "RunConfig",
    "ScalarProblem",
    "SweepRow",
    "analytic_scalar",
    "build",
    "cost_estimate",
    "error_metrics",
    "initial_concentrations",
    "read_sweep_csv",
    "read_trajectory_csv",
    "reference_for",
    "relative_errors",
    "run",
    "scalar_system",
    "sweep",
    "write_sweep_csv",
    "write_trajectory_csv",
]


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------- configs


@dataclass(frozen=True)
class ScalarProblem:
    """``dy/dt = -alpha y^2``."""

    alpha: float = 1.0
    y0: float = 1.0


@dataclass(frozen=True)
class MechanismProblem:
    mechanism: str
    T: float = 2000.0
    P: float = 1.0
    equivalence_ratio: float | None = None
    mole_fractions: dict | None = None
    fuel: str = "H2"
    oxidizer: dict = field(default_factory=lambda: {"O2": 0.21, "N2": 0.79})
    thermo: str | None = None
    major_species: tuple[str, ...] | None = None

    def __post_init__(self):
        if (self.equivalence_ratio is None) == (self.mole_fractions is None):
            raise ConfigError("give exactly one of equivalence_ratio and mole_fractions")
        if self.equivalence_ratio is not None and not self.equivalence_ratio > 0:
            raise ConfigError("equivalence_ratio must be positive")
        if not (self.T > 0 and self.P > 0):
            raise ConfigError("T and P must be positive")


Problem = ScalarProblem | MechanismProblem


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    concentrations: bool = False


@dataclass(frozen=True)
class RunConfig:
    problem: Problem
    integration: IntegrationConfig
    output: OutputConfig = OutputConfig()
    reference_dt: float | None = None

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "RunConfig":
        try:
            prob = dict(data["problem"])
            kind = prob.pop("kind", "scalar")
            if kind == "scalar":
                problem: Problem = ScalarProblem(**prob)
            elif kind == "mechanism":
                mech = str(prob.pop("mechanism"))
                if mech not in BUILTIN:
                    mech = str((Path(base_dir) / mech).resolve())
                thermo = prob.pop("thermo", None)
                if thermo is not None:
                    thermo = str((Path(base_dir) / thermo).resolve())
                if "major_species" in prob and prob["major_species"] is not None:
                    prob["major_species"] = tuple(prob["major_species"])
                problem = MechanismProblem(mechanism=mech, thermo=thermo, **prob)
            else:
                raise ConfigError(f"unknown problem kind {kind!r}")
            integ = IntegrationConfig(**data["integration"])
            out = dict(data.get("output", {}))
            out_dir = Path(base_dir) / out.pop("directory", "out")
            output = OutputConfig(directory=str(out_dir), **out)
            ref_dt = data.get("reference", {}).get("dt")
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cls(problem, integ, output, ref_dt)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def with_integration(self, **changes) -> "RunConfig":
        return replace(self, integration=replace(self.integration, **changes))

    @property
    def default_reference_dt(self) -> float:
        if self.reference_dt is not None:
            return self.reference_dt
        if isinstance(self.problem, MechanismProblem):
            return DEFAULT_REFERENCE_DT
        return self.integration.dt / 100


# ------------------------------------------------------------------ problems


def scalar_system(alpha: float = 1.0) -> PolynomialSystem:
    return PolynomialSystem(1, (SparseMatrix.zeros(1, 1), SparseMatrix.from_dense([[-alpha]])))


def analytic_scalar(alpha: float, y0: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return y0 / (1.0 + alpha * y0 * t)


@dataclass
class BuiltProblem:
    system: PolynomialSystem
    x0: np.ndarray
    names: list[str]
    mechanism: Mechanism | None = None
    major: list[int] = field(default_factory=list)


def build(cfg: RunConfig | Problem) -> BuiltProblem:
    prob = cfg.problem if isinstance(cfg, RunConfig) else cfg
    if isinstance(prob, ScalarProblem):
        return BuiltProblem(scalar_system(prob.alpha), np.array([prob.y0], dtype=float), ["y"], None, [0])
    mech = load_mechanism(prob.mechanism, prob.thermo)
    if prob.equivalence_ratio is not None:
        x0 = initial_concentrations(mech, prob.T, prob.P, prob.equivalence_ratio, prob.fuel, prob.oxidizer)
    else:
        x0 = concentrations_from_mole_fractions(mech, prob.T, prob.P, prob.mole_fractions)
    names = mech.species_names
    major = prob.major_species or default_major_species(mech, prob.fuel)
    missing = [s for s in major if s not in names]
    if missing:
        raise ConfigError(f"major species not in mechanism: {missing}")
    return BuiltProblem(to_polynomial(mech, prob.T), x0, names, mech, [names.index(s) for s in major])


def default_major_species(mech: Mechanism, fuel: str) -> tuple[str, ...]:
    names = mech.species_names
    return tuple(s for s in (fuel, "O2", "H2O", "CO2") if s in names and (s != "CO2" or "C" in mech.elements))


def run(cfg: RunConfig, built: BuiltProblem | None = None) -> Trajectory:
    built = built or build(cfg)
    return simulate(built.system, built.x0, cfg.integration)


def reference_for(cfg: RunConfig, built: BuiltProblem | None = None, record_dt: float | None = None) -> Trajectory:
    """Oracle trajectory on a grid that contains every step of ``cfg``.

    The scalar problem uses its closed form; mechanisms use small-step Euler.
    """
    built = built or build(cfg)
    integ = cfg.integration
    record_dt = integ.dt if record_dt is None else record_dt
    n = step_count(integ.t_end, record_dt)
    if isinstance(cfg.problem, ScalarProblem):
        return analytic_trajectory(cfg.problem, np.arange(n + 1, dtype=np.int64), record_dt)
    return reference_integrate(built.system, built.x0, cfg.default_reference_dt, n * record_dt, record_dt=record_dt)


def analytic_trajectory(prob: ScalarProblem, steps: np.ndarray, dt: float) -> Trajectory:
    times = steps * dt
    y = analytic_scalar(prob.alpha, prob.y0, times)
    return Trajectory(times, y[:, None], steps, dt, metadata={"method": "analytic"})


# ------------------------------------------------------------------- metrics


@dataclass
class ErrorReport:
    """Signed errors ``test - ref`` on the shared grid.

    ``representative_error`` is the signed entry of largest magnitude, so its
    absolute value is ``max_abs_error``. ``l2_error`` is the root mean square
    over all shared times and variables.
    """

    times: np.ndarray
    errors: np.ndarray
    representative_error: float
    max_abs_error: float
    l2_error: float
    time_of_max: float
    variable_of_max: int


def _step_ratio(coarse: float, fine: float) -> int:
    r = coarse / fine
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9 * k:
        raise ValueError(f"reference step {fine:g} does not divide test step {coarse:g}")
    return k


def aligned(test: Trajectory, ref: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Test states, reference states and times at the test's recorded steps."""
    k = _step_ratio(test.dt, ref.dt)
    where = {int(s): i for i, s in enumerate(ref.steps)}
    try:
        rows = [where[int(s) * k] for s in test.steps]
    except KeyError as exc:
        raise ValueError(f"reference has no record at its step {exc.args[0]}; record it on the test grid") from None
    return test.states, ref.states[rows], test.times


def error_metrics(test: Trajectory, ref: Trajectory, columns: Sequence[int] | None = None) -> ErrorReport:
    a, b, times = aligned(test, ref)
    if columns is not None:
        a, b = a[:, list(columns)], b[:, list(columns)]
    err = a - b
    flat = int(np.argmax(np.abs(err)))
    ti, vi = np.unravel_index(flat, err.shape)
    rep = float(err[ti, vi])
    return ErrorReport(
        times=times,
        errors=err,
        representative_error=rep,
        max_abs_error=abs(rep),
        l2_error=float(np.sqrt(np.mean(err**2))),
        time_of_max=float(times[ti]),
        variable_of_max=int(vi),
    )


def relative_errors(test: Trajectory, ref: Trajectory, columns: Sequence[int]) -> np.ndarray:
    """Per column ``max_t |test - ref| / max_t |ref|``."""
    a, b, _ = aligned(test, ref)
    cols = list(columns)
    scale = np.max(np.abs(b[:, cols]), axis=0)
    scale[scale == 0] = 1.0
    return np.max(np.abs(a[:, cols] - b[:, cols]), axis=0) / scale


# -------------------------------------------------------------------- sweeps


@dataclass
class SweepRow:
    dt: float
    n_t: int
    representative_error: float | None
    max_abs_error: float | None
    l2_error: float | None
    relative_error: float | None
    diverged: bool
    diverged_at: float | None
    wall_time: float
    dim: int
    nnz: int


SWEEP_FIELDS = [f.name for f in fields(SweepRow)]


def _grid_record_dt(dts: Sequence[float], ref_dt: float) -> float:
    ratios = [_step_ratio(dt, ref_dt) for dt in dts]
    return math.gcd(*ratios) * ref_dt


def _sweep_point(system, x0, integ: IntegrationConfig, ref: Trajectory | ScalarProblem, major: list[int]) -> SweepRow:
    started = time.perf_counter()
    cs = assemble(system, integ.n_t) if integ.method.endswith("carleman") else None
    tr = simulate(system, x0, integ, cs=cs)
    wall = time.perf_counter() - started
    dim = cs.dim if cs else system.n_state
    nnz = cs.nnz if cs else 0
    if tr.diverged:
        return SweepRow(integ.dt, integ.n_t, None, None, None, None, True, tr.diverged_at, wall, dim, nnz)
    if isinstance(ref, ScalarProblem):
        ref = analytic_trajectory(ref, tr.steps, tr.dt)
    rep = error_metrics(tr, ref)
    rel = float(np.max(relative_errors(tr, ref, major))) if major else None
    return SweepRow(integ.dt, integ.n_t, rep.representative_error, rep.max_abs_error, rep.l2_error, rel, False, None, wall, dim, nnz)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def sweep(
    base: RunConfig,
    dt_grid: Sequence[float],
    nt_grid: Sequence[int],
    reference: Trajectory | None = None,
    workers: int | None = None,
) -> list[SweepRow]:
    """One row per ``(dt, n_t)``, sorted by ``(dt, n_t)``; divergence is recorded, not raised."""
    if not dt_grid or not nt_grid:
        raise ValueError("sweep grids must be nonempty")
    built = build(base)
    ref: Trajectory | ScalarProblem
    if reference is not None:
        ref = reference
    elif isinstance(base.problem, ScalarProblem):
        ref = base.problem  # closed form, evaluated on each run's own grid
    else:
        record = _grid_record_dt(dt_grid, base.default_reference_dt)
        ref = reference_for(base.with_integration(dt=record), built, record_dt=record)
    points = [replace(base.integration, dt=float(dt), n_t=int(nt)) for dt in dt_grid for nt in nt_grid]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_sweep_point, built.system, built.x0, p, ref, built.major) for p in points]
            rows = [f.result() for f in futs]
    else:
        rows = [_sweep_point(built.system, built.x0, p, ref, built.major) for p in points]
    return sorted(rows, key=lambda r: (r.dt, r.n_t))


# ---------------------------------------------------------------- cost model


@dataclass(frozen=True)
class CostEstimate:
    dim: int
    nnz_estimate: int | None
    ratio_to_prev_order: float | None


def cost_estimate(N: int, n_t: int, coeff_nnz: Sequence[int] | None = None) -> CostEstimate:
    """Lifted dimension and an upper bound on nnz(A_c).

    ``coeff_nnz[j-1]`` is nnz(A_j); block ``(i, i+j-1)`` is a sum of ``i``
    Kronecker terms each holding ``N**(i-1) * nnz(A_j)`` entries.
    """
    if N < 1 or n_t < 1:
        raise ValueError("need N >= 1 and n_t >= 1")
    dim = check_dim(lifted_dim(N, n_t), "Carleman system")
    ratio = dim / lifted_dim(N, n_t - 1) if n_t > 1 else None
    nnz = None
    if coeff_nnz is not None:
        nnz = 0
        for i in range(1, n_t + 1):
            for j, c in enumerate(coeff_nnz, start=1):
                if i + j - 1 <= n_t:
                    nnz += i * N ** (i - 1) * int(c)
    return CostEstimate(dim, nnz, ratio)


# ----------------------------------------------------------------------- CSV


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(path: str | Path, traj: Trajectory, names: Sequence[str], concentrations: bool = True) -> Path:
    """Header ``t,<names>``. With ``concentrations=False`` each row is normalized to mole fractions."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    states = traj.states if concentrations else mole_fractions(traj.states)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        for t, row in zip(traj.times, states):
            w.writerow([_fmt(t), *map(_fmt, row)])
    return path


def read_trajectory_csv(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Returns ``(names, times, states)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header[1:], data[:, 0], data[:, 1:]


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for r in sorted(rows, key=lambda r: (r.dt, r.n_t)):
            d = asdict(r)
            w.writerow({k: ("" if v is None else _fmt(v) if isinstance(v, float) else v) for k, v in d.items()})
    return path


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    out = []
    with Path(path).open(newline="") as fh:
        for d in csv.DictReader(fh):
            opt = lambda s: None if s == "" else float(s)  # noqa: E731
            out.append(
                SweepRow(
                    dt=float(d["dt"]),
                    n_t=int(d["n_t"]),
                    representative_error=opt(d["representative_error"]),
                    max_abs_error=opt(d["max_abs_error"]),
                    l2_error=opt(d["l2_error"]),
                    relative_error=opt(d["relative_error"]),
                    diverged=d["diverged"] == "True",
                    diverged_at=opt(d["diverged_at"]),
                    wall_time=float(d["wall_time"]),
                    dim=int(d["dim"]),
                    nnz=int(d["nnz"]),
                )
            )
    return out
