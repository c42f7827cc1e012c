"""Time steppers for polynomial systems and their Carleman lifts.

All steppers are first-order Euler variants. The Carleman ones advance the
lifted state with the constant generator ``A_c``; by default the lifted state
is rebuilt from its readout before every step (``relift_every=1``), which is
what turns a truncated lift into a consistent one-step method.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .carleman import CarlemanSystem, assemble, lift
from .poly_ode import PolynomialSystem, eval_rhs, jacobian
from .sparse_core import identity, solve_block_upper_triangular, solve_sparse_lu

log = logging.getLogger(__name__)

Method = Literal["explicit_carleman", "implicit_carleman", "jacobian_linearized", "reference_euler"]
METHODS = ("explicit_carleman", "implicit_carleman", "jacobian_linearized", "reference_euler")


class DivergenceDetected(ArithmeticError):
    pass


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float
    t_end: float
    method: Method = "implicit_carleman"
    n_t: int = 2
    relift_every: int | None = 1
    record_stride: int = 1
    divergence_norm_cap: float = 1e12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt * (1 - 1e-12):
            raise ValueError("t_end must be at least dt")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.n_t < 1:
            raise ValueError("n_t must be >= 1")
        if self.relift_every is not None and self.relift_every < 1:
            raise ValueError("relift_every must be >= 1 or None")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return step_count(self.t_end, self.dt)


def step_count(t_end: float, dt: float) -> int:
    ratio = t_end / dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = int(np.ceil(ratio))
    return max(n, 1)


@dataclass
class Trajectory:
    """Recorded states. ``steps[k] * dt`` is the time of ``states[k]``."""

    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    dt: float
    diverged_at: float | None = None
    metadata: dict = field(default_factory=dict)
    lifted: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


# ---------------------------------------------------------------- single steps


def explicit_carleman_step(cs: CarlemanSystem, X, dt: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = X + dt * cs.apply(X)
    if not np.all(np.isfinite(out)):
        raise DivergenceDetected("explicit Carleman step produced non-finite values")
    return out


def implicit_carleman_step(cs: CarlemanSystem, X, dt: float) -> np.ndarray:
    """Solve ``(I - dt A_c) X' = X``; the block factors are cached per ``(cs, dt)``."""
    X = np.asarray(X, dtype=float)
    if dt == 0:
        return X.copy()
    out = solve_block_upper_triangular(cs.implicit_operator(dt), X)
    if not np.all(np.isfinite(out)):
        raise DivergenceDetected("implicit Carleman step produced non-finite values")
    return out


def jacobian_linearized_step(sys: PolynomialSystem, u, dt: float) -> np.ndarray:
    """``u + (I - dt J(u))^{-1} dt F(u)``."""
    u = np.asarray(u, dtype=float)
    if dt == 0:
        return u.copy()
    J = jacobian(sys, u)
    lhs = identity(sys.n_state) - J.scale(dt)
    out = u + solve_sparse_lu(lhs, dt * eval_rhs(sys, u))
    if not np.all(np.isfinite(out)):
        raise DivergenceDetected("Jacobian-linearized step produced non-finite values")
    return out


def euler_step(sys: PolynomialSystem, x, dt: float) -> np.ndarray:
    return x + dt * sys.eval(x)


# ----------------------------------------------------------------- drivers


def reference_integrate(
    sys: PolynomialSystem,
    x0,
    dt_ref: float,
    t_end: float,
    record_dt: float | None = None,
    divergence_norm_cap: float = 1e12,
) -> Trajectory:
    """Forward Euler with a small step, recorded every ``record_dt``.

    ``record_dt`` must be an integer multiple of ``dt_ref``.
    """
    record_dt = dt_ref if record_dt is None else record_dt
    stride = int(round(record_dt / dt_ref))
    if stride < 1 or abs(record_dt / dt_ref - stride) > 1e-9 * stride:
        raise ValueError(f"reference dt {dt_ref} does not divide the recording interval {record_dt}")
    cfg = IntegrationConfig(
        dt=dt_ref,
        t_end=step_count(t_end, record_dt) * record_dt,
        method="reference_euler",
        record_stride=stride,
        divergence_norm_cap=divergence_norm_cap,
    )
    return simulate(sys, x0, cfg)


def simulate(sys: PolynomialSystem, x0, cfg: IntegrationConfig, keep_lifted: bool = False, cs: CarlemanSystem | None = None) -> Trajectory:
    """Integrate from ``x0`` to ``cfg.t_end``.

    Divergence (non-finite values, or a state norm above the cap) stops the run
    and is reported through ``Trajectory.diverged_at`` instead of raising.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n_state,):
        raise ValueError(f"initial state of shape {x0.shape} does not match n_state={sys.n_state}")
    n = sys.n_state
    dt = cfg.dt
    n_steps = cfg.n_steps
    stride = cfg.record_stride
    cap = cfg.divergence_norm_cap
    carleman = cfg.method in ("explicit_carleman", "implicit_carleman")

    if carleman:
        if cs is None or cs.n_t != cfg.n_t or cs.base is not sys:
            cs = assemble(sys, cfg.n_t)
        state = lift(x0, cfg.n_t)
        if cfg.method == "implicit_carleman":
            factor = cs.implicit_operator(dt).factor
            advance = factor.solve
        else:
            flat = cs.flat.csr

            def advance(X):
                return X + dt * (flat @ X)
    elif cfg.method == "jacobian_linearized":
        state = x0.copy()

        def advance(u):
            return jacobian_linearized_step(sys, u, dt)
    else:
        # the state carries a trailing 1.0 so the evaluator needs no copy
        state = np.append(x0, 1.0)
        rhs = sys.evaluator

        def advance(xe):
            xe[:n] += dt * rhs(xe)
            return xe

    relift = cfg.relift_every if carleman else None
    n_t = cfg.n_t
    cap2 = cap * cap
    steps = [0]
    records = [x0.copy()]
    lifted = [state.copy()] if keep_lifted and carleman else None
    diverged_at = None
    started = time.perf_counter()
    for s in range(1, n_steps + 1):
        if relift is not None and s > 1 and (s - 1) % relift == 0:
            state = lift(state[:n], n_t)
        try:
            state = advance(state)
        except (ArithmeticError, FloatingPointError) as exc:
            if isinstance(exc, DivergenceDetected):
                diverged_at = s * dt
                break
            raise
        x = state[:n]
        # ||x||_2 <= cap bounds the max norm; NaN fails the comparison too
        sq = x @ x
        if not sq <= cap2 and (not np.all(np.isfinite(x)) or np.max(np.abs(x)) > cap):
            diverged_at = s * dt
            log.info("divergence at step %d (t=%g)", s, diverged_at)
            break
        if s % stride == 0 or s == n_steps:
            steps.append(s)
            records.append(x.copy())
            if lifted is not None:
                lifted.append(state.copy())
    steps_arr = np.asarray(steps, dtype=np.int64)
    meta = asdict(cfg)
    meta["wall_time"] = time.perf_counter() - started
    if carleman:
        meta.update(dim=cs.dim, nnz=cs.nnz)
    return Trajectory(
        times=steps_arr * dt,
        states=np.vstack(records),
        steps=steps_arr,
        dt=dt,
        diverged_at=diverged_at,
        metadata=meta,
        lifted=np.vstack(lifted) if lifted is not None else None,
    )
