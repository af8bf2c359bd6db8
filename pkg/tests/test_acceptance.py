"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a single PASS/FAIL line, shown in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from loggsqg.harness import (
    _convexity_report,
    bony_residual,
    critical_field,
    default_suite,
    exp_artificial_viscosity,
    exp_energy_balance,
    exp_global_euler,
    exp_kato_split,
    exp_max_principle,
    exp_smoothing,
    exp_stability,
    probe_commutator,
    probe_product,
    probe_report,
)
from loggsqg.multipliers import MultiplierSuite, log_identity_quadrature, threshold_scan
from loggsqg.solver import RunConfig, linear_solution, run
from loggsqg.spectral import (
    GridSpec,
    WeightedNormSpec,
    bernstein_probe,
    besov_norm,
    l2_norm,
    lp_partition,
    random_field,
    weighted_norm,
)
from loggsqg.symbols import Identity, LogPower

MU_GRID = tuple(round(0.2 * i, 10) for i in range(1, 11))
MUTILDE_GRID = (-0.5, 0.0, 0.5, 1.0)


def _threshold_agreement(family):
    t0 = time.perf_counter()
    tm = threshold_scan(family, MU_GRID, MUTILDE_GRID)
    elapsed = time.perf_counter() - t0
    expected = tm.expected()
    bad = []
    for i, j in zip(*np.nonzero(tm.admissible != expected)):
        bad.append((MU_GRID[i], MUTILDE_GRID[j]))
    # a mismatch is tolerated only in the one cell next to mu = mutilde + 1/2 per column
    allowed = True
    for mt in MUTILDE_GRID:
        col = [mu for mu, m2 in bad if m2 == mt]
        if len(col) > 1 or any(abs(mu - (mt + 0.5)) > 0.2 + 1e-9 for mu in col):
            allowed = False
    return allowed, bad, elapsed


def test_criterion_01_log_threshold():
    ok, bad, elapsed = _threshold_agreement("log")
    passed = ok and elapsed < 60
    record_criterion(1, "log-family threshold scan", passed, f"mismatches={bad} runtime={elapsed:.1f}s")
    assert passed


def test_criterion_02_iterlog_threshold():
    ok, bad, elapsed = _threshold_agreement("iterlog")
    passed = ok and elapsed < 60
    record_criterion(2, "iterated-log threshold scan", passed, f"mismatches={bad} runtime={elapsed:.1f}s")
    assert passed


def test_criterion_03_semigroup_identity():
    errs = {lam: abs(log_identity_quadrature(lam) - math.log1p(lam)) for lam in (0.5, 1.0, 2.0, 10.0, 100.0)}
    worst = max(errs.values())
    passed = worst <= 1e-8
    record_criterion(3, "log semigroup identity", passed, f"max error={worst:.2e}")
    assert passed


def test_criterion_04_linear_oracle():
    t0 = time.perf_counter()
    grid = GridSpec(64)
    suite = MultiplierSuite.from_ratios(LogPower(1.0), Identity(), Identity(), beta=2.0)
    th0 = random_field(grid, 0)
    traj, _ = run(RunConfig(grid, suite, T=1.0, dt="auto"), th0)
    elapsed = time.perf_counter() - t0
    want = linear_solution(th0, suite, 1.0).coeffs
    m = np.log(math.e + grid.arrays().kmag ** 2)
    # the closed form is also checked against an independent evaluation of e^(-m)
    assert np.allclose(want, np.exp(-m) * th0.coeffs, rtol=1e-14, atol=0)
    nz = np.abs(want) > 0
    rel = float(np.max(np.abs(traj.final.coeffs[nz] - want[nz]) / np.abs(want[nz])))
    passed = rel <= 1e-10 and elapsed < 10
    record_criterion(4, "linear oracle", passed, f"max rel error={rel:.2e} runtime={elapsed:.1f}s")
    assert passed


def test_criterion_05_energy_law():
    rep = exp_energy_balance()
    a = {x.name: x.measured for x in rep.assertions}
    record_criterion(
        5, "energy balance", rep.passed,
        f"residual={a['energy_residual']:.2e} inviscid drift={a['inviscid_l2_drift']:.2e}",
    )
    assert rep.passed, rep.to_text()


def test_criterion_06_maximum_principle():
    reps = {g: exp_max_principle(gamma_p=g) for g in (0.0, 1.0)}
    worst = max(x.measured for r in reps.values() for x in r.assertions)
    passed = all(r.passed for r in reps.values())
    record_criterion(6, "maximum principle", passed, f"max Lp ratio={worst:.6f}")
    assert passed


def test_criterion_07_convexity():
    rep = _convexity_report(seed=0, trials=20)
    passed = rep.passed
    record_criterion(7, "convexity inequality", passed, f"min/scale={rep.assertions[0].measured:.2e}")
    assert passed


def test_criterion_08_lp_machinery():
    grid = GridSpec(64)
    recon = max(
        l2_norm(lp_partition(f).reconstruct() - f) / l2_norm(f)
        for f in (random_field(grid, s, slope=0.0, band_limited=False) for s in range(10))
    )
    bern_ok = True
    for sigma in (1.0, 2.0):
        for seed in range(5):
            lp = lp_partition(random_field(grid, seed, slope=0.0))
            for j, b in lp.blocks:
                if l2_norm(b) == 0:
                    continue
                r = bernstein_probe((j, b), sigma).ratio
                bern_ok &= 2.0 ** (-sigma) <= r <= 2.0**sigma
    c_emp = 0.0
    for sigma in (0.0, 1.0, 2.0):
        ratios = []
        for seed in range(100):
            f = random_field(grid, seed, slope=1.5)
            ratios.append(besov_norm(lp_partition(f), sigma) / weighted_norm(f, WeightedNormSpec(sigma, Identity(), True)))
        c_emp = max(c_emp, max(ratios), 1.0 / min(ratios))
    passed = recon <= 1e-12 and bern_ok and c_emp <= 4.0
    record_criterion(8, "Littlewood-Paley machinery", passed, f"reconstruction={recon:.1e} bernstein={bern_ok} C_emp={c_emp:.3f}")
    assert passed


@pytest.mark.parametrize("beta", [0.0, 1.0, 1.5])
def test_criterion_09_stability(beta):
    cfg = RunConfig(GridSpec(128), default_suite(beta, 1.0, 0.0), T=0.5, dt="auto", cadence=5)
    rep = exp_stability(cfg)
    twin = next(a.measured for a in rep.assertions if a.name == "identical_twin_diff")
    record_criterion(
        9, f"stability (beta={beta})", rep.passed,
        f"slope={rep.recorded['slope']:.4f} twin={twin:.1e} C_emp={rep.recorded['C_emp']:.3f}",
    )
    assert rep.passed, rep.to_text()


@pytest.mark.parametrize("beta", [1.0, 1.5])
def test_criterion_10_kato_split(beta):
    rep = exp_kato_split(RunConfig(GridSpec(64), default_suite(beta, 1.0, 0.0), T=0.5, dt="auto", cadence=5))
    record_criterion(10, f"Kato splitting (beta={beta})", rep.passed, f"residual={rep.assertions[0].measured:.1e}")
    assert rep.passed, rep.to_text()


def test_criterion_11_smoothing():
    rep = exp_smoothing()
    growth = max(a.measured for a in rep.assertions if a.name.startswith("gevrey_growth"))
    record_criterion(11, "Gevrey smoothing", rep.passed, f"max growth={growth:.3f}")
    assert rep.passed, rep.to_text()


def test_criterion_12_probes():
    details, ok = [], True
    for variant, eps in (("localized", 0.0), ("localized", 0.5), ("nonlocal", 0.5), ("gevrey", 0.0)):
        samples = probe_commutator((3, 4, 5), eps=eps, trials=20, N=128, variant=variant)
        rep = probe_report("commutator", samples)
        ok &= rep.passed
        ch = next(a.measured for a in rep.assertions if a.name == "top_shell_ratio_change")
        details.append(f"comm[{variant},eps={eps}] change={ch:.2f}")
    const = probe_commutator((3, 4, 5), trials=20, N=128, g_constant=True)
    gmax = max(s.lhs for s in const)
    ok &= gmax <= 1e-13
    samples, bony = probe_product((3, 4, 5), trials=20, N=128)
    rep = probe_report("product", samples)
    ok &= rep.passed and bony <= 1e-11
    ch = next(a.measured for a in rep.assertions if a.name == "top_shell_ratio_change")
    details.append(f"product change={ch:.2f} g-const lhs={gmax:.1e} bony={bony:.1e}")
    record_criterion(12, "commutator and product probes", ok, "; ".join(details))
    assert ok


def test_criterion_13_global_euler():
    t0 = time.perf_counter()
    rep = exp_global_euler()
    elapsed = time.perf_counter() - t0
    growth = next((a.measured for a in rep.assertions if a.name == "H1_growth"), math.inf)
    passed = rep.passed and elapsed < 300
    record_criterion(13, "global Euler-endpoint run", passed, f"H1 growth={growth:.3e} runtime={elapsed:.1f}s")
    assert passed, rep.to_text()


def test_criterion_14_artificial_viscosity():
    rep = exp_artificial_viscosity()
    ratios = [f"{a.measured:.3f}" for a in rep.assertions]
    record_criterion(14, "vanishing artificial viscosity", rep.passed, f"error ratios={ratios}")
    assert rep.passed, rep.to_text()
