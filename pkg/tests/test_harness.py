import math

import numpy as np
import pytest

from conftest import single_mode
from loggsqg.errors import LocalizationViolated
from loggsqg.harness import (
    EXPERIMENTS,
    ExperimentReport,
    ProbeSample,
    bony_residual,
    commutator_apply,
    commutator_symbol,
    commutator_triad,
    config_digest,
    critical_field,
    default_suite,
    euler_suite,
    exp_artificial_viscosity,
    exp_energy_balance,
    exp_kato_split,
    exp_max_principle,
    exp_smoothing,
    exp_stability,
    localized_field,
    probe_commutator,
    probe_convexity,
    probe_product,
    probe_report,
    shell_maxima,
    y_norm,
)
from loggsqg.multipliers import MultiplierSuite
from loggsqg.solver import RunConfig
from loggsqg.spectral import GridSpec, SpectralField, l2_norm, named_field, random_field
from loggsqg.symbols import Constant, Identity, IterLogPower, LogPower


# --- reports ------------------------------------------------------------------


def test_report_check_relations():
    r = ExperimentReport("x", "d")
    assert r.check("a", 1.0, 2.0)
    assert not r.check("b", 3.0, 2.0)
    assert r.check("c", 3.0, 2.0, ">=")
    assert r.check("d", 1.0, 1.0, "==")
    assert not r.check("e", float("nan"), 1.0)
    assert not r.passed
    with pytest.raises(ValueError):
        r.check("f", 1.0, 1.0, "<")


def test_report_text_and_write(tmp_path):
    r = ExperimentReport("demo", "abc")
    r.check("err", 0.5, 1.0)
    r.record(steps=3)
    r.artifacts["series"] = "t,v\n0.0,1.0\n"
    path = r.write(tmp_path)
    text = path.read_text()
    assert path.name == "demo.report.txt"
    assert "passed=true" in text
    assert "assert.err=measured:0.5 <= threshold:1.0 pass" in text
    assert "record.steps=3" in text
    assert (tmp_path / "demo.series.csv").read_text() == "t,v\n0.0,1.0\n"


def test_config_digest_stable_and_sensitive():
    g = GridSpec(16)
    c1 = RunConfig(g, default_suite(), T=1.0)
    c2 = RunConfig(g, default_suite(), T=1.0)
    c3 = RunConfig(g, default_suite(mu=2.0), T=1.0)
    assert config_digest(config=c1, seed=0) == config_digest(config=c2, seed=0)
    assert config_digest(config=c1, seed=0) != config_digest(config=c3, seed=0)
    assert config_digest(config=c1, seed=0) != config_digest(config=c1, seed=1)
    assert len(config_digest(a=1)) == 16


def test_suites():
    s = euler_suite(1.0)
    assert s.beta == 0.0 and s.p_a == IterLogPower(1.0) and s.m == LogPower(1.0)
    assert euler_suite(0.0).p_a == Identity()
    d = default_suite(1.5, 2.0, 0.5)
    assert d.beta == 1.5 and d.m == LogPower(2.0)


# --- small experiment runs ----------------------------------------------------


def test_energy_small():
    g = GridSpec(32)
    rep = exp_energy_balance(RunConfig(g, default_suite(0.5), T=0.2, dt=1e-3), inviscid_dt=1e-3)
    assert rep.passed, rep.to_text()


def test_energy_rejects_large_beta():
    with pytest.raises(ValueError):
        exp_energy_balance(RunConfig(GridSpec(16), default_suite(1.5), T=0.1))


def test_max_principle_small():
    rep = exp_max_principle(RunConfig(GridSpec(32), euler_suite(0.0), T=0.3))
    assert rep.passed, rep.to_text()
    with pytest.raises(ValueError):
        exp_max_principle(RunConfig(GridSpec(32), default_suite(1.0), T=0.3))


def test_smoothing_small():
    rep = exp_smoothing(RunConfig(GridSpec(32), default_suite(1.0), T=0.2, dt="auto", cadence=2))
    assert rep.passed, rep.to_text()


def test_smoothing_linear_flow_is_bounded():
    suite = MultiplierSuite.from_ratios(LogPower(1.0), Identity(), Identity(), beta=2.0)
    rep = exp_smoothing(RunConfig(GridSpec(32), suite, T=0.2, dt="auto", cadence=2))
    names = [a.name for a in rep.assertions]
    assert any(n.startswith("linear_gevrey") for n in names)
    assert rep.passed, rep.to_text()


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 1.5])
def test_y_norm_branches(beta):
    g = GridSpec(16)
    f = single_mode(g, 2, 0, 1.0)  # |k| = 2, unit L2
    want = {0.0: 1.0 + 0.5, 0.5: 1.0}.get(beta, math.sqrt(1 + 4.0) ** beta)
    assert y_norm(f, beta) == pytest.approx(want, rel=1e-12)


def test_stability_small():
    rep = exp_stability(RunConfig(GridSpec(32), default_suite(1.0), T=0.2, dt="auto", cadence=2))
    assert rep.passed, rep.to_text()
    assert rep.recorded["slope"] == pytest.approx(1.0, abs=0.1)


def test_kato_small():
    rep = exp_kato_split(RunConfig(GridSpec(32), default_suite(1.5), T=0.1, dt="auto", cadence=2))
    assert rep.passed, rep.to_text()


def test_kato_zero_perturbation_keeps_zeta_zero():
    rep = exp_kato_split(RunConfig(GridSpec(32), default_suite(1.0), T=0.1, dt="auto", cadence=2), delta=0.0)
    rows = rep.artifacts["residual"].splitlines()[1:]
    assert max(float(r.split(",")[2]) for r in rows) == 0.0


def test_viscosity_small():
    rep = exp_artificial_viscosity(RunConfig(GridSpec(32), default_suite(1.0), T=0.2, dt=5e-3))
    assert rep.passed, rep.to_text()
    with pytest.raises(ValueError):
        exp_artificial_viscosity(RunConfig(GridSpec(32), default_suite(1.0), T=0.2))


# --- convexity ----------------------------------------------------------------


@pytest.mark.parametrize("phi", ["square", "fourth-power"])
@pytest.mark.parametrize("seed", range(3))
def test_convexity_probe(phi, seed):
    rep = probe_convexity(random_field(GridSpec(32), seed), phi)
    assert rep.passed, rep.to_text()


def test_convexity_single_mode_square():
    # f = sin x1: Phi'(f) L f - L Phi(f) = 2 sin^2 x1 ln 2 + cos(2 x1) ln 5 / 2
    g = GridSpec(32)
    f = named_field(g, "sin1")
    rep = probe_convexity(f, "square")
    x = np.arange(32) * g.dx
    expr = 2 * np.sin(x) ** 2 * math.log(2) + 0.5 * np.cos(2 * x) * math.log(5)
    assert rep.recorded["min"] == pytest.approx(expr.min() * 1.0, abs=1e-12)


def test_convexity_rejects_full_spectrum():
    with pytest.raises(LocalizationViolated):
        probe_convexity(random_field(GridSpec(32), 0, band_limited=False))
    with pytest.raises(ValueError):
        probe_convexity(random_field(GridSpec(32), 0), "cube")


# --- commutators ----------------------------------------------------------------


def test_commutator_triad_cross_check():
    g = GridSpec(16)
    A = commutator_symbol(g, 0.3, LogPower(1.0), 1)
    f = single_mode(g, 2, 1, 1.0).coeffs
    gg = single_mode(g, 1, -1, 1.0).coeffs
    h = random_field(g, 4).coeffs
    X = commutator_apply(g, A, gg, f)
    direct = g.dx**2 * np.sum(X * np.conj(h))
    brute = commutator_triad(g, lambda a, b: A[a % 16, b % 16], f, gg, h)
    assert abs(direct - brute) <= 1e-12 * max(1.0, abs(brute))
    assert abs(brute) > 1e-6


def test_commutator_symbol_values():
    g = GridSpec(16)
    A = commutator_symbol(g, 0.5, LogPower(1.0), 2)
    assert A[0, 0] == 0
    assert A[3, 4] == pytest.approx(5**-0.5 * math.log(math.e + 25) * 4j, rel=1e-14)


def test_commutator_with_constant_g_vanishes():
    samples = probe_commutator(j_range=(3,), trials=2, N=32, g_constant=True)
    assert max(s.lhs for s in samples) <= 1e-13


@pytest.mark.parametrize("variant,eps", [("localized", 0.0), ("nonlocal", 0.5), ("gevrey", 0.0)])
def test_commutator_variants_finite(variant, eps):
    samples = probe_commutator(j_range=(2, 3), trials=2, N=32, variant=variant, eps=eps)
    assert all(math.isfinite(s.ratio) and s.rhs > 0 for s in samples)


def test_commutator_argument_checks():
    with pytest.raises(ValueError):
        probe_commutator(s=1.0, trials=1, N=32)
    with pytest.raises(ValueError):
        probe_commutator(variant="nonlocal", eps=0.0, trials=1, N=32)
    with pytest.raises(ValueError):
        probe_commutator(j_range=(2,), variant="other", trials=1, N=32)


def test_localized_field():
    g = GridSpec(64)
    f = localized_field(g, 3, 0)
    assert l2_norm(f) == pytest.approx(1.0, rel=1e-13)
    k = g.arrays().kmag
    assert np.all(f.coeffs[(k <= 4) | (k >= 16)] == 0)
    with pytest.raises(LocalizationViolated):
        localized_field(g, 9, 0)


# --- products -------------------------------------------------------------------


def test_bony_identity():
    g = GridSpec(64)
    for seed in range(3):
        assert bony_residual(random_field(g, seed), random_field(g, seed + 10)) <= 1e-12


def test_critical_field_normalized():
    from loggsqg.spectral import WeightedNormSpec, weighted_norm

    f = critical_field(GridSpec(32), 0, 0.5)
    assert weighted_norm(f, WeightedNormSpec(0.5, Identity(), True)) == pytest.approx(1.0, rel=1e-13)


def test_product_zero_factor():
    samples, bony = probe_product(j_range=(2, 3), trials=2, N=32, zero_factor=True)
    assert all(s.lhs == 0.0 for s in samples) and bony == 0.0


def test_product_probe_small():
    samples, bony = probe_product(j_range=(2, 3), trials=2, N=32)
    assert bony <= 1e-11
    assert all(math.isfinite(s.ratio) for s in samples)
    with pytest.raises(ValueError):
        probe_product(s=1.5, trials=1, N=32)


def test_probe_report_trend():
    flat = [ProbeSample(j, 0, 1.0, 2.0, (0, 0)) for j in (3, 4, 5)]
    assert probe_report("p", flat).passed
    grow = [ProbeSample(j, 0, 4.0 ** j, 1.0, (0, 0)) for j in (3, 4, 5)]
    assert not probe_report("p", grow).passed
    assert shell_maxima(flat) == {3: 0.5, 4: 0.5, 5: 0.5}
    assert ProbeSample(0, 0, 0.0, 0.0, ()).ratio == 0.0
    assert ProbeSample(0, 0, 1.0, 0.0, ()).ratio == math.inf


# --- registry and determinism -----------------------------------------------------


def test_registry_names():
    assert set(EXPERIMENTS) == {
        "energy", "maxprin", "convexity", "smoothing", "stability",
        "kato", "commutator", "product", "euler", "viscosity",
    }


def test_experiment_determinism():
    cfg = RunConfig(GridSpec(32), default_suite(1.0), T=0.1, dt=5e-3)
    a = exp_artificial_viscosity(cfg)
    b = exp_artificial_viscosity(cfg)
    assert a.artifacts == b.artifacts and a.to_text() == b.to_text()
