import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from loggsqg.errors import GridTooSmall
from loggsqg.multipliers import (
    GAMMA_GRID,
    MultiplierSuite,
    RGrid,
    YGrid,
    admissibility_check,
    admissible_for_some_gamma,
    family_suite,
    log_identity_quadrature,
    mc_increments,
    threshold_scan,
    verify_class,
)
from loggsqg.symbols import Constant, Identity, IterLogPower, LogPower, OnePlus, Product, eval_symbol

# --- suite ----------------------------------------------------------------


def test_suite_derived_symbols():
    s = MultiplierSuite.from_ratios(LogPower(1.0), LogPower(-0.5), LogPower(0.5), beta=1.5)
    assert s.p_a == Identity() and s.p_b == LogPower(0.5)
    assert s.nu == s.m
    r = np.array([0.5, 3.0, 40.0])
    m = np.log(math.e + r * r)
    assert np.allclose(eval_symbol(s.m1, r), 1.0 + m)
    assert np.allclose(eval_symbol(s.a, r), r ** (-0.5) * m ** (-0.5))
    assert s.validate() == []


@pytest.mark.parametrize("kw", [{"gamma": 0.0}, {"gamma": 1.0}, {"beta": -0.1}, {"beta": 2.5}])
def test_suite_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        MultiplierSuite(m=LogPower(1.0), **kw)


def test_suite_validate_flags_decreasing_factor():
    s = MultiplierSuite(m=LogPower(1.0), p_a=LogPower(-1.0))
    assert any("p_a" in msg for msg in s.validate())


# --- class checks ---------------------------------------------------------


@pytest.mark.parametrize(
    "sym, passed",
    [
        (LogPower(-0.5), True),  # 2 mu >= -1
        (LogPower(-1.0), False),  # int dr / (r ln^2 r) converges
        (LogPower(0.0), True),
        (IterLogPower(-3.0), True),  # iterated logs never make the integral converge
    ],
)
def test_mc_divergence_leaf_families(sym, passed):
    assert verify_class(sym, "C").passed is passed


@pytest.mark.parametrize(
    "sym, passed",
    [
        (Product(LogPower(-0.25), LogPower(-0.25)), True),  # p^2 ~ 1/ln r: ln ln divergence
        (Product(LogPower(-0.5), LogPower(-0.5)), False),  # p^2 ~ 1/ln^2 r: converges
        (OnePlus(LogPower(-1.0)), True),  # tends to 1
    ],
)
def test_mc_divergence_composites(sym, passed):
    assert verify_class(sym, "C").passed is passed


def test_mc_increments_oracle():
    # p = (ln(e + r^2))^-1/2: int_1^Y p^2/r dr = int ln(e+r^2)^-1 dr/r, compared with scipy
    sym = Product(LogPower(-0.25), LogPower(-0.25))
    inc = mc_increments(sym)
    edges = (1e3, 1e6, 1e9, 1e12)

    def g(u):
        r = math.exp(u)
        return 1.0 / math.log(math.e + r * r)

    want = [integrate.quad(g, math.log(a), math.log(b), epsabs=1e-12)[0] for a, b in zip(edges[:-1], edges[1:])]
    assert np.allclose(inc, want, rtol=1e-7)


def test_constant_in_class_w_with_small_constants():
    rep = verify_class(Constant(1.0), "W")
    assert rep.passed
    assert set(rep.verdicts) == {"O1", "O2", "O3"}
    assert all(v.constant <= 2.0 for v in rep.verdicts.values())


@pytest.mark.parametrize("mu", [0.25, 1.0, 3.0])
def test_logpower_o2_constant_at_most_two_mu(mu):
    rep = verify_class(LogPower(mu), "W")
    assert rep.passed
    assert 0 < rep.verdicts["O2"].constant <= 2.0 * mu


@pytest.mark.parametrize(
    "a, b", [(LogPower(1.0), IterLogPower(0.5)), (LogPower(0.5), LogPower(2.0)), (IterLogPower(1.0), Constant(3.0))]
)
def test_class_w_closed_under_products(a, b):
    assert verify_class(a, "W").passed and verify_class(b, "W").passed
    assert verify_class(Product(a, b), "W").passed


@pytest.mark.parametrize("alpha", [2.0, 0.1, 0.02])
def test_class_w_detects_power_growth_in_o3(alpha):
    # r^a is doubling but (r1 r2)^a / (r1^a + r2^a) is unbounded
    from loggsqg.symbols import PowerLaw

    assert not verify_class(PowerLaw(alpha), "W").verdicts["O3"].passed


@pytest.mark.parametrize("sym", [LogPower(3.0), LogPower(0.1), IterLogPower(5.0), OnePlus(LogPower(1.0))])
def test_log_types_pass_o3(sym):
    assert verify_class(sym, "W").verdicts["O3"].passed


def test_class_d_and_s():
    assert verify_class(LogPower(1.0), "D").passed
    rep = verify_class(LogPower(1.0), "S", m=LogPower(1.0))
    assert rep.passed and set(rep.verdicts) == {"S1", "S2", "S-bound"}
    assert not verify_class(LogPower(2.0), "S", m=LogPower(1.0)).verdicts["S-bound"].passed
    with pytest.raises(ValueError):
        verify_class(LogPower(1.0), "S")
    with pytest.raises(ValueError):
        verify_class(LogPower(1.0), "Q")


def test_grid_too_small():
    with pytest.raises(GridTooSmall):
        verify_class(LogPower(1.0), "W", RGrid(r_max=1e5))


def test_report_lines_are_deterministic():
    a = verify_class(LogPower(0.7), "W").lines()
    b = verify_class(LogPower(0.7), "W").lines()
    assert a == b and all(line.startswith("W:O") for line in a)


# --- admissibility --------------------------------------------------------


def test_admissible_example():
    res = admissibility_check(family_suite("log", 1.0, 0.0), gamma=0.75)
    assert res.admissible and res.heuristic


@pytest.mark.parametrize("gamma", GAMMA_GRID)
def test_threshold_case_is_not_admissible(gamma):
    assert not admissibility_check(family_suite("log", 0.5, 0.0), gamma=gamma).admissible


def test_no_dissipation_with_decaying_law_not_admissible():
    suite = MultiplierSuite.from_ratios(Constant(0.0), LogPower(-0.5), Identity())
    ok, _ = admissible_for_some_gamma(suite)
    assert not ok


def _oracle_sups(suite, gamma, ys):
    """Direct evaluation of both suprema with scipy quadrature in log variables."""
    p, w = suite.p, suite.omega

    def pw(r):
        return float(eval_symbol(p, r)), float(eval_symbol(w, r))

    s1, s2 = [], []
    for y in ys:
        def ia(u):
            r = math.exp(u)
            _, wr = pw(r)
            return r * r / ((1 + r * r) * wr * wr)

        def ib(u):
            r = math.exp(u)
            pr, wr = pw(r)
            return r * r * pr * pr / ((1 + r * r) * wr * wr)

        lo = math.log(1e-12)
        A = integrate.quad(ia, lo, math.log(y), limit=400, epsabs=0, epsrel=1e-11)[0]
        B = integrate.quad(ib, lo, math.log(y), limit=400, epsabs=0, epsrel=1e-11)[0]
        py, _ = pw(y)
        m1 = float(eval_symbol(suite.m1, y)) ** gamma
        s1.append(math.sqrt(py * py * A + B) / m1)
        pa = float(eval_symbol(suite.p_a, y))
        wb = float(eval_symbol(suite.omega_b, y))
        s2.append(pa * wb / m1)
    return max(s1), max(s2)


@pytest.mark.parametrize("family, mu, mt", [("log", 1.0, 0.0), ("log", 1.4, 0.6), ("iterlog", 2.0, 1.0)])
def test_suprema_match_independent_quadrature(family, mu, mt):
    yg = YGrid(per_decade=1)
    suite = family_suite(family, mu, mt)
    res = admissibility_check(suite, gamma=0.75, y_grid=yg)
    s1, s2 = _oracle_sups(suite, 0.75, yg.points())
    assert res.sup1 == pytest.approx(s1, rel=1e-7)
    assert res.sup2 == pytest.approx(s2, rel=1e-13)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([-0.5, 0.0, 0.5]), st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def test_admissibility_monotone_in_mu(mt, mu0, dmu):
    a0, _ = admissible_for_some_gamma(family_suite("log", mu0, mt))
    a1, _ = admissible_for_some_gamma(family_suite("log", mu0 + dmu, mt))
    assert a1 or not a0


# --- threshold scans ------------------------------------------------------


def test_log_scan_zero_mutilde_matches_rule():
    mus = np.round(np.arange(0.6, 2.01, 0.2), 10)
    tm = threshold_scan("log", mus, [0.0])
    # every grid value above 0.5 is admissible, including the first one (0.6)
    assert tm.admissible[:, 0].all()
    assert np.array_equal(tm.admissible, tm.expected())


def test_scan_examples():
    assert not threshold_scan("log", [1.5], [1.5]).admissible[0, 0]
    assert threshold_scan("iterlog", [2.0], [1.0]).admissible[0, 0]


# --- semigroup identity ---------------------------------------------------


def test_log_identity_zero():
    assert log_identity_quadrature(0.0) == 0.0


@pytest.mark.parametrize("lam", [1.0, 10.0])
def test_log_identity_examples(lam):
    assert abs(log_identity_quadrature(lam) - math.log1p(lam)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1e3))
def test_log_identity_range(lam):
    assert abs(log_identity_quadrature(lam) - math.log1p(lam)) <= 1e-8


def test_log_identity_rejects_negative():
    with pytest.raises(ValueError):
        log_identity_quadrature(-1.0)
