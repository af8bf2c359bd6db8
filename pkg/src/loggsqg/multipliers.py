"""Multiplier suites, class membership checks and the admissibility test.

A :class:`MultiplierSuite` bundles the dissipation ``m``, the constitutive
law ``p = p_a / p_b``, the weight ``omega = omega_a / omega_b``, the Gevrey
rate symbol ``nu`` and the exponents ``gamma`` and ``beta``.

Class membership is decided numerically on log-spaced grids.  A supremum
over all ``r > 0`` cannot be computed, so "finite" is replaced by "finite on
the grid and not growing over the last decades of the grid".  Every verdict
produced here is therefore a heuristic and is labelled as such in reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import GridTooSmall, SingularIntegrand, SymbolOverflow
from .quadrature import adaptive_simpson
from .symbols import (
    Constant,
    Identity,
    IterLogPower,
    LogPower,
    OnePlus,
    PowerLaw,
    Product,
    Quotient,
    Symbol,
    as_ratio,
    eval_derivative,
    eval_symbol,
)

GAMMA_GRID = (0.55, 0.65, 0.75, 0.85, 0.95)
# growth tolerance used by the admissibility trend test, see ``admissibility_check``
TREND_TOL = 1e-9
# growth tolerance for the O2/O3/S2 "finite supremum" checks
CLASS_TREND_TOL = 0.05


@dataclass(frozen=True)
class MultiplierSuite:
    """The symbols entering the well-posedness condition.

    Attributes
    ----------
    m : Symbol
        Dissipation symbol; ``m1 = 1 + m``.
    p_a, p_b : Symbol
        Constitutive law ``p = p_a / p_b``.
    omega_a, omega_b : Symbol
        Weight ``omega = omega_a / omega_b``.
    nu : Symbol
        Gevrey rate symbol.
    gamma : float
        Exponent in ``(0, 1)``.
    beta : float
        Order of the velocity law, in ``[0, 2]``.
    """

    m: Symbol
    p_a: Symbol = field(default_factory=Identity)
    p_b: Symbol = field(default_factory=Identity)
    omega_a: Symbol = field(default_factory=Identity)
    omega_b: Symbol = field(default_factory=Identity)
    nu: Symbol | None = None
    gamma: float = 0.75
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 <= self.beta <= 2.0:
            raise ValueError(f"beta must lie in [0, 2], got {self.beta}")
        if self.nu is None:
            object.__setattr__(self, "nu", self.m)

    @classmethod
    def from_ratios(cls, m: Symbol, p: Symbol = Identity(), omega: Symbol = Identity(), **kw):
        """Build a suite, splitting ``p`` and ``omega`` into nondecreasing factors."""
        p_a, p_b = as_ratio(p)
        w_a, w_b = as_ratio(omega)
        return cls(m=m, p_a=p_a, p_b=p_b, omega_a=w_a, omega_b=w_b, **kw)

    @property
    def p(self) -> Symbol:
        return _simplify_quot(self.p_a, self.p_b)

    @property
    def omega(self) -> Symbol:
        return _simplify_quot(self.omega_a, self.omega_b)

    @property
    def m1(self) -> Symbol:
        return OnePlus(self.m)

    @property
    def a(self) -> Symbol:
        """Velocity symbol ``r^(beta - 2) p(r)``."""
        return Product(PowerLaw(self.beta - 2.0), self.p)

    def validate(self, r_max: float = 1e12) -> list[str]:
        """Return the violated invariants (empty when all hold) on a sample grid."""
        r = np.concatenate([[0.0], np.logspace(-6, math.log10(r_max), 400)])
        problems = []
        for name in ("p_a", "p_b", "omega_a", "omega_b"):
            v = eval_symbol(getattr(self, name), r)
            if np.any(v <= 0) or np.any(np.diff(v) < -1e-14 * np.abs(v[1:])):
                problems.append(f"{name} is not positive and nondecreasing")
        nu = eval_symbol(self.nu, r)
        if nu[0] < 0 or np.any(np.diff(nu) < -1e-14 * np.abs(nu[1:])):
            problems.append("nu violates nu(0) >= 0 or monotonicity")
        return problems


def _simplify_quot(a: Symbol, b: Symbol) -> Symbol:
    return a if isinstance(b, Identity) else Quotient(a, b)


# ---------------------------------------------------------------------------
# class membership


@dataclass(frozen=True)
class RGrid:
    """Log-spaced sample grid ``{0} U [r_min, r_max]``."""

    r_max: float = 1e12
    r_min: float = 1e-6
    per_decade: int = 20

    def points(self) -> np.ndarray:
        if self.r_max < 1e6:
            raise GridTooSmall(f"r_max = {self.r_max:g} < 1e6 cannot resolve growth trends")
        n = int(round(self.per_decade * math.log10(self.r_max / self.r_min))) + 1
        return np.concatenate([[0.0], np.logspace(math.log10(self.r_min), math.log10(self.r_max), n)])

    def describe(self) -> str:
        return f"{{0}} U logspace({self.r_min:g}, {self.r_max:g}, {self.per_decade}/decade)"


@dataclass(frozen=True)
class PropertyVerdict:
    passed: bool
    constant: float
    worst_r: float
    grid: str
    note: str = ""


@dataclass(frozen=True)
class ClassReport:
    cls: str
    symbol: str
    verdicts: dict

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def lines(self) -> list[str]:
        out = []
        for name, v in self.verdicts.items():
            flag = "pass" if v.passed else "FAIL"
            out.append(f"{self.cls}:{name} {flag} C={v.constant:.6g} worst_r={v.worst_r:.6g} grid={v.grid}")
        return out


def _trend_ok(values: np.ndarray, r: np.ndarray, split: float, tol: float) -> bool:
    """True when the max of ``values`` above ``split`` does not exceed the max below it by more than ``tol``."""
    hi = values[r > split]
    lo = values[(r <= split) & (r >= split * 1e-6)]
    if hi.size == 0 or lo.size == 0:
        return True
    return float(hi.max()) <= (1.0 + tol) * float(lo.max()) + 1e-300


def _o1(sym: Symbol, r: np.ndarray, grid: str) -> PropertyVerdict:
    v = np.asarray(eval_symbol(sym, r))
    drops = np.diff(v) / np.maximum(np.abs(v[1:]), 1e-300)
    i = int(np.argmin(drops))
    ok = bool(np.all(v > 0) and drops[i] >= -1e-13)
    worst = float(r[int(np.argmin(v))]) if not np.all(v > 0) else float(r[i + 1])
    return PropertyVerdict(ok, float(v.min()), worst, grid, "positive and nondecreasing")


def _log_derivative_sup(sym: Symbol, r: np.ndarray, grid: str, note: str, weighted: bool = True) -> PropertyVerdict:
    rp = r[r > 0]
    d = np.asarray(eval_derivative(sym, rp))
    v = np.asarray(eval_symbol(sym, rp))
    q = rp * d / v if weighted else rp * d
    i = int(np.argmax(q))
    ok = bool(np.all(np.isfinite(q)) and _trend_ok(q, rp, rp.max() * 1e-3, CLASS_TREND_TOL))
    return PropertyVerdict(ok, float(q[i]), float(rp[i]), grid, note)


def _o3(sym: Symbol, r_max: float) -> PropertyVerdict:
    """Sup of ``w(r1 r2) / (w(r1) + w(r2))`` on ``[1e-3, R]^2`` for ``R = r_max^(k/4)``.

    A bounded ratio has increments of ``ln sup`` that die out as ``R``
    grows; a power-type symbol adds the same increment on every range.
    Pass when the last increment is at most half the first (plus 1e-3).
    """
    def sup_upto(R):
        x = np.logspace(-3, math.log10(R), 121)
        r1, r2 = np.meshgrid(x, x, indexing="ij")
        num = np.asarray(eval_symbol(sym, r1 * r2))
        den = np.asarray(eval_symbol(sym, r1)) + np.asarray(eval_symbol(sym, r2))
        q = num / den
        k = np.unravel_index(int(np.argmax(q)), q.shape)
        return float(q[k]), float(r1[k] * r2[k])

    sups = [sup_upto(r_max ** (k / 4.0)) for k in (1, 2, 3, 4)]
    logs = [math.log(v) for v, _ in sups]
    inc = np.diff(logs)
    big, worst = sups[-1]
    ok = bool(math.isfinite(big) and inc[-1] <= 0.5 * max(inc[0], 0.0) + 1e-3)
    return PropertyVerdict(ok, big, worst, f"2-D logspace(1e-3, {r_max:g})", "w(r1 r2) <= C (w(r1) + w(r2))")


def _mc_symbolic(sym: Symbol):
    if isinstance(sym, LogPower):
        return 2.0 * sym.mu >= -1.0
    if isinstance(sym, IterLogPower):
        return True
    if isinstance(sym, Constant):
        return sym.c > 0
    if isinstance(sym, Identity):
        return True
    if isinstance(sym, PowerLaw):
        return sym.alpha >= 0
    return None


def mc_increments(sym: Symbol, decades: Sequence[float] = (1e3, 1e6, 1e9, 1e12)) -> list[float]:
    """Increments of ``int_1^Y p(r)^2 / r dr`` between consecutive ``Y`` values."""
    def g(u):
        return eval_symbol(sym, math.exp(u)) ** 2

    us = [math.log(y) for y in decades]
    return [adaptive_simpson(g, u0, u1) for u0, u1 in zip(us[:-1], us[1:])]


def _mc(sym: Symbol) -> PropertyVerdict:
    decided = _mc_symbolic(sym)
    if decided is not None:
        return PropertyVerdict(bool(decided), float("inf") if decided else 0.0, float("inf"), "symbolic", "closed-form family")
    inc = mc_increments(sym)
    ratio = inc[-1] / inc[0] if inc[0] > 0 else 0.0
    # a tail like 1/u^(1+s) gives ratio < 0.4 for s >~ 0.05; 1/u gives ln(4/3)/ln 2 = 0.415
    ok = bool(all(i >= 0 for i in inc) and ratio >= 0.4)
    return PropertyVerdict(ok, ratio, 1e12, "Y in {1e3,1e6,1e9,1e12}", "last/first increment of int p^2/r dr")


def verify_class(sym: Symbol, cls: str, r_grid: RGrid = RGrid(), m: Symbol | None = None) -> ClassReport:
    """Check class membership of ``sym`` on a sampled grid.

    Parameters
    ----------
    sym : Symbol
        The symbol under test (for class ``"D"`` this is ``m`` itself).
    cls : {"W", "C", "D", "S"}
        ``W``: quotients of positive nondecreasing, doubling-type symbols.
        ``C``: ``int_1^oo p^2/r dr`` diverges.
        ``D``: ``1 + m`` belongs to ``W``.
        ``S``: rate symbols relative to ``m`` (requires ``m``).
    """
    r = r_grid.points()
    grid = r_grid.describe()
    verdicts: dict[str, PropertyVerdict] = {}
    if cls in ("W", "D"):
        target = OnePlus(sym) if cls == "D" else sym
        num, den = as_ratio(target)
        for tag, factor in (("num", num), ("den", den)):
            suffix = "" if isinstance(den, Identity) and tag == "num" else f"[{tag}]"
            if tag == "den" and isinstance(den, Identity):
                continue
            verdicts["O1" + suffix] = _o1(factor, r, grid)
            verdicts["O2" + suffix] = _log_derivative_sup(factor, r, grid, "sup r w'/w")
            verdicts["O3" + suffix] = _o3(factor, r_grid.r_max)
    elif cls == "C":
        verdicts["MC-divergence"] = _mc(sym)
    elif cls == "S":
        if m is None:
            raise ValueError("class S needs the dissipation symbol m")
        v = np.asarray(eval_symbol(sym, r))
        mono = np.diff(v) >= -1e-13 * np.maximum(np.abs(v[1:]), 1e-300)
        i = int(np.argmin(np.diff(v)))
        verdicts["S1"] = PropertyVerdict(bool(v[0] >= 0 and mono.all()), float(v[0]), float(r[i + 1]), grid, "nu(0) >= 0, nondecreasing")
        verdicts["S2"] = _log_derivative_sup(sym, r, grid, "sup r nu'", weighted=False)
        ratio = v / np.asarray(eval_symbol(OnePlus(m), r))
        j = int(np.argmax(ratio))
        ok = bool(_trend_ok(ratio, r, r.max() * 1e-3, CLASS_TREND_TOL))
        verdicts["S-bound"] = PropertyVerdict(ok, float(ratio[j]), float(r[j]), grid, "sup nu / (1 + m)")
    else:
        raise ValueError(f"unknown class {cls!r}; expected W, C, D or S")
    return ClassReport(cls, str(sym), verdicts)


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class YGrid:
    """Log-spaced grid of ``y`` values, ``per_decade`` points per decade."""

    y_min: float = 1e-2
    y_max: float = 1e12
    per_decade: int = 10

    def points(self) -> np.ndarray:
        lo, hi = math.log10(self.y_min), math.log10(self.y_max)
        if hi < 12 - 1e-9:
            raise GridTooSmall(f"y_max = {self.y_max:g} must be at least 1e12")
        n = int(round((hi - lo) * self.per_decade))
        return 10.0 ** (lo + np.arange(n + 1) / self.per_decade)


@dataclass(frozen=True)
class AdmissibilityResult:
    """Outcome of the admissibility test at one ``gamma``.

    ``sup1`` and ``sup2`` are grid maxima; ``growth1`` and ``growth2`` are the
    ratios of the maximum over ``[1e10, 1e12]`` to the maximum over
    ``[1e8, 1e10]``.  The verdict is heuristic by construction.
    """

    gamma: float
    sup1: float
    sup2: float
    growth1: float
    growth2: float
    admissible: bool
    heuristic: bool = True


def _raw(sym: Symbol):
    def f(x: float) -> float:
        return float(sym._value(np.float64(x)))

    return f


@lru_cache(maxsize=256)
def _integral_profile(p: Symbol, omega: Symbol, ys: tuple, tol: float):
    """Cumulative ``A(y) = int_0^y r/((1+r^2) w^2)`` and ``B(y)`` with an extra ``p(r)^2``."""
    pf, wf = _raw(p), _raw(omega)
    start = 1e-8 if (p.singular_at_origin or omega.singular_at_origin) else 0.0

    def weights(r):
        w = wf(r)
        if not (w > 0 and math.isfinite(w)):
            raise SingularIntegrand(f"weight {omega} is {w!r} at r = {r!r}")
        pv = pf(r)
        if not math.isfinite(pv):
            raise SingularIntegrand(f"constitutive law {p} is {pv!r} at r = {r!r}")
        return pv, w

    def ga(r):
        _, w = weights(r)
        return r / ((1.0 + r * r) * w * w)

    def gb(r):
        pv, w = weights(r)
        return r * pv * pv / ((1.0 + r * r) * w * w)

    def ua(u):
        r = math.exp(u)
        return r * ga(r)

    def ub(u):
        r = math.exp(u)
        return r * gb(r)

    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            A = [adaptive_simpson(ga, start, ys[0], tol)]
            B = [adaptive_simpson(gb, start, ys[0], tol)]
            for y0, y1 in zip(ys[:-1], ys[1:]):
                u0, u1 = math.log(y0), math.log(y1)
                A.append(A[-1] + adaptive_simpson(ua, u0, u1, tol))
                B.append(B[-1] + adaptive_simpson(ub, u0, u1, tol))
        except FloatingPointError as exc:
            raise SingularIntegrand(str(exc)) from exc
    return np.array(A), np.array(B)


def _growth(values: np.ndarray, ys: np.ndarray) -> float:
    top = values[(ys >= 1e10 * (1 - 1e-12))]
    prev = values[(ys >= 1e8 * (1 - 1e-12)) & (ys <= 1e10 * (1 + 1e-12))]
    return float(top.max() / prev.max())


def admissibility_check(
    suite: MultiplierSuite,
    gamma: float | None = None,
    y_grid: YGrid = YGrid(),
    tol: float = 1e-10,
    trend_tol: float = TREND_TOL,
) -> AdmissibilityResult:
    """Test the two suprema of the well-posedness condition on a ``y`` grid.

    ``sup1 = max_y m1(y)^-gamma * I(y)^(1/2)`` with
    ``I(y) = int_0^y r (p(y)^2 + p(r)^2) / ((1 + r^2) w(r)^2) dr`` and
    ``sup2 = max_y p_a(y) w_b(y) / m1(y)^gamma``.

    The suite is declared admissible when both maxima are finite and neither
    quantity grows from the window ``[1e8, 1e10]`` to ``[1e10, 1e12]`` by more
    than a factor ``1 + trend_tol``.  The default tolerance is essentially
    zero: near the threshold the quantities grow like a tiny power of
    ``ln y`` (or ``ln ln y``), which changes by well under 1% over two
    decades, so any looser tolerance admits divergent cases.

    Raises
    ------
    SingularIntegrand
        if ``p`` or ``omega`` is undefined somewhere on ``(0, y_max]``.
    QuadratureFailure
        if the adaptive rule runs out of depth.
    """
    g = suite.gamma if gamma is None else gamma
    if not 0.0 < g < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {g}")
    ys = y_grid.points()
    A, B = _integral_profile(suite.p, suite.omega, tuple(ys.tolist()), tol)
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            p_y = suite.p._value(ys)
            m1g = suite.m1._value(ys) ** g
            f1 = np.sqrt(p_y**2 * A + B) / m1g
            f2 = suite.p_a._value(ys) * suite.omega_b._value(ys) / m1g
    except FloatingPointError as exc:
        raise SymbolOverflow(str(exc)) from exc
    finite = bool(np.all(np.isfinite(f1)) and np.all(np.isfinite(f2)))
    g1, g2 = _growth(f1, ys), _growth(f2, ys)
    ok = finite and g1 <= 1.0 + trend_tol and g2 <= 1.0 + trend_tol
    return AdmissibilityResult(g, float(f1.max()), float(f2.max()), g1, g2, bool(ok))


def admissible_for_some_gamma(suite: MultiplierSuite, gamma_grid=GAMMA_GRID, **kw) -> tuple[bool, list]:
    results = [admissibility_check(suite, g, **kw) for g in gamma_grid]
    return any(r.admissible for r in results), results


def family_suite(family: str, mu: float, mutilde: float, beta: float = 1.0) -> MultiplierSuite:
    """Suite of the log (``omega = 1``) or iterated-log (``omega = LogPower(1/2)``) family."""
    if family == "log":
        return MultiplierSuite.from_ratios(LogPower(mu), LogPower(mutilde), Identity(), beta=beta)
    if family == "iterlog":
        return MultiplierSuite.from_ratios(IterLogPower(mu), IterLogPower(mutilde), LogPower(0.5), beta=beta)
    raise ValueError(f"unknown family {family!r}; expected 'log' or 'iterlog'")


@dataclass(frozen=True)
class ThresholdMatrix:
    family: str
    mu_grid: tuple
    mutilde_grid: tuple
    admissible: np.ndarray  # shape (len(mu_grid), len(mutilde_grid))

    def expected(self) -> np.ndarray:
        mu = np.asarray(self.mu_grid)[:, None]
        mt = np.asarray(self.mutilde_grid)[None, :]
        return mu > mt + 0.5 + 1e-12


def threshold_scan(family: str, mu_grid, mutilde_grid, gamma_grid=GAMMA_GRID, y_grid: YGrid = YGrid()) -> ThresholdMatrix:
    """Classify each ``(mu, mutilde)`` cell; a cell is admissible if some ``gamma`` works."""
    mu_grid, mutilde_grid = tuple(map(float, mu_grid)), tuple(map(float, mutilde_grid))
    out = np.zeros((len(mu_grid), len(mutilde_grid)), dtype=bool)
    for i, mu in enumerate(mu_grid):
        for j, mt in enumerate(mutilde_grid):
            out[i, j] = admissible_for_some_gamma(family_suite(family, mu, mt), gamma_grid, y_grid=y_grid)[0]
    return ThresholdMatrix(family, mu_grid, mutilde_grid, out)


def log_identity_quadrature(lam: float, s_max: float | None = None, tol: float = 1e-12) -> float:
    """Evaluate ``int_0^oo (1 - e^(-s lam)) e^(-s) ds / s``, which equals ``ln(1 + lam)``.

    Below ``s = 1e-8`` the integrand is replaced by its series
    ``lam e^(-s) (1 - s lam / 2)``; the range is cut at ``s_max`` where the
    tail ``int_S^oo e^(-s)/s ds < e^(-S)/S`` drops below ``1e-12``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        return 0.0
    if s_max is None:
        s_max = 1.0
        while math.exp(-s_max) / s_max >= 1e-13:
            s_max += 1.0

    def f(s):
        if s < 1e-8:
            return lam * math.exp(-s) * (1.0 - 0.5 * s * lam)
        return -math.expm1(-s * lam) * math.exp(-s) / s

    # split at the inner scale 1/lam so the sharp part is resolved from the start
    knots = sorted({0.0, min(1.0 / lam, s_max), min(10.0 / lam, s_max), s_max})
    return sum(adaptive_simpson(f, a, b, tol, relative=False) for a, b in zip(knots[:-1], knots[1:]))
