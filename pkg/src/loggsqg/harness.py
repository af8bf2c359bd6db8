"""Reproducible experiments and probes with machine-checkable reports.

Every experiment returns an :class:`ExperimentReport` whose assertions carry
the measured value, the threshold and the verdict.  Experiments are pure
functions of their arguments and seeds; calling one twice yields identical
numbers and identical CSV text.

Probes of product and commutator estimates report empirical ratios
``lhs / rhs`` with every unspecified constant set to 1 (including the
square-summable sequence ``c_j``), so the ratios conflate those constants.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import Blowup, LocalizationViolated
from .multipliers import MultiplierSuite
from .solver import (
    RunConfig,
    flux_context,
    flux_divergence_coeffs,
    if_step,
    linear_symbol,
    max_velocity_gradient,
    run,
)
from .spectral import (
    GridSpec,
    SpectralField,
    WeightedNormSpec,
    l2_norm,
    lp_block_weight,
    lp_norm,
    lp_partition,
    named_field,
    pad_coeffs,
    random_field,
    symbol_on_grid,
    transform_backward,
    weighted_norm,
    weighted_norm_checked,
)
from .symbols import Constant, Identity, IterLogPower, LogPower, OnePlus, PowerLaw, Product, Symbol, eval_symbol

# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Assertion:
    name: str
    measured: float
    threshold: float
    relation: str  # "<=", ">=", "==" or "in"
    passed: bool


@dataclass
class ExperimentReport:
    experiment: str
    digest: str
    assertions: list = field(default_factory=list)
    recorded: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)  # name -> CSV text
    written: dict = field(default_factory=dict)  # name -> path

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, measured: float, threshold: float, relation: str = "<=") -> bool:
        measured = float(measured)
        if relation == "<=":
            ok = measured <= threshold
        elif relation == ">=":
            ok = measured >= threshold
        elif relation == "==":
            ok = measured == threshold
        else:
            raise ValueError(relation)
        ok = bool(ok and not math.isnan(measured))
        self.assertions.append(Assertion(name, measured, float(threshold), relation, ok))
        return ok

    def record(self, **kw):
        self.recorded.update(kw)

    def to_text(self) -> str:
        lines = [f"experiment={self.experiment}", f"digest={self.digest}", f"passed={str(self.passed).lower()}"]
        for a in self.assertions:
            lines.append(
                f"assert.{a.name}=measured:{a.measured!r} {a.relation} threshold:{a.threshold!r} "
                f"{'pass' if a.passed else 'FAIL'}"
            )
        for k in sorted(self.recorded):
            lines.append(f"record.{k}={self.recorded[k]}")
        for k in sorted(self.written):
            lines.append(f"artifact.{k}={self.written[k]}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        for name, text in self.artifacts.items():
            path = out / f"{self.experiment}.{name}.csv"
            atomic_write_text(path, text)
            self.written[name] = str(path)
        path = out / f"{self.experiment}.report.txt"
        atomic_write_text(path, self.to_text())
        return path


def config_digest(**params) -> str:
    """Stable short hash of experiment parameters."""
    text = ";".join(f"{k}={_canon(params[k])}" for k in sorted(params))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _canon(v) -> str:
    if isinstance(v, RunConfig):
        keys = ("grid", "suite", "T", "dt", "scheme", "eps_visc", "q_mode", "lambda_track", "cadence")
        return "RunConfig(" + ",".join(f"{k}={_canon(getattr(v, k))}" for k in keys) + ")"
    if isinstance(v, MultiplierSuite):
        return (
            f"Suite(m={v.m},p_a={v.p_a},p_b={v.p_b},omega_a={v.omega_a},omega_b={v.omega_b},"
            f"nu={v.nu},gamma={v.gamma!r},beta={v.beta!r})"
        )
    if isinstance(v, SpectralField):
        return "Field(" + hashlib.sha256(np.ascontiguousarray(v.coeffs).tobytes()).hexdigest()[:16] + ")"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_canon(x) for x in v) + "]"
    return str(v)


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(repr(float(x)) if not isinstance(x, (bool, str)) else str(x).lower() for x in r))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# default configurations


def default_suite(beta: float = 1.0, mu: float = 1.0, mutilde: float = 0.0, gamma: float = 0.75) -> MultiplierSuite:
    """``m = LogPower(mu)``, ``p = LogPower(mutilde)``, unit weight."""
    return MultiplierSuite.from_ratios(LogPower(mu), LogPower(mutilde), Identity(), gamma=gamma, beta=beta)


def euler_suite(gamma_p: float) -> MultiplierSuite:
    """``beta = 0``, ``m = LogPower(1)``, ``p = IterLogPower(gamma_p)`` (``gamma_p`` in [0, 1])."""
    p = Identity() if gamma_p == 0 else IterLogPower(gamma_p)
    return MultiplierSuite(m=LogPower(1.0), p_a=p, beta=0.0)


def _is_zero_symbol(sym: Symbol, grid: GridSpec) -> bool:
    return bool(np.all(np.asarray(symbol_on_grid(grid, sym, "keep")) == 0))


# ---------------------------------------------------------------------------
# energy balance


def exp_energy_balance(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    seed: int = 0,
    inviscid_companion: bool = True,
    inviscid_dt: float = 2e-3,
    tol: float = 1e-6,
    drift_tol: float = 1e-8,
) -> ExperimentReport:
    """``||theta(t)||^2 + 2 int_0^t ||m^(1/2) theta||^2 ds = ||theta0||^2`` for ``beta <= 1``.

    The dissipation integral uses the trapezoid rule on every step.  With
    ``inviscid_companion`` the same data is also run with ``m = 0`` and the
    relative drift of ``||theta||_2`` is asserted.
    """
    if config is None:
        config = RunConfig(GridSpec(128), default_suite(1.0, 1.0, 0.0), T=1.0, dt=5e-4)
    if not 0.0 <= config.suite.beta <= 1.0:
        raise ValueError("the energy law needs beta in [0, 1]")
    if config.forcing is not None or config.eps_visc != 0 or config.q_mode != "self":
        raise ValueError("the energy law is checked for the unforced equation without viscosity")
    if theta0 is None:
        theta0 = random_field(config.grid, seed)
    config = replace(config, cadence=1)
    rep = ExperimentReport("energy", config_digest(config=config, theta0=theta0, seed=seed))
    _, ns = run(config, theta0)
    a = ns.as_arrays()
    e0 = a["l2"][0] ** 2
    dissipated = 2.0 * float(np.trapezoid(a["l2_diss"] ** 2, a["t"]))
    resid = abs(a["l2"][-1] ** 2 + dissipated - e0)
    rel = resid / e0 if e0 > 0 else resid
    rep.check("energy_residual", rel, tol)
    rep.check("l2_nonincreasing_violation", float(np.max(np.diff(a["l2"]), initial=0.0)) / max(a["l2"][0], 1e-300), 1e-12)
    rep.record(l2_initial=a["l2"][0], l2_final=a["l2"][-1], dissipated=dissipated, steps=len(a["t"]) - 1)
    rep.artifacts["norms"] = ns.to_csv_text()
    if _is_zero_symbol(config.suite.m, config.grid):
        drift = abs(a["l2"][-1] - a["l2"][0]) / max(a["l2"][0], 1e-300)
        rep.check("inviscid_l2_drift", drift, drift_tol)
    elif inviscid_companion:
        inv = replace(config, suite=replace(config.suite, m=Constant(0.0), nu=Constant(0.0)), dt=inviscid_dt)
        _, ns0 = run(inv, theta0)
        drift = abs(ns0.l2[-1] - ns0.l2[0]) / max(ns0.l2[0], 1e-300)
        rep.check("inviscid_l2_drift", drift, drift_tol)
    return rep


# ---------------------------------------------------------------------------
# maximum principle


def exp_max_principle(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    gamma_p: float = 1.0,
    slack: float = 5e-3,
    every: int = 1,
) -> ExperimentReport:
    """``||theta(t)||_{L^p} <= (1 + slack) ||theta0||_{L^p}`` for ``p`` in {2, 4, 8, inf}.

    Defaults: ``beta = 0``, ``m = LogPower(1)``, ``p = IterLogPower(gamma_p)``,
    ``N = 128``, ``T = 1``, ``theta0 = sin x1 sin x2``.
    """
    if config is None:
        config = RunConfig(GridSpec(128), euler_suite(gamma_p), T=1.0, dt="auto")
    if config.suite.beta != 0.0:
        raise ValueError("the maximum principle experiment needs beta = 0")
    if theta0 is None:
        theta0 = named_field(config.grid, "sinsin")
    config = replace(config, cadence=every, snapshot_cadence=every)
    rep = ExperimentReport("maxprin", config_digest(config=config, theta0=theta0))
    traj, _ = run(config, theta0)
    ps = (2.0, 4.0, 8.0, math.inf)
    rows = []
    for t, f in traj.snapshots:
        x = transform_backward(f)
        rows.append([t] + [lp_norm(x, p, config.grid) for p in ps])
    rows = np.array(rows)
    for i, p in enumerate(ps, start=1):
        init = rows[0, i]
        worst = float(rows[:, i].max() / init) if init > 0 else 0.0
        rep.check(f"Lp_ratio_p{'inf' if math.isinf(p) else int(p)}", worst, 1.0 + slack)
    rep.artifacts["lp"] = _csv(("t", "l2", "l4", "l8", "linf"), rows)
    return rep


# ---------------------------------------------------------------------------
# convexity inequality


def _log_laplacian(grid: GridSpec) -> np.ndarray:
    """Symbol ``ln(1 + |k|^2)`` of ``ln(I - Laplacian)``."""
    return np.log1p(grid.arrays().kmag ** 2)


_PHIS = {
    "square": (lambda x: x * x, lambda x: 2.0 * x),
    "fourth-power": (lambda x: x**4, lambda x: 4.0 * x**3),
}


def probe_convexity(f: SpectralField, phi: str = "square", tol: float = 1e-8) -> ExperimentReport:
    """Pointwise ``Phi'(f) L f - L Phi(f) >= 0`` with ``L = ln(I - Laplacian)``.

    ``f`` must leave the top third of its spectrum empty.  Everything is
    evaluated on a grid three times finer, where ``Phi(f)`` (degree at most
    four) is represented without aliasing, so the expression is exact up to
    roundoff.  Linear ``Phi`` is excluded: it gives zero identically.
    """
    if phi not in _PHIS:
        raise ValueError(f"phi must be one of {sorted(_PHIS)}")
    grid = f.grid
    ga = grid.arrays()
    if np.any(np.abs(f.coeffs[~ga.mask]) > 1e-14 * max(1.0, float(np.abs(f.coeffs).max()))):
        raise LocalizationViolated("convexity probe needs a band-limited field (top third empty)")
    M = 3 * grid.N
    fine = GridSpec(M, grid.L_box)
    L = _log_laplacian(fine)
    c = pad_coeffs(f.coeffs, M)
    x = np.fft.ifft2(c, norm="ortho").real
    Lf = np.fft.ifft2(L * c, norm="ortho").real
    Phi, dPhi = _PHIS[phi]
    LPhi = np.fft.ifft2(L * np.fft.fft2(Phi(x), norm="ortho"), norm="ortho").real
    expr = dPhi(x) * Lf - LPhi
    scale = float(np.abs(dPhi(x) * Lf).max())
    rep = ExperimentReport("convexity", config_digest(f=f, phi=phi))
    worst = float(expr.min())
    rel = worst / scale if scale > 0 else 0.0
    rep.check("min_over_scale", rel, -tol, ">=")
    rep.record(min=worst, scale=scale, phi=phi)
    return rep


# ---------------------------------------------------------------------------
# Gevrey smoothing


def exp_smoothing(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    lam_star: float = 0.05,
    seed: int = 0,
    growth_cap: float = 10.0,
) -> ExperimentReport:
    """Boundedness of ``||exp(lam t nu(D)) theta(t)||`` for ``lam`` in {lam*, lam*/2}.

    Also checks that the ``lam = 0`` track reproduces the Sobolev column
    bit for bit and, when ``m = LogPower(mu)`` with ``mu >= 1`` and
    ``nu = m``, that ``||theta(t)||`` in the homogeneous space of order
    ``1 + beta + lam t`` stays finite.
    """
    if config is None:
        config = RunConfig(GridSpec(128), default_suite(1.0, 1.0, 0.0), T=0.5, dt="auto", cadence=5)
    if theta0 is None:
        theta0 = random_field(config.grid, seed)
    rep = ExperimentReport("smoothing", config_digest(config=config, theta0=theta0, lam_star=lam_star))
    rows = None
    for lam in (lam_star, 0.5 * lam_star):
        cfg = replace(config, lambda_track=lam, snapshot_cadence=config.cadence)
        traj, ns = run(cfg, theta0)
        a = ns.as_arrays()
        g = a["gevrey"]
        finite = bool(np.all(np.isfinite(g)))
        rep.check(f"gevrey_finite_lam{lam:g}", 0.0 if finite else 1.0, 0.0)
        rep.check(f"gevrey_growth_lam{lam:g}", float(g.max() / g[0]) if g[0] > 0 else 0.0, growth_cap)
        rep.check(f"saturated_count_lam{lam:g}", float(np.sum(a["saturated"])), 0.0)
        m = config.suite.m
        if isinstance(m, LogPower) and m.mu >= 1 and config.suite.nu == m:
            worst = 0.0
            for t, f in traj.snapshots:
                v = weighted_norm(f, WeightedNormSpec(1.0 + config.suite.beta + lam * t, Identity(), True))
                worst = max(worst, 0.0 if math.isfinite(v) else math.inf)
            rep.check(f"sobolev_gain_finite_lam{lam:g}", worst, 0.0)
        if config.suite.beta == 2.0 and config.suite.p == Identity() and config.forcing is None and lam <= 1:
            # linear flow: E^(lam t) theta(t) has symbol exp((lam - 1) t m), never above its start
            rep.check(f"linear_gevrey_over_initial_lam{lam:g}", float(g.max() / g[0]) - 1.0 if g[0] > 0 else 0.0, 1e-12)
        if rows is None:
            rep.artifacts["norms"] = ns.to_csv_text()
            rows = True
    _, ns0 = run(replace(config, lambda_track=0.0), theta0)
    same = bool(np.array_equal(np.asarray(ns0.gevrey), np.asarray(ns0.sob)))
    rep.check("lam0_matches_sobolev_bitwise", 1.0 if same else 0.0, 1.0, "==")
    return rep


# ---------------------------------------------------------------------------
# stability in the weaker topology


def y_norm(f: SpectralField, beta: float, omega: Symbol = Identity()) -> float:
    """Norm of the space used for stability: ``L^2_w + dot H^-1_w`` (beta = 0),
    ``L^2_w`` (0 < beta < 1), ``H^beta_w`` (1 <= beta <= 2)."""
    if beta == 0:
        return weighted_norm(f, WeightedNormSpec(0.0, omega)) + weighted_norm(f, WeightedNormSpec(-1.0, omega, True))
    if beta < 1:
        return weighted_norm(f, WeightedNormSpec(0.0, omega))
    return weighted_norm(f, WeightedNormSpec(beta, omega))


def exp_stability(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    amplitudes: Sequence[float] = (1e-2, 1e-3, 1e-4),
    seed: int = 0,
    direction_seed: int = 1,
    slope_tol: float = 0.1,
    c_max: float = 1e3,
) -> ExperimentReport:
    """Twin runs from ``theta0`` and ``theta0 + delta phi``; Lipschitz slope and identical-twin check."""
    if config is None:
        config = RunConfig(GridSpec(128), default_suite(1.0, 1.0, 0.0), T=0.5, dt="auto", cadence=5)
    if theta0 is None:
        theta0 = random_field(config.grid, seed)
    beta, omega = config.suite.beta, config.suite.omega
    phi = random_field(config.grid, direction_seed)
    cfg = replace(config, snapshot_cadence=config.cadence)
    dt = _fixed_dt(cfg, theta0)
    cfg = replace(cfg, dt=dt)
    rep = ExperimentReport("stability", config_digest(config=cfg, theta0=theta0, amplitudes=list(amplitudes)))
    base, _ = run(cfg, theta0)
    twin, _ = run(cfg, theta0)
    same = max(l2_norm(a - b) for (_, a), (_, b) in zip(base.snapshots, twin.snapshots))
    rep.check("identical_twin_diff", same / l2_norm(theta0), 1e-13)
    phi_norm = y_norm(phi, beta, omega)
    sups, rows = [], []
    for d in amplitudes:
        pert, _ = run(cfg, theta0 + phi * d)
        sup = max(y_norm(b - a, beta, omega) for (_, a), (_, b) in zip(base.snapshots, pert.snapshots))
        sups.append(sup)
        rows.append((d, sup, sup / (d * phi_norm)))
    c_emp = max(r[2] for r in rows)
    slope = float(np.polyfit(np.log(amplitudes), np.log(sups), 1)[0])
    rep.check("C_emp", c_emp, c_max)
    rep.check("slope_minus_one_abs", abs(slope - 1.0), slope_tol)
    rep.record(slope=slope, C_emp=c_emp, dt=dt)
    rep.artifacts["twin"] = _csv(("delta", "sup_Y_norm", "ratio"), rows)
    return rep


def _fixed_dt(cfg: RunConfig, theta0: SpectralField) -> float:
    from .solver import auto_dt

    return auto_dt(cfg, theta0) if cfg.dt == "auto" else float(cfg.dt)


# ---------------------------------------------------------------------------
# Kato splitting


def exp_kato_split(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    delta: float = 1e-2,
    seed: int = 0,
    direction_seed: int = 1,
    tol: float = 1e-8,
) -> ExperimentReport:
    """Check ``grad theta^n = varsigma + zeta`` along the coupled evolution.

    Six fields are advanced together by one integrating-factor RK4 step:
    ``theta``, ``theta^n`` (both solving the nonlinear equation) and, for
    ``l = 1, 2``, the protean systems with ``q = -theta^n``

        varsigma_l' + m varsigma_l + Div F_{-theta^n}(varsigma_l) = G_l,
        zeta_l' + m zeta_l + Div F_{-theta^n}(zeta_l) = G^n_l - G_l,

    where ``G_l = Div F_{d_l theta}(theta)`` and ``G^n_l`` likewise for
    ``theta^n``.  Initial data: ``varsigma_l(0) = d_l theta0`` and
    ``zeta_l(0) = d_l theta0^n - d_l theta0``.
    """
    if config is None:
        config = RunConfig(GridSpec(64), default_suite(1.5, 1.0, 0.0), T=0.5, dt="auto", cadence=5)
    grid = config.grid
    if theta0 is None:
        theta0 = random_field(grid, seed)
    thn0 = theta0 + random_field(grid, direction_seed) * delta
    ctx = flux_context(grid, config.suite.beta, config.suite.p)
    k = (grid.arrays().k1, grid.arrays().k2)
    dt = _fixed_dt(config, theta0)
    nsteps = max(1, int(math.ceil(config.T / dt - 1e-9))) if config.T > 0 else 0
    dt = config.T / nsteps if nsteps else 0.0
    rate = linear_symbol(grid, config.suite.m, config.eps_visc)
    F = lambda q, th: flux_divergence_coeffs(q, th, ctx)  # noqa: E731

    def rhs(t, u):
        th, thn = u[0], u[1]
        out = np.empty_like(u)
        out[0] = -F(-th, th)
        out[1] = -F(-thn, thn)
        for l in range(2):
            G = F(1j * k[l] * th, th)
            Gn = F(1j * k[l] * thn, thn)
            out[2 + l] = -F(-thn, u[2 + l]) + G
            out[4 + l] = -F(-thn, u[4 + l]) + Gn - G
        return out

    u = np.empty((6, grid.N, grid.N), dtype=complex)
    u[0], u[1] = theta0.coeffs, thn0.coeffs
    for l in range(2):
        u[2 + l] = 1j * k[l] * theta0.coeffs
        u[4 + l] = 1j * k[l] * thn0.coeffs - 1j * k[l] * theta0.coeffs
    factors = (np.exp(-rate * dt), np.exp(-rate * 0.5 * dt)) if nsteps else None
    rep = ExperimentReport("kato", config_digest(config=config, theta0=theta0, delta=delta))
    rows = []

    def residual(t, u):
        num = den = 0.0
        for l in range(2):
            g = 1j * k[l] * u[1]
            num += float(np.sum(np.abs(g - u[2 + l] - u[4 + l]) ** 2))
            den += float(np.sum(np.abs(g) ** 2))
        r = math.sqrt(num / den) if den > 0 else math.sqrt(num)
        rows.append((t, r, math.sqrt(float(np.sum(np.abs(u[4:]) ** 2))) * grid.dx))
        return r

    worst = residual(0.0, u)
    for n in range(1, nsteps + 1):
        u = if_step(u, (n - 1) * dt, dt, rate, rhs, config.scheme, factors)
        if not np.all(np.isfinite(u)):
            raise Blowup(f"non-finite state in the split system at t = {n * dt:.6g}", (n - 1) * dt)
        if n % config.cadence == 0 or n == nsteps:
            worst = max(worst, residual(n * dt, u))
    rep.check("split_residual", worst, tol)
    rep.record(beta=config.suite.beta, steps=nsteps, dt=dt)
    rep.artifacts["residual"] = _csv(("t", "residual", "zeta_l2"), rows)
    return rep


# ---------------------------------------------------------------------------
# commutator and product probes


@dataclass(frozen=True)
class ProbeSample:
    j: int
    trial: int
    lhs: float
    rhs: float
    seeds: tuple

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def samples_csv(samples: Sequence[ProbeSample]) -> str:
    return _csv(("j", "trial", "lhs", "rhs", "ratio"), [(s.j, s.trial, s.lhs, s.rhs, s.ratio) for s in samples])


def shell_maxima(samples: Sequence[ProbeSample]) -> dict:
    out: dict = {}
    for s in samples:
        out[s.j] = max(out.get(s.j, 0.0), s.ratio)
    return dict(sorted(out.items()))


def _lift(c: np.ndarray, M: int) -> np.ndarray:
    return pad_coeffs(c, M)


def _phys(c: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(c, norm="ortho").real


def _spec(x: np.ndarray) -> np.ndarray:
    return np.fft.fft2(x, norm="ortho")


def localized_field(grid: GridSpec, j: int, seed: int, slope: float = 0.0) -> SpectralField:
    """Random field projected on block ``j`` (support in ``2^(j-1) < |k| < 2^(j+1)``), unit L2 norm."""
    base = random_field(grid, seed, slope=slope, band_limited=True)
    c = base.coeffs * lp_block_weight(grid, j)
    f = SpectralField(grid, c, True)
    n = l2_norm(f)
    if n == 0:
        raise LocalizationViolated(f"block {j} has no modes on this grid")
    return f * (1.0 / n)


def _check_annulus(c: np.ndarray, grid: GridSpec, j: int):
    kmag = grid.arrays().kmag
    outside = (kmag <= 2.0 ** (j - 1)) | (kmag >= 2.0 ** (j + 1))
    if np.any(np.abs(c[outside]) > 1e-14 * max(1.0, float(np.abs(c).max()))):
        raise LocalizationViolated(f"field is not supported in the annulus of block {j}")


def commutator_symbol(grid: GridSpec, s: float, p: Symbol, ell: int) -> np.ndarray:
    """Symbol of ``Lambda^-s p(D) d_ell``."""
    ga = grid.arrays()
    out = np.zeros_like(ga.kmag, dtype=complex)
    nz = ga.nonzero
    kl = ga.k1 if ell == 1 else ga.k2
    out[nz] = ga.kmag[nz] ** (-s) * np.asarray(eval_symbol(p, ga.kmag[nz])) * 1j * kl[nz]
    return out


def commutator_apply(grid: GridSpec, A: np.ndarray, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Coefficients of ``A(g f) - g (A f)`` from physical-space products (both orderings)."""
    gx = _phys(g)
    return A * _spec(gx * _phys(f)) - _spec(gx * _phys(A * f))


def commutator_triad(grid: GridSpec, symbol: Callable, f: np.ndarray, g: np.ndarray, h: np.ndarray) -> complex:
    """Brute-force ``sum_xi sum_eta m(xi, eta) f(xi - eta) g(eta) conj h(xi)``, the Plancherel form.

    ``m(xi, eta) = A(xi) - A(xi - eta)`` where ``symbol(k1, k2)`` returns
    ``A`` at integer wavenumber indices.  Only meant for sparse inputs.
    """
    N = grid.N
    idx = np.fft.fftfreq(N, 1.0 / N).astype(int)
    fs = [(idx[a], idx[b], f[a, b]) for a, b in zip(*np.nonzero(np.abs(f) > 0))]
    gs = [(idx[a], idx[b], g[a, b]) for a, b in zip(*np.nonzero(np.abs(g) > 0))]
    total = 0.0 + 0.0j
    for e1, e2, gv in gs:
        for a1, a2, fv in fs:
            x1, x2 = a1 + e1, a2 + e2
            if not (-N // 2 < x1 <= N // 2 and -N // 2 < x2 <= N // 2):
                continue
            hv = h[x1 % N, x2 % N]
            if hv == 0:
                continue
            total += (symbol(x1, x2) - symbol(a1, a2)) * fv * gv * np.conj(hv)
    # ortho convention: (fg)^ = (1/N) f^ * g^, and <u, v> = dx^2 sum u^ conj v^
    return total * grid.dx**2 / N


def probe_commutator(
    j_range: Iterable[int] = (3, 4, 5),
    s: float = 0.0,
    eps: float = 0.0,
    suite: MultiplierSuite | None = None,
    trials: int = 20,
    seed: int = 0,
    N: int = 128,
    variant: str = "localized",
    ell: int = 1,
    g_constant: bool = False,
    lam: float = 0.1,
) -> list:
    """Empirical ratios for commutators with ``Lambda^-s p(D) d_ell``.

    ``f`` is random and localized to block ``j``; ``h`` is the block-``j``
    projection of ``[A, g] f`` itself (the test function that makes the
    pairing largest among those supported in the annulus).  ``g`` is a
    random smooth field, or the constant 1 when ``g_constant``.

    Variants and right-hand sides (every constant set to 1, ``Gamma = m1^(gamma/2)``):

    * ``"localized"``: ``(p(2^j) Gamma(2^j) + p_a(2^j) / w(2^j)) 2^(eps j)
      ||g||_{H^(2-s-eps)_w} ||f|| ||h||``.
    * ``"nonlocal"``: ``||g||_{H^(2-s-delta)} (||p_a f||_{dot H^eps} ||h|| +
      ||p_a h||_{dot H^eps} ||f||)`` with ``delta = eps / 2`` (needs ``eps > 0``).
    * ``"gevrey"``: the operator is ``w(D) E^lam_nu Delta_j d_ell`` and the
      right-hand side is ``3 (1 + lam) e^lam Gamma(2^j) ||E f||_2
      ||Lambda E g||_{H^1} ||h||`` (exponents ``r = 0``, ``s = 0``,
      ``sbar = 1``, unit auxiliary weights).
    """
    if suite is None:
        suite = default_suite(1.0, 1.0, 0.25)
    if not (0.0 <= s < 1.0 and 0.0 <= eps <= 1.0 and s + eps <= 1.0):
        raise ValueError("need s in [0, 1), eps in [0, 1] and s + eps <= 1")
    if variant == "nonlocal" and eps <= 0:
        raise ValueError("the non-localized bound needs eps > 0 (delta = eps / 2)")
    grid = GridSpec(N)
    M = 2 * N
    fine = GridSpec(M, grid.L_box)
    gfine = fine.arrays()
    gam = suite.gamma
    Gamma = lambda y: eval_symbol(suite.m1, y) ** (0.5 * gam)  # noqa: E731
    omega = suite.omega
    samples = []
    for j in j_range:
        for trial in range(trials):
            fseed, gseed = seed + 1000 * j + 2 * trial, seed + 1000 * j + 2 * trial + 1
            f = localized_field(grid, j, fseed)
            _check_annulus(f.coeffs, grid, j)
            if g_constant:
                g = SpectralField(grid, np.where(grid.arrays().nonzero, 0.0, float(N)))
            else:
                g = random_field(grid, gseed)
            fc, gc = _lift(f.coeffs, M), _lift(g.coeffs, M)
            phi_j = lp_block_weight(fine, j)
            if variant in ("localized", "nonlocal"):
                A = commutator_symbol(fine, s, suite.p, ell)
            elif variant == "gevrey":
                kl = gfine.k1 if ell == 1 else gfine.k2
                wE = np.asarray(symbol_on_grid(fine, omega, "keep")) * np.exp(
                    lam * np.asarray(symbol_on_grid(fine, suite.nu, "keep"))
                )
                A = wE * phi_j * 1j * kl
            else:
                raise ValueError(f"unknown variant {variant!r}")
            X = commutator_apply(fine, A, gc, fc)
            hc = phi_j * X
            dx2 = fine.dx**2
            lhs = abs(dx2 * float(np.sum((X * np.conj(hc)).real)))
            hnorm = fine.dx * math.sqrt(float(np.sum(np.abs(hc) ** 2)))
            fnorm = l2_norm(f)
            y = 2.0**j
            if variant == "localized":
                gnorm = weighted_norm(g, WeightedNormSpec(2.0 - s - eps, omega))
                w = eval_symbol(suite.p, y) * Gamma(y) + eval_symbol(suite.p_a, y) / eval_symbol(omega, y)
                rhs = w * 2.0 ** (eps * j) * gnorm * fnorm * hnorm
            elif variant == "nonlocal":
                delta = 0.5 * eps
                gnorm = weighted_norm(g, WeightedNormSpec(2.0 - s - delta))
                hf = SpectralField(fine, hc)
                fa = weighted_norm(SpectralField(fine, fc), _pa_spec(suite, eps))
                ha = weighted_norm(hf, _pa_spec(suite, eps))
                rhs = gnorm * (fa * hnorm + ha * fnorm)
            else:
                E = np.exp(lam * np.asarray(symbol_on_grid(fine, suite.nu, "keep")))
                Ef = fine.dx * math.sqrt(float(np.sum(np.abs(E * fc) ** 2)))
                lamg = SpectralField(fine, E * gfine.kmag * gc)
                rhs = 3.0 * (1.0 + lam) * math.exp(lam) * Gamma(y) * Ef * weighted_norm(lamg, WeightedNormSpec(1.0)) * hnorm
            samples.append(ProbeSample(int(j), trial, lhs, rhs, (fseed, gseed)))
    return samples


def _pa_spec(suite: MultiplierSuite, eps: float) -> WeightedNormSpec:
    return WeightedNormSpec(eps, suite.p_a, homogeneous=True)


def critical_field(grid: GridSpec, seed: int, s: float) -> SpectralField:
    """Random band-limited field with amplitude spectrum ``|k|^-(s+1)``, unit norm in ``dot H^s``."""
    rng = np.random.default_rng(seed)
    ga = grid.arrays()
    noise = np.fft.fft2(rng.standard_normal((grid.N, grid.N)), norm="ortho")
    c = np.zeros_like(noise)
    nz = ga.nonzero & ga.mask
    c[nz] = noise[nz] * ga.kmag[nz] ** (-(s + 1.0))
    f = SpectralField(grid, c, True)
    return f * (1.0 / weighted_norm(f, WeightedNormSpec(s, Identity(), True)))


def _blocks_physical(c: np.ndarray, grid: GridSpec) -> tuple[int, list]:
    """Physical blocks, index ``j_min - 1`` being the low part."""
    lp = lp_partition(SpectralField(grid, c))
    out = [_phys(lp.low.coeffs)] + [_phys(b.coeffs) for _, b in lp.blocks]
    return lp.j_min - 1, out


def bony_residual(f: SpectralField, g: SpectralField) -> float:
    """Relative residual of ``fg = T_f g + T_g f + R(f, g)`` computed with exact products.

    ``T_f g = sum_k S_(k-3) f Delta_k g`` with ``S_j = sum_(i < j) Delta_i``
    (the low part counts as the lowest block) and
    ``R(f, g) = sum_k Delta_k f sum_(|i-k| <= 3) Delta_i g``.
    """
    grid = f.grid
    M = 2 * grid.N
    fine = GridSpec(M, grid.L_box)
    fc, gc = _lift(f.coeffs, M), _lift(g.coeffs, M)
    j0, fb = _blocks_physical(fc, fine)
    _, gb = _blocks_physical(gc, fine)
    n = len(fb)
    cum_f = np.cumsum([np.zeros_like(fb[0])] + fb, axis=0)  # cum_f[i] = sum of blocks < i
    cum_g = np.cumsum([np.zeros_like(gb[0])] + gb, axis=0)
    Tfg = np.zeros_like(fb[0])
    Tgf = np.zeros_like(fb[0])
    R = np.zeros_like(fb[0])
    for k in range(n):
        lo = max(k - 3, 0)  # S_(k-3) = blocks with index < k - 3
        Tfg += cum_f[lo] * gb[k]
        Tgf += cum_g[lo] * fb[k]
        ext = cum_g[min(k + 4, n)] - cum_g[max(k - 3, 0)]
        R += fb[k] * ext
    prod = _phys(fc) * _phys(gc)
    return float(np.abs(Tfg + Tgf + R - prod).max() / max(np.abs(prod).max(), 1e-300))


def probe_product(
    j_range: Iterable[int] = (3, 4, 5),
    s: float = 0.5,
    sbar: float = 0.5,
    suite: MultiplierSuite | None = None,
    trials: int = 20,
    seed: int = 0,
    N: int = 128,
    zero_factor: bool = False,
) -> tuple[list, float]:
    """Ratios ``||Delta_j(fg)|| / bound`` and the worst Bony residual.

    Bound (``C = c_j = 1``, unit auxiliary weights, ``Gamma = m1^(gamma/2)``):
    ``w(2^j)^-1 2^(-(s + sbar - 1) j) Gamma(2^j) (pi(f, g) + pi(g, f) + rho(f, g))``
    where ``pi`` and ``rho`` are products of homogeneous norms
    (the first factor inhomogeneous when its order equals 1).
    """
    if suite is None:
        suite = default_suite(1.0, 1.0, 0.25)
    if not (s <= 1 and sbar <= 1 and s + sbar > 0):
        raise ValueError("need s, sbar <= 1 and s + sbar > 0")
    grid = GridSpec(N)
    M = 2 * N
    fine = GridSpec(M, grid.L_box)
    Gamma = lambda y: eval_symbol(suite.m1, y) ** (0.5 * suite.gamma)  # noqa: E731

    def pi(a, ra, b, rb):
        first = weighted_norm(a, WeightedNormSpec(ra, Identity(), ra < 1))
        return first * weighted_norm(b, WeightedNormSpec(rb, Identity(), True))

    samples, worst_bony = [], 0.0
    for trial in range(trials):
        fseed, gseed = seed + 2 * trial, seed + 2 * trial + 1
        f = critical_field(grid, fseed, s)
        g = critical_field(grid, gseed, sbar)
        if zero_factor:
            g = g * 0.0
        worst_bony = max(worst_bony, bony_residual(f, g) if not zero_factor else 0.0)
        fg = _spec(_phys(_lift(f.coeffs, M)) * _phys(_lift(g.coeffs, M)))
        norms = pi(f, s, g, sbar) + pi(g, sbar, f, s) + weighted_norm(f, WeightedNormSpec(s, Identity(), True)) * weighted_norm(
            g, WeightedNormSpec(sbar, Identity(), True)
        )
        for j in j_range:
            lhs = fine.dx * math.sqrt(float(np.sum(np.abs(lp_block_weight(fine, j) * fg) ** 2)))
            y = 2.0**j
            rhs = 2.0 ** (-(s + sbar - 1.0) * j) * Gamma(y) * norms / eval_symbol(suite.omega, y)
            samples.append(ProbeSample(int(j), trial, lhs, rhs, (fseed, gseed)))
    return samples, worst_bony


def probe_report(name: str, samples: Sequence[ProbeSample], trend_factor: float = 2.0, **params) -> ExperimentReport:
    """Report for a probe: finiteness and no growth between the two largest shells."""
    rep = ExperimentReport(name, config_digest(**params))
    mx = shell_maxima(samples)
    finite = all(math.isfinite(v) for v in mx.values())
    rep.check("max_ratio_finite", 0.0 if finite else 1.0, 0.0)
    js = sorted(mx)
    if len(js) >= 2 and mx[js[-2]] > 0:
        q = mx[js[-1]] / mx[js[-2]]
        rep.check("top_shell_ratio_change", max(q, 1.0 / q) if q > 0 else math.inf, trend_factor, "<=")
    rep.record(**{f"C_emp_j{j}": v for j, v in mx.items()}, c_j="1 (constants folded into ratios)")
    rep.artifacts["samples"] = samples_csv(samples)
    return rep


# ---------------------------------------------------------------------------
# long Euler-endpoint run


def exp_global_euler(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    gamma_p: float = 1.0,
    seed: int = 0,
    delta: float = 0.5,
    growth_cap: float = 100.0,
) -> ExperimentReport:
    """``beta = 0`` run to ``T = 5``: no blowup and ``||theta(T)||_H1 <= 100 ||theta0||_H1``.

    ``max |grad u|`` and ``||theta||_{H^(1+delta)}`` are recorded (not asserted).
    """
    if config is None:
        config = RunConfig(GridSpec(128), euler_suite(gamma_p), T=5.0, dt="auto", cadence=10)
    if config.suite.beta != 0.0:
        raise ValueError("the Euler-endpoint experiment needs beta = 0")
    if theta0 is None:
        theta0 = random_field(config.grid, seed)
    specs = (WeightedNormSpec(1.0), WeightedNormSpec(1.0 + delta))
    cfg = replace(config, norm_specs=specs, snapshot_cadence=config.cadence)
    rep = ExperimentReport("euler", config_digest(config=cfg, theta0=theta0))
    try:
        traj, ns = run(cfg, theta0)
    except Blowup as exc:
        rep.check("blowup", 1.0, 0.0)
        rep.record(last_good_time=exc.last_good_time)
        return rep
    rep.check("blowup", 0.0, 0.0)
    h1 = ns.extra["norm0"]
    rep.check("H1_growth", h1[-1] / h1[0] if h1[0] > 0 else 0.0, growth_cap)
    rows = []
    for (t, f) in traj.snapshots:
        rows.append((t, max_velocity_gradient(f, 0.0, config.suite.p), weighted_norm(f, specs[1])))
    rep.artifacts["gradu"] = _csv(("t", "max_grad_u", "h1pdelta"), rows)
    rep.artifacts["norms"] = ns.to_csv_text()
    rep.record(max_grad_u=max(r[1] for r in rows))
    return rep


# ---------------------------------------------------------------------------
# vanishing artificial viscosity


def exp_artificial_viscosity(
    config: RunConfig | None = None,
    theta0: SpectralField | None = None,
    eps_values: Sequence[float] = (1e-2, 1e-3, 1e-4),
    seed: int = 0,
    factor: float = 0.5,
) -> ExperimentReport:
    """Errors ``||theta_eps(T) - theta_0(T)||_2`` shrink by at least ``factor`` per step in ``eps``."""
    if config is None:
        config = RunConfig(GridSpec(64), default_suite(1.0, 1.0, 0.0), T=0.5, dt=5e-3)
    if config.dt == "auto":
        raise ValueError("use a fixed dt so every run shares its time grid")
    if theta0 is None:
        theta0 = random_field(config.grid, seed)
    rep = ExperimentReport("viscosity", config_digest(config=config, theta0=theta0, eps=list(eps_values)))
    ref, _ = run(replace(config, eps_visc=0.0), theta0)
    errs = []
    for e in eps_values:
        tr, _ = run(replace(config, eps_visc=e), theta0)
        errs.append(l2_norm(tr.final - ref.final))
    for i in range(1, len(errs)):
        rep.check(f"error_ratio_{i}", errs[i] / errs[i - 1] if errs[i - 1] > 0 else 0.0, factor)
    rep.artifacts["errors"] = _csv(("eps", "l2_error"), list(zip(eps_values, errs)))
    return rep


# ---------------------------------------------------------------------------
# registry used by the command line


def _commutator_report(seed: int = 0, **kw) -> ExperimentReport:
    samples = probe_commutator(seed=seed, **kw)
    return probe_report("commutator", samples, seed=seed, **kw)


def _product_report(seed: int = 0, **kw) -> ExperimentReport:
    samples, bony = probe_product(seed=seed, **kw)
    rep = probe_report("product", samples, seed=seed, **kw)
    rep.check("bony_residual", bony, 1e-11)
    return rep


def _convexity_report(seed: int = 0, trials: int = 20, N: int = 64) -> ExperimentReport:
    grid = GridSpec(N)
    rep = ExperimentReport("convexity", config_digest(seed=seed, trials=trials, N=N))
    worst = 0.0
    for phi in ("square", "fourth-power"):
        for t in range(trials):
            r = probe_convexity(random_field(grid, seed + t), phi)
            worst = min(worst, r.assertions[0].measured)
    rep.check("min_over_scale", worst, -1e-8, ">=")
    return rep


EXPERIMENTS: dict = {
    "energy": lambda seed=0: exp_energy_balance(seed=seed),
    "maxprin": lambda seed=0: exp_max_principle(),
    "convexity": lambda seed=0: _convexity_report(seed),
    "smoothing": lambda seed=0: exp_smoothing(seed=seed),
    "stability": lambda seed=0: exp_stability(seed=seed),
    "kato": lambda seed=0: exp_kato_split(seed=seed),
    "commutator": lambda seed=0: _commutator_report(seed),
    "product": lambda seed=0: _product_report(seed),
    "euler": lambda seed=0: exp_global_euler(seed=seed),
    "viscosity": lambda seed=0: exp_artificial_viscosity(seed=seed),
}
