"""Pseudo-spectral time integration of the linear conservation law

    d/dt theta + Div F_q(theta) = -m(D) theta - eps |k|^2 theta + G,

with flux ``F_q(theta) = (grad^perp a(D) q) theta`` for ``beta <= 1`` and an
extra ``a(D)((grad^perp theta) q)`` for ``beta > 1``, ``a = |k|^(beta-2) p``.
Choosing ``q = -theta`` gives the dissipative gSQG equation.

The linear part is diagonal and treated exactly by an integrating factor;
the flux uses 2/3-rule dealiased products (inputs and output masked).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import Blowup, CFLViolation, ZeroModeUndefined
from .multipliers import MultiplierSuite
from .spectral import (
    GridSpec,
    SpectralField,
    WeightedNormSpec,
    norm_weights,
    symbol_on_grid,
    transform_backward,
)
from .symbols import Symbol

_fft = np.fft.fft2
_ifft = np.fft.ifft2


def _ifft_real(c):
    return _ifft(c, norm="ortho").real


def _fft_o(x):
    return _fft(x, norm="ortho")


@dataclass(frozen=True, eq=False)
class FluxContext:
    """Precomputed arrays for the flux of one (grid, beta, p) combination.

    Full-grid arrays serve velocities and divergences; the ``*_h`` arrays are
    their restriction to the half spectrum used by the real FFTs.
    """

    grid: GridSpec
    beta: float
    k1: np.ndarray
    k2: np.ndarray
    a: np.ndarray  # |k|^(beta-2) p(|k|), zero at k = 0
    mask: np.ndarray
    two_term: bool
    k1_h: np.ndarray
    k2_h: np.ndarray
    a_h: np.ndarray
    mask_h: np.ndarray
    neg_rows: np.ndarray


@lru_cache(maxsize=32)
def flux_context(grid: GridSpec, beta: float, p: Symbol) -> FluxContext:
    ga = grid.arrays()
    a = np.zeros_like(ga.kmag)
    nz = ga.nonzero
    a[nz] = ga.kmag[nz] ** (beta - 2.0) * np.asarray(symbol_on_grid(grid, p, "zero"))[nz]
    a.setflags(write=False)
    h = grid.N // 2 + 1
    mask = ga.mask.astype(float)
    half = [np.ascontiguousarray(x[:, :h]) for x in (ga.k1, ga.k2, a, mask)]
    neg_rows = (-np.arange(grid.N)) % grid.N
    return FluxContext(grid, float(beta), ga.k1, ga.k2, a, mask, beta > 1.0, *half, neg_rows)


def _to_full(half: np.ndarray, ctx: FluxContext) -> np.ndarray:
    """Rebuild the full Hermitian coefficient array from its half spectrum."""
    N = ctx.grid.N
    h = N // 2
    full = np.empty((N, N), dtype=complex)
    full[:, : h + 1] = half
    full[:, h + 1:] = np.conj(half[ctx.neg_rows][:, h - 1:0:-1])
    return full


def velocity_coeffs(qc: np.ndarray, ctx: FluxContext) -> tuple[np.ndarray, np.ndarray]:
    """``v(q) = -grad^perp a(D) q`` in Fourier space: ``(i k2 a q, -i k1 a q)``."""
    aq = ctx.a * qc
    return 1j * ctx.k2 * aq, -1j * ctx.k1 * aq


def flux_divergence_coeffs(qc: np.ndarray, thc: np.ndarray, ctx: FluxContext) -> np.ndarray:
    """Fourier coefficients of ``Div F_q(theta)`` with dealiased products.

    Inputs are masked before the physical-space products and the products
    are masked afterwards; because the retained band satisfies ``3K < N``
    every retained mode of each product is exact.
    """
    N = ctx.grid.N
    h = N // 2 + 1
    shape = (N, N)
    mask, k1, k2 = ctx.mask_h, ctx.k1_h, ctx.k2_h
    qm = qc[:, :h] * mask
    tm = thc[:, :h] * mask
    aq = ctx.a_h * qm
    th = np.fft.irfft2(tm, s=shape, norm="ortho")
    f1 = np.fft.rfft2(np.fft.irfft2(-1j * k2 * aq, s=shape, norm="ortho") * th, norm="ortho")
    f2 = np.fft.rfft2(np.fft.irfft2(1j * k1 * aq, s=shape, norm="ortho") * th, norm="ortho")
    div = (1j * k1 * f1 + 1j * k2 * f2) * mask
    if ctx.two_term:
        qx = np.fft.irfft2(qm, s=shape, norm="ortho")
        h1 = np.fft.rfft2(np.fft.irfft2(-1j * k2 * tm, s=shape, norm="ortho") * qx, norm="ortho")
        h2 = np.fft.rfft2(np.fft.irfft2(1j * k1 * tm, s=shape, norm="ortho") * qx, norm="ortho")
        div = div + ctx.a_h * (1j * k1 * h1 + 1j * k2 * h2) * mask
    return _to_full(div, ctx)


def _require_zero_mean(f: SpectralField, what: str):
    if abs(f.coeffs[0, 0]) > 1e-12 * max(1.0, float(np.abs(f.coeffs).max())):
        raise ZeroModeUndefined(f"{what} must have zero mean")


def compute_velocity(q: SpectralField, beta: float, p: Symbol) -> tuple[SpectralField, SpectralField]:
    """Velocity ``v(q) = -grad^perp Lambda^(beta-2) p(D) q``; divergence-free."""
    _require_zero_mean(q, "q")
    u1, u2 = velocity_coeffs(q.coeffs, flux_context(q.grid, float(beta), p))
    return SpectralField(q.grid, u1, True), SpectralField(q.grid, u2, True)


def flux_divergence(q: SpectralField, theta: SpectralField, beta: float, p: Symbol) -> SpectralField:
    """``Div F_q(theta)`` as a field (2/3-rule dealiased)."""
    _require_zero_mean(q, "q")
    _require_zero_mean(theta, "theta")
    ctx = flux_context(theta.grid, float(beta), p)
    return SpectralField(theta.grid, flux_divergence_coeffs(q.coeffs, theta.coeffs, ctx), True)


def linear_symbol(grid: GridSpec, m: Symbol, eps_visc: float = 0.0) -> np.ndarray:
    """Per-mode linear rate ``m(|k|) + eps |k|^2``."""
    return np.asarray(symbol_on_grid(grid, m, "keep")) + eps_visc * grid.arrays().kmag ** 2


def linear_propagator(grid: GridSpec, suite: MultiplierSuite, eps_visc: float, dt: float) -> np.ndarray:
    """Exact per-mode factor ``exp(-dt (m(|k|) + eps |k|^2))``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return np.exp(-dt * linear_symbol(grid, suite.m, eps_visc))


# ---------------------------------------------------------------------------
# integrating-factor Runge-Kutta


def if_step(
    u: np.ndarray,
    t: float,
    dt: float,
    rate: np.ndarray,
    nonlinear: Callable[[float, np.ndarray], np.ndarray],
    scheme: str = "IFRK4",
    factors: tuple | None = None,
) -> np.ndarray:
    """One integrating-factor step for ``u' = -rate * u + nonlinear(t, u)``.

    ``rate`` broadcasts against ``u`` (stacked systems may share one rate).
    IFRK4 is classical RK4 on ``e^(rate t) u`` written without ever forming
    ``e^(+rate dt)``.
    """
    if factors is None:
        E, E2 = np.exp(-rate * dt), np.exp(-rate * 0.5 * dt)
    else:
        E, E2 = factors
    if scheme == "IFEuler":
        return E * (u + dt * nonlinear(t, u))
    if scheme != "IFRK4":
        raise ValueError(f"unknown scheme {scheme!r}")
    h = 0.5 * dt
    k1 = nonlinear(t, u)
    k2 = nonlinear(t + h, E2 * (u + h * k1))
    k3 = nonlinear(t + h, E2 * u + h * k2)
    k4 = nonlinear(t + dt, E * u + dt * (E2 * k3))
    return E * u + (dt / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)


FieldSource = Callable[[float], "np.ndarray | SpectralField"]


def _coeffs_of(x) -> np.ndarray:
    return x.coeffs if isinstance(x, SpectralField) else np.asarray(x)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one simulation.

    ``dt`` is a positive float or ``"auto"``.  A fixed ``dt`` is shrunk to
    ``T / ceil(T / dt)`` so the run ends exactly at ``T``.  ``cadence`` is
    the number of steps between norm records; ``snapshot_cadence`` the
    number between stored snapshots (0 keeps the initial and final state).
    """

    grid: GridSpec
    suite: MultiplierSuite
    T: float
    dt: float | str = "auto"
    scheme: str = "IFRK4"
    eps_visc: float = 0.0
    q_mode: str = "self"
    q_source: FieldSource | SpectralField | None = None
    forcing: FieldSource | None = None
    lambda_track: float = 0.0
    norm_specs: tuple = ()
    cadence: int = 1
    snapshot_cadence: int = 0

    def __post_init__(self):
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be positive or 'auto', got {self.dt!r}")
        if self.scheme not in ("IFRK4", "IFEuler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.eps_visc < 0 or self.lambda_track < 0:
            raise ValueError("eps_visc and lambda_track must be nonnegative")
        if self.q_mode not in ("self", "prescribed"):
            raise ValueError(f"q_mode must be 'self' or 'prescribed', got {self.q_mode!r}")
        if self.q_mode == "prescribed" and self.q_source is None:
            raise ValueError("q_mode='prescribed' needs q_source")
        if int(self.cadence) < 1:
            raise ValueError("cadence must be at least 1")


@dataclass
class Trajectory:
    snapshots: list  # of (t, SpectralField)

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1][1]

    @property
    def final_time(self) -> float:
        return self.snapshots[-1][0]


CSV_COLUMNS = ("t", "l2", "linf", "sob", "diss", "gevrey", "saturated")


@dataclass
class NormSeries:
    """Tracked norms at the output cadence.

    ``sob`` is ``||theta||`` in the homogeneous weighted space of order
    ``1 + beta``, ``diss`` the same norm of ``m(D)^(1/2) theta``, ``gevrey``
    the same norm with the extra weight ``exp(lambda_track t nu(|k|))``.
    ``extra`` holds additional columns (``l2_diss`` is ``||m^(1/2) theta||_2``
    and one column per entry of ``RunConfig.norm_specs``).
    """

    t: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    sob: list = field(default_factory=list)
    diss: list = field(default_factory=list)
    gevrey: list = field(default_factory=list)
    saturated: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def as_arrays(self) -> dict:
        out = {c: np.asarray(getattr(self, c)) for c in CSV_COLUMNS}
        out.update({k: np.asarray(v) for k, v in self.extra.items()})
        return out

    def to_csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in zip(*(getattr(self, c) for c in CSV_COLUMNS)):
            *nums, sat = row
            lines.append(",".join(repr(float(x)) for x in nums) + ("," + ("true" if sat else "false")))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "NormSeries":
        rows = [ln.split(",") for ln in text.strip().splitlines()]
        if tuple(rows[0]) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {rows[0]}")
        s = cls()
        for r in rows[1:]:
            for c, v in zip(CSV_COLUMNS[:-1], r[:-1]):
                getattr(s, c).append(float(v))
            s.saturated.append(r[-1] == "true")
        return s


class _Tracker:
    """Evaluates the tracked norms of a coefficient array."""

    def __init__(self, config: RunConfig):
        g, s = config.grid, config.suite
        self.grid = g
        self.config = config
        self.sob_spec = WeightedNormSpec(1.0 + s.beta, s.omega, homogeneous=True)
        self.w_sob, _ = norm_weights(g, self.sob_spec)
        self.sqrt_m = np.sqrt(np.asarray(symbol_on_grid(g, s.m, "keep")))
        self.nu = s.nu
        self.extra_specs = list(config.norm_specs)
        self.extra_weights = [norm_weights(g, sp) for sp in self.extra_specs]

    def _wnorm(self, w, c):
        return self.grid.dx * float(np.sqrt(np.sum((w * np.abs(c)) ** 2)))

    def record(self, series: NormSeries, t: float, c: np.ndarray) -> bool:
        x = transform_backward(SpectralField(self.grid, c))
        series.t.append(float(t))
        series.l2.append(self.grid.dx * float(np.sqrt(np.sum(np.abs(c) ** 2))))
        series.linf.append(float(np.abs(x).max()))
        series.sob.append(self._wnorm(self.w_sob, c))
        series.diss.append(self._wnorm(self.w_sob * self.sqrt_m, c))
        lam = self.config.lambda_track * t
        gspec = WeightedNormSpec(self.sob_spec.sigma, self.sob_spec.omega, True, (lam, self.nu))
        wg, sat = norm_weights(self.grid, gspec)
        series.gevrey.append(self._wnorm(wg, c))
        series.saturated.append(bool(sat))
        series.extra.setdefault("l2_diss", []).append(self._wnorm(self.sqrt_m, c))
        for i, (w, _) in enumerate(self.extra_weights):
            series.extra.setdefault(f"norm{i}", []).append(self._wnorm(w, c))
        vals = (series.l2[-1], series.linf[-1], series.sob[-1], series.diss[-1], series.gevrey[-1])
        return all(math.isfinite(v) for v in vals)


def auto_dt(config: RunConfig, theta0: SpectralField) -> float:
    """``min(0.5 dx / max|u(0)|, T / 100)``."""
    ctx = flux_context(config.grid, config.suite.beta, config.suite.p)
    q0 = -theta0.coeffs if config.q_mode == "self" else _coeffs_of(_q_at(config, 0.0))
    u1, u2 = velocity_coeffs(q0 * ctx.mask, ctx)
    umax = float(np.sqrt(_ifft_real(u1) ** 2 + _ifft_real(u2) ** 2).max())
    if not math.isfinite(umax):
        raise CFLViolation(f"initial velocity is not finite: max|u| = {umax!r}")
    cap = config.T / 100.0 if config.T > 0 else math.inf
    dt = min(0.5 * config.grid.dx / umax, cap) if umax > 0 else cap
    if not (math.isfinite(dt) and dt > 0):
        raise CFLViolation(f"cannot choose a time step: max|u| = {umax!r}, T = {config.T!r}")
    return dt


def _q_at(config: RunConfig, t: float):
    src = config.q_source
    return src if isinstance(src, SpectralField) else src(t)


def make_nonlinear(config: RunConfig) -> Callable[[float, np.ndarray], np.ndarray]:
    """The right-hand side ``-Div F_q(theta) + G(t)`` on coefficient arrays."""
    ctx = flux_context(config.grid, config.suite.beta, config.suite.p)
    forcing = config.forcing
    if config.q_mode == "self":
        def rhs(t, c):
            out = -flux_divergence_coeffs(-c, c, ctx)
            if forcing is not None:
                out = out + _coeffs_of(forcing(t))
            return out
    else:
        def rhs(t, c):
            out = -flux_divergence_coeffs(_coeffs_of(_q_at(config, t)), c, ctx)
            if forcing is not None:
                out = out + _coeffs_of(forcing(t))
            return out
    return rhs


def step(state: SpectralField, t: float, dt: float, config: RunConfig) -> SpectralField:
    """Advance ``state`` from ``t`` to ``t + dt``."""
    rate = linear_symbol(config.grid, config.suite.m, config.eps_visc)
    c = if_step(state.coeffs, t, dt, rate, make_nonlinear(config), config.scheme)
    return state.with_coeffs(c)


def run(config: RunConfig, theta0: SpectralField) -> tuple[Trajectory, NormSeries]:
    """Integrate from ``theta0`` to ``config.T``.

    Raises
    ------
    Blowup
        when a tracked norm stops being finite; the partial series and
        trajectory are attached as ``exc.series`` and ``exc.trajectory``.
    """
    if theta0.grid != config.grid:
        raise ValueError("initial field lives on a different grid")
    _require_zero_mean(theta0, "theta0")
    if config.T == 0:
        dt = 0.0
    else:
        dt = auto_dt(config, theta0) if config.dt == "auto" else float(config.dt)
    nsteps = 0 if config.T == 0 else int(math.ceil(config.T / dt - 1e-9))
    dt = config.T / nsteps if nsteps else 0.0
    rate = linear_symbol(config.grid, config.suite.m, config.eps_visc)
    factors = (np.exp(-rate * dt), np.exp(-rate * 0.5 * dt))
    rhs = make_nonlinear(config)
    tracker = _Tracker(config)
    series = NormSeries()
    traj = Trajectory([(0.0, theta0)])
    c = theta0.coeffs.copy()
    tracker.record(series, 0.0, c)
    last_good = 0.0
    for n in range(1, nsteps + 1):
        t_old = (n - 1) * dt
        c = if_step(c, t_old, dt, rate, rhs, config.scheme, factors)
        t = n * dt if n < nsteps else config.T
        if n % config.cadence == 0 or n == nsteps:
            ok = tracker.record(series, t, c)
            if not ok:
                exc = Blowup(f"non-finite norm at t = {t:.6g}", last_good)
                exc.series, exc.trajectory = series, traj
                raise exc
            last_good = t
        elif not np.all(np.isfinite(c)):
            exc = Blowup(f"non-finite state at t = {t:.6g}", last_good)
            exc.series, exc.trajectory = series, traj
            raise exc
        if config.snapshot_cadence and n % config.snapshot_cadence == 0 and n != nsteps:
            traj.snapshots.append((t, SpectralField(config.grid, c, True)))
    if nsteps:
        c[0, 0] = 0.0
        traj.snapshots.append((config.T, SpectralField(config.grid, c, True)))
    return traj, series


def linear_solution(theta0: SpectralField, suite: MultiplierSuite, t: float, eps_visc: float = 0.0) -> SpectralField:
    """Closed form ``exp(-t (m + eps |k|^2)) theta0_hat`` of the flux-free problem."""
    return theta0.with_coeffs(np.exp(-t * linear_symbol(theta0.grid, suite.m, eps_visc)) * theta0.coeffs)


def max_velocity_gradient(theta: SpectralField, beta: float, p: Symbol) -> float:
    """``max_x |grad u|`` (Frobenius) of the gSQG velocity of ``theta``."""
    ctx = flux_context(theta.grid, float(beta), p)
    u1, u2 = velocity_coeffs(theta.coeffs, ctx)
    comps = [_ifft_real(1j * k * u) for u in (u1, u2) for k in (ctx.k1, ctx.k2)]
    return float(np.sqrt(sum(c**2 for c in comps)).max())
