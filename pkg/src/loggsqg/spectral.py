"""Periodic 2-D spectral fields, multipliers, Littlewood-Paley blocks and norms.

Conventions
-----------
* Axis 0 of every array is ``x1`` and axis 1 is ``x2`` (``indexing="ij"``).
* Coefficients are ``numpy.fft.fft2(samples, norm="ortho")``, so a constant
  field ``c`` has ``coeff(0) = c * N``.
* Norms are integrals over the torus ``[0, L)^2``:
  ``||f||_2^2 = (L/N)^2 * sum_k |coeff(k)|^2 = (L/N)^2 * sum_x |f(x)|^2``.
* Odd symbols (derivatives) vanish on the Nyquist row and column so that
  real fields stay real.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import atomic_write_bytes
from .errors import (
    EmptyBlock,
    RangeTooNarrow,
    ShapeMismatch,
    SingularAtOrigin,
    SymbolOverflow,
    ZeroModeUndefined,
)
from .symbols import Identity, PowerLaw, Symbol, eval_symbol

GEVREY_CAP = 700.0


@dataclass(frozen=True)
class GridSpec:
    """Square periodic grid with ``N`` points per side and period ``L_box``."""

    N: int
    L_box: float = 2.0 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        if not self.L_box > 0:
            raise ValueError("L_box must be positive")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def dx(self) -> float:
        return self.L_box / self.N

    @property
    def k0(self) -> float:
        """Fundamental wavenumber ``2 pi / L_box``."""
        return 2.0 * math.pi / self.L_box

    @property
    def cutoff_index(self) -> int:
        """Largest retained integer wavenumber index under the dealias rule."""
        return int(math.floor(self.dealias_fraction * self.N / 2 - 1e-12))

    def arrays(self) -> "_GridArrays":
        return _grid_arrays(self)


@dataclass(frozen=True)
class _GridArrays:
    idx1: np.ndarray
    idx2: np.ndarray
    k1: np.ndarray  # derivative wavenumbers, Nyquist zeroed
    k2: np.ndarray
    kmag: np.ndarray  # |k| including Nyquist
    mask: np.ndarray  # dealias mask
    nonzero: np.ndarray  # kmag > 0


@lru_cache(maxsize=32)
def _grid_arrays(grid: GridSpec) -> _GridArrays:
    N = grid.N
    idx = np.fft.fftfreq(N, 1.0 / N)
    i1, i2 = np.meshgrid(idx, idx, indexing="ij")
    kd = idx * grid.k0
    kd[N // 2] = 0.0
    k1, k2 = np.meshgrid(kd, kd, indexing="ij")
    kmag = grid.k0 * np.hypot(i1, i2)
    K = grid.cutoff_index
    mask = (np.abs(i1) <= K) & (np.abs(i2) <= K)
    out = _GridArrays(i1, i2, k1, k2, kmag, mask, kmag > 0)
    for a in (out.idx1, out.idx2, out.k1, out.k2, out.kmag, out.mask, out.nonzero):
        a.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field; immutable.

    ``zero_mean`` records that the field is meant to have ``coeff(0) = 0``;
    it is checked at construction.
    """

    grid: GridSpec
    coeffs: np.ndarray
    zero_mean: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.N, self.grid.N):
            raise ShapeMismatch(f"coefficients have shape {c.shape}, grid needs {(self.grid.N,) * 2}")
        if self.zero_mean and abs(c[0, 0]) > 1e-12 * max(1.0, float(np.abs(c).max())):
            raise ZeroModeUndefined("zero_mean field has a nonzero mean coefficient")
        if self.zero_mean:
            c[0, 0] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs: np.ndarray, zero_mean: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.zero_mean if zero_mean is None else zero_mean)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real) / self.grid.N

    def physical(self) -> np.ndarray:
        return transform_backward(self)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.zero_mean and other.zero_mean)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.zero_mean and other.zero_mean)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(c), self.zero_mean)

    __rmul__ = __mul__


def _same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise ShapeMismatch("fields live on different grids")


def transform_forward(samples: np.ndarray, grid: GridSpec, zero_mean: bool = False) -> SpectralField:
    """Physical samples ``(N, N)`` to a :class:`SpectralField` (unitary FFT)."""
    a = np.asarray(samples)
    if a.shape != (grid.N, grid.N):
        raise ShapeMismatch(f"samples have shape {a.shape}, grid needs {(grid.N,) * 2}")
    if np.iscomplexobj(a):
        raise ShapeMismatch("physical samples must be real")
    return SpectralField(grid, np.fft.fft2(a.astype(float), norm="ortho"), zero_mean)


def transform_backward(f: SpectralField) -> np.ndarray:
    """Real physical samples of ``f``."""
    return np.fft.ifft2(f.coeffs, norm="ortho").real


def hermitian_defect(coeffs: np.ndarray) -> float:
    """``max |c(-k) - conj c(k)|``; zero for coefficients of a real field."""
    flipped = np.roll(np.flip(coeffs, axis=(0, 1)), 1, axis=(0, 1))
    return float(np.abs(flipped - np.conj(coeffs)).max())


def symbol_on_grid(grid: GridSpec, sym: Symbol, zero_mode_rule: str = "error") -> np.ndarray:
    """Values ``sym(|k|)`` on the grid; ``zero_mode_rule`` handles a singular origin.

    ``"zero"`` puts 0 at ``k = 0``, ``"keep"`` puts 1 there (the mean is left
    untouched) and ``"error"`` raises :class:`SingularAtOrigin`.
    """
    return _symbol_on_grid(grid, sym, zero_mode_rule)


@lru_cache(maxsize=256)
def _symbol_on_grid(grid: GridSpec, sym: Symbol, zero_mode_rule: str) -> np.ndarray:
    if zero_mode_rule not in ("zero", "keep", "error"):
        raise ValueError(f"unknown zero_mode_rule {zero_mode_rule!r}")
    ga = grid.arrays()
    if sym.singular_at_origin:
        if zero_mode_rule == "error":
            raise SingularAtOrigin(f"{sym} is undefined at k = 0")
        out = np.empty_like(ga.kmag)
        out[ga.nonzero] = eval_symbol(sym, ga.kmag[ga.nonzero])
        out[0, 0] = 0.0 if zero_mode_rule == "zero" else 1.0
    else:
        out = np.asarray(eval_symbol(sym, ga.kmag), dtype=float)
        if zero_mode_rule == "zero":
            out = out.copy()
            out[0, 0] = 0.0
    out.setflags(write=False)
    return out


def apply_multiplier(f: SpectralField, sym: Symbol, zero_mode_rule: str = "error") -> SpectralField:
    """Multiply every coefficient by ``sym(|k|)``."""
    return f.with_coeffs(f.coeffs * symbol_on_grid(f.grid, sym, zero_mode_rule))


def gradient(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    ga = f.grid.arrays()
    return (f.with_coeffs(1j * ga.k1 * f.coeffs, True), f.with_coeffs(1j * ga.k2 * f.coeffs, True))


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs * f.grid.arrays().mask)


# ---------------------------------------------------------------------------
# Littlewood-Paley partition

_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def _bump_integrand(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def _B_unnormalized(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    nodes = 0.5 * t[..., None] * (_GL_X + 1.0)
    return 0.5 * t * (_bump_integrand(nodes) @ _GL_W)


_B_ONE = float(_B_unnormalized(np.array(1.0)))


def lp_cutoff(r) -> np.ndarray:
    """Smooth cutoff: 1 on ``[0, 1/2]``, 0 on ``[1, oo)``, ``B(2 (1 - r))`` in between."""
    r = np.asarray(r, dtype=float)
    t = np.clip(2.0 * (1.0 - r), 0.0, 1.0)
    # the integrand is symmetric about 1/2, so B(t) = 1 - B(1 - t); using the
    # shorter interval keeps the cutoff within [0, 1] to the last bit
    low = _B_unnormalized(np.minimum(t, 1.0 - t)) / _B_ONE
    return np.where(t <= 0.5, low, 1.0 - low)


def lp_bump(r) -> np.ndarray:
    """Annular bump ``phi(r) = zeta(r/2) - zeta(r)``, supported in ``(1/2, 2)``."""
    r = np.asarray(r, dtype=float)
    return lp_cutoff(0.5 * r) - lp_cutoff(r)


@dataclass(frozen=True)
class LPBlocks:
    j_min: int
    j_max: int
    low: SpectralField
    blocks: tuple  # of (j, SpectralField)

    def reconstruct(self) -> SpectralField:
        total = self.low.coeffs.copy()
        for _, b in self.blocks:
            total = total + b.coeffs
        return self.low.with_coeffs(total)

    def block(self, j: int) -> SpectralField:
        for jj, b in self.blocks:
            if jj == j:
                return b
        raise KeyError(j)


def default_j_range(grid: GridSpec) -> tuple[int, int]:
    """``j_min`` leaves only ``k = 0`` in the low part; ``j_max`` covers the grid corner."""
    j_min = int(math.floor(math.log2(grid.k0)))
    kmax = grid.k0 * math.hypot(grid.N / 2, grid.N / 2)
    j_max = int(math.ceil(math.log2(kmax)))
    return j_min, j_max


@lru_cache(maxsize=64)
def _lp_weights(grid: GridSpec, j_min: int, j_max: int):
    kmag = grid.arrays().kmag
    low = lp_cutoff(kmag / 2.0**j_min)
    blocks = []
    for j in range(j_min, j_max + 1):
        w = lp_cutoff(kmag / 2.0 ** (j + 1)) - lp_cutoff(kmag / 2.0**j)
        w.setflags(write=False)
        blocks.append((j, w))
    low.setflags(write=False)
    return low, tuple(blocks)


def lp_block_weight(grid: GridSpec, j: int) -> np.ndarray:
    """Values of ``phi(|k| / 2^j)`` on the grid."""
    kmag = grid.arrays().kmag
    return lp_cutoff(kmag / 2.0 ** (j + 1)) - lp_cutoff(kmag / 2.0**j)


def lp_partition(f: SpectralField, j_min: int | None = None, j_max: int | None = None) -> LPBlocks:
    """Split ``f`` into ``S_{j_min} f`` and blocks ``Delta_j f``, ``j_min <= j <= j_max``.

    Block ``j`` uses ``phi(|k|/2^j)`` and is supported in ``2^(j-1) < |k| < 2^(j+1)``;
    the weights telescope, so the pieces sum back to ``f``.
    """
    d_min, d_max = default_j_range(f.grid)
    j_min = d_min if j_min is None else int(j_min)
    j_max = d_max if j_max is None else int(j_max)
    if j_max < j_min:
        raise RangeTooNarrow("j_max < j_min")
    kmax = float(f.grid.arrays().kmag.max())
    if 2.0**j_max < kmax:
        raise RangeTooNarrow(f"2^j_max = {2.0**j_max:g} does not cover max |k| = {kmax:g}")
    low_w, block_w = _lp_weights(f.grid, j_min, j_max)
    low = f.with_coeffs(f.coeffs * low_w, zero_mean=False)
    blocks = tuple((j, f.with_coeffs(f.coeffs * w, zero_mean=False)) for j, w in block_w)
    return LPBlocks(j_min, j_max, low, blocks)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class WeightedNormSpec:
    """``|| |k|^sigma w(|k|) e^(lam nu(|k|)) f_hat ||`` (homogeneous) or with ``(1+|k|^2)^(sigma/2)``."""

    sigma: float = 0.0
    omega: Symbol = field(default_factory=Identity)
    homogeneous: bool = False
    gevrey: tuple | None = None  # (lam, nu)


def l2_norm(f: SpectralField) -> float:
    return f.grid.dx * float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def lp_norm(f: SpectralField | np.ndarray, p: float, grid: GridSpec | None = None) -> float:
    """``L^p`` norm over the torus from physical samples (``p = inf`` is the grid max)."""
    if isinstance(f, SpectralField):
        grid, x = f.grid, transform_backward(f)
    else:
        x = np.asarray(f)
    if math.isinf(p):
        return float(np.abs(x).max())
    return float((np.sum(np.abs(x) ** p) * grid.dx**2) ** (1.0 / p))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real ``L^2`` inner product over the torus."""
    _same_grid(f, g)
    return f.grid.dx**2 * float(np.sum((f.coeffs * np.conj(g.coeffs)).real))


def norm_weights(grid: GridSpec, spec: WeightedNormSpec) -> tuple[np.ndarray, bool]:
    """Per-mode weight array and whether the Gevrey exponent hit the cap."""
    ga = grid.arrays()
    if spec.homogeneous:
        base = np.zeros_like(ga.kmag)
        nz = ga.nonzero
        base[nz] = ga.kmag[nz] ** spec.sigma
        om = np.zeros_like(ga.kmag)
        om[nz] = eval_symbol(spec.omega, ga.kmag[nz])
    else:
        base = (1.0 + ga.kmag**2) ** (0.5 * spec.sigma)
        om = symbol_on_grid(grid, spec.omega, "keep")
    w = base * om
    saturated = False
    if spec.gevrey is not None:
        lam, nu = spec.gevrey
        if lam < 0:
            raise ValueError("Gevrey rate must be nonnegative")
        if lam > 0:
            expo = lam * np.asarray(symbol_on_grid(grid, nu, "keep"))
            saturated = bool(np.any(expo > GEVREY_CAP))
            w = w * np.exp(np.minimum(expo, GEVREY_CAP))
    return w, saturated


def weighted_norm_checked(f: SpectralField, spec: WeightedNormSpec) -> tuple[float, bool]:
    """Like :func:`weighted_norm` but also returns the saturation flag."""
    if spec.homogeneous and spec.sigma < 0 and abs(f.coeffs[0, 0]) > 0:
        raise ZeroModeUndefined("homogeneous negative-order norm of a field with nonzero mean")
    w, sat = norm_weights(f.grid, spec)
    a = w * np.abs(f.coeffs)
    scale = float(a.max()) if a.size else 0.0
    if scale == 0.0:
        return 0.0, sat
    if not math.isfinite(scale):
        raise SymbolOverflow("weighted coefficients are not finite")
    # scaled sum of squares so weights near the Gevrey cap do not overflow
    val = f.grid.dx * scale * float(np.sqrt(np.sum((a / scale) ** 2)))
    if not math.isfinite(val):
        raise SymbolOverflow("weighted norm exceeds the floating-point range")
    return val, sat


def weighted_norm(f: SpectralField, spec: WeightedNormSpec) -> float:
    """Weighted Sobolev / Gevrey norm of ``f`` (see :class:`WeightedNormSpec`)."""
    return weighted_norm_checked(f, spec)[0]


def besov_norm(blocks: LPBlocks, sigma: float, omega: Symbol = Identity()) -> float:
    """``(sum_j 2^(2 sigma j) ||w(D) Delta_j f||_2^2)^(1/2)``; the low part is excluded."""
    total = 0.0
    for j, b in blocks.blocks:
        wb = apply_multiplier(b, omega, "zero") if omega.singular_at_origin else apply_multiplier(b, omega)
        total += 4.0 ** (sigma * j) * l2_norm(wb) ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class BernsteinSample:
    ratio: float
    lower: float
    upper: float


def bernstein_probe(block: tuple[int, SpectralField], sigma: float) -> BernsteinSample:
    """``||Lambda^sigma Delta_j f|| / (2^(sigma j) ||Delta_j f||)`` with the per-mode range."""
    j, f = block
    ga = f.grid.arrays()
    support = np.abs(f.coeffs) > 0
    if not support.any():
        raise EmptyBlock(f"block {j} is empty")
    if np.any(support & ~ga.nonzero):
        raise ZeroModeUndefined("block contains the zero mode")
    lam = apply_multiplier(f, PowerLaw(sigma), "zero")
    ratio = l2_norm(lam) / (2.0 ** (sigma * j) * l2_norm(f))
    per_mode = (ga.kmag[support] / 2.0**j) ** sigma
    return BernsteinSample(ratio, float(per_mode.min()), float(per_mode.max()))


# ---------------------------------------------------------------------------
# generators and snapshot files


def random_field(
    grid: GridSpec,
    seed: int,
    slope: float = 3.0,
    amplitude: float = 1.0,
    band_limited: bool = True,
) -> SpectralField:
    """Seeded zero-mean random field with spectrum ``~ (1 + |k|)^-slope``.

    Coefficients are Gaussian and Hermitian-symmetric (they come from real
    white noise); ``amplitude`` is the resulting ``L^2`` norm.
    """
    rng = np.random.default_rng(seed)
    noise = np.fft.fft2(rng.standard_normal((grid.N, grid.N)), norm="ortho")
    ga = grid.arrays()
    c = noise * (1.0 + ga.kmag) ** (-slope)
    if band_limited:
        c = c * ga.mask
    c[0, 0] = 0.0
    f = SpectralField(grid, c, zero_mean=True)
    n = l2_norm(f)
    return f * (amplitude / n) if n > 0 else f


def named_field(grid: GridSpec, name: str) -> SpectralField:
    """Analytic initial data: ``sin1`` = sin x1, ``sinsin`` = sin x1 sin x2, ``cos2`` = cos(x1 + 2 x2)."""
    x = np.arange(grid.N) * grid.dx * grid.k0
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    table = {
        "sin1": lambda: np.sin(x1),
        "sinsin": lambda: np.sin(x1) * np.sin(x2),
        "cos2": lambda: np.cos(x1 + 2.0 * x2),
        "zero": lambda: np.zeros_like(x1),
    }
    if name not in table:
        raise ValueError(f"unknown named field {name!r}; choose from {sorted(table)}")
    return transform_forward(table[name](), grid, zero_mean=True)


_MAGIC = b"GSQG"
_HEADER = struct.Struct("<4sIId")


def encode_snapshot(f: SpectralField) -> bytes:
    x = transform_backward(f)
    return _HEADER.pack(_MAGIC, 1, f.grid.N, f.grid.L_box) + x.astype("<f8").tobytes(order="C")


def write_snapshot(path: str | Path, f: SpectralField) -> None:
    """Write the little-endian snapshot format (atomically)."""
    atomic_write_bytes(path, encode_snapshot(f))


def read_snapshot(path: str | Path, dealias_fraction: float = 2.0 / 3.0, zero_mean: bool = False) -> SpectralField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ShapeMismatch("snapshot file is truncated")
    magic, version, N, L = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ShapeMismatch(f"not a version-1 snapshot (magic={magic!r}, version={version})")
    body = data[_HEADER.size:]
    if len(body) != 8 * N * N:
        raise ShapeMismatch(f"snapshot body has {len(body)} bytes, expected {8 * N * N}")
    x = np.frombuffer(body, dtype="<f8").reshape(N, N)
    return transform_forward(x, GridSpec(N, L, dealias_fraction), zero_mean=zero_mean)


def pad_coeffs(c: np.ndarray, M: int) -> np.ndarray:
    """Embed ``N x N`` coefficients in an ``M x M`` array (``M >= N``), preserving ``|k|``.

    The Nyquist row/column is split evenly between ``+N/2`` and ``-N/2`` so
    the padded field stays real.  With ``norm="ortho"`` the physical values
    are rescaled by ``M / N`` to represent the same function.
    """
    N = c.shape[0]
    if M < N:
        raise ValueError("padding target must not be smaller")
    out = np.zeros((M, M), dtype=complex)
    h = N // 2
    src = np.r_[0:h, N - h:N]
    dst = np.r_[0:h, M - h:M]
    out[np.ix_(dst, dst)] = c[np.ix_(src, src)]
    if M > N:
        # split the Nyquist lines symmetrically
        for axis in (0, 1):
            sl_neg = [slice(None)] * 2
            sl_pos = [slice(None)] * 2
            sl_neg[axis] = M - h
            sl_pos[axis] = h
            out[tuple(sl_neg)] *= 0.5
            out[tuple(sl_pos)] += out[tuple(sl_neg)]
    return out * (M / N)


def truncate_coeffs(c: np.ndarray, N: int) -> np.ndarray:
    """Inverse of :func:`pad_coeffs` for band-limited content below the Nyquist of ``N``."""
    M = c.shape[0]
    h = N // 2
    src = np.r_[0:h, M - h:M]
    dst = np.r_[0:h, N - h:N]
    out = np.zeros((N, N), dtype=complex)
    out[np.ix_(dst, dst)] = c[np.ix_(src, src)]
    return out * (N / M)
