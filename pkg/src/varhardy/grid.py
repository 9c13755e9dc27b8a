"""Uniform grid, sampled functions, dyadic cube lattices, scaled FFT convolution.

Everything downstream works on real samples over [-R, R) with 2^L points.
Convolutions are linear (zero-padded), never circular; dilation by 2^j is
exact index arithmetic for j >= 0 and trigonometric resampling for j < 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, resample

from .errors import ConfigurationError, ScaleRangeError

# Values below SUPPORT_TOL * sup|f| outside the declared support radius are
# treated as zero (FFT dust, truncated filter tails).
SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-R, R) with 2^level sample points x_i = -R + i*h."""

    half_width: float
    level: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ConfigurationError(f"half_width must be positive, got {self.half_width}")
        if not (4 <= self.level <= 24):
            raise ConfigurationError(f"level must be in [4, 24], got {self.level}")

    @property
    def size(self) -> int:
        return 1 << self.level

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.size

    def points(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.size)

    def index_of(self, x: float) -> int:
        """Nearest grid index for a point inside [-R, R)."""
        i = int(round((x + self.half_width) / self.spacing))
        return min(max(i, 0), self.size - 1)


def make_grid(half_width: float, level: int) -> Grid:
    return Grid(half_width, level)


@dataclass
class SampledFunction:
    """Real values on a grid with a declared support radius.

    Treated as immutable by convention; arithmetic returns new instances.
    """

    grid: Grid
    values: np.ndarray
    support_radius: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid size {self.grid.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.support_radius is None:
            self.support_radius = self.grid.half_width
        if self.support_radius > self.grid.half_width + 1e-15:
            raise ValueError("support_radius exceeds the grid half-width")
        self._check_support()

    def _check_support(self):
        x = self.grid.points()
        outside = np.abs(x) > self.support_radius + 0.5 * self.grid.spacing
        if np.any(outside):
            tol = SUPPORT_TOL * (1.0 + np.max(np.abs(self.values)))
            worst = np.max(np.abs(self.values[outside]))
            if worst > tol:
                raise ValueError(
                    f"values reach {worst:.3e} outside the declared support radius "
                    f"{self.support_radius}"
                )

    @classmethod
    def zeros(cls, grid: Grid) -> "SampledFunction":
        return cls(grid, np.zeros(grid.size), 0.0)

    @classmethod
    def from_callable(cls, grid: Grid, fn, support_radius=None) -> "SampledFunction":
        vals = np.asarray(fn(grid.points()), dtype=np.float64)
        return cls(grid, vals, support_radius)

    def integral(self) -> float:
        """Midpoint-rule quadrature over the domain."""
        return float(np.sum(self.values)) * self.grid.spacing

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.spacing))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values, support_radius=None) -> "SampledFunction":
        sr = self.support_radius if support_radius is None else support_radius
        return SampledFunction(self.grid, values, sr)

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self, other)
        sr = min(self.grid.half_width, max(self.support_radius, other.support_radius))
        return SampledFunction(self.grid, self.values + other.values, sr)

    def __sub__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self, other)
        sr = min(self.grid.half_width, max(self.support_radius, other.support_radius))
        return SampledFunction(self.grid, self.values - other.values, sr)

    def __mul__(self, scalar: float) -> "SampledFunction":
        return SampledFunction(self.grid, self.values * float(scalar), self.support_radius)

    __rmul__ = __mul__


def _require_same_grid(f: SampledFunction, g: SampledFunction):
    if f.grid != g.grid:
        raise ConfigurationError("operands live on different grids")


def inner(f: SampledFunction, g: SampledFunction) -> float:
    """h-weighted inner product <f, g>."""
    _require_same_grid(f, g)
    return float(np.sum(f.values * g.values)) * f.grid.spacing


def inner_mask(grid: Grid, fraction: float = 0.5) -> np.ndarray:
    """Boolean mask of the inner part of the domain, |x| <= fraction * R."""
    return np.abs(grid.points()) <= fraction * grid.half_width


@dataclass(frozen=True)
class DyadicCube:
    """Dyadic interval [k * side, (k+1) * side) at scale j with side 2^(-j-N)."""

    scale: int
    index: int
    side: float
    center: float

    @property
    def left(self) -> float:
        return self.index * self.side

    @property
    def right(self) -> float:
        return (self.index + 1) * self.side

    @property
    def measure(self) -> float:
        return self.side

    def as_interval(self) -> tuple:
        return (self.left, self.right)

    def contains_cube(self, other: "DyadicCube") -> bool:
        """Exact containment test from integer indices (other at finer scale)."""
        if other.scale < self.scale:
            return False
        return (other.index >> (other.scale - self.scale)) == self.index

    def dilate_clipped(self, factor: float, half_width: float) -> tuple:
        """Interval with the same center and `factor` times the side, clipped."""
        half = 0.5 * factor * self.side
        return (max(self.center - half, -half_width), min(self.center + half, half_width))


class CubeLattice:
    """Dyadic cubes with side 2^(-j-N) tiling [-R, R) for each scale j.

    Cube boundaries land on grid points and every cube holds an even number
    of samples, so cube centers are themselves grid points.
    """

    def __init__(self, grid: Grid, shift: int, j_min: int, j_max: int):
        if j_min > j_max:
            raise ConfigurationError(f"empty scale range [{j_min}, {j_max}]")
        if shift < 0:
            raise ConfigurationError(f"shift N must be nonnegative, got {shift}")
        if j_max + shift > grid.level - 2:
            raise ConfigurationError(
                f"finest scale too deep: j_max + N = {j_max + shift} > L - 2 = {grid.level - 2}"
            )
        self.grid = grid
        self.shift = shift
        self.j_min = j_min
        self.j_max = j_max
        for j in self.scales:
            m = self._samples_per_cube_checked(j)
            count = grid.size // m
            if count < 2:
                raise ConfigurationError(
                    f"scale {j}: fewer than two cubes would cover the domain"
                )

    def _samples_per_cube_checked(self, j: int) -> int:
        side = 2.0 ** (-j - self.shift)
        ratio = side / self.grid.spacing
        m = int(round(ratio))
        if not np.isclose(ratio, m) or m < 2 or m % 2 != 0:
            raise ConfigurationError(
                f"scale {j}: cube side {side} is not an even multiple of the grid "
                f"spacing {self.grid.spacing}; choose R a power of two and a coarser scale"
            )
        return m

    @property
    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def side(self, j: int) -> float:
        self._check_scale(j)
        return 2.0 ** (-j - self.shift)

    def samples_per_cube(self, j: int) -> int:
        self._check_scale(j)
        return self._samples_per_cube_checked(j)

    def cube_count(self, j: int) -> int:
        return self.grid.size // self.samples_per_cube(j)

    def k_min(self, j: int) -> int:
        """Integer index of the leftmost cube (left edge at -R)."""
        return -(self.cube_count(j) // 2)

    def cubes(self, j: int) -> list:
        side = self.side(j)
        k0 = self.k_min(j)
        return [
            DyadicCube(j, k0 + t, side, (k0 + t + 0.5) * side)
            for t in range(self.cube_count(j))
        ]

    def cube(self, j: int, k: int) -> DyadicCube:
        side = self.side(j)
        if not (self.k_min(j) <= k < self.k_min(j) + self.cube_count(j)):
            raise ConfigurationError(f"cube index {k} out of range at scale {j}")
        return DyadicCube(j, k, side, (k + 0.5) * side)

    def center_indices(self, j: int) -> np.ndarray:
        """Grid indices of the cube centers at scale j, in cube order."""
        m = self.samples_per_cube(j)
        return m * np.arange(self.cube_count(j)) + m // 2

    def centers(self, j: int) -> np.ndarray:
        return self.grid.points()[self.center_indices(j)]

    def cube_index_of(self, j: int, grid_index: int) -> int:
        """Cube index k of the cube containing grid point i."""
        m = self.samples_per_cube(j)
        return self.k_min(j) + grid_index // m

    def ancestor_index(self, j_from: int, k: int, j_to: int) -> int:
        """Index of the scale-j_to cube containing cube (j_from, k); j_to <= j_from."""
        if j_to > j_from:
            raise ConfigurationError("ancestor scale must be coarser")
        return k >> (j_from - j_to)

    def boundary_mask(self, j: int, width: float) -> np.ndarray:
        """Flags cubes whose center is within `width` of the domain boundary."""
        return np.abs(self.centers(j)) > self.grid.half_width - width

    def _check_scale(self, j: int):
        if not (self.j_min <= j <= self.j_max):
            raise ConfigurationError(f"scale {j} outside lattice range [{self.j_min}, {self.j_max}]")


def build_lattice(grid: Grid, shift: int, j_min: int, j_max: int) -> CubeLattice:
    return CubeLattice(grid, shift, j_min, j_max)


def _check_resolvable(grid: Grid, j: int):
    scale_len = 2.0 ** (-j)
    if scale_len < 4.0 * grid.spacing - 1e-15:
        raise ScaleRangeError(
            f"scale 2^-{j} = {scale_len} finer than 4h = {4 * grid.spacing}"
        )
    if scale_len > grid.half_width + 1e-15:
        raise ScaleRangeError(
            f"scale 2^-{j} = {scale_len} exceeds the domain half-width {grid.half_width}"
        )


def dilate(g: SampledFunction, j: int) -> SampledFunction:
    """Samples of g_j(x) = 2^j g(2^j x) on the same grid.

    For j >= 0 the needed arguments are exact grid points; for j < 0 the
    values come from trigonometric (FFT) resampling, which is exact for
    band-limited g.
    """
    _check_resolvable(g.grid, j)
    n = g.grid.size
    if j == 0:
        return g
    sr = min(g.grid.half_width, 2.0 ** (-j) * g.support_radius)
    if j > 0:
        stride = 1 << j
        i = np.arange(n)
        src = (n // 2) * (1 - stride) + stride * i
        ok = (src >= 0) & (src < n)
        vals = np.zeros(n)
        vals[ok] = g.values[src[ok]]
        return SampledFunction(g.grid, (2.0**j) * vals, sr)
    up = 1 << (-j)
    fine = resample(g.values, n * up)
    src = (n // 2) * (up - 1) + np.arange(n)
    return SampledFunction(g.grid, (2.0**j) * fine[src], sr)


def convolve_sampled(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Linear convolution h * (f conv g) aligned to the grid of f.

    Zero-pads to at least double length (no wrap-around); deterministic for
    a fixed grid.
    """
    _require_same_grid(f, g)
    n = f.grid.size
    full = fftconvolve(f.values, g.values, mode="full")
    out = f.grid.spacing * full[n // 2 : n // 2 + n]
    sr = min(f.grid.half_width, f.support_radius + g.support_radius)
    return SampledFunction(f.grid, out, sr)


def convolve_scaled(f: SampledFunction, g: SampledFunction, j: int) -> SampledFunction:
    """FFT convolution g_j * f with the dilated filter g_j(x) = 2^j g(2^j x)."""
    return convolve_sampled(f, dilate(g, j))


def convolve_with_kernel(f: SampledFunction, kernel: np.ndarray) -> SampledFunction:
    """Linear convolution with a kernel sampled on the doubled range [-2R, 2R).

    The doubled range covers every offset x_i - x_m that the output needs, so
    for f supported inside the domain this is the exact whole-line convolution
    (no truncation of the kernel at the domain edge).
    """
    n = f.grid.size
    if kernel.shape != (2 * n,):
        raise ConfigurationError("kernel must be sampled on the doubled range (2n points)")
    full = fftconvolve(f.values, kernel, mode="full")
    out = f.grid.spacing * full[n : 2 * n]
    return SampledFunction(f.grid, out, f.grid.half_width)
