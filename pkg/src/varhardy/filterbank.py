"""Construction and validation of the filter triple (psi, phi, tilde).

psi is a band-pass filter whose frequency profile is supported in the
annulus 1/2 <= |xi| <= 2 and satisfies sum_j psi_hat(2^-j xi)^2 = 1 exactly
for every xi != 0: the profile is built from complementary sin/cos halves
of a smooth step on the log-frequency scale, so the two scales covering any
octave contribute sin^2 + cos^2 of the same argument.  phi is a low-pass
filter with phi_hat(0) = 1, making its grid quadrature integral exactly 1.
tilde defaults to psi.

Exact frequency-side identities are incompatible with compact spatial
support, so the filters decay rapidly instead.  On a finite domain that
decay alone cannot push the quadrature moments of psi below the required
tolerance; the builder therefore tunes the smooth step with a few small
interior bumps (a min-norm Gauss-Newton solve) until the discrete moments
vanish to round-off.  The tuning moves freely inside the family of valid
profiles: the partition identity and annulus support are untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, FilterConstructionError
from .grid import CubeLattice, Grid, SampledFunction, build_lattice

PARTITION_TOL = 1e-10
ANNULUS_FLOOR = 1e-12
MOMENT_TOL = 1e-8
TRUNCATION_FLOOR = 1e-12

_BUMP_CENTERS = (0.2, 0.35, 0.5, 0.65, 0.8)
_BUMP_WIDTH = 0.18


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, exp-flat at both ends."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
        out = a / (a + b)
    return np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, out))


def _interior_bump(u, center, width=_BUMP_WIDTH):
    u = np.asarray(u, dtype=np.float64)
    v = (u - center) / width
    out = np.zeros_like(u)
    inside = np.abs(v) < 1.0
    w = v[inside]
    out[inside] = np.exp(-1.0 / (1.0 - w * w) + 1.0)
    return out


def _transition(u, tweaks):
    """Smooth step plus small interior bumps; still flat at both endpoints."""
    base = smooth_step(u)
    for c, center in zip(tweaks, _BUMP_CENTERS):
        if c != 0.0:
            base = base + c * _interior_bump(u, center)
    return base


def make_bandpass_profile(tweaks=()):
    """psi_hat supported on [1/2, 2] with the exact dyadic partition property."""

    tweaks = tuple(float(c) for c in tweaks)

    def profile(xi):
        a = np.abs(np.asarray(xi, dtype=np.float64))
        out = np.zeros_like(a)
        with np.errstate(divide="ignore"):
            u = np.where(a > 0, np.log2(np.maximum(a, 1e-300)), 0.0)
        lower = (a >= 0.5) & (a < 1.0)
        upper = (a >= 1.0) & (a <= 2.0)
        out[lower] = np.sin(0.5 * np.pi * _transition(u[lower] + 1.0, tweaks))
        out[upper] = np.cos(0.5 * np.pi * _transition(u[upper], tweaks))
        return out

    return profile


bandpass_profile = make_bandpass_profile()


def lowpass_profile(xi):
    """phi_hat: 1 on [0, 1], smooth roll-off to 0 at 2."""
    a = np.abs(np.asarray(xi, dtype=np.float64))
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    roll = (a > 1.0) & (a < 2.0)
    out[roll] = np.cos(0.5 * np.pi * smooth_step(np.log2(a[roll])))
    return out


def _fft_frequencies(grid: Grid) -> np.ndarray:
    """Continuous frequencies (cycles per unit length) of the DFT bins."""
    return np.fft.fftfreq(grid.size, d=grid.spacing)


def _bin_signs(grid: Grid) -> np.ndarray:
    m = np.rint(_fft_frequencies(grid) * 2.0 * grid.half_width).astype(np.int64)
    return np.where(m % 2 == 0, 1.0, -1.0)


def sampled_from_profile(grid: Grid, profile, scale: int = 0) -> np.ndarray:
    """Spatial samples of the filter with frequency response profile(2^-j xi).

    Inverse DFT with the phase convention for grid points x_i = -R + i h.
    """
    xi = _fft_frequencies(grid)
    response = profile((2.0 ** (-scale)) * xi)
    vals = np.fft.ifft(response * _bin_signs(grid)) / grid.spacing
    if np.max(np.abs(vals.imag)) > 1e-9 * (1.0 + np.max(np.abs(vals.real))):
        raise FilterConstructionError("filter profile produced a non-real filter")
    return np.ascontiguousarray(vals.real)


def spectrum_on_bins(f: SampledFunction) -> np.ndarray:
    """Continuous-FT samples of f on the DFT frequency ladder."""
    return f.grid.spacing * _bin_signs(f.grid) * np.fft.fft(f.values)


def _truncate_small(values: np.ndarray, grid: Grid) -> tuple:
    """Zero values below the truncation floor, return (values, support_radius)."""
    peak = np.max(np.abs(values))
    x = np.abs(grid.points())
    keep = np.abs(values) >= TRUNCATION_FLOOR * peak
    if not np.any(keep):
        return values, 0.0
    radius = float(np.max(x[keep]))
    out = values.copy()
    out[~keep] = 0.0
    return out, min(radius, grid.half_width)


def _quadrature_moments(grid: Grid, values: np.ndarray, orders) -> np.ndarray:
    x = grid.points()
    return np.array([np.sum(values * x**a) * grid.spacing for a in orders])


def _tune_moment_profile(grid: Grid, orders, max_iter=40, target=1e-12) -> tuple:
    """Find bump tweaks nulling the quadrature moments of psi on this grid.

    Min-norm Gauss-Newton with step halving; deterministic for a fixed grid.
    """
    nb = len(_BUMP_CENTERS)
    xi = _fft_frequencies(grid)
    signs = _bin_signs(grid)

    def build(c):
        return np.real(np.fft.ifft(make_bandpass_profile(c)(xi) * signs)) / grid.spacing

    def residuals(c):
        return _quadrature_moments(grid, build(c), orders)

    c = np.zeros(nb)
    f0 = residuals(c)
    for _ in range(max_iter):
        worst = np.max(np.abs(f0))
        if worst < target:
            break
        jac = np.zeros((len(orders), nb))
        eps = 1e-7
        for b in range(nb):
            cp = c.copy()
            cp[b] += eps
            jac[:, b] = (residuals(cp) - f0) / eps
        step = np.linalg.lstsq(jac, -f0, rcond=None)[0]
        t = 1.0
        while t > 1e-4:
            cn = c + t * step
            fn = residuals(cn)
            if np.max(np.abs(fn)) < worst:
                c, f0 = cn, fn
                break
            t *= 0.5
        else:
            break
    if np.max(np.abs(f0)) > 0.1 * MOMENT_TOL:
        raise FilterConstructionError(
            f"moment tuning stalled at residual {np.max(np.abs(f0)):.3e}"
        )
    return tuple(c), build(c)


@dataclass
class FilterBank:
    """Immutable filter triple plus its scale range and shift parameter."""

    psi: SampledFunction
    phi: SampledFunction
    tilde: SampledFunction
    shift: int
    j_min: int
    j_max: int
    moment_order: int
    band: tuple
    psi_profile: object = field(repr=False, compare=False, default=bandpass_profile)
    phi_profile: object = field(repr=False, compare=False, default=lowpass_profile)
    _dilation_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @property
    def padded_grid(self) -> Grid:
        """Same spacing, doubled half-width; hosts the extended conv kernels."""
        return Grid(2.0 * self.grid.half_width, self.grid.level + 1)

    @property
    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def _at(self, role: str, profile, j: int) -> SampledFunction:
        key = (role, j)
        if key not in self._dilation_cache:
            if not (self.j_min <= j <= self.j_max):
                raise ConfigurationError(
                    f"scale {j} outside the bank range [{self.j_min}, {self.j_max}]"
                )
            vals = sampled_from_profile(self.grid, profile, scale=j)
            vals, radius = _truncate_small(vals, self.grid)
            self._dilation_cache[key] = SampledFunction(self.grid, vals, radius)
        return self._dilation_cache[key]

    def psi_at(self, j: int) -> SampledFunction:
        """Scale-j band-pass filter, built from the frequency profile."""
        return self._at("psi", self.psi_profile, j)

    def phi_at(self, j: int) -> SampledFunction:
        return self._at("phi", self.phi_profile, j)

    def tilde_at(self, j: int) -> SampledFunction:
        return self.psi_at(j)

    def _kernel(self, role: str, profile, j: int) -> np.ndarray:
        """Scale-j filter on the doubled range [-2R, 2R): the whole-line tails
        a zero-padded linear convolution actually needs."""
        key = ("kernel", role, j)
        if key not in self._dilation_cache:
            if not (self.j_min <= j <= self.j_max):
                raise ConfigurationError(
                    f"scale {j} outside the bank range [{self.j_min}, {self.j_max}]"
                )
            vals = sampled_from_profile(self.padded_grid, profile, scale=j)
            vals, _ = _truncate_small(vals, self.padded_grid)
            self._dilation_cache[key] = vals
        return self._dilation_cache[key]

    def psi_kernel(self, j: int) -> np.ndarray:
        return self._kernel("psi", self.psi_profile, j)

    def phi_kernel(self, j: int) -> np.ndarray:
        return self._kernel("phi", self.phi_profile, j)

    def tilde_kernel(self, j: int) -> np.ndarray:
        return self.psi_kernel(j)

    def kernel_value_at_offsets(self, role: str, j: int, offsets: np.ndarray) -> np.ndarray:
        """Kernel values at integer grid offsets (units of h), zero beyond +-2R."""
        kern = {"psi": self.psi_kernel, "phi": self.phi_kernel, "tilde": self.tilde_kernel}[role](j)
        n = self.grid.size
        idx = np.asarray(offsets) + n
        ok = (idx >= 0) & (idx < 2 * n)
        out = np.zeros(np.shape(offsets))
        out[ok] = kern[idx[ok]]
        return out

    def band_energy_fraction(self, f: SampledFunction) -> float:
        """Fraction of spectral energy inside the covered band [xi_lo, xi_hi]."""
        spec = np.abs(spectrum_on_bins(f)) ** 2
        total = float(np.sum(spec))
        if total == 0.0:
            return 1.0
        xi = np.abs(_fft_frequencies(f.grid))
        lo, hi = self.band
        inside = (xi >= lo - 1e-12) & (xi <= hi + 1e-12)
        return float(np.sum(spec[inside])) / total

    def partition_values(self, xi) -> np.ndarray:
        """sum over the bank scales of psi_hat(2^-j xi)^2."""
        xi = np.asarray(xi, dtype=np.float64)
        acc = np.zeros_like(xi)
        for j in self.scales:
            acc += self.psi_profile((2.0 ** (-j)) * xi) ** 2
        return acc

    def export_csv(self, path):
        import csv

        x = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "psi", "phi"])
            for xi_, p_, q_ in zip(x, self.psi.values, self.phi.values):
                w.writerow([f"{xi_:.17g}", f"{p_:.17g}", f"{q_:.17g}"])


def check_moments(g: SampledFunction, order: int) -> list:
    """Quadrature moments [integral of g(x) x^alpha, alpha = 0..order]."""
    if order > 8:
        raise DomainError(f"moment order {order} exceeds the supported maximum 8")
    return [float(v) for v in _quadrature_moments(g.grid, g.values, range(order + 1))]


def _validate_bank(bank: FilterBank):
    grid = bank.grid
    xi = np.abs(_fft_frequencies(grid))
    lo, hi = bank.band
    band_bins = (xi >= lo - 1e-12) & (xi <= hi + 1e-12)
    if not np.any(band_bins):
        raise FilterConstructionError("covered band contains no discrete frequencies")

    residual = np.max(np.abs(bank.partition_values(xi[band_bins]) - 1.0))
    if residual > PARTITION_TOL:
        raise FilterConstructionError(
            f"partition-of-unity residual {residual:.3e} exceeds {PARTITION_TOL}"
        )
    spec = spectrum_on_bins(bank.psi)
    outside = (xi < 0.5 - 1e-12) | (xi > 2.0 + 1e-12)
    floor = np.max(np.abs(spec[outside])) if np.any(outside) else 0.0
    if floor > ANNULUS_FLOOR * (1.0 + np.max(np.abs(spec))):
        raise FilterConstructionError(
            f"psi spectrum leaks {floor:.3e} outside the annulus [1/2, 2]"
        )
    moments = check_moments(bank.psi, bank.moment_order)
    worst = max(abs(m) for m in moments)
    if worst > MOMENT_TOL:
        raise FilterConstructionError(
            f"psi moment residual {worst:.3e} exceeds {MOMENT_TOL}"
        )
    mass = bank.phi.integral()
    if abs(mass - 1.0) > MOMENT_TOL:
        raise FilterConstructionError(f"phi integral {mass} deviates from 1")


def build_filterbank(
    grid: Grid,
    shift: int = 2,
    j_min: int = -3,
    j_max: int = 5,
    moment_order: int = 3,
) -> FilterBank:
    """Build and validate the filter triple for the given lattice geometry.

    Raises FilterConstructionError if any construction invariant (exact
    partition of unity on the covered band, annulus support, vanishing
    moments up to moment_order, unit phi mass) fails after truncation.
    """
    # same geometric constraints as the cube lattice
    build_lattice(grid, shift, j_min, j_max)
    nyquist = 0.5 / grid.spacing
    if 2.0 ** (j_max + 1) > nyquist + 1e-12:
        raise ConfigurationError(
            f"finest filter band 2^{j_max + 1} exceeds the Nyquist frequency {nyquist}"
        )
    if moment_order > 8:
        raise ConfigurationError(f"moment_order {moment_order} exceeds the maximum 8")

    # order-0 is exact (psi_hat(0) = 0 lands on the zero DFT bin); tune the rest
    tweaks, psi_raw = _tune_moment_profile(grid, orders=range(1, max(moment_order, 1) + 1))
    psi_profile = make_bandpass_profile(tweaks)

    psi_vals, psi_radius = _truncate_small(psi_raw, grid)
    phi_vals, phi_radius = _truncate_small(sampled_from_profile(grid, lowpass_profile), grid)
    psi = SampledFunction(grid, psi_vals, psi_radius)
    phi = SampledFunction(grid, phi_vals, phi_radius)

    bank = FilterBank(
        psi=psi,
        phi=phi,
        tilde=psi,
        shift=shift,
        j_min=j_min,
        j_max=j_max,
        moment_order=moment_order,
        band=(2.0**j_min, 2.0**j_max),
        psi_profile=psi_profile,
        phi_profile=lowpass_profile,
    )
    _validate_bank(bank)
    return bank


def lattice_for(bank: FilterBank) -> CubeLattice:
    """The cube lattice matching the bank's shift and scale range."""
    return build_lattice(bank.grid, bank.shift, bank.j_min, bank.j_max)
