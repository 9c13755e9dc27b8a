"""Discrete multiscale analysis/synthesis, square functions, Hardy-norm proxies.

The reproducing identity  f = sum_j sum_Q |Q| (psi_j * f)(x_Q) psi_j(x - x_Q)
holds because cube centers sample each band-limited piece at twice its
Nyquist rate (shift N >= 2), so the synthesis Riemann sum is alias-free on
the covered band; only filter-tail truncation at the domain boundary and
out-of-band content contribute to the defect.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .filterbank import FilterBank
from .grid import CubeLattice, SampledFunction, convolve_with_kernel
from .varexp import ExponentFunction, luxemburg_norm, modular


class ScaleTransforms:
    """Cached per-scale convolutions of one function against a bank's filters.

    The triple sums in the paraproduct and atomic modules reuse these
    heavily; each (function, bank, role, scale) convolution is computed once.
    Convolutions use the bank's doubled-range kernels, so they agree with the
    whole-line convolution for any function supported inside the domain.
    """

    def __init__(self, f: SampledFunction, bank: FilterBank):
        if f.grid != bank.grid:
            raise ConfigurationError("function and bank live on different grids")
        self.f = f
        self.bank = bank
        self._store = {}

    def _get(self, role: str, kernel, j: int) -> SampledFunction:
        key = (role, j)
        if key not in self._store:
            self._store[key] = convolve_with_kernel(self.f, kernel)
        return self._store[key]

    def psi(self, j: int) -> SampledFunction:
        return self._get("psi", self.bank.psi_kernel(j), j)

    def phi(self, j: int) -> SampledFunction:
        return self._get("phi", self.bank.phi_kernel(j), j)

    def tilde(self, j: int) -> SampledFunction:
        return self._get("tilde", self.bank.tilde_kernel(j), j)


@dataclass
class CoefficientField:
    """Map (scale, cube) -> coefficient, stored as one array per scale."""

    bank: FilterBank
    lattice: CubeLattice
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        for j in self.lattice.scales:
            if j not in self.coeffs:
                raise ConfigurationError(f"missing coefficients at scale {j}")
            arr = np.asarray(self.coeffs[j], dtype=np.float64)
            if arr.shape != (self.lattice.cube_count(j),):
                raise ConfigurationError(f"coefficient count mismatch at scale {j}")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"non-finite coefficients at scale {j}")
            self.coeffs[j] = arr

    def scale_energy(self, j: int) -> float:
        """l2 coefficient energy |Q| * sum of squares at scale j."""
        return float(self.lattice.side(j) * np.sum(self.coeffs[j] ** 2))

    def export_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "cube_index", "x_Q", "value"])
            for j in self.lattice.scales:
                k0 = self.lattice.k_min(j)
                centers = self.lattice.centers(j)
                for t, (xq, v) in enumerate(zip(centers, self.coeffs[j])):
                    w.writerow([j, k0 + t, f"{xq:.17g}", f"{v:.17g}"])


def _check_compatible(bank: FilterBank, lattice: CubeLattice):
    if bank.grid != lattice.grid:
        raise ConfigurationError("bank and lattice grids differ")
    if (bank.shift, bank.j_min, bank.j_max) != (lattice.shift, lattice.j_min, lattice.j_max):
        raise ConfigurationError("bank and lattice scale geometry differ")


def analyze(f: SampledFunction, bank: FilterBank, lattice: CubeLattice,
            transforms: ScaleTransforms = None) -> CoefficientField:
    """Coefficients (psi_j * f)(x_Q) sampled at cube centers."""
    _check_compatible(bank, lattice)
    if f.grid != bank.grid:
        raise ConfigurationError("function grid does not match the bank")
    tr = transforms if transforms is not None else ScaleTransforms(f, bank)
    coeffs = {}
    for j in lattice.scales:
        coeffs[j] = tr.psi(j).values[lattice.center_indices(j)].copy()
    return CoefficientField(bank, lattice, coeffs)


def synthesize(field_: CoefficientField) -> SampledFunction:
    """sum_j sum_Q |Q| c[j,Q] psi_j(x - x_Q), scale-major ascending order."""
    lattice = field_.lattice
    bank = field_.bank
    grid = lattice.grid
    out = np.zeros(grid.size)
    for j in lattice.scales:
        spikes = np.zeros(grid.size)
        weight = lattice.side(j) / grid.spacing
        spikes[lattice.center_indices(j)] = weight * field_.coeffs[j]
        spike_fn = SampledFunction(grid, spikes, grid.half_width)
        out += convolve_with_kernel(spike_fn, bank.psi_kernel(j)).values
    return SampledFunction(grid, out, grid.half_width)


def square_function_G(f: SampledFunction, bank: FilterBank,
                      transforms: ScaleTransforms = None) -> SampledFunction:
    """Pointwise l2 aggregation over scales of psi_j * f."""
    tr = transforms if transforms is not None else ScaleTransforms(f, bank)
    acc = np.zeros(f.grid.size)
    for j in bank.scales:
        acc += tr.psi(j).values ** 2
    return SampledFunction(f.grid, np.sqrt(acc), f.grid.half_width)


def square_function_Gd(f: SampledFunction, bank: FilterBank, lattice: CubeLattice,
                       transforms: ScaleTransforms = None) -> SampledFunction:
    """Cube-sampled square function: coefficients constant on each cube."""
    _check_compatible(bank, lattice)
    field_ = analyze(f, bank, lattice, transforms)
    acc = np.zeros(f.grid.size)
    for j in lattice.scales:
        acc += np.repeat(field_.coeffs[j] ** 2, lattice.samples_per_cube(j))
    return SampledFunction(f.grid, np.sqrt(acc), f.grid.half_width)


HARDY_METHODS = ("smooth_maximal", "gd")


def smooth_maximal_bank(f: SampledFunction, bank: FilterBank,
                        transforms: ScaleTransforms = None) -> SampledFunction:
    """M_phi f over the bank's scale range, using the doubled-range kernels."""
    tr = transforms if transforms is not None else ScaleTransforms(f, bank)
    out = np.zeros(f.grid.size)
    for k in bank.scales:
        np.maximum(out, np.abs(tr.phi(k).values), out=out)
    return SampledFunction(f.grid, out, f.grid.half_width)


def hardy_norm(f: SampledFunction, p: ExponentFunction, bank: FilterBank,
               lattice: CubeLattice = None, method: str = "smooth_maximal",
               transforms: ScaleTransforms = None) -> float:
    """Luxemburg norm of the chosen Hardy-space characterizing function."""
    if method not in HARDY_METHODS:
        raise ConfigurationError(f"unknown hardy_norm method {method!r}")
    if p.klass not in ("P0", "HardyRange", "P"):
        raise PreconditionError("exponent must be an admissible class")
    if method == "smooth_maximal":
        proxy = smooth_maximal_bank(f, bank, transforms)
    else:
        if lattice is None:
            raise ConfigurationError("method 'gd' needs a cube lattice")
        proxy = square_function_Gd(f, bank, lattice, transforms)
    return luxemburg_norm(proxy, p)


def reconstruction_report(f: SampledFunction, bank: FilterBank,
                          lattice: CubeLattice, p: ExponentFunction = None) -> dict:
    """Round-trip defect of analyze/synthesize plus the spectral truncation tail."""
    rec = synthesize(analyze(f, bank, lattice))
    diff = SampledFunction(f.grid, rec.values - f.values, f.grid.half_width)
    denom = f.l2_norm()
    report = {
        "l2_error_rel": diff.l2_norm() / denom if denom > 0 else 0.0,
        "band_energy_fraction": bank.band_energy_fraction(f),
    }
    if p is not None and denom > 0:
        lam = luxemburg_norm(f, p)
        report["modular_error_rel"] = modular(diff, p, lam) if lam > 0 else 0.0
    return report
