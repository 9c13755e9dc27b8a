"""Discrete paraproduct, its adjoint, the associated kernel, BMO and Carleson checks.

The paraproduct pairs a BMO symbol b with f through per-scale cube
coefficients:

    pi_b(f)(x) = sum_k sum_Q |Q| psi_k(x - x_Q) (tilde_k * b)(x_Q) (phi_k * f)(x_Q)

All coefficient fields come from cached ScaleTransforms, which is what makes
the triple sums affordable; the x-dependent synthesis per scale is one FFT
convolution of a spike train.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calderon import ScaleTransforms
from .errors import ConfigurationError, DomainError
from .filterbank import FilterBank
from .grid import CubeLattice, Grid, SampledFunction, convolve_with_kernel


def domain_constant(grid: Grid, value: float = 1.0) -> SampledFunction:
    """The constant function on the whole domain (support flag waived)."""
    return SampledFunction(grid, np.full(grid.size, float(value)), grid.half_width)


def bmo_norm(b: SampledFunction, max_width: float = None) -> float:
    """Dyadic mean-oscillation supremum over all scales plus half-shifted cubes.

    Windows are powers of two in samples from 2 up to the domain size;
    for each width the shifted family starts half a window later.
    """
    n = b.grid.size
    h = b.grid.spacing
    cap = n if max_width is None else min(n, int(round(max_width / h)))
    vals = b.values
    best = 0.0
    w = 2
    while w <= cap:
        for start in (0, w // 2):
            count = (n - start) // w
            if count == 0:
                continue
            blocks = vals[start : start + count * w].reshape(count, w)
            means = blocks.mean(axis=1)
            osc = np.abs(blocks - means[:, None]).mean(axis=1)
            best = max(best, float(np.max(osc)))
        w *= 2
    return best


@dataclass
class BmoSymbol:
    """A symbol b together with its computed BMO norm."""

    values: SampledFunction
    bmo: float
    mean_normalized: bool = False

    @classmethod
    def from_function(cls, b: SampledFunction, normalize_mean: bool = False) -> "BmoSymbol":
        if normalize_mean:
            mean = float(np.mean(b.values))
            b = SampledFunction(b.grid, b.values - mean, b.grid.half_width)
        return cls(b, bmo_norm(b), normalize_mean)


@dataclass
class ParaproductConfig:
    bank: FilterBank
    lattice: CubeLattice

    def __post_init__(self):
        if self.bank.grid != self.lattice.grid:
            raise ConfigurationError("bank and lattice grids differ")
        if (self.bank.shift, self.bank.j_min, self.bank.j_max) != (
            self.lattice.shift,
            self.lattice.j_min,
            self.lattice.j_max,
        ):
            raise ConfigurationError("bank and lattice scale geometry differ")

    @property
    def grid(self) -> Grid:
        return self.bank.grid


def _symbol_function(b) -> SampledFunction:
    return b.values if isinstance(b, BmoSymbol) else b


def _coefficients(cfg: ParaproductConfig, b_tr: ScaleTransforms,
                  f_tr: ScaleTransforms, j: int) -> np.ndarray:
    idx = cfg.lattice.center_indices(j)
    return b_tr.tilde(j).values[idx] * f_tr.phi(j).values[idx]


def paraproduct_apply(b, f: SampledFunction, cfg: ParaproductConfig,
                      b_transforms: ScaleTransforms = None,
                      f_transforms: ScaleTransforms = None) -> SampledFunction:
    """pi_b(f): scale-major deterministic triple sum via cached coefficients."""
    bf = _symbol_function(b)
    b_tr = b_transforms if b_transforms is not None else ScaleTransforms(bf, cfg.bank)
    f_tr = f_transforms if f_transforms is not None else ScaleTransforms(f, cfg.bank)
    grid = cfg.grid
    out = np.zeros(grid.size)
    for j in cfg.lattice.scales:
        coeff = _coefficients(cfg, b_tr, f_tr, j)
        spikes = np.zeros(grid.size)
        spikes[cfg.lattice.center_indices(j)] = cfg.lattice.side(j) / grid.spacing * coeff
        spike_fn = SampledFunction(grid, spikes, grid.half_width)
        out += convolve_with_kernel(spike_fn, cfg.bank.psi_kernel(j)).values
    return SampledFunction(grid, out, grid.half_width)


def _reflect_kernel(kernel: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], kernel[:0:-1]])


def paraproduct_adjoint_apply(b, f: SampledFunction, cfg: ParaproductConfig,
                              b_transforms: ScaleTransforms = None,
                              f_transforms: ScaleTransforms = None) -> SampledFunction:
    """pi_b^*(f): analysis and synthesis filter roles exchanged."""
    bf = _symbol_function(b)
    b_tr = b_transforms if b_transforms is not None else ScaleTransforms(bf, cfg.bank)
    f_tr = f_transforms if f_transforms is not None else ScaleTransforms(f, cfg.bank)
    grid = cfg.grid
    out = np.zeros(grid.size)
    for j in cfg.lattice.scales:
        idx = cfg.lattice.center_indices(j)
        coeff = b_tr.tilde(j).values[idx] * f_tr.psi(j).values[idx]
        spikes = np.zeros(grid.size)
        spikes[idx] = cfg.lattice.side(j) / grid.spacing * coeff
        spike_fn = SampledFunction(grid, spikes, grid.half_width)
        out += convolve_with_kernel(spike_fn, _reflect_kernel(cfg.bank.phi_kernel(j))).values
    return SampledFunction(grid, out, grid.half_width)


def kernel_eval(b, cfg: ParaproductConfig, x: float, y: float,
                b_transforms: ScaleTransforms = None) -> float:
    """Off-diagonal kernel value K_b(x, y) of the paraproduct (truncated sum)."""
    if x == y:
        raise DomainError("paraproduct kernel is singular on the diagonal")
    return float(kernel_eval_many(b, cfg, np.array([x]), np.array([y]), b_transforms)[0])


def kernel_eval_many(b, cfg: ParaproductConfig, xs: np.ndarray, ys: np.ndarray,
                     b_transforms: ScaleTransforms = None) -> np.ndarray:
    """Vectorized K_b over point pairs (snapped to the grid)."""
    bf = _symbol_function(b)
    b_tr = b_transforms if b_transforms is not None else ScaleTransforms(bf, cfg.bank)
    grid = cfg.grid
    xi = np.array([grid.index_of(v) for v in np.atleast_1d(xs)])
    yi = np.array([grid.index_of(v) for v in np.atleast_1d(ys)])
    if np.any(xi == yi):
        raise DomainError("paraproduct kernel is singular on the diagonal")
    out = np.zeros(len(xi))
    for j in cfg.lattice.scales:
        idx = cfg.lattice.center_indices(j)
        cb = b_tr.tilde(j).values[idx]
        side = cfg.lattice.side(j)
        psi_vals = cfg.bank.kernel_value_at_offsets("psi", j, xi[:, None] - idx[None, :])
        phi_vals = cfg.bank.kernel_value_at_offsets("phi", j, idx[None, :] - yi[:, None])
        out += side * np.sum(psi_vals * cb[None, :] * phi_vals, axis=1)
    return out


@dataclass(frozen=True)
class CarlesonReport:
    """Carleson-sum supremum over top-level cubes and its BMO-normalized ratio."""

    sup_value: float
    bmo: float
    ratio: float
    per_cube: tuple


def carleson_check(b, cfg: ParaproductConfig,
                   b_transforms: ScaleTransforms = None) -> CarlesonReport:
    """sup over coarsest-scale cubes Qt of |Qt|^-1 sum_{Q in Qt} |Q| coeff(b)^2."""
    bf = _symbol_function(b)
    b_tr = b_transforms if b_transforms is not None else ScaleTransforms(bf, cfg.bank)
    lattice = cfg.lattice
    top = lattice.j_min
    sums = np.zeros(lattice.cube_count(top))
    for j in lattice.scales:
        idx = lattice.center_indices(j)
        cb = b_tr.tilde(j).values[idx]
        contrib = lattice.side(j) * cb**2
        group = 1 << (j - top)
        sums += contrib.reshape(lattice.cube_count(top), group).sum(axis=1)
    per_cube = sums / lattice.side(top)
    sup_value = float(np.max(per_cube))
    bb = bmo_norm(bf)
    ratio = sup_value / bb**2 if bb > 0 else 0.0
    return CarlesonReport(sup_value, bb, ratio, tuple(float(v) for v in per_cube))


def identity_defect_report(b, cfg: ParaproductConfig, inner_fraction: float = 0.5) -> dict:
    """Defects of pi_b(1) = b and pi_b^*(1) = 0 on the inner part of the domain."""
    bf = _symbol_function(b)
    one = domain_constant(cfg.grid)
    mask = np.abs(cfg.grid.points()) <= inner_fraction * cfg.grid.half_width
    left = paraproduct_apply(bf, one, cfg)
    right = paraproduct_adjoint_apply(bf, one, cfg)
    sup_b = bf.sup_norm()
    defect = float(np.max(np.abs(left.values[mask] - bf.values[mask])))
    return {
        "pi_b_one_sup_defect": defect,
        "pi_b_one_sup_defect_rel": defect / sup_b if sup_b > 0 else 0.0,
        "pi_b_adjoint_one_sup": float(np.max(np.abs(right.values[mask]))),
        "sup_b": sup_b,
    }
