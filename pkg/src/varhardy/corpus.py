"""Seeded corpus generators: reproducible test functions and BMO symbols.

Reconstruction-grade members (band-limited families) keep their spectrum
well inside the covered band and their support well inside the domain;
broadband members (plain bumps, mollified indicators) exist to exercise the
norm and maximal machinery and are excluded from reconstruction gates by
their measured band energy.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .filterbank import FilterBank, smooth_step
from .grid import Grid, SampledFunction


def compact_window(grid: Grid, flat_radius: float = 3.5, fall: float = 2.0) -> np.ndarray:
    """C-infinity window: 1 on [-flat, flat], 0 beyond flat + fall."""
    x = np.abs(grid.points())
    return 1.0 - smooth_step((x - flat_radius) / fall)


def gaussian_bump(grid: Grid, center: float, width: float, amp: float = 1.0) -> SampledFunction:
    x = grid.points()
    vals = amp * np.exp(-((x - center) ** 2) / (2.0 * width**2))
    return SampledFunction(grid, vals, grid.half_width)


def bandpass_bump(grid: Grid, center: float, width: float, freq: float,
                  amp: float = 1.0) -> SampledFunction:
    """Gaussian envelope modulated to sit around frequency `freq` (cycles/unit)."""
    x = grid.points()
    vals = amp * np.cos(2.0 * np.pi * freq * (x - center)) * np.exp(
        -((x - center) ** 2) / (2.0 * width**2)
    )
    return SampledFunction(grid, vals, grid.half_width)


def mollified_indicator(grid: Grid, left: float, right: float,
                        edge: float = 0.25, amp: float = 1.0) -> SampledFunction:
    """Smooth plateau approximating the indicator of [left, right]."""
    x = grid.points()
    vals = amp * smooth_step((x - left) / edge + 0.5) * (
        1.0 - smooth_step((x - right) / edge + 0.5)
    )
    return SampledFunction(grid, vals, grid.half_width)


def psi_bump(grid: Grid, bank: FilterBank, scale: int, center: float,
             amp: float = 1.0) -> SampledFunction:
    """Windowed translate of the scale-j analysis filter."""
    base = bank.psi_at(scale)
    shift = int(round(center / grid.spacing))
    vals = np.roll(base.values, shift) * compact_window(grid)
    return SampledFunction(grid, amp * vals, grid.half_width)


def bandlimited_random(grid: Grid, rng: np.random.Generator,
                       lo: float = 1.0, hi: float = 8.0) -> SampledFunction:
    """Random-phase function with spectrum in [lo, hi], smoothly windowed."""
    n = grid.size
    xi = np.fft.fftfreq(n, d=grid.spacing)
    a = np.abs(xi)
    envelope = smooth_step((a - lo) / lo) * (1.0 - smooth_step((a - hi) / hi))
    spec = np.zeros(n, dtype=complex)
    half = n // 2
    coef = rng.normal(size=half - 1) + 1j * rng.normal(size=half - 1)
    spec[1:half] = coef * envelope[1:half]
    spec[half + 1 :] = np.conj(spec[1:half][::-1])
    vals = np.real(np.fft.ifft(spec))
    vals *= compact_window(grid)
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals /= peak
    return SampledFunction(grid, vals, grid.half_width)


def log_clipped(grid: Grid, clip: float = 4.0, scale: float = 1.0) -> SampledFunction:
    """Clipped log|x|: the classic unbounded BMO exemplar, tapered at the boundary."""
    x = grid.points()
    with np.errstate(divide="ignore"):
        vals = np.log(np.maximum(np.abs(x), 1e-300))
    vals = np.clip(vals, -clip, clip) * scale * compact_window(grid, 4.5, 2.5)
    return SampledFunction(grid, vals, grid.half_width)


GENERATORS = ("bandpass_bump", "psi_bump", "bandlimited_random",
              "gaussian_bump", "mollified_chi")


def make_corpus(grid: Grid, bank: FilterBank, generators, count: int,
                seed: int) -> list:
    """Round-robin over the requested generator names with one seeded stream."""
    for name in generators:
        if name not in GENERATORS:
            raise ConfigurationError(f"unknown corpus generator {name!r}")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        name = generators[i % len(generators)]
        if name == "bandpass_bump":
            out.append(bandpass_bump(
                grid,
                center=rng.uniform(-1.0, 1.0),
                width=rng.uniform(0.45, 0.75),
                freq=rng.uniform(2.0, 5.0),
            ))
        elif name == "psi_bump":
            scale = int(rng.integers(0, 4))
            scale = min(max(scale, bank.j_min + 2), bank.j_max - 2)
            out.append(psi_bump(grid, bank, scale, center=rng.uniform(-1.0, 1.0)))
        elif name == "bandlimited_random":
            out.append(bandlimited_random(grid, rng))
        elif name == "gaussian_bump":
            out.append(gaussian_bump(grid, rng.uniform(-1.0, 1.0), rng.uniform(0.4, 0.9)))
        elif name == "mollified_chi":
            left = rng.uniform(-2.0, -0.5)
            out.append(mollified_indicator(grid, left, left + rng.uniform(1.0, 2.5)))
    return out


SYMBOLS = ("bandpass", "psi_bump", "chi", "log_clip", "constant", "bandlimited_random")


def make_symbol(grid: Grid, bank: FilterBank, spec: dict) -> SampledFunction:
    """BMO symbol b from a config dict {'kind': ..., parameters}."""
    kind = spec.get("kind")
    if kind == "bandpass":
        b = bandpass_bump(
            grid,
            center=float(spec.get("center", 0.0)),
            width=float(spec.get("sigma", 0.6)),
            freq=float(spec.get("xi0", 2.0)),
        )
    elif kind == "psi_bump":
        b = psi_bump(grid, bank, int(spec.get("scale", 1)), float(spec.get("center", 0.0)))
    elif kind == "chi":
        b = SampledFunction(
            grid,
            ((grid.points() >= float(spec.get("left", 0.0)))
             & (grid.points() < float(spec.get("right", 1.0)))).astype(float),
            grid.half_width,
        )
    elif kind == "log_clip":
        b = log_clipped(grid, clip=float(spec.get("clip", 4.0)))
    elif kind == "constant":
        b = SampledFunction(grid, np.full(grid.size, float(spec.get("value", 1.0))),
                            grid.half_width)
    elif kind == "bandlimited_random":
        b = bandlimited_random(grid, np.random.default_rng(int(spec.get("seed", 0))))
    else:
        raise ConfigurationError(f"unknown symbol kind {kind!r}")
    if spec.get("normalize_sup") and b.sup_norm() > 0:
        b = b * (1.0 / b.sup_norm())
    return b
