"""Variable exponent functions, the modular, the Luxemburg norm, log-Holder diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import Grid, SampledFunction

LUXEMBURG_REL_TOL = 1e-8
DEFAULT_LH_THRESHOLD = 2.0


def _classify(p_minus: float, p_plus: float) -> str:
    if p_plus <= 1.0:
        return "HardyRange"
    if p_minus > 1.0:
        return "P"
    return "P0"


@dataclass
class ExponentFunction:
    """p(.) with cached bounds; the evaluator must accept ndarray input."""

    evaluator: object
    p_minus: float
    p_plus: float
    klass: str
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.p_minus <= self.p_plus < np.inf):
            raise ConfigurationError(
                f"exponent bounds must satisfy 0 < p- <= p+ < inf, got "
                f"[{self.p_minus}, {self.p_plus}]"
            )
        allowed = {"P0", "P", "HardyRange"}
        if self.klass not in allowed:
            raise ConfigurationError(f"unknown exponent class {self.klass!r}")
        if self.klass == "P" and self.p_minus <= 1.0:
            raise ConfigurationError("class P requires p- > 1")
        if self.klass == "HardyRange" and self.p_plus > 1.0:
            raise ConfigurationError("class HardyRange requires p+ <= 1")

    @classmethod
    def from_callable(cls, fn, grid: Grid, klass: str = None) -> "ExponentFunction":
        vals = np.asarray(fn(grid.points()), dtype=np.float64)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ConfigurationError("exponent must be finite and positive on the grid")
        p_minus, p_plus = float(np.min(vals)), float(np.max(vals))
        k = _classify(p_minus, p_plus) if klass is None else klass
        p = cls(fn, p_minus, p_plus, k)
        p._cache[(grid.half_width, grid.level)] = vals
        return p

    @classmethod
    def constant(cls, value: float) -> "ExponentFunction":
        v = float(value)
        return cls(lambda x: np.full_like(np.asarray(x, dtype=np.float64), v), v, v, _classify(v, v))

    def values_on(self, grid: Grid) -> np.ndarray:
        key = (grid.half_width, grid.level)
        if key not in self._cache:
            vals = np.asarray(self.evaluator(grid.points()), dtype=np.float64)
            if np.any(vals < self.p_minus - 1e-12) or np.any(vals > self.p_plus + 1e-12):
                raise ConfigurationError("exponent leaves its declared bounds on this grid")
            self._cache[key] = vals
        return self._cache[key]

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus


def constant_exponent(value: float) -> ExponentFunction:
    return ExponentFunction.constant(value)


def piecewise_exponent(breakpoints, values, grid: Grid) -> ExponentFunction:
    """Left-closed piecewise-constant exponent; values[i] on [b_i, b_{i+1})."""
    bp = np.asarray(breakpoints, dtype=np.float64)
    vv = np.asarray(values, dtype=np.float64)
    if bp.ndim != 1 or np.any(np.diff(bp) <= 0):
        raise ConfigurationError("breakpoints must be strictly increasing")
    if len(vv) != len(bp) + 1:
        raise ConfigurationError("need exactly one value per region (len(breaks)+1)")

    def fn(x):
        idx = np.searchsorted(bp, np.asarray(x, dtype=np.float64), side="right")
        return vv[idx]

    return ExponentFunction.from_callable(fn, grid)


def smoothstep_exponent(p_left: float, p_right: float, center: float, width: float,
                        grid: Grid) -> ExponentFunction:
    """Smooth (cubic) transition from p_left to p_right around `center`."""
    if width <= 0:
        raise ConfigurationError("width must be positive")

    def fn(x):
        t = np.clip((np.asarray(x, dtype=np.float64) - center) / width + 0.5, 0.0, 1.0)
        s = t * t * (3.0 - 2.0 * t)
        return p_left + (p_right - p_left) * s

    return ExponentFunction.from_callable(fn, grid)


def modular(f: SampledFunction, p: ExponentFunction, lam: float) -> float:
    """Quadrature of (|f(x)| / lambda)^p(x); strictly decreasing in lambda for f != 0."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    pv = p.values_on(f.grid)
    ratio = np.abs(f.values) / lam
    mask = ratio > 0
    acc = np.zeros_like(ratio)
    acc[mask] = ratio[mask] ** pv[mask]
    return float(np.sum(acc)) * f.grid.spacing


def luxemburg_norm(f: SampledFunction, p: ExponentFunction) -> float:
    """inf{lambda > 0 : modular(f, p, lambda) <= 1} by bracketing + bisection.

    Total: returns 0 for f == 0.  Resolved to LUXEMBURG_REL_TOL relative.
    """
    peak = f.sup_norm()
    if peak == 0.0:
        return 0.0
    support_measure = float(np.count_nonzero(f.values)) * f.grid.spacing
    hi = peak * support_measure ** (1.0 / p.p_minus) + 1.0
    lo = hi * 2.0**-80
    # widen if the lower bracket is not yet above the unit modular
    while modular(f, p, lo) <= 1.0 and lo > 1e-280:
        lo *= 2.0**-40
    if modular(f, p, hi) > 1.0:
        while modular(f, p, hi) > 1.0:
            hi *= 2.0
    # bisection on log(lambda) for a relative tolerance
    while hi / lo > 1.0 + LUXEMBURG_REL_TOL:
        mid = np.sqrt(lo * hi)
        if modular(f, p, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


@dataclass(frozen=True)
class LogHolderReport:
    """Sampled suprema for the two log-Holder conditions."""

    local_constant: float
    decay_constant: float
    threshold: float
    passed: bool


def check_log_holder(p: ExponentFunction, grid: Grid,
                     threshold: float = DEFAULT_LH_THRESHOLD,
                     max_points: int = 1024) -> LogHolderReport:
    """Estimate the log-Holder constants from a deterministic strided pair set.

    The constants are suprema over the sampled pairs, hence monotone
    nondecreasing as more pairs are added.
    """
    x = grid.points()
    stride = max(1, grid.size // max_points)
    xs = x[::stride]
    ps = p.values_on(grid)[::stride]

    dx = np.abs(xs[:, None] - xs[None, :])
    dp = np.abs(ps[:, None] - ps[None, :])

    local = (dx > 0) & (dx <= 0.5)
    local_constant = 0.0
    if np.any(local):
        local_constant = float(np.max(dp[local] * (-np.log(dx[local]))))

    ax = np.abs(xs)
    farther = ax[None, :] >= ax[:, None]  # |y| >= |x| for pair (x, y)
    decay_constant = 0.0
    if np.any(farther):
        weight = np.broadcast_to(np.log(ax[:, None] + np.e), dp.shape)
        decay_constant = float(np.max(dp[farther] * weight[farther]))

    worst = max(local_constant, decay_constant)
    return LogHolderReport(local_constant, decay_constant, threshold, worst <= threshold)
