"""Hardy-Littlewood and smooth maximal operators, vector-valued inequality check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import DomainError, PreconditionError
from .grid import Grid, SampledFunction, convolve_scaled
from .varexp import ExponentFunction, luxemburg_norm


@dataclass(frozen=True)
class MaximalConfig:
    """Uncentered interval maximal over a dyadic ladder of window widths.

    Widths are in samples.  The ladder has ratio 2, covers [2h, max_radius],
    and additionally includes the 1- and 2-sample windows so that
    Mf >= |f| holds pointwise exactly.
    """

    style: str
    max_radius: float
    widths: tuple

    @classmethod
    def for_grid(cls, grid: Grid, max_radius: float = None) -> "MaximalConfig":
        if max_radius is None:
            max_radius = grid.half_width
        cap = max(2, int(round(2.0 * max_radius / grid.spacing)))
        widths = []
        w = 1
        while w <= cap:
            widths.append(w)
            w *= 2
        return cls("uncentered-interval", float(max_radius), tuple(widths))


def hl_maximal(f: SampledFunction, cfg: MaximalConfig = None) -> SampledFunction:
    """Uncentered interval maximal function over the width ladder.

    (Mf)(x_i) = max over ladder intervals I containing x_i of avg_I |f|,
    with f extended by zero outside the domain.  O(#widths * 2^L) via a
    prefix-sum / running-max sweep per width.
    """
    if cfg is None:
        cfg = MaximalConfig.for_grid(f.grid)
    a = np.abs(f.values)
    n = f.grid.size
    out = np.zeros(n)
    for w in cfg.widths:
        if w == 1:
            np.maximum(out, a, out=out)
            continue
        padded = np.concatenate([np.zeros(w - 1), a, np.zeros(w - 1)])
        prefix = np.concatenate([[0.0], np.cumsum(padded)])
        # means[k]: window of w samples starting at original coordinate k-(w-1)
        means = (prefix[w:] - prefix[:-w]) / w
        mf = maximum_filter1d(means, size=w, mode="constant", cval=-np.inf)
        # out[i] = max over windows containing i = max of means[i : i+w]
        np.maximum(out, mf[w // 2 : w // 2 + n], out=out)
    return SampledFunction(f.grid, out, f.grid.half_width)


def smooth_maximal(f: SampledFunction, phi: SampledFunction, scales,
                   dilated_filters=None) -> SampledFunction:
    """M_phi f = max over the truncated scale range of |phi_k * f|."""
    if dilated_filters is None:
        if abs(phi.integral() - 1.0) > 1e-8:
            raise PreconditionError(
                f"phi must integrate to 1 within 1e-8, got {phi.integral()}"
            )
        dilated_filters = {k: None for k in scales}
        use_profile = False
    else:
        use_profile = True
    out = np.zeros(f.grid.size)
    for k in scales:
        conv = (
            convolve_scaled(f, phi, k)
            if not use_profile
            else _convolve_pre(f, dilated_filters[k])
        )
        np.maximum(out, np.abs(conv.values), out=out)
    return SampledFunction(f.grid, out, f.grid.half_width)


def _convolve_pre(f: SampledFunction, filt: SampledFunction) -> SampledFunction:
    from .grid import convolve_sampled

    return convolve_sampled(f, filt)


@dataclass(frozen=True)
class RatioReport:
    numerator: float
    denominator: float
    ratio: float
    vacuous: bool


def fs_vector_check(family, q: float, p: ExponentFunction,
                    cfg: MaximalConfig = None) -> RatioReport:
    """Measured constant in the vector-valued maximal inequality.

    Returns ||  ||{M f_i}||_{l^q} ||_{p(.)} / ||  ||{f_i}||_{l^q} ||_{p(.)}.
    """
    if q <= 1:
        raise DomainError(f"q must exceed 1, got {q}")
    family = list(family)
    if not family:
        raise DomainError("family must be nonempty")
    grid = family[0].grid

    def lq_aggregate(funcs):
        acc = np.zeros(grid.size)
        for g in funcs:
            acc += np.abs(g.values) ** q
        return SampledFunction(grid, acc ** (1.0 / q), grid.half_width)

    maximals = [hl_maximal(g, cfg) for g in family]
    num = luxemburg_norm(lq_aggregate(maximals), p)
    den = luxemburg_norm(lq_aggregate(family), p)
    if den == 0.0:
        return RatioReport(num, den, 0.0, True)
    return RatioReport(num, den, num / den, False)
