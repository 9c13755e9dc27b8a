"""Stopping-time atomic decomposition: level sets, cube selection, atoms, the
coefficient functional, and reconstruction.

Cubes are assigned to the unique level whose super-level set covers more
than half of them while the next one does not; groups under the
inclusion-maximal cubes of each level become atoms supported on the
100-dilated (domain-clipped) maximal cube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calderon import CoefficientField, ScaleTransforms, analyze, hardy_norm, smooth_maximal_bank
from .errors import ConfigurationError, PreconditionError
from .filterbank import FilterBank
from .grid import CubeLattice, DyadicCube, Grid, SampledFunction, convolve_with_kernel
from .maximal import MaximalConfig, hl_maximal
from .varexp import ExponentFunction, luxemburg_norm

QSTAR_DILATION = 100.0
DILATION_THRESHOLD = 1.0 / 1000.0
MAX_LEVEL_SPAN = 48
ATOM_NORM_SLACK = 1e-6
ATOM_MOMENT_TOL = 1e-6


def moment_degree(p: ExponentFunction, dim: int = 1) -> int:
    """Smallest d with p_minus * (dim + d + 1) > dim."""
    d = 0
    while p.p_minus * (dim + d + 1) <= dim:
        d += 1
    return d


@dataclass
class LevelSets:
    """Super-level sets of the smooth maximal function and their dilations."""

    levels: range
    omega: dict          # level -> boolean grid mask, nested decreasing
    omega_tilde: dict    # level -> dilated mask
    maximal_values: np.ndarray
    dilation_ratios: dict

    def measure(self, grid: Grid, level: int) -> float:
        return float(np.count_nonzero(self.omega[level])) * grid.spacing


def level_sets(f: SampledFunction, bank: FilterBank,
               thresholds: range = None,
               transforms: ScaleTransforms = None) -> LevelSets:
    """Omega_l = {M_phi f > 2^l} for l spanning the observed maximal range."""
    mf = smooth_maximal_bank(f, bank, transforms).values
    peak = float(np.max(mf))
    if peak == 0.0:
        return LevelSets(range(0, 0), {}, {}, mf, {})
    if thresholds is None:
        l_max = int(np.ceil(np.log2(peak)))
        positive = mf[mf > 0]
        l_min = int(np.floor(np.log2(float(np.min(positive)))))
        l_min = max(l_min, l_max - MAX_LEVEL_SPAN)
        thresholds = range(l_min, l_max + 1)
    omega, omega_tilde, ratios = {}, {}, {}
    cfg = MaximalConfig.for_grid(f.grid)
    for lev in thresholds:
        mask = mf > 2.0**lev
        omega[lev] = mask
        indicator = SampledFunction(f.grid, mask.astype(np.float64), f.grid.half_width)
        dil = hl_maximal(indicator, cfg).values > DILATION_THRESHOLD
        omega_tilde[lev] = dil | mask
        count = np.count_nonzero(mask)
        ratios[lev] = float(np.count_nonzero(omega_tilde[lev]) / count) if count else 0.0
    return LevelSets(thresholds, omega, omega_tilde, mf, ratios)


@dataclass
class CubeSelection:
    """Stopping-time assignment of every lattice cube to a level and a root."""

    lattice: CubeLattice
    level_of: dict       # scale -> int array over cubes
    root_scale: dict     # scale -> int array (scale of the maximal ancestor)
    root_index: dict     # scale -> int array (cube index of the maximal ancestor)
    folded_count: int    # cubes whose natural level fell outside the range

    def groups(self) -> dict:
        """(level, root_scale, root_index) -> list of (scale, cube position)."""
        out = {}
        for j in self.lattice.scales:
            levels = self.level_of[j]
            roots = zip(self.root_scale[j], self.root_index[j])
            for pos, (lev, root) in enumerate(zip(levels, roots)):
                out.setdefault((int(lev), int(root[0]), int(root[1])), []).append((j, pos))
        return out


def select_cubes(levels: LevelSets, lattice: CubeLattice) -> CubeSelection:
    """Assign cubes to levels by the majority rule and find maximal cubes.

    A cube joins B_l when more than half of it lies in Omega_l but at most
    half lies in Omega_{l+1}; nesting makes the level unique.  Levels outside
    the computed range are folded to the nearest endpoint and counted.
    """
    if len(levels.levels) == 0:
        raise ConfigurationError("empty level sets (zero function?)")
    l_lo, l_hi = levels.levels.start, levels.levels.stop - 1
    level_of, folded = {}, 0
    for j in lattice.scales:
        m = lattice.samples_per_cube(j)
        count = lattice.cube_count(j)
        above = np.zeros(count, dtype=np.int64)
        for lev in levels.levels:
            frac = levels.omega[lev].reshape(count, m).mean(axis=1)
            above += frac > 0.5
        # nested: fractions decrease with level, so 'above' counts levels below the stop
        natural = l_lo + above - 1
        clipped = np.clip(natural, l_lo, l_hi)
        folded += int(np.count_nonzero(natural != clipped))
        level_of[j] = clipped
    root_scale, root_index = {}, {}
    for j in lattice.scales:
        count = lattice.cube_count(j)
        ks = lattice.k_min(j) + np.arange(count)
        rs = np.full(count, j, dtype=np.int64)
        ri = ks.copy()
        found = np.zeros(count, dtype=bool)
        for jc in range(lattice.j_min, j + 1):
            anc_k = ks >> (j - jc)
            anc_pos = anc_k - lattice.k_min(jc)
            match = (~found) & (level_of[jc][anc_pos] == level_of[j])
            rs[match] = jc
            ri[match] = anc_k[match]
            found |= match
        root_scale[j] = rs
        root_index[j] = ri
    return CubeSelection(lattice, level_of, root_scale, root_index, folded)


@dataclass
class Atom:
    """Candidate (p(.), q)-atom with its certificates."""

    values: SampledFunction
    cube: DyadicCube            # the maximal cube the group hangs on
    qstar: tuple                # dilated, domain-clipped support interval
    q: float
    norm_certificate: float     # measured L^q norm
    lq_bound: float             # |Q*|^(1/q) / ||chi_{Q*}||_{p(.)}
    moment_residuals: list
    level: int
    clipped_mass: float


@dataclass
class AtomCheckReport:
    support_ok: bool
    norm_ok: bool
    moments_ok: bool
    details: dict

    @property
    def passed(self) -> bool:
        return self.support_ok and self.norm_ok and self.moments_ok


@dataclass
class AtomicDecomposition:
    atoms: list
    lambdas: list
    source: SampledFunction
    source_norm: float           # hardy norm of the source
    reconstruction_l2_defect: float = field(default=np.nan)
    folded_cubes: int = 0

    def export_json_payload(self) -> list:
        out = []
        for i, (a, lam) in enumerate(zip(self.atoms, self.lambdas)):
            out.append({
                "lambda": float(lam),
                "cube": {"j": a.cube.scale, "k": a.cube.index},
                "qstar": [float(a.qstar[0]), float(a.qstar[1])],
                "level": a.level,
                "atom_csv_ref": f"atom_{i:04d}.csv",
            })
        return out


def _interval_indicator(grid: Grid, interval: tuple) -> SampledFunction:
    x = grid.points()
    lo, hi = interval
    return SampledFunction(grid, ((x >= lo) & (x < hi)).astype(np.float64), grid.half_width)


def _corrector_basis(grid: Grid, interval: tuple, degree: int) -> np.ndarray:
    """Smooth bumps {beta(x) x^gamma} supported inside `interval`.

    Used to cancel the residual moments an atom picks up from kernel-tail
    truncation at the domain boundary; the corrections are tiny relative to
    the atom (the residuals they remove are already small).
    """
    from .filterbank import smooth_step

    lo, hi = interval
    c = 0.5 * (lo + hi)
    w = 0.35 * (hi - lo)
    x = grid.points()
    t = (x - c) / w
    core = smooth_step(t + 1.0) * (1.0 - smooth_step(t))
    return np.stack([core * x**gamma for gamma in range(degree + 1)])


def _null_moments(values: np.ndarray, grid: Grid, interval: tuple, degree: int) -> np.ndarray:
    """Subtract an in-support smooth correction so moments 0..degree vanish."""
    x = grid.points()
    h = grid.spacing
    residual = np.array([np.sum(values * x**a) * h for a in range(degree + 1)])
    basis = _corrector_basis(grid, interval, degree)
    gram = np.array([[np.sum(basis[g] * x**a) * h for g in range(degree + 1)]
                     for a in range(degree + 1)])
    coef = np.linalg.solve(gram, residual)
    return values - coef @ basis


def _indicator_norm(grid: Grid, interval: tuple, p: ExponentFunction, cache: dict) -> float:
    key = (round(interval[0], 12), round(interval[1], 12))
    if key not in cache:
        cache[key] = luxemburg_norm(_interval_indicator(grid, interval), p)
    return cache[key]


def atomic_decompose(f: SampledFunction, p: ExponentFunction, bank: FilterBank,
                     lattice: CubeLattice, q: float = 2.0, d: int = None,
                     transforms: ScaleTransforms = None) -> AtomicDecomposition:
    """Stopping-time decomposition of f driven by its analysis coefficients.

    Coefficient groups under each maximal cube are synthesized into atoms
    supported on the dilated root cube; scalars follow the square-function
    recipe (unit leading constant).
    """
    if p.p_plus > 1.0:
        raise PreconditionError("atomic decomposition requires p+ <= 1")
    if q != 2.0:
        raise PreconditionError("only q = 2 atoms are supported")
    d_min = moment_degree(p)
    if d is None:
        d = d_min
    if d < d_min:
        raise PreconditionError(f"moment degree d = {d} below the required {d_min}")

    tr = transforms if transforms is not None else ScaleTransforms(f, bank)
    grid = f.grid
    source_norm = hardy_norm(f, p, bank, lattice, "smooth_maximal", tr)
    if f.sup_norm() == 0.0:
        return AtomicDecomposition([], [], f, source_norm, 0.0, 0)

    field_ = analyze(f, bank, lattice, tr)
    levels = level_sets(f, bank, transforms=tr)
    selection = select_cubes(levels, lattice)

    norm_cache = {}
    atoms, lambdas = [], []
    groups = selection.groups()
    for key in sorted(groups.keys()):
        members = groups[key]
        lev, rj, rk = key
        proxy_sq = 0.0
        for (j, pos) in members:
            proxy_sq += lattice.side(j) * field_.coeffs[j][pos] ** 2
        if proxy_sq == 0.0:
            continue
        proxy = float(np.sqrt(proxy_sq))
        root = lattice.cube(rj, rk)
        qstar = root.dilate_clipped(QSTAR_DILATION, grid.half_width)
        qstar_measure = qstar[1] - qstar[0]
        chi_norm = _indicator_norm(grid, qstar, p, norm_cache)
        lam = proxy * qstar_measure**-0.5 * chi_norm

        raw = np.zeros(grid.size)
        by_scale = {}
        for (j, pos) in members:
            by_scale.setdefault(j, []).append(pos)
        for j, positions in sorted(by_scale.items()):
            spikes = np.zeros(grid.size)
            idx = lattice.center_indices(j)[positions]
            spikes[idx] = lattice.side(j) / grid.spacing * field_.coeffs[j][positions]
            spike_fn = SampledFunction(grid, spikes, grid.half_width)
            raw += convolve_with_kernel(spike_fn, bank.psi_kernel(j)).values

        x = grid.points()
        inside = (x >= qstar[0]) & (x < qstar[1])
        clipped = raw.copy()
        clipped[~inside] = 0.0
        clipped = _null_moments(clipped, grid, qstar, d)
        clip_mass = float(np.sqrt(np.sum((raw - clipped) ** 2) * grid.spacing))
        avals = clipped / lam
        sr = min(grid.half_width, max(abs(qstar[0]), abs(qstar[1])))
        a_fn = SampledFunction(grid, avals, sr)
        norm_q = float(np.sum(np.abs(avals) ** q * grid.spacing) ** (1.0 / q))
        residuals = [float(np.sum(avals * x**alpha) * grid.spacing) for alpha in range(d + 1)]
        atoms.append(Atom(
            values=a_fn,
            cube=root,
            qstar=qstar,
            q=q,
            norm_certificate=norm_q,
            lq_bound=qstar_measure ** (1.0 / q) / chi_norm,
            moment_residuals=residuals,
            level=lev,
            clipped_mass=clip_mass / lam,
        ))
        lambdas.append(float(lam))

    dec = AtomicDecomposition(atoms, lambdas, f, source_norm,
                              folded_cubes=selection.folded_count)
    rec = reconstruct(dec)
    denom = f.l2_norm()
    diff = SampledFunction(grid, rec.values - f.values, grid.half_width)
    dec.reconstruction_l2_defect = diff.l2_norm() / denom if denom > 0 else 0.0
    return dec


def a_functional(lambdas, supports, p: ExponentFunction, grid: Grid) -> float:
    """Coefficient-space quasi-norm of a (lambda, cube) family.

    supports may be DyadicCube instances or (lo, hi) intervals.
    """
    lambdas = list(lambdas)
    supports = list(supports)
    if len(lambdas) != len(supports):
        raise ConfigurationError("lambdas and supports must have equal length")
    pm = p.p_minus
    acc = np.zeros(grid.size)
    for lam, support in zip(lambdas, supports):
        interval = support.as_interval() if isinstance(support, DyadicCube) else tuple(support)
        chi = _interval_indicator(grid, interval)
        norm = luxemburg_norm(chi, p)
        if norm == 0.0:
            continue
        acc += (np.abs(lam) * chi.values / norm) ** pm
    aggregate = SampledFunction(grid, acc ** (1.0 / pm), grid.half_width)
    return luxemburg_norm(aggregate, p)


def atom_validate(a: Atom, p: ExponentFunction, q: float = 2.0, d: int = None) -> AtomCheckReport:
    """Check the three atom conditions at the stated tolerances."""
    if d is None:
        d = moment_degree(p)
    grid = a.values.grid
    x = grid.points()
    outside = (x < a.qstar[0]) | (x >= a.qstar[1])
    peak = a.values.sup_norm()
    support_ok = bool(np.all(np.abs(a.values.values[outside]) <= 1e-12 * (1.0 + peak)))

    norm_q = float(np.sum(np.abs(a.values.values) ** q * grid.spacing) ** (1.0 / q))
    norm_ok = norm_q <= a.lq_bound * (1.0 + ATOM_NORM_SLACK)

    moments = [float(np.sum(a.values.values * x**alpha) * grid.spacing) for alpha in range(d + 1)]
    scale = ATOM_MOMENT_TOL * max(norm_q, 1e-300)
    moments_ok = all(abs(m) <= scale for m in moments)
    return AtomCheckReport(support_ok, norm_ok, moments_ok, {
        "norm_q": norm_q,
        "lq_bound": a.lq_bound,
        "moments": moments,
        "moment_tolerance": scale,
    })


def reconstruct(dec: AtomicDecomposition) -> SampledFunction:
    """sum lambda_j a_j in descending |lambda| order (stable)."""
    grid = dec.source.grid
    order = sorted(range(len(dec.lambdas)), key=lambda i: (-abs(dec.lambdas[i]), i))
    out = np.zeros(grid.size)
    for i in order:
        out += dec.lambdas[i] * dec.atoms[i].values.values
    return SampledFunction(grid, out, grid.half_width)
