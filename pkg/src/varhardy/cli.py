"""Batch driver: config parsing, corpus construction, verification suites.

Subcommands: norm, decompose, paraproduct, verify-czo.  Exit codes:
0 pass, 1 verification failure, 2 configuration error, 3 numerical
integrity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import atomic, calderon, corpus as corpus_mod, czo, paraproduct
from .errors import (ConfigurationError, HypothesisViolation,
                     NumericalIntegrityError, VarhardyError)
from .filterbank import build_filterbank
from .grid import build_lattice, make_grid
from .reporting import config_hash, write_csv, write_json
from .varexp import (ExponentFunction, check_log_holder, constant_exponent,
                     luxemburg_norm, piecewise_exponent, smoothstep_exponent)

DEFAULT_TOLERANCES = {
    "partition_residual": 1e-10,
    "filter_moment": 1e-8,
    "reconstruction_l2": 1e-3,
    "band_energy_gate": 0.999,
    "identity_sup_rel": 1e-2,
    "adjoint_pairing_gate": 1e-4,
    "stability_factor": 2.0,
    "atom_norm_slack": 1e-6,
    "atom_moment_rel": 1e-6,
    "route_agreement_rel": 1e-4,
    "luxemburg_rel": 1e-8,
}

DEFAULT_CONFIG = {
    "grid": {"R": 8.0, "L": 12},
    "lattice": {"N": 2, "j_min": -3, "j_max": 5},
    "filterbank": {"M": 3},
    "exponent": {"kind": "constant", "value": 1.0},
    "symbol": {"kind": "bandpass", "xi0": 2.0, "sigma": 0.6, "center": 0.0,
               "normalize_sup": True},
    "operator": {"name": "hilbert_smooth"},
    "corpus": {"generators": ["bandpass_bump", "psi_bump", "bandlimited_random"],
               "count": 9, "seed": 7},
    "export_atom_csv": "first",
}


@dataclass
class RunConfig:
    """Validated run parameters; `raw` is the exact dict that gets hashed."""

    grid: dict
    lattice: dict
    filterbank: dict
    exponent: dict
    symbol: dict
    operator: dict
    corpus: dict
    tolerances: dict
    export_atom_csv: str = "first"
    raw: dict = field(default_factory=dict)


def _require(condition, message):
    if not condition:
        raise ConfigurationError(message)


def validate_config(data: dict) -> RunConfig:
    _require(isinstance(data, dict), "config root must be a JSON object")
    merged = {**DEFAULT_CONFIG, **data}
    tol = {**DEFAULT_TOLERANCES, **merged.get("tolerances", {})}
    unknown = set(merged) - set(DEFAULT_CONFIG) - {"tolerances"}
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    g = merged["grid"]
    _require(isinstance(g, dict) and {"R", "L"} <= set(g), "grid needs R and L")
    _require(isinstance(g["L"], int) and 4 <= g["L"] <= 24, "grid.L must be an integer in [4, 24]")
    _require(g["R"] > 0, "grid.R must be positive")

    lat = merged["lattice"]
    _require({"N", "j_min", "j_max"} <= set(lat), "lattice needs N, j_min, j_max")
    _require(lat["j_min"] <= lat["j_max"], "lattice scale range is empty")

    fb = merged["filterbank"]
    _require(0 <= fb.get("M", 3) <= 8, "filterbank.M must be in [0, 8]")

    exp = merged["exponent"]
    _require(exp.get("kind") in ("constant", "piecewise", "smoothstep"),
             "exponent.kind must be constant | piecewise | smoothstep")

    sym = merged["symbol"]
    _require(sym.get("kind") in corpus_mod.SYMBOLS,
             f"symbol.kind must be one of {corpus_mod.SYMBOLS}")

    op = merged["operator"]
    _require(op.get("name") in czo.OPERATORS,
             f"operator.name must be one of {czo.OPERATORS}")

    corp = merged["corpus"]
    _require(isinstance(corp.get("generators"), list) and corp["generators"],
             "corpus.generators must be a nonempty list")
    for gen in corp["generators"]:
        _require(gen in corpus_mod.GENERATORS, f"unknown corpus generator {gen!r}")
    _require(isinstance(corp.get("count"), int) and corp["count"] > 0,
             "corpus.count must be a positive integer")
    _require(isinstance(corp.get("seed"), int), "corpus.seed must be an integer")

    _require(merged.get("export_atom_csv", "first") in ("first", "all", "none"),
             "export_atom_csv must be first | all | none")

    hashable = {k: merged[k] for k in DEFAULT_CONFIG}
    hashable["tolerances"] = tol
    return RunConfig(
        grid=g, lattice=lat, filterbank=fb, exponent=exp, symbol=sym,
        operator=op, corpus=corp, tolerances=tol,
        export_atom_csv=merged.get("export_atom_csv", "first"), raw=hashable,
    )


def load_config(path, grid_level=None, seed=None) -> RunConfig:
    with open(path) as fh:
        data = json.load(fh)
    if grid_level is not None:
        data.setdefault("grid", dict(DEFAULT_CONFIG["grid"]))["L"] = grid_level
    if seed is not None:
        data.setdefault("corpus", dict(DEFAULT_CONFIG["corpus"]))["seed"] = seed
    return validate_config(data)


def exponent_from_spec(spec: dict, grid) -> ExponentFunction:
    kind = spec["kind"]
    if kind == "constant":
        return constant_exponent(float(spec["value"]))
    if kind == "piecewise":
        return piecewise_exponent(spec["breakpoints"], spec["values"], grid)
    return smoothstep_exponent(float(spec["p_left"]), float(spec["p_right"]),
                               float(spec.get("center", 0.0)),
                               float(spec.get("width", 1.0)), grid)


@dataclass
class Context:
    cfg: RunConfig
    grid: object
    bank: object
    lattice: object
    exponent: ExponentFunction
    corpus: list


def build_context(cfg: RunConfig) -> Context:
    grid = make_grid(float(cfg.grid["R"]), int(cfg.grid["L"]))
    bank = build_filterbank(grid, int(cfg.lattice["N"]), int(cfg.lattice["j_min"]),
                            int(cfg.lattice["j_max"]), int(cfg.filterbank.get("M", 3)))
    lattice = build_lattice(grid, int(cfg.lattice["N"]), int(cfg.lattice["j_min"]),
                            int(cfg.lattice["j_max"]))
    exponent = exponent_from_spec(cfg.exponent, grid)
    members = corpus_mod.make_corpus(grid, bank, cfg.corpus["generators"],
                                     int(cfg.corpus["count"]), int(cfg.corpus["seed"]))
    return Context(cfg, grid, bank, lattice, exponent, members)


def _base_report(ctx: Context) -> dict:
    lh = check_log_holder(ctx.exponent, ctx.grid)
    return {
        "config": ctx.cfg.raw,
        "config_hash": config_hash(ctx.cfg.raw),
        "tolerances": ctx.cfg.tolerances,
        "log_holder": {"local": lh.local_constant, "decay": lh.decay_constant,
                       "passed": lh.passed},
    }


def _boundary_flags(ctx: Context) -> dict:
    out = {}
    for j in ctx.lattice.scales:
        width = 2.0 ** (-j)
        out[str(j)] = int(np.count_nonzero(ctx.lattice.boundary_mask(j, width)))
    return out


def cmd_norm(ctx: Context, outdir) -> int:
    """Lebesgue/Hardy norms and equivalence ratios over the corpus."""
    rows, ratios, tails = [], [], []
    for i, f in enumerate(ctx.corpus):
        tr = calderon.ScaleTransforms(f, ctx.bank)
        leb = luxemburg_norm(f, ctx.exponent)
        hmax = calderon.hardy_norm(f, ctx.exponent, ctx.bank, ctx.lattice,
                                   "smooth_maximal", tr)
        hgd = calderon.hardy_norm(f, ctx.exponent, ctx.bank, ctx.lattice, "gd", tr)
        rec = calderon.reconstruction_report(f, ctx.bank, ctx.lattice)
        ratio = hgd / hmax if hmax > 0 else float("nan")
        ratios.append(ratio)
        tails.append(1.0 - rec["band_energy_fraction"])
        rows.append([i, leb, hmax, hgd, ratio, rec["band_energy_fraction"],
                     rec["l2_error_rel"]])
    report = _base_report(ctx)
    finite = [r for r in ratios if np.isfinite(r)]
    report.update({
        "lebesgue_norms": [r[1] for r in rows],
        "hardy_norm_maximal": [r[2] for r in rows],
        "hardy_norm_gd": [r[3] for r in rows],
        "equivalence_ratios": {
            "min": min(finite), "max": max(finite),
            "median": float(np.median(finite)),
        },
        "truncation_tails": tails,
        "boundary_cube_flags": _boundary_flags(ctx),
    })
    write_json(outdir / "norm_report.json", report)
    write_csv(outdir / "norm_members.csv",
              ["member", "lebesgue", "hardy_maximal", "hardy_gd", "gd_over_maximal",
               "band_energy_fraction", "reconstruction_l2_rel"], rows)
    return 0


def cmd_decompose(ctx: Context, outdir) -> int:
    """Atomic decomposition of every corpus member plus validation."""
    if ctx.exponent.p_plus > 1.0:
        raise ConfigurationError("decompose requires an exponent with p+ <= 1")
    all_pass = True
    members_payload = []
    for i, f in enumerate(ctx.corpus):
        dec = atomic.atomic_decompose(f, ctx.exponent, ctx.bank, ctx.lattice)
        checks = [atomic.atom_validate(a, ctx.exponent) for a in dec.atoms]
        ok = all(c.passed for c in checks)
        all_pass = all_pass and ok
        af = atomic.a_functional(dec.lambdas, [a.qstar for a in dec.atoms],
                                 ctx.exponent, ctx.grid)
        members_payload.append({
            "member": i,
            "atom_count": len(dec.atoms),
            "all_atoms_pass": ok,
            "reconstruction_l2_defect": dec.reconstruction_l2_defect,
            "a_functional": af,
            "hardy_norm": dec.source_norm,
            "folded_cubes": dec.folded_cubes,
        })
        write_json(outdir / f"decomposition_member{i}.json", {
            "member": i,
            "atoms": dec.export_json_payload(),
        })
        export = ctx.cfg.export_atom_csv
        if export == "all" or (export == "first" and i == 0):
            x = ctx.grid.points()
            for a_idx, a in enumerate(dec.atoms):
                write_csv(outdir / f"member{i}_atom_{a_idx:04d}.csv", ["x", "value"],
                          zip(x, a.values.values))
    report = _base_report(ctx)
    report["members"] = members_payload
    report["boundary_cube_flags"] = _boundary_flags(ctx)
    write_json(outdir / "decompose_report.json", report)
    return 0 if all_pass else 1


def cmd_paraproduct(ctx: Context, outdir) -> int:
    """Symbol diagnostics: identities, Carleson sum, boundedness ratios, kernel bounds."""
    b = corpus_mod.make_symbol(ctx.grid, ctx.bank, ctx.cfg.symbol)
    pcfg = paraproduct.ParaproductConfig(ctx.bank, ctx.lattice)
    b_tr = calderon.ScaleTransforms(b, ctx.bank)
    bb = paraproduct.bmo_norm(b)
    identity = paraproduct.identity_defect_report(b, pcfg)
    carleson = paraproduct.carleson_check(b, pcfg, b_tr)

    l2_ratios, hardy_ratios = [], []
    for f in ctx.corpus:
        f_tr = calderon.ScaleTransforms(f, ctx.bank)
        pf = paraproduct.paraproduct_apply(b, f, pcfg, b_tr, f_tr)
        if f.l2_norm() > 0 and bb > 0:
            l2_ratios.append(pf.l2_norm() / (bb * f.l2_norm()))
        denom = calderon.hardy_norm(f, ctx.exponent, ctx.bank, ctx.lattice, "gd", f_tr)
        if denom > 0:
            hardy_ratios.append(
                calderon.hardy_norm(pf, ctx.exponent, ctx.bank, ctx.lattice, "gd") / denom
            )

    rng = np.random.default_rng(int(ctx.cfg.corpus["seed"]))
    R = ctx.grid.half_width
    xs = rng.uniform(-0.75 * R, 0.75 * R, 300)
    ys = rng.uniform(-0.75 * R, 0.75 * R, 300)
    keep = np.abs(xs - ys) >= 0.25
    kvals = paraproduct.kernel_eval_many(b, pcfg, xs[keep], ys[keep], b_tr)
    size_ratios = np.abs(kvals) * np.abs(xs[keep] - ys[keep])

    report = _base_report(ctx)
    report.update({
        "bmo_norm": bb,
        "carleson_sup": carleson.sup_value,
        "carleson_over_bmo_sq": carleson.ratio,
        "identity_defects": identity,
        "l2_ratio": {"max": max(l2_ratios), "median": float(np.median(l2_ratios))},
        "hardy_ratio": {"max": max(hardy_ratios), "median": float(np.median(hardy_ratios))},
        "kernel_bound_ratios": {
            "size_sup": float(np.max(size_ratios)),
            "size_sup_over_bmo": float(np.max(size_ratios) / bb) if bb > 0 else None,
        },
        "boundary_cube_flags": _boundary_flags(ctx),
    })
    write_json(outdir / "paraproduct_report.json", report)
    write_csv(outdir / "paraproduct_kernel_samples.csv",
              ["x", "y", "K_b", "size_ratio"],
              zip(xs[keep], ys[keep], kvals, size_ratios))

    one = paraproduct.domain_constant(ctx.grid)
    left = paraproduct.paraproduct_apply(b, one, pcfg, b_tr)
    mask = np.abs(ctx.grid.points()) <= 0.5 * R
    write_csv(outdir / "paraproduct_identity_defect.csv",
              ["x", "pi_b_one", "b", "defect"],
              zip(ctx.grid.points()[mask], left.values[mask], b.values[mask],
                  left.values[mask] - b.values[mask]))
    gate = ctx.cfg.tolerances["identity_sup_rel"]
    ok = (identity["pi_b_one_sup_defect_rel"] < gate
          and identity["pi_b_adjoint_one_sup"] < gate)
    return 0 if ok else 1


def _structural_j_max(level: int, R: float, shift: int) -> int:
    j = 24
    while j > -24:
        side = 2.0 ** (-j - shift)
        m = side / (2.0 * R / 2.0**level)
        if m >= 2 and abs(m - round(m)) < 1e-9 and round(m) % 2 == 0:
            return j
        j -= 1
    raise ConfigurationError("no resolvable scale on this grid")


def cmd_verify_czo(ctx: Context, outdir) -> int:
    """Kernel conditions, cancellation gate, almost orthogonality, Hardy harness."""
    op = czo.make_operator(ctx.cfg.operator["name"])
    cond = czo.kernel_condition_check(op, seed=int(ctx.cfg.corpus["seed"]))
    scores = czo.cancellation_scores(op, ctx.grid)
    gate = ctx.cfg.tolerances["adjoint_pairing_gate"]
    report = _base_report(ctx)
    report.update({
        "operator": ctx.cfg.operator["name"],
        "kernel_conditions": {
            "size_sup": cond.size_sup,
            "smooth_x_sup": cond.smooth_x_sup,
            "smooth_y_sup": cond.smooth_y_sup,
            "declared_constant": cond.declared_constant,
            "passed": cond.passed,
        },
        "cancellation": scores,
    })
    if max(scores["left"], scores["right"]) > gate:
        report["refused"] = True
        report["refusal_reason"] = "cancellation hypothesis fails the pairing gate"
        write_json(outdir / "czo_report.json", report)
        return 0
    report["refused"] = False

    # stability across two grid levels with a scale range valid at both
    levels = [ctx.grid.level - 1, ctx.grid.level]
    shift = ctx.lattice.shift
    R = ctx.grid.half_width
    j_hi = min(ctx.lattice.j_max,
               min(_structural_j_max(lv, R, shift) for lv in levels))
    c_emps = {}
    for lv in levels:
        g = make_grid(R, lv)
        bank = build_filterbank(g, shift, ctx.lattice.j_min, j_hi,
                                int(ctx.cfg.filterbank.get("M", 3)))
        lat = build_lattice(g, shift, ctx.lattice.j_min, j_hi)
        rep = czo.almost_orthogonality_check(op, bank, lat, gate_tol=gate)
        c_emps[lv] = rep.c_emp
        if lv == ctx.grid.level:
            rep.export_csv(outdir / "czo_orthogonality_table.csv")
            report["orthogonality"] = {
                "scale_window": list(rep.scale_window),
                "c_emp": rep.c_emp,
            }
    factor = ctx.cfg.tolerances["stability_factor"]
    lo, hi = sorted(c_emps.values())
    stable = hi <= factor * lo
    report["orthogonality"]["c_emp_by_level"] = {str(k): v for k, v in c_emps.items()}
    report["orthogonality"]["stable"] = stable

    try:
        harness = czo.hardy_boundedness_harness(op, ctx.exponent, ctx.corpus,
                                                ctx.bank, ctx.lattice, gate)
        report["hardy_harness"] = {
            "ratios": harness.ratios,
            "max": harness.max_ratio,
            "median": harness.median_ratio,
        }
    except HypothesisViolation as exc:
        report["hardy_harness"] = {"refused": True, "reason": str(exc)}
    write_json(outdir / "czo_report.json", report)
    return 0 if stable else 1


COMMANDS = {
    "norm": cmd_norm,
    "decompose": cmd_decompose,
    "paraproduct": cmd_paraproduct,
    "verify-czo": cmd_verify_czo,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vh",
        description="Verification suites for multiscale operators on variable-exponent spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", required=True, help="output directory for reports")
        p.add_argument("--grid-level", type=int, default=None,
                       help="override grid.L from the config")
        p.add_argument("--seed", type=int, default=None,
                       help="override corpus.seed from the config")
    args = parser.parse_args(argv)

    from pathlib import Path

    try:
        cfg = load_config(args.config, args.grid_level, args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        ctx = build_context(cfg)
        code = COMMANDS[args.command](ctx, outdir)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"numerical integrity error: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except VarhardyError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: exit {code}, reports in {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
