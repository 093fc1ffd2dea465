"""Command-line front end.

Subcommands: ``analyze`` (Jordan data, adapted form, envelope constant for a
matrix), ``verify`` (envelope dominance against the exact propagator),
``family`` (uniform-in-parameter envelopes of the 2x2 rate family), and the
three model experiments ``model-cd``, ``model-gt``, ``model-fp``.

Outputs are deterministic for a fixed configuration: CSV values are printed
with 17 significant digits (lossless double round-trip) and all sweeps run
in a fixed order.  The LYAPDECAY_THREADS environment variable is accepted
and recorded for provenance; the computation itself is single-threaded, so
results do not depend on it.  Exit codes: 0 ok, 1 bound violation, 2 invalid
input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import convection_diffusion as cd
from . import family as fam
from . import fokker_planck as fp
from . import goldstein_taylor as gt
from .jordan import JordanAmbiguityError, jordan_chains
from .linalg import load_matrix_json
from .lyapunov import DecayEnvelope, build_form, decay_constant, suggest_case3_weights
from .oracle import check_dominance

EXIT_OK = 0
EXIT_BOUND_VIOLATION = 1
EXIT_INVALID_INPUT = 2


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_csv(path: str | None, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_json(path: str | None, obj: dict) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ValueError(f"grid spec must be lo:hi:n, got {spec!r}") from exc


def _merge_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """CLI flags override config-file values override defaults."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    resolved = {}
    for key, default in parser_defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            resolved[key] = cli_val
        elif key in cfg:
            resolved[key] = cfg[key]
        else:
            resolved[key] = default
    resolved["threads_env"] = os.environ.get("LYAPDECAY_THREADS")
    return resolved


def _analysis_pipeline(matrix, rel_tol: float, cluster_tol: float, weights=None):
    structure = jordan_chains(matrix, rel_tol=rel_tol, cluster_rel_tol=cluster_tol)
    block_weights = None
    if weights == "heuristic":
        # inverse-squared chain norms keep P(0) conditioned in collapse limits
        block_weights = {
            n: suggest_case3_weights(structure.blocks[n])
            for n in structure.defective_gap_indices
        }
    elif weights:
        block_weights = {i: np.asarray(w, dtype=float) for i, w in enumerate(weights)}
    form = build_form(structure, block_weights=block_weights)
    env = decay_constant(structure, form)
    return structure, form, env


def cmd_analyze(args) -> int:
    defaults = {"rel_tol": 1e-8, "cluster_tol": 3e-4, "out": None}
    cfg = _merge_config(args, defaults)
    matrix = load_matrix_json(args.matrix)
    weights = args.weights
    if weights and weights != "heuristic":
        weights = json.loads(weights)
    structure, form, env = _analysis_pipeline(
        matrix, cfg["rel_tol"], cfg["cluster_tol"], weights
    )
    report = {
        "config": cfg,
        "mu": structure.mu,
        "M": structure.max_defective_block,
        "I_mu": sorted(structure.defective_gap_indices),
        "structure": structure.to_json(),
        "form": form.to_json(),
        "C_const": env.C_const,
        "envelope": env.to_json(),
    }
    _write_json(cfg["out"], report)
    return EXIT_OK


def cmd_verify(args) -> int:
    defaults = {
        "rel_tol": 1e-8,
        "cluster_tol": 3e-4,
        "t_max": 50.0,
        "points": 200,
        "out": None,
    }
    cfg = _merge_config(args, defaults)
    matrix = load_matrix_json(args.matrix)
    if args.c_const is not None or args.mu is not None or args.m is not None:
        if None in (args.c_const, args.mu, args.m):
            raise ValueError("--c-const, --mu and --m must be given together")
        env = DecayEnvelope(args.c_const, args.mu, args.m)
    else:
        _, _, env = _analysis_pipeline(matrix, cfg["rel_tol"], cfg["cluster_tol"])
    times = np.concatenate([[0.0], np.geomspace(1e-3, cfg["t_max"], int(cfg["points"]) - 1)])
    report = check_dominance(matrix, env, times)
    _write_csv(cfg["out"], ["t", "propagator_sq", "bound", "ratio"], report.to_rows())
    if not report.dominated:
        print(f"dominance violated: max_ratio = {report.max_ratio:.6e}", file=sys.stderr)
        return EXIT_BOUND_VIOLATION
    return EXIT_OK


def cmd_family(args) -> int:
    defaults = {
        "family": "quadratic",
        "alpha": 1.0,
        "beta": 1.0,
        "mu_min": 1.0,
        "t_max": 20.0,
        "points": 100,
        "z_max": 6.0,
        "z_points": 241,
        "out": None,
    }
    cfg = _merge_config(args, defaults)
    zg = np.linspace(-cfg["z_max"], cfg["z_max"], int(cfg["z_points"]))
    if cfg["family"] == "quadratic":
        family = fam.quadratic_family(cfg["alpha"], cfg["mu_min"], z_grid=zg)
        env_fn = lambda t: fam.uniform_envelope_quadratic(cfg["alpha"], cfg["mu_min"], t)
    elif cfg["family"] == "exponential":
        family = fam.exponential_family(cfg["alpha"], cfg["beta"], cfg["mu_min"], z_grid=zg)
        env_fn = lambda t: fam.uniform_envelope_exponential(
            cfg["alpha"], cfg["beta"], cfg["mu_min"], t
        )
    elif cfg["family"] == "constant":
        family = fam.constant_family(cfg["mu_min"], z_grid=zg)
        env_fn = lambda t: np.exp(-2.0 * cfg["mu_min"] * t)
    else:
        raise ValueError(f"unknown family {cfg['family']!r}")
    ts = np.linspace(0.0, cfg["t_max"], int(cfg["points"]))
    sup = fam.grid_sup_envelope(family, ts)
    env = np.array([env_fn(t) for t in ts])
    rows = zip(ts, sup, env, sup / env)
    _write_csv(cfg["out"], ["t", "grid_sup_propagator_sq", "envelope", "ratio"], rows)
    return EXIT_OK if np.all(sup <= env * (1.0 + 1e-9)) else EXIT_BOUND_VIOLATION


def _cd_field(spec: str) -> cd.CoefficientField:
    if spec == "builtin:tanh":
        return cd.tanh_field()
    if spec == "builtin:trig":
        return cd.trig_field()
    with open(spec) as fh:
        data = json.load(fh)
    return cd.tabulated_coefficient_field(
        data["z"], data["a"], data["b"], data["da"], data["db"],
        d2a=data.get("d2a"), d2b=data.get("d2b"), b0=data.get("b0"),
    )


def cmd_model_cd(args) -> int:
    defaults = {
        "order": 1,
        "coeffs": "builtin:tanh",
        "z_grid": "-3:3:13",
        "K": 32,
        "t_max": 10.0,
        "t_points": 50,
        "out": None,
        "report": None,
    }
    cfg = _merge_config(args, defaults)
    field = _cd_field(cfg["coeffs"])
    zg = _parse_grid(cfg["z_grid"])
    ts = np.linspace(0.0, cfg["t_max"], int(cfg["t_points"]))
    order = int(cfg["order"])
    rep = cd.theorem_bound_check(
        field,
        lambda z: cd.gaussian_bump_state(int(cfg["K"]), order=order, v_amp=0.3, z=z),
        zg,
        ts,
        order=order,
    )
    rows = [
        (z, t, rep["norm_sq"][i, j], rep["bound"][j], rep["ratio"][i, j])
        for i, z in enumerate(zg)
        for j, t in enumerate(ts)
    ]
    _write_csv(cfg["out"], ["z", "t", "norm_sq", "bound", "ratio"], rows)
    _write_json(
        cfg["report"],
        {
            "config": cfg,
            "constants": rep["constants"],
            "max_ratio": rep["max_ratio"],
            "passed": rep["passed"],
            "initial_sup": rep["initial_sup"],
            "tail_fraction": rep["tail_fraction"],
        },
    )
    return EXIT_OK if rep["passed"] else EXIT_BOUND_VIOLATION


def _gt_field(spec: str) -> gt.RelaxationField:
    if spec == "builtin:tanh":
        return gt.tanh_relaxation()
    with open(spec) as fh:
        data = json.load(fh)
    z = np.asarray(data["z"], dtype=float)
    sig = np.asarray(data["sigma"], dtype=float)
    dsig = np.asarray(data["dsigma"], dtype=float)
    return gt.relaxation_field(
        sigma=lambda zz: float(np.interp(zz, z, sig)),
        dsigma=lambda zz: float(np.interp(zz, z, dsig)),
        sigma0=data.get("sigma0", float(np.min(sig))),
        sigma1=data.get("sigma1", float(np.max(sig))),
        L=data.get("L", float(np.max(np.abs(dsig)))),
    )


def cmd_model_gt(args) -> int:
    defaults = {
        "sigma": "builtin:tanh",
        "z_grid": "-3:3:13",
        "K": 32,
        "k_max": 64,
        "t_max": 20.0,
        "t_points": 50,
        "out": None,
        "report": None,
    }
    cfg = _merge_config(args, defaults)
    field = _gt_field(cfg["sigma"])
    zg = _parse_grid(cfg["z_grid"])
    ts = np.linspace(0.0, cfg["t_max"], int(cfg["t_points"]))
    uniform = gt.gt_uniform_constant(field, k_max=int(cfg["k_max"]))
    rep = gt.gt_theorem_check(
        field, lambda z: gt.gt_bump_state(int(cfg["K"]), z=z), zg, ts, uniform=uniform
    )
    rows = [
        (z, t, rep["norm_sq"][i, j], rep["bound"][j], rep["ratio"][i, j])
        for i, z in enumerate(zg)
        for j, t in enumerate(ts)
    ]
    _write_csv(cfg["out"], ["z", "t", "norm_sq", "bound", "ratio"], rows)
    _write_json(
        cfg["report"],
        {
            "config": cfg,
            "uniform": uniform,
            "max_ratio": rep["max_ratio"],
            "passed": rep["passed"],
            "initial_sup": rep["initial_sup"],
        },
    )
    return EXIT_OK if rep["passed"] else EXIT_BOUND_VIOLATION


def _fp_field(spec: str) -> fp.DriftField:
    if spec == "builtin:sin":
        return fp.sin_drift()
    with open(spec) as fh:
        data = json.load(fh)
    z = np.asarray(data["z"], dtype=float)
    a = np.asarray(data["a"], dtype=float)
    da = np.asarray(data["da"], dtype=float)
    return fp.drift_field(
        a=lambda zz: float(np.interp(zz, z, a)),
        da=lambda zz: float(np.interp(zz, z, da)),
        a0=data.get("a0", float(np.min(a))),
        sup_da=data.get("sup_da", float(np.max(np.abs(da)))),
    )


def cmd_model_fp(args) -> int:
    defaults = {
        "drift": "builtin:sin",
        "variant": "drift",
        "z_grid": "0:6.283185307179586:13",
        "K": 40,
        "t_max": 12.0,
        "t_points": 40,
        "out": None,
        "report": None,
    }
    cfg = _merge_config(args, defaults)
    zg = _parse_grid(cfg["z_grid"])
    ts = np.linspace(0.0, cfg["t_max"], int(cfg["t_points"]))
    if cfg["variant"] == "diffusion":
        dfield = fp.diffusion_field(
            lambda z: 1.0 + 0.25 * np.sin(z), lambda z: 0.25 * np.cos(z), 0.75
        )
        rows = []
        worst = 0.0
        for k in range(3, 9):
            for z in zg:
                a_mat, envm = fp.fp_diffusion_variant(k, z, dfield)
                rep = check_dominance(a_mat, envm, ts)
                worst = max(worst, rep.max_ratio)
                rows += [
                    (k, z, t, p, b, p / b)
                    for t, p, b in zip(rep.times, rep.propagator_sq, rep.bound)
                ]
        _write_csv(cfg["out"], ["k", "z", "t", "propagator_sq", "bound", "ratio"], rows)
        _write_json(cfg["report"], {"config": cfg, "max_ratio": worst, "passed": worst <= 1 + 1e-9})
        return EXIT_OK if worst <= 1 + 1e-9 else EXIT_BOUND_VIOLATION
    field = _fp_field(cfg["drift"])
    rep = fp.fp_theorem_check(
        field,
        lambda z: fp.fp_gaussian_state(field, z=z, K=int(cfg["K"])),
        zg,
        ts,
    )
    rows = [
        (z, t, rep["norm_sq"][i, j], rep["bound"][j], rep["ratio"][i, j])
        for i, z in enumerate(zg)
        for j, t in enumerate(ts)
    ]
    _write_csv(cfg["out"], ["z", "t", "norm_sq", "bound", "ratio"], rows)
    _write_json(
        cfg["report"],
        {
            "config": cfg,
            "constants": rep["constants"],
            "max_ratio": rep["max_ratio"],
            "passed": rep["passed"],
            "initial_sup": rep["initial_sup"],
            "tail_fraction": rep["tail_fraction"],
        },
    )
    return EXIT_OK if rep["passed"] else EXIT_BOUND_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lyapdecay", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="Jordan structure, adapted form and envelope constant")
    pa.add_argument("--matrix", required=True, help="matrix JSON file")
    pa.add_argument("--weights", help="JSON list of per-block weight lists, or 'heuristic'")
    pa.add_argument("--rel-tol", dest="rel_tol", type=float)
    pa.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    pa.add_argument("--config")
    pa.add_argument("--out")
    pa.set_defaults(func=cmd_analyze)

    pv = sub.add_parser("verify", help="check envelope dominance against the propagator")
    pv.add_argument("--matrix", required=True)
    pv.add_argument("--t-max", dest="t_max", type=float)
    pv.add_argument("--points", type=int)
    pv.add_argument("--c-const", dest="c_const", type=float)
    pv.add_argument("--mu", type=float)
    pv.add_argument("--m", type=int)
    pv.add_argument("--rel-tol", dest="rel_tol", type=float)
    pv.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    pv.add_argument("--config")
    pv.add_argument("--out")
    pv.set_defaults(func=cmd_verify)

    pf = sub.add_parser("family", help="uniform-in-parameter envelopes of the 2x2 rate family")
    pf.add_argument("--family", choices=["quadratic", "exponential", "constant"])
    pf.add_argument("--alpha", type=float)
    pf.add_argument("--beta", type=float)
    pf.add_argument("--mu-min", dest="mu_min", type=float)
    pf.add_argument("--t-max", dest="t_max", type=float)
    pf.add_argument("--points", type=int)
    pf.add_argument("--z-max", dest="z_max", type=float)
    pf.add_argument("--z-points", dest="z_points", type=int)
    pf.add_argument("--config")
    pf.add_argument("--out")
    pf.set_defaults(func=cmd_family)

    pcd = sub.add_parser("model-cd", help="convection-diffusion sensitivity bound check")
    pcd.add_argument("--order", type=int, choices=[1, 2])
    pcd.add_argument("--coeffs")
    pcd.add_argument("--z-grid", dest="z_grid")
    pcd.add_argument("--K", type=int)
    pcd.add_argument("--t-max", dest="t_max", type=float)
    pcd.add_argument("--t-points", dest="t_points", type=int)
    pcd.add_argument("--config")
    pcd.add_argument("--out")
    pcd.add_argument("--report")
    pcd.set_defaults(func=cmd_model_cd)

    pgt = sub.add_parser("model-gt", help="two-velocity relaxation sensitivity bound check")
    pgt.add_argument("--sigma")
    pgt.add_argument("--z-grid", dest="z_grid")
    pgt.add_argument("--K", type=int)
    pgt.add_argument("--k-max", dest="k_max", type=int)
    pgt.add_argument("--t-max", dest="t_max", type=float)
    pgt.add_argument("--t-points", dest="t_points", type=int)
    pgt.add_argument("--config")
    pgt.add_argument("--out")
    pgt.add_argument("--report")
    pgt.set_defaults(func=cmd_model_gt)

    pfp = sub.add_parser("model-fp", help="Fokker-Planck sensitivity bound check")
    pfp.add_argument("--drift")
    pfp.add_argument("--variant", choices=["drift", "diffusion"])
    pfp.add_argument("--z-grid", dest="z_grid")
    pfp.add_argument("--K", type=int)
    pfp.add_argument("--t-max", dest="t_max", type=float)
    pfp.add_argument("--t-points", dest="t_points", type=int)
    pfp.add_argument("--config")
    pfp.add_argument("--out")
    pfp.add_argument("--report")
    pfp.set_defaults(func=cmd_model_fp)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError, JordanAmbiguityError) as exc:
        # NotPositiveStableError is a ValueError and lands here as well
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
