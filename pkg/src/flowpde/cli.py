"""Command-line front end: configuration loading, orchestration, and
persistence (JSON configs/results, CSV diagnostics, FLD1 fields).

Every run writes manifest.json (resolved config, package versions, seed,
argv) into the output directory; replaying the recorded argv reproduces the
outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalFault, ValidationFault
from .flow import expand_pathwise, flow_expected, mu_grid_geometric
from .harness import (
    ExperimentPlan,
    Observable,
    run_universality,
)
from .kernels import default_g, invariant_battery
from .lattice import SPACE_ONLY, Field, LatticeSpec, read_fld1, write_fld1
from .model import ModelSpec, Monomial, RenormScheme, _norm_index
from .noise import NoiseModel, estimate_cumulants, sample_macroscopic_noise
from .norms import scale_norm
from .solver import SolveConfig, solve_decomposed, solve_with_patching

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# -- configuration ----------------------------------------------------------


def noise_from_config(cfg: dict) -> NoiseModel:
    return NoiseModel(
        kind=cfg.get("kind", "mollified_white"),
        nu=float(cfg.get("nu", 0.1)),
        master_seed=int(cfg.get("master_seed", 0)),
        family=cfg.get("family", "bump"),
        rate=float(cfg.get("rate", 40.0)),
        resolution_policy=cfg.get("resolution_policy", "strict"),
    )


def model_from_config(cfg: dict) -> ModelSpec:
    monomials = tuple(
        Monomial(
            i=int(m["i"]),
            m=int(m["m"]),
            a=m.get("a", 0),
            base=float(m.get("base", 0.0)),
            extra_exponent=float(m.get("extra_exponent", 0.0)),
        )
        for m in cfg.get("monomials", [])
    )
    noise = noise_from_config(cfg["noise"]) if "noise" in cfg else None
    return ModelSpec(
        d=int(cfg["d"]),
        sigma=float(cfg["sigma"]),
        dim_lambda=float(cfg["dim_lambda"]),
        lam=float(cfg.get("lam", 1.0)),
        monomials=monomials,
        symmetry=cfg.get("symmetry", "none"),
        noise=noise,
    )


def lattice_from_config(model: ModelSpec, cfg: dict) -> LatticeSpec:
    lat = cfg.get("lattice", {})
    return LatticeSpec(
        model.d,
        int(lat.get("n", 64)),
        float(lat.get("dt", 0.01)),
        float(lat.get("t_min", 0.0)),
        float(lat.get("t_max", 1.0)),
        model.sigma,
    )


def scheme_from_config(model: ModelSpec, entries) -> RenormScheme:
    values = {}
    for e in entries or []:
        a = tuple(sorted(_norm_index(e.get("a", 0), int(e["m"]), model.d)))
        values[(int(e["i"]), int(e["m"]), a)] = float(e["value"])
    return RenormScheme.for_model(model, values)


def solve_from_config(cfg: dict) -> SolveConfig:
    s = cfg.get("solve", {})
    return SolveConfig(
        scheme=s.get("scheme", "etd_rk2"),
        t_local=float(s.get("t_local", 0.25)),
        blow_up_radius=float(s.get("blow_up_radius", 50.0)),
        max_horizon=float(s.get("max_horizon", 1.0)),
        dealias=bool(s.get("dealias", True)),
        gamma=s.get("gamma"),
    )


def plan_from_config(cfg: dict) -> ExperimentPlan:
    variants = tuple(
        (v["label"], model_from_config(v["model"])) for v in cfg["variants"]
    )
    model0 = variants[0][1]
    observables = tuple(
        Observable(
            kind=o.get("kind", "slice_moment"),
            p=int(o.get("p", 2)),
            time=float(o.get("time", 0.5)),
            lag=tuple(o.get("lag", ())),
        )
        for o in cfg.get("observables", [{}])
    )
    scheme_values = []
    for e in cfg.get("scheme", []):
        a = tuple(sorted(_norm_index(e.get("a", 0), int(e["m"]), model0.d)))
        scheme_values.append(((int(e["i"]), int(e["m"]), a), float(e["value"])))
    overrides = []
    for o in cfg.get("counterterm_overrides", []):
        entries = []
        for e in o["entries"]:
            a = tuple(sorted(_norm_index(e.get("a", 0), int(e["m"]), model0.d)))
            entries.append(((int(e["i"]), int(e["m"]), a), float(e["value"])))
        overrides.append((o["label"], tuple(entries)))
    return ExperimentPlan(
        variants=variants,
        nu_schedule=tuple(float(x) for x in cfg["nu_schedule"]),
        samples=int(cfg["samples"]),
        n=int(cfg["n"]),
        dt=float(cfg["dt"]),
        t_max=float(cfg["t_max"]),
        observables=observables,
        scheme_values=tuple(scheme_values),
        counterterm_overrides=tuple(overrides),
        solve=solve_from_config(cfg),
        history=float(cfg.get("history", 2.0)),
        use_shift=bool(cfg.get("use_shift", True)),
        coupling=bool(cfg.get("coupling", True)),
        flow_j_levels=int(cfg.get("flow_j_levels", 8)),
        flow_nodes_per_octave=int(cfg.get("flow_nodes_per_octave", 8)),
    )


# -- persistence ------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _key_str(key) -> str:
    i, m, a = key
    return f"{i};{m};{list(list(aq) for aq in a)}"


def write_manifest(out: Path, args, config) -> None:
    manifest = {
        "argv": sys.argv[1:],
        "command": args.command,
        "config": config,
        "versions": {
            "flowpde": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
        "threads": os.environ.get("FLOWPDE_THREADS", ""),
    }
    _write_json(out / "manifest.json", manifest)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValidationFault(f"config file not found: {p}")
    return json.loads(p.read_text())


# -- subcommands ------------------------------------------------------------


def cmd_kernels(args) -> int:
    out = _outdir(args)
    rows = invariant_battery(d=args.d, sigma=args.sigma, n=args.n)
    _write_csv(
        out / "kernels.csv",
        ["check_name", "parameter", "value", "expected", "pass"],
        [
            [r["check"], r["parameter"], repr(r["value"]), repr(r["tol"]), r["pass"]]
            for r in rows
        ],
    )
    write_manifest(out, args, {"d": args.d, "sigma": args.sigma, "n": args.n})
    ok = all(r["pass"] for r in rows)
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['check']}: {r['value']:.3e} (tol {r['tol']:.3e})")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_noise(args) -> int:
    cfg = _load_config(args.model)
    model = model_from_config(cfg)
    if model.noise is None:
        raise ValidationFault("model config lacks a noise block")
    nm = model.noise if args.nu is None else model.noise.with_nu(args.nu)
    spec = lattice_from_config(model, cfg)
    out = _outdir(args)
    fields = [
        sample_macroscopic_noise(nm, spec, s, history=0.0) for s in range(args.samples)
    ]
    write_fld1(out / "sample0.fld", fields[0])
    lags = [(0,) * (1 + model.d), (0,) + (1,) + (0,) * (model.d - 1)]
    rows = []
    for order in range(2, args.order + 1):
        est = estimate_cumulants(fields, order, lags)
        for lag, v, se in zip(est.lags, est.values, est.standard_errors):
            rows.append([order, str(lag), repr(float(v)), repr(float(se)), est.samples])
    _write_csv(out / "cumulants.csv", ["order", "lag", "value", "se", "samples"], rows)
    write_manifest(out, args, cfg)
    print(f"wrote {args.samples} samples' cumulant table to {out / 'cumulants.csv'}")
    return EXIT_OK


def cmd_renorm(args) -> int:
    cfg = _load_config(args.model)
    model = model_from_config(cfg)
    nu = args.nu if args.nu is not None else (model.noise.nu if model.noise else 0.1)
    spec = lattice_from_config(model, cfg)
    scheme = scheme_from_config(model, cfg.get("scheme"))
    out = _outdir(args)
    coeffs, ct = flow_expected(model, spec, nu, scheme, i_max=args.imax)
    payload = {
        "nu": nu,
        "entries": [
            {
                "i": k[0],
                "m": k[1],
                "a": [list(aq) for aq in k[2]],
                "value": v,
                "provenance": ct.provenance[k],
                "quad_err": float(ct.diagnostics["quad_error"].get(k, 0.0)),
            }
            for k, v in sorted(ct.entries.items())
        ],
        "diagnostics": {
            k: float(v)
            for k, v in ct.diagnostics.items()
            if isinstance(v, (int, float))
        },
    }
    _write_json(out / "ct.json", payload)
    rows = []
    for k, (mus, vals) in sorted(coeffs.expected.items()):
        for mu, val in zip(mus, vals):
            rows.append([_key_str(k), repr(float(mu)), repr(float(val))])
    _write_csv(out / "flow_curves.csv", ["index", "mu", "value"], rows)
    write_manifest(out, args, cfg)
    for e in payload["entries"]:
        print(f"(i={e['i']}, m={e['m']}) -> {e['value']:.8g} [{e['provenance']}]")
    return EXIT_OK


def cmd_expand(args) -> int:
    cfg = _load_config(args.model)
    model = model_from_config(cfg)
    if model.noise is None:
        raise ValidationFault("model config lacks a noise block")
    nm = model.noise if args.nu is None else model.noise.with_nu(args.nu)
    spec = lattice_from_config(model, cfg)
    scheme = scheme_from_config(model, cfg.get("scheme"))
    _, ct = flow_expected(model, spec, nm.nu, scheme)
    noise = sample_macroscopic_noise(nm, spec, args.sample, history=2.0)
    expansion = expand_pathwise(model, ct, noise, args.order)
    out = _outdir(args)
    for i in range(args.order + 1):
        write_fld1(out / f"f_{i}.fld", expansion["f"][i])
        write_fld1(out / f"psi_{i}.fld", expansion["psi"][i])
    write_manifest(out, args, cfg)
    print(f"wrote pathwise hierarchy through order {args.order} to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.model)
    model = model_from_config(cfg)
    if model.noise is None:
        raise ValidationFault("model config lacks a noise block")
    nm = model.noise if args.nu is None else model.noise.with_nu(args.nu)
    if args.seed is not None:
        nm = NoiseModel(nm.kind, nm.nu, args.seed, nm.family, nm.rate, nm.resolution_policy)
    import dataclasses

    model = dataclasses.replace(model, noise=nm)
    spec = lattice_from_config(model, cfg)
    scheme = scheme_from_config(model, cfg.get("scheme"))
    _, ct = flow_expected(model, spec, nm.nu, scheme)
    solve_cfg = solve_from_config(cfg)
    noise = sample_macroscopic_noise(nm, spec, args.sample, history=2.0)
    zero = Field(spec, np.zeros(spec.space_shape()), SPACE_ONLY)
    if args.shift:
        res = solve_decomposed(model, ct, noise, zero, solve_cfg)
    else:
        res = solve_with_patching(model, ct, noise, zero, solve_cfg)
    out = _outdir(args)
    write_fld1(out / "trajectory.fld", res.trajectory)
    tspec = res.trajectory.spec
    rows = [
        [repr(float(tspec.t_min + j * tspec.dt)), repr(float(v)), res.status]
        for j, v in enumerate(res.slice_norms)
    ]
    _write_csv(out / "norms.csv", ["t", "c_gamma_norm", "status"], rows)
    write_manifest(out, args, cfg)
    print(f"status={res.status} breve_T={res.breve_T:.6g}")
    return EXIT_OK


def cmd_universality(args) -> int:
    cfg = _load_config(args.plan)
    plan = plan_from_config(cfg)
    report = run_universality(plan)
    out = _outdir(args)
    _write_csv(
        out / "report.csv",
        ["variant", "nu", "observable", "estimate", "se", "gap", "gap_se", "verdict"],
        [
            [
                r["variant"],
                repr(float(r["nu"])),
                r["observable"],
                repr(float(r["estimate"])),
                repr(float(r["se"])),
                repr(float(r["gap"])) if r["gap"] != "" else "",
                repr(float(r["gap_se"])) if r["gap_se"] != "" else "",
                r["verdict"],
            ]
            for r in report.rows()
        ],
    )
    _write_json(out / "verdict.json", report.verdict)
    write_manifest(out, args, cfg)
    print(f"verdict: {report.verdict['label']}")
    return EXIT_OK


def cmd_norms(args) -> int:
    f = read_fld1(args.field)
    out = _outdir(args)
    g = args.g if args.g is not None else default_g(f.spec.sigma)
    report = scale_norm(f, args.alpha, g)
    rows = [
        [repr(float(mu)), repr(float(raw)), repr(float(wt)), rel]
        for mu, raw, wt, rel in zip(
            report.mu_values, report.raw_norms, report.weighted, report.reliable
        )
    ]
    rows.append(["sup", repr(float(report.sup)), repr(float(report.slope)), True])
    _write_csv(out / "scale_norm.csv", ["mu", "raw_norm", "weighted", "reliable"], rows)
    write_manifest(out, args, {"field": str(args.field), "alpha": args.alpha, "g": g})
    print(f"sup={report.sup:.6g} slope={report.slope:.4f}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="flowpde", description="flow-equation SPDE laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernels", help="kernel identity battery")
    k.add_argument("--check", action="store_true")
    k.add_argument("--d", type=int, default=1)
    k.add_argument("--sigma", type=float, default=0.5)
    k.add_argument("--n", type=int, default=64)
    k.add_argument("--out", default="out")
    k.set_defaults(func=cmd_kernels)

    n = sub.add_parser("noise", help="sample noise and estimate cumulants")
    n.add_argument("--model", required=True)
    n.add_argument("--nu", type=float, default=None)
    n.add_argument("--samples", type=int, default=16)
    n.add_argument("--order", type=int, default=3)
    n.add_argument("--out", default="out")
    n.set_defaults(func=cmd_noise)

    r = sub.add_parser("renorm", help="integrate the expectation flow")
    r.add_argument("--model", required=True)
    r.add_argument("--nu", type=float, default=None)
    r.add_argument("--imax", type=int, default=2)
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_renorm)

    e = sub.add_parser("expand", help="pathwise stationary hierarchy")
    e.add_argument("--model", required=True)
    e.add_argument("--nu", type=float, default=None)
    e.add_argument("--order", type=int, default=1)
    e.add_argument("--sample", type=int, default=0)
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_expand)

    s = sub.add_parser("simulate", help="solve the mild equation")
    s.add_argument("--model", required=True)
    s.add_argument("--nu", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--sample", type=int, default=0)
    s.add_argument("--shift", action="store_true", help="use the stationary-shift split")
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_simulate)

    u = sub.add_parser("universality", help="coupled ensemble comparison")
    u.add_argument("--plan", required=True)
    u.add_argument("--out", default="out")
    u.set_defaults(func=cmd_universality)

    m = sub.add_parser("norms", help="scale-indexed seminorm report")
    m.add_argument("--field", required=True)
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--g", type=int, default=None)
    m.add_argument("--out", default="out")
    m.set_defaults(func=cmd_norms)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    threads = os.environ.get("FLOWPDE_THREADS")
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    try:
        return args.func(args)
    except ValidationFault as exc:
        print(f"validation fault: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
