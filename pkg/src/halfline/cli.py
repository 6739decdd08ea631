"""Command-line front end.

Subcommands drive the pipeline: `jost` (Jost table, scattering data,
resonance report), `transform` (distorted transform of a sampled function),
`kernel` (multiplier-kernel decomposition and bound fits), `sqfn`
(square-function ratios), `apscan` (A_p window classification), `window`
(weighted-norm trend experiment), and `verify` (the acceptance suite).

Exit codes: 0 success, 1 verification/computation failure, 2 usage error.
All randomness is controlled by --seed; identical config plus seed gives
byte-identical JSON reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .grids import lp_bump
from .jost import determinant_two_ways
from .lp_analysis import ap_scan, lp_window_experiment, square_function
from .multiplier import (decompose_kernel, hormander_scan, mikhlin_high_pass,
                         mikhlin_low_pass, verify_high_energy_bounds,
                         verify_low_energy_bounds)
from .pipeline import RunConfig, build_pipeline
from .spectral import forward_transform, inverse_transform, project_continuous

_FLOAT_FMT = "%.17g"


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def write_report(path: Path, payload: dict, config: RunConfig) -> None:
    payload = {"config": asdict(config), **payload}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               default=_json_default) + "\n")


def write_csv(path: Path, header: str, rows, config: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# config: " + config.to_json() + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_FLOAT_FMT % v if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, help="JSON config file (flags override)")
    p.add_argument("--potential", choices=["aubin", "free", "table"])
    p.add_argument("--a", type=float, help="Aubin scale parameter")
    p.add_argument("--table", type=str, help="tabulated potential path")
    p.add_argument("--rmax", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--grading", choices=["uniform", "graded-at-zero"])
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str, default="halfline_out")
    p.add_argument("--workers", type=int, default=1)


def config_from_args(args, parser) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file: {exc}")
    overrides = {
        "potential": args.potential, "a": args.a, "table_path": args.table,
        "r_max": args.rmax, "n": args.n, "grading": args.grading,
        "j_min": args.jmin, "j_max": args.jmax, "seed": args.seed,
    }
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    try:
        cfg = RunConfig.from_dict(base)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))
    return cfg


def _random_smooth_inputs(rgrid, rng, count=5):
    r = rgrid.nodes
    out = []
    for _ in range(count):
        f = np.zeros_like(r)
        for _ in range(6):
            c = rng.uniform(2.0, 0.4 * rgrid.r_max)
            w = rng.uniform(0.5, 3.0)
            amp = rng.standard_normal()
            t = (r - c) / w
            inside = np.abs(t) < 1.0
            f[inside] += amp * np.exp(-1.0 / (1.0 - t[inside] ** 2))
        out.append(f / rgrid.norm2(f))
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_jost(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    pipe = build_pipeline(cfg)
    sc = pipe.scattering
    pipe.jost_table.to_csv(out / "jost_table.csv") if _ensure_dir(out) else None
    rows = [(float(k), float(f.real), float(f.imag), float(d))
            for k, f, d in zip(sc.k, sc.f0, sc.wronskian_defect)]
    write_csv(out / "scattering.csv", "k,re_f0,im_f0,wronskian_defect", rows, cfg)
    rep = pipe.resonance_report()
    Ds, Dc = determinant_two_ways(sc)
    safe = np.abs(Dc) > 0
    rep["determinant_rel_defect"] = float(
        (np.abs(Ds - Dc)[safe] / np.abs(Dc)[safe]).max())
    rep["wronskian_max_defect"] = float(sc.wronskian_defect.max())
    rep["tail_error"] = sc.tail_error
    write_report(out / "resonance.json", rep, cfg)
    print(f"resonant: {rep['resonant']} (|f(0,0)| = {rep['magnitude']:.3e})")
    return 0


def _ensure_dir(out: Path) -> bool:
    out.mkdir(parents=True, exist_ok=True)
    return True


def cmd_transform(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    pipe = build_pipeline(cfg)
    try:
        data = np.loadtxt(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read input samples: {exc}", file=sys.stderr)
        return 1
    if data.ndim != 2 or data.shape[1] != 2:
        print("error: input must be a two-column (r, value) table", file=sys.stderr)
        return 1
    r_in, f = data[:, 0], data[:, 1]
    if len(r_in) != pipe.rgrid.n or not np.allclose(r_in, pipe.rgrid.nodes,
                                                    rtol=1e-9, atol=1e-12):
        print("error: input samples are not on the configured radial grid "
              f"(expected {pipe.rgrid.n} nodes on [0, {cfg.r_max}])", file=sys.stderr)
        return 1
    E = pipe.eigenbasis
    B = pipe.bound_states
    fc = project_continuous(B, f)
    F = forward_transform(E, fc, B)
    F.to_csv(out / "coefficients.csv") if _ensure_dir(out) else None
    back = inverse_transform(E, F)
    nrm = pipe.rgrid.norm2(fc)
    round_rel = float(pipe.rgrid.norm2(back - fc) / nrm) if nrm > 0 else 0.0
    comps = pipe.bound_states.components(f)
    total = pipe.rgrid.norm2(f) ** 2
    summary = {
        "roundtrip_rel_error_continuous": round_rel,
        "bound_components": [float(c) for c in comps],
        "continuous_energy_fraction": float(F.norm2_continuous() ** 2 / total) if total else 0.0,
        "bound_energy_fraction": float(np.sum(np.abs(comps) ** 2) / total) if total else 0.0,
    }
    write_report(out / "roundtrip.json", summary, cfg)
    print(f"round-trip relative error: {round_rel:.3e}")
    return 0


def cmd_kernel(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    pipe = build_pipeline(cfg)
    bump = lp_bump()
    mu = mikhlin_high_pass(bump) if args.support == "high" else mikhlin_low_pass(bump)
    D = decompose_kernel(pipe.jost_table, pipe.scattering, mu,
                         resonance_eps=cfg.resonance_eps, bump=bump)
    if args.support == "high":
        report = verify_high_energy_bounds(D)
    else:
        report = verify_low_energy_bounds(D, pipe.jost_table)
        rng = np.random.default_rng(cfg.seed)
        pairs = list(zip(rng.uniform(1, 0.4 * cfg.r_max, 50),
                         rng.uniform(1, 0.4 * cfg.r_max, 50)))
        report["hormander"] = hormander_scan(D, pairs)
    report["piece_sum_defect"] = D.piece_sum_defect()
    report["grouping_defect"] = D.grouping_defect()
    report["resonant"] = D.resonant
    write_report(out / f"kernel_{args.support}_report.json", report, cfg)
    step = max(1, len(D.r_nodes) // args.csv_nodes)
    sel = np.arange(0, len(D.r_nodes), step)
    rows = []
    pieces = {"K": D.K, "Kpp": D.Kpp, "Kmm": D.Kmm, "Kpm": D.Kpm, "Kmp": D.Kmp,
              "K1": D.K1, "K2": D.K2, "K3": D.K3}
    for name, M in pieces.items():
        Mc = np.asarray(M, dtype=complex)
        for i in sel:
            for j in sel:
                rows.append((float(D.r_nodes[i]), float(D.r_nodes[j]),
                             float(Mc[i, j].real), float(Mc[i, j].imag), name))
    write_csv(out / f"kernel_{args.support}.csv", "r,rp,re_K,im_K,piece", rows, cfg)
    print(f"kernel report written; piece-sum defect {report['piece_sum_defect']:.2e}")
    return 0


def cmd_sqfn(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    pipe = build_pipeline(cfg)
    bump = lp_bump()
    E, B = pipe.eigenbasis, pipe.bound_states
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for idx, f in enumerate(_random_smooth_inputs(pipe.rgrid, rng, args.inputs)):
        res = square_function(E, B, bump, f)
        fc = project_continuous(B, f)
        ratio = pipe.rgrid.norm2(res.sf) / pipe.rgrid.norm2(fc)
        rows.append((idx, float(ratio)))
    write_csv(out / "square_function.csv", "input,l2_ratio", rows, cfg)
    lo = min(r for _, r in rows)
    hi = max(r for _, r in rows)
    print(f"square-function L2 ratios in [{lo:.6f}, {hi:.6f}]")
    return 0


def cmd_apscan(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    ps = args.p if args.p else [1.2, 1.4, 1.5, 1.6, 2.0, 2.25, 2.5, 2.8, 3.0, 3.25]
    results = [ap_scan(p) for p in ps]
    write_report(Path(args.out) / "apscan.json", {"results": results}, cfg)
    write_csv(out / "apscan.csv", "p,s,sup_ratio,flag",
              [(r["p"], r["s"], r["sup_ratio"], r["flag"]) for r in results], cfg)
    for r in results:
        print(f"p={r['p']:<5} weight r^{r['s']:+.2f}: {r['flag']}"
              + (f" (sup {r['sup_ratio']:.3f})" if not r["divergent"] else ""))
    return 0


def cmd_window(args, parser) -> int:
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    levels = tuple(args.levels) if args.levels else (
        cfg.r_max / 4.0, cfg.r_max / 2.0, cfg.r_max)

    def build_level(r_max):
        pipe = build_pipeline(cfg.scaled(r_max), cache=False)
        return pipe.rgrid, pipe.eigenbasis, pipe.bound_states

    ps = tuple(args.p) if args.p else (1.2, 1.4, 1.6, 1.8, 2.0, 2.5, 2.8, 3.2, 4.0)
    res = lp_window_experiment(build_level, p_list=ps, levels=levels,
                               n_signs=args.signs, seed=cfg.seed)
    write_report(out / "window.json", res, cfg)
    write_csv(out / "window.csv", "p,level,bound,maximizer_id,classification",
              [(row["p"], row["level"], row["bound"], row["maximizer_id"],
                row["classification"]) for row in res["rows"]], cfg)
    for p, info in res["classification"].items():
        print(f"p={p}: slope {info['slope']:+.3f} -> {info['classification']}")
    return 0


def cmd_verify(args, parser) -> int:
    from .acceptance import run_suite
    cfg = config_from_args(args, parser)
    out = Path(args.out)
    report = run_suite(cfg, suite=args.suite)
    write_report(out / "verify_report.json", report, cfg)
    failed = [name for name, item in report["criteria"].items() if not item["pass"]]
    for name, item in report["criteria"].items():
        status = "PASS" if item["pass"] else "FAIL"
        print(f"[{status}] {name}")
    if failed:
        print("failed criteria: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="halfline",
        description="distorted Fourier transform laboratory for half-line "
                    "Schrodinger operators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_jost = sub.add_parser("jost", help="Jost table, scattering data, resonance report")
    _add_common(p_jost)

    p_tr = sub.add_parser("transform", help="distorted transform of sampled input")
    _add_common(p_tr)
    p_tr.add_argument("--input", required=True, help="two-column (r, value) sample file")

    p_k = sub.add_parser("kernel", help="multiplier kernel decomposition and bounds")
    _add_common(p_k)
    p_k.add_argument("--support", choices=["high", "low"], default="high")
    p_k.add_argument("--csv-nodes", type=int, default=96)

    p_s = sub.add_parser("sqfn", help="square-function ratio table")
    _add_common(p_s)
    p_s.add_argument("--inputs", type=int, default=5)

    p_a = sub.add_parser("apscan", help="A_p window classification")
    _add_common(p_a)
    p_a.add_argument("--p", type=float, action="append")

    p_w = sub.add_parser("window", help="weighted-norm trend experiment")
    _add_common(p_w)
    p_w.add_argument("--p", type=float, action="append")
    p_w.add_argument("--levels", type=float, action="append")
    p_w.add_argument("--signs", type=int, default=16)

    p_v = sub.add_parser("verify", help="run the acceptance suite")
    _add_common(p_v)
    p_v.add_argument("--suite", choices=["full", "free-only"], default="full")

    args = parser.parse_args(argv)
    handlers = {
        "jost": cmd_jost, "transform": cmd_transform, "kernel": cmd_kernel,
        "sqfn": cmd_sqfn, "apscan": cmd_apscan, "window": cmd_window,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args, parser)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
