"""Command-line entry point: ``curveflow verify | simulate | report``.

Exit status: 0 on success, 1 on a failed suite or a cone exit during a
simulation, 2 on configuration errors. Structured outputs (JSON lines,
JSON summaries, run tables) depend only on the configuration and seed.
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import flow, ineq
from .config import dump_config, load_config, pinching_config, speed_function
from .errors import ConfigError, CurveflowError
from .sampling import SamplerExhausted
from .symfun import fd_check

__all__ = ["main", "build_parser", "cmd_verify", "cmd_simulate", "cmd_report"]

FD_TOL = 1e-5


def _log(msg):
    print(msg, flush=True)


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=False, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


# ---------------------------------------------------------------- verify


def _suite_fd(cfg, samples, seed):
    count = min(1000, max(1, math.ceil(samples / 10)))
    g_err, h_err = fd_check(speed_function(cfg), cfg["n"], count, seed)
    rep = ineq.QReport("spectral-fd", count)
    rep.extra.update({"max_grad_err": float(g_err), "max_hess_err": float(h_err)})
    if max(g_err, h_err) > FD_TOL:
        rep.failures.append({"reason": "finite-difference mismatch",
                             "grad_err": float(g_err), "hess_err": float(h_err)})
    return rep


def _suites(cfg, pcfg, samples, seed):
    yield lambda: _suite_fd(cfg, samples, seed)
    yield lambda: ineq.verify_decomposition(pcfg, min(samples, 1000), seed)
    yield lambda: ineq.verify_Q_negativity(pcfg, samples, seed)
    yield lambda: ineq.verify_pairing(pcfg, samples, seed)
    yield lambda: ineq.verify_Q_uniform(pcfg, samples, seed)
    for C in sorted({0.0, cfg["C_delta"]}):
        yield lambda C=C: ineq.verify_Z_estimate(pcfg, samples, seed, C_delta=C)


def cmd_verify(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed, samples = cfg["seed"], cfg["samples"]
    pcfg = pinching_config(cfg)
    path = out / f"verify_seed{seed}.jsonl"
    if samples == 0:
        _log("warning: no samples requested; every suite passes vacuously")
        path.write_text("")
        return 0
    lines, failed = [], 0
    started = time.time()
    for suite in _suites(cfg, pcfg, samples, seed):
        try:
            rep = suite()
        except SamplerExhausted as exc:
            _log(f"skipped suite: {exc} (region empty for this configuration)")
            continue
        _log(rep.summary())
        record = rep.to_record()
        record["seed"] = seed
        lines.append(_dumps(record))
        if rep.failures:
            failed += 1
            ineq.write_replays(rep, out / f"replays_seed{seed}")
    path.write_text("\n".join(lines) + "\n")
    _log(f"{len(lines)} suites, {failed} failed, {time.time() - started:.1f}s -> {path}")
    return 1 if failed else 0


# -------------------------------------------------------------- simulate


def _cylinder_pattern(n, m, c_m):
    z = np.zeros(n)
    z[m:] = 1.0 / c_m
    return z


def _preset_kwargs(cfg, name, N):
    kw = {"n": cfg["n"]}
    if N is not None:
        kw["N"] = N
    if name == "dumbbell":
        kw.update(width=cfg["width"], L=4.0 * cfg["width"], amp=cfg["amp"])
    if cfg["t_max"] is not None and name in ("sphere", "cylinder"):
        kw["t_max"] = cfg["t_max"]
    return kw


def _monitor_config(cfg, profile, f):
    """Pinching config for the monitors; eta is widened to the initial data."""
    geo = flow.geometry(profile, f)
    kmin = float(np.min(np.sort(geo.Z, axis=1)[:, 0] / geo.F))
    return pinching_config(cfg, eta=max(cfg["eta"], -1.5 * kmin))


def _one_run(cfg, name, N, f):
    try:
        pre = flow.preset(name, **_preset_kwargs(cfg, name, N))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    sched = pre.schedule
    if name == "dumbbell":
        sched.F_stop_factor = cfg["F_stop"]
    extras = None
    if pre.reference is not None:
        # exact solutions: track the error through the run, not just at the end
        sched.record_every = 50
        extras = lambda profile, geo: {"error": pre.error(profile)}  # noqa: E731
    if cfg["record_every"] is not None:
        sched.record_every = cfg["record_every"]
    pcfg = _monitor_config(cfg, pre.profile, f)
    res = flow.run(pre.profile, f, pcfg, sched, extras=extras)
    return pre, pcfg, res


def _write_run(path, cfg, res):
    lines = ["# " + line for line in dump_config(cfg).splitlines()]
    lines.append("# status = " + res.status)
    lines.append("# " + " ".join(flow.MonitorRecord.COLUMNS))
    for r in res.records:
        lines.append(" ".join(repr(float(v)) for v in r.row()))
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg["preset"]
    if name not in flow.PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(flow.PRESETS)}")
    f = speed_function(cfg)
    base_N = cfg["N"] or (512 if name == "dumbbell" else 256)
    summary = {"preset": name, "n": cfg["n"], "m": cfg["m"], "f": f.name, "levels": []}
    res = pre = pcfg = None
    for level in range(cfg["refine"] + 1):
        N = base_N * 2 ** level
        pre, pcfg, res = _one_run(cfg, name, N, f)
        dt = res.dt_max
        h = pre.profile.h
        entry = {"N": N, "h": h, "dt_max": dt, "status": res.status, "steps": res.steps,
                 "t_final": res.final.t}
        if pre.reference is not None:
            entry["error"] = max(r.extras["error"] for r in res.records)
            entry["final_error"] = pre.error(res.final)
            entry["tolerance"] = 5 * (h * h + dt)
            entry["within_tolerance"] = bool(entry["error"] <= entry["tolerance"])
        summary["levels"].append(entry)
        _log(f"{name} N={N}: {res.status} after {res.steps} steps, t={res.final.t:.6g}"
             + (f", error {entry['error']:.3e} (tol {entry['tolerance']:.3e})"
                if "error" in entry else ""))
    errs = [e.get("error") for e in summary["levels"]]
    if len(errs) > 1 and errs[0] is not None:
        summary["orders"] = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        _log("observed orders in h: " + ", ".join(f"{o:.3f}" for o in summary["orders"]))
    recs = res.records
    summary["status"] = res.status
    summary["message"] = res.message
    summary["F0"] = res.F0
    summary["F_final"] = recs[-1].F_max
    if name == "dumbbell" and recs:
        beta = recs[0].subset_ratio
        verdict = flow.check_convexity_preservation(
            recs, beta, pre.profile.h, summary["levels"][-1]["dt_max"])
        pattern = _cylinder_pattern(pcfg.n, pcfg.m, pcfg.c_m)
        dist = float(np.max(np.abs(np.array(recs[-1].z_at_Fmax) - pattern)))
        five = next((r for r in recs if r.F_max >= 5 * res.F0), None)
        summary.update({
            "convexity": {"status": verdict.status, "beta": beta,
                          "min_ratio": verdict.min_ratio, "tol": verdict.tol},
            "cylinder_distance": dist,
            "G1_ratio_at_5x": five.G1_ratio_max if five else None,
            "G1_ratio_final": recs[-1].G1_ratio_max,
            "kmin_ratio_min": min(r.kmin_ratio for r in recs),
        })
        _log(f"(m+1)-convexity: {verdict.status} (min ratio {verdict.min_ratio:.6f}, "
             f"beta {beta:.6f}, tol {verdict.tol:.2e})")
        _log(f"cylindrical approach: l_inf distance {dist:.4f} at F_max/F0 = "
             f"{recs[-1].F_max / res.F0:.1f}; max G1/F {summary['G1_ratio_at_5x']:.3e} (5x) "
             f"-> {summary['G1_ratio_final']:.3e} (final)")
    _write_run(out / f"simulate_{name}.txt", cfg, res)
    if cfg["snapshots"]:
        snap = out / f"snapshots_{name}"
        snap.mkdir(exist_ok=True)
        final = res.final
        np.savetxt(snap / f"final_t{final.t:.6f}.txt", np.column_stack([final.x, final.u]),
                   header="x u", fmt="%.17g")
    (out / f"simulate_{name}.json").write_text(_dumps(_scrub(summary)) + "\n")
    return 1 if res.status == "cone-exit" else 0


def _scrub(obj):
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_scrub(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------- report


def cmd_report(args, cfg):
    out = Path(args.out)
    verify = sorted(out.glob("verify_seed*.jsonl")) if out.is_dir() else []
    sims = sorted(out.glob("simulate_*.json")) if out.is_dir() else []
    if not verify and not sims:
        raise ConfigError(f"no run artifacts in {out}")
    rows = []
    by_label = {}
    for path in verify:
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            rows.append({"kind": "verify", "name": rec["label"], "seed": rec.get("seed"),
                         "samples": rec["samples"], "passed": rec["passed"],
                         "c_eps": rec.get("c_eps"), "gamma_eps": rec.get("gamma_eps"),
                         "gamma_delta": rec.get("gamma_delta")})
            if rec.get("c_eps") is not None:
                by_label.setdefault(rec["label"], []).append(rec["c_eps"])
    for path in sims:
        rec = json.loads(path.read_text())
        row = {"kind": "simulate", "name": rec["preset"], "status": rec["status"],
               "orders": rec.get("orders"), "F_final_over_F0": rec["F_final"] / rec["F0"]}
        if "cylinder_distance" in rec:
            row["cylinder_distance"] = rec["cylinder_distance"]
            row["convexity"] = rec["convexity"]["status"]
        if rec["levels"] and "error" in rec["levels"][-1]:
            row["error"] = rec["levels"][-1]["error"]
        rows.append(row)
    stability = {label: (max(v) - min(v)) / max(v) for label, v in sorted(by_label.items())
                 if len(v) > 1 and max(v) > 0}
    report = {"rows": rows, "c_eps_relative_spread": stability}
    (out / "report.json").write_text(_dumps(_scrub(report)) + "\n")
    _log(f"{'kind':9s} {'name':44s} {'result':>10s}  details")
    for row in rows:
        if row["kind"] == "verify":
            result = "pass" if row["passed"] else "FAIL"
            detail = f"seed={row['seed']}"
            if row.get("gamma_eps") is not None:
                detail += f" gamma_eps={row['gamma_eps']:.4g} gamma_delta={row['gamma_delta']:.4g}"
            elif row.get("c_eps") is not None:
                detail += f" c={row['c_eps']:.4g}"
        else:
            result = row["status"]
            detail = f"F/F0={row['F_final_over_F0']:.1f}"
            if row.get("orders"):
                detail += " orders=" + ",".join(f"{o:.2f}" for o in row["orders"])
            if "error" in row:
                detail += f" error={row['error']:.3e}"
            if "cylinder_distance" in row:
                detail += f" cyl_dist={row['cylinder_distance']:.4f} convexity={row['convexity']}"
        _log(f"{row['kind']:9s} {row['name']:44s} {result:>10s}  {detail}")
    for label, spread in stability.items():
        _log(f"c_eps spread across seeds for {label}: {100 * spread:.2f}%")
    return 0


# ------------------------------------------------------------------ main


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, metavar="U64", help="overrides config seed")
    common.add_argument("--out", default="curveflow_out", metavar="DIR", help="output directory")
    common.add_argument("--samples", type=int, metavar="N", help="overrides config samples")
    common.add_argument("--refine", type=int, metavar="K", help="extra grid refinements")
    common.add_argument("--preset", metavar="NAME", help="sphere | cylinder | dumbbell")
    parser = argparse.ArgumentParser(prog="curveflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the inequality suites")
    sub.add_parser("simulate", parents=[common], help="evolve a preset profile")
    sub.add_parser("report", parents=[common], help="summarize prior outputs")
    return parser


COMMANDS = {"verify": cmd_verify, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config)
        for key in ("seed", "samples", "refine", "preset"):
            value = getattr(args, key)
            if value is not None:
                cfg[key] = value
        if cfg["samples"] < 0 or cfg["refine"] < 0:
            raise ConfigError("samples and refine must be >= 0")
        if not 0 <= cfg["seed"] < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CurveflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
