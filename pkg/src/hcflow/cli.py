"""Batch front-end.

Physics goes in a JSON manifest, flags only carry paths and process
options, so a manifest plus the package version pins a run completely.
Artifacts per run: series.csv (fixed column order), report.json (sorted
keys), snapshots/*.txt, all byte-identical on rerun.

Exit codes (frozen): 0 finished (TimeEnd/Converged), 2 bad config or
input, 3 invariant violation stopped the run, 4 step collapse. The
check-speed verb exits 1 when the certification table has a failing row.

Verbs::

    hcflow run CONFIG.json --out DIR
    hcflow sweep SWEEP.json --out DIR --jobs 4
    hcflow check-speed "Ek_root(2)" --n 3 [--alpha A --samples C --seed S]
    hcflow sphere-table --n 2 --k 0 1 2 --r-min 0.2 --r-max 2.0 --count 10
    hcflow render snapshots/snap_0004.txt --out body.svg
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .diagnostics import analyze_run
from .errors import ConfigError, HcflowError
from .flowcore import (
    CONVERGED,
    INVARIANT_VIOLATION,
    STEP_COLLAPSE,
    TIME_END,
    Constraint,
    FlowConfig,
    MonitorThresholds,
    run_flow,
    series_columns,
    series_table,
)
from .hsurface import read_snapshot, to_klein, write_snapshot
from .measures import ball_W, ball_W_inverse
from .shapes import (
    horo_contact_body,
    offset_circle,
    perturbed_circle,
    perturbed_sphere,
    sphere,
)
from .symfunc import check_admissible, default_samples, resolve_speed

REPORT_SCHEMA = "hcflow-report-v1"

_SHAPES = {
    "sphere": sphere,
    "perturbed_circle": perturbed_circle,
    "perturbed_sphere": perturbed_sphere,
    "offset_circle": offset_circle,
    "horo_contact_body": horo_contact_body,
}

_EXIT_BY_TERMINATION = {
    TIME_END: 0,
    CONVERGED: 0,
    INVARIANT_VIOLATION: 3,
    STEP_COLLAPSE: 4,
}


# ---------------------------------------------------------------------------
# manifest -> run inputs


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}{key}", "required field is missing")
    return doc[key]


def _reject_unknown(doc: dict, allowed, path: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{path}{key}", "unknown field")


def build_run_inputs(doc, base_dir="."):
    """Validate a manifest document and construct (config, state, options)."""
    if not isinstance(doc, dict):
        raise ConfigError("manifest", "top level must be a JSON object")
    _reject_unknown(
        doc,
        {
            "n", "speed", "constraint", "scheme", "t_end", "cfl", "dt_fixed",
            "output_interval", "monitor_refresh", "renormalize",
            "terminal_deviation", "thresholds", "initial", "modes", "seed",
        },
        "",
    )
    n = _require(doc, "n", "")

    spd_doc = _require(doc, "speed", "")
    _reject_unknown(spd_doc, {"name", "alpha"}, "speed.")
    speed = resolve_speed(
        str(_require(spd_doc, "name", "speed.")),
        n=n,
        alpha=float(spd_doc.get("alpha", 1.0)),
    )

    con_doc = _require(doc, "constraint", "")
    _reject_unknown(con_doc, {"kind", "k"}, "constraint.")
    kind = _require(con_doc, "kind", "constraint.")
    constraint = Constraint(kind, int(con_doc.get("k", 1 if kind == "quermass" else 0)))

    kwargs = {}
    if "thresholds" in doc:
        th = doc["thresholds"]
        _reject_unknown(
            th,
            {"h_convex_tol", "w_drift_rel", "f_bound_factor", "enforce_w_drift",
             "enforce_f_bound"},
            "thresholds.",
        )
        kwargs["thresholds"] = MonitorThresholds(**th)
    for key in ("scheme", "t_end", "cfl", "dt_fixed", "output_interval",
                "monitor_refresh", "renormalize", "terminal_deviation"):
        if key in doc and doc[key] is not None:
            kwargs[key] = doc[key]
    config = FlowConfig(n=n, speed=speed, constraint=constraint, **kwargs)

    init = _require(doc, "initial", "")
    _reject_unknown(init, {"shape", "params", "snapshot"}, "initial.")
    if "snapshot" in init:
        path = os.path.join(base_dir, init["snapshot"])
        state, _ = read_snapshot(path)
    else:
        name = _require(init, "shape", "initial.")
        if name not in _SHAPES:
            raise ConfigError(
                "initial.shape", f"unknown shape {name!r}; have {sorted(_SHAPES)}"
            )
        params = init.get("params", {})
        try:
            state = _SHAPES[name](**params)
        except TypeError as exc:
            raise ConfigError("initial.params", str(exc)) from exc

    modes = tuple(doc.get("modes", (2,)))
    seed = int(doc.get("seed", 0))
    return config, state, modes, seed


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("manifest", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("manifest", f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# artifacts


def _write_series_csv(path: str, run) -> None:
    cols = series_columns(run.config.n)
    tab = series_table(run)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in tab:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def _report_dict(run, manifest: dict, modes, seed: int) -> dict:
    diag = json.loads(analyze_run(run, modes=modes).to_json())
    k = run.config.constraint.weight_order
    wk = [row.W[k] for row in run.series]
    w0 = wk[0]
    drift = max(abs(w - w0) for w in wk) / max(abs(w0), 1e-300)
    return {
        "schema": REPORT_SCHEMA,
        "manifest": manifest,
        "seed": seed,
        "termination": run.termination,
        "steps": run.steps,
        "t_final": run.t,
        "h_convex_initial": run.h_convex_initial,
        "flags": run.flags,
        "preserved": {
            "index": k,
            "initial": w0,
            "final": wk[-1],
            "max_rel_drift": drift,
        },
        "r_inf_fit": diag["r_inf_fit"],
        "r_inf_predicted": diag["r_inf_predicted"],
        "diagnostics": diag,
    }


def _write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2, default=float))
        fh.write("\n")


def _write_snapshots(out_dir: str, run) -> int:
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    for i, (t, state) in enumerate(run.graph_outputs):
        write_snapshot(os.path.join(snap_dir, "snap_%04d.txt" % i), state, t=t)
    return len(run.graph_outputs)


def run_manifest(doc: dict, out_dir: str, base_dir: str = ".", quiet: bool = True):
    """Execute one manifest; returns (exit_code, report_dict_or_None)."""
    try:
        config, state, modes, seed = build_run_inputs(doc, base_dir=base_dir)
        os.makedirs(out_dir, exist_ok=True)
        run = run_flow(config, state)
    except ConfigError as exc:
        if not quiet:
            print(f"config error at {exc.field}: {exc.message}", file=sys.stderr)
        return 2, None
    except HcflowError as exc:
        if not quiet:
            print(f"input rejected: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2, None

    _write_series_csv(os.path.join(out_dir, "series.csv"), run)
    report = _report_dict(run, doc, modes, seed)
    _write_report(os.path.join(out_dir, "report.json"), report)
    n_snaps = _write_snapshots(out_dir, run)

    if not quiet:
        p = report["preserved"]
        print(
            f"{run.termination}: t={run.t:.6g} steps={run.steps} "
            f"W_{p['index']} drift={p['max_rel_drift']:.3e} "
            f"r_inf={report['r_inf_fit']:.8g} (predicted {report['r_inf_predicted']:.8g}) "
            f"snapshots={n_snaps} -> {out_dir}"
        )
        if run.flags:
            print(f"flags: {run.flags}")
    return _EXIT_BY_TERMINATION[run.termination], report


def cmd_run(args) -> int:
    try:
        doc = _load_json(args.config)
    except ConfigError as exc:
        print(f"config error at {exc.field}: {exc.message}", file=sys.stderr)
        return 2
    code, _ = run_manifest(
        doc, args.out, base_dir=os.path.dirname(os.path.abspath(args.config)),
        quiet=args.quiet,
    )
    return code


# ---------------------------------------------------------------------------
# sweep


def _sweep_worker(item):
    name, doc, out_dir, base_dir = item
    if isinstance(doc, str):
        # entry references a manifest file (relative to the sweep file);
        # load it here so a broken file fails only this run, and resolve
        # snapshots relative to the manifest itself, as `run` does
        path = os.path.join(base_dir, doc)
        try:
            doc = _load_json(path)
        except ConfigError:
            return name, 2, None
        base_dir = os.path.dirname(os.path.abspath(path))
    code, report = run_manifest(doc, out_dir, base_dir=base_dir, quiet=True)
    summary = None
    if report is not None:
        summary = {
            "termination": report["termination"],
            "steps": report["steps"],
            "t_final": report["t_final"],
            "max_rel_drift": report["preserved"]["max_rel_drift"],
        }
    return name, code, summary


def cmd_sweep(args) -> int:
    try:
        doc = _load_json(args.config)
        runs = _require(doc, "runs", "")
        _reject_unknown(doc, {"runs"}, "")
        if not isinstance(runs, list) or not runs:
            raise ConfigError("runs", "need a non-empty list of {name, manifest}")
        seen = set()
        items = []
        base_dir = os.path.dirname(os.path.abspath(args.config))
        for i, entry in enumerate(runs):
            _reject_unknown(entry, {"name", "manifest"}, f"runs[{i}].")
            name = str(_require(entry, "name", f"runs[{i}]."))
            if not name.replace("-", "").replace("_", "").replace(".", "").isalnum():
                raise ConfigError(f"runs[{i}].name", f"unsafe directory name {name!r}")
            if name in seen:
                raise ConfigError(f"runs[{i}].name", f"duplicate name {name!r}")
            seen.add(name)
            manifest = _require(entry, "manifest", f"runs[{i}].")
            if not isinstance(manifest, (dict, str)):
                raise ConfigError(
                    f"runs[{i}].manifest", "need an inline object or a path string"
                )
            items.append((name, manifest, os.path.join(args.out, name), base_dir))
    except ConfigError as exc:
        print(f"config error at {exc.field}: {exc.message}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, items))
    else:
        results = [_sweep_worker(item) for item in items]

    by_name = {name: {"exit_code": code, "summary": summary}
               for name, code, summary in results}
    with open(os.path.join(args.out, "sweep.json"), "w") as fh:
        fh.write(json.dumps(by_name, sort_keys=True, indent=2, default=float))
        fh.write("\n")
    worst = 0
    for name, code, summary in results:
        worst = max(worst, code)
        if not args.quiet:
            tag = summary["termination"] if summary else f"exit {code}"
            print(f"  {name}: {tag}")
    return worst


# ---------------------------------------------------------------------------
# speed certification


def cmd_check_speed(args) -> int:
    try:
        spec = resolve_speed(args.name, n=args.n, alpha=args.alpha,
                             allow_inadmissible=True)
    except HcflowError as exc:
        print(f"cannot resolve speed: {exc}", file=sys.stderr)
        return 2
    samples = default_samples(args.n, count=args.samples, seed=args.seed)
    report = check_admissible(spec, samples=samples, seed=args.seed)
    print(f"speed {args.name}  n={args.n}  alpha={args.alpha:g}  "
          f"({report.n_samples} cone samples, seed {args.seed})")
    for label, stat, ok in report.rows():
        stat_txt = "        " if math.isnan(stat) else "%.3e" % stat
        print(f"  {'PASS' if ok else 'FAIL'}  {stat_txt}  {label}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# reference tables and rendering


def cmd_sphere_table(args) -> int:
    if args.r_min <= 0 or args.r_max <= args.r_min or args.count < 2:
        print("need 0 < r-min < r-max and count >= 2", file=sys.stderr)
        return 2
    ks = sorted(set(args.k))
    if any(k < 0 or k > args.n + 1 for k in ks):
        print(f"k must lie in 0..{args.n + 1}", file=sys.stderr)
        return 2
    rs = np.linspace(args.r_min, args.r_max, args.count)
    header = ["r"]
    for k in ks:
        header.append(f"W_{k}")
        if k <= args.n:  # W_{n+1} is the constant omega_n/(n+1): no inverse
            header.append(f"r_from_W_{k}")
    lines = [",".join(header)]
    for r in rs:
        row = ["%.17g" % r]
        for k in ks:
            w = ball_W(args.n, k, float(r))
            row.append("%.17g" % w)
            if k <= args.n:
                row.append("%.17g" % ball_W_inverse(args.n, k, w))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _svg_polyline(points) -> str:
    return " ".join("%.8f,%.8f" % (x, -y) for x, y in points)  # svg y points down


def cmd_render(args) -> int:
    try:
        state, t = read_snapshot(args.snapshot)
    except (OSError, HcflowError) as exc:
        print(f"cannot read snapshot: {exc}", file=sys.stderr)
        return 2
    pts, _ = to_klein(state)
    if state.mode.value != "full_circle":
        # zonal profile: mirror the meridian across the symmetry axis
        pts = np.vstack([pts, pts[::-1] * np.array([1.0, -1.0])])
    body = _svg_polyline(pts)
    svg = (
        '<svg xmlns="http://www.w3.org/2000/svg" width="480" height="480" '
        'viewBox="-1.1 -1.1 2.2 2.2">\n'
        f"  <title>boundary in the Klein ball, n={state.n}, t={t:.6g}</title>\n"
        '  <rect x="-1.1" y="-1.1" width="2.2" height="2.2" fill="white"/>\n'
        '  <circle cx="0" cy="0" r="1" fill="none" stroke="#999999" '
        'stroke-width="0.006" stroke-dasharray="0.03,0.02"/>\n'
        f'  <polygon points="{body}" fill="#9ecae1" fill-opacity="0.45" '
        'stroke="#1f4e79" stroke-width="0.008"/>\n'
        "</svg>\n"
    )
    with open(args.out, "w") as fh:
        fh.write(svg)
    return 0


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hcflow", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute one manifest")
    p.add_argument("config", help="JSON manifest path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="execute a list of manifests")
    p.add_argument("config", help="JSON sweep document")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("check-speed", help="certify a speed function")
    p.add_argument("name", help='e.g. "Ek_root(2)" or "power_mean(0.5)"')
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_check_speed)

    p = sub.add_parser("sphere-table", help="tabulate W_k of geodesic balls")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, nargs="+", default=[0, 1])
    p.add_argument("--r-min", type=float, default=0.2)
    p.add_argument("--r-max", type=float, default=2.0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sphere_table)

    p = sub.add_parser("render", help="draw a snapshot as SVG")
    p.add_argument("snapshot", help="snapshot file from a run's snapshots/")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(fn=cmd_render)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
