#!/usr/bin/env python3
"""Render a flow run as a figure: Klein-ball snapshots plus monitor traces.

Quick visual sanity check, not a polished plotting tool.  Runs one of a few
canned initial bodies under the constrained flow and writes a single PNG
with the evolving boundary (left) and the conserved measure / deviation /
speed traces (right).

Usage: python3 scripts/flow_portrait.py [--body bumps|pinched|offset] [--out portrait.png]
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hcflow.flowcore import Constraint, FlowConfig, run_flow
from hcflow.hsurface import to_klein
from hcflow.shapes import offset_circle, perturbed_circle
from hcflow.symfunc import resolve_speed

BODIES = {
    "bumps": lambda: perturbed_circle(1.0, modes=[(2, 0.08, 0.0), (5, 0.02, 1.1)]),
    "pinched": lambda: perturbed_circle(1.2, eps=0.12, m=2, nodes=256),
    "offset": lambda: offset_circle(0.9, 0.35, nodes=256),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--body", choices=sorted(BODIES), default="bumps")
    ap.add_argument("--speed", default="Ek_root(1)")
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--out", default="portrait.png")
    args = ap.parse_args(argv)

    st = BODIES[args.body]()
    cfg = FlowConfig(
        n=1,
        speed=resolve_speed(args.speed, n=1, alpha=args.alpha),
        constraint=Constraint("quermass", 1),
        t_end=args.t_end,
        output_interval=args.t_end / 8.0,
        terminal_deviation=1e-8,
    )
    run = run_flow(cfg, st)
    outs = run.graph_outputs or run.outputs

    fig, (axL, axR) = plt.subplots(1, 2, figsize=(11, 5))
    cmap = plt.get_cmap("viridis")
    for i, (t, g) in enumerate(outs):
        pts, _ = to_klein(g)
        closed = np.vstack([pts, pts[:1]])
        axL.plot(closed[:, 0], closed[:, 1],
                 color=cmap(i / max(len(outs) - 1, 1)), lw=1.2,
                 label=f"t={t:.2f}" if i in (0, len(outs) - 1) else None)
    axL.add_artist(plt.Circle((0, 0), 1.0, fill=False, color="k", lw=0.5, ls=":"))
    axL.set_aspect("equal")
    axL.set_title(f"{args.body} under {args.speed}^{args.alpha} (Klein ball)")
    axL.legend(loc="lower right", fontsize=8)

    t = [row.t for row in run.series]
    w = np.array([row.W[1] for row in run.series])
    axR.semilogy(t, np.abs(w / w[0] - 1.0) + 1e-18, label="|W_1 drift|")
    axR.semilogy(t, [row.sphere_dev for row in run.series], label="sphere deviation")
    axR.semilogy(t, [row.max_F for row in run.series], label="max F")
    axR.set_xlabel("t")
    axR.set_title(f"terminated: {run.termination} at t={run.t:.3f}")
    axR.legend(fontsize=8)
    axR.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(args.out, dpi=140)
    print(f"wrote {args.out}  ({run.termination}, {run.steps} steps)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
