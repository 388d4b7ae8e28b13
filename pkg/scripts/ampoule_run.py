"""Freezing of the ampoule from the cooled wall inward.

Runs the ampoule preset, writes snapshots and diagnostics, then prints the
frozen-fraction history and the width of the transition layer at the moment
half the medium has frozen.
"""
import argparse

import numpy as np

from phasefield.config import ampoule_preset
from phasefield.diagnostics import frozen_fraction, layer_width
from phasefield.scenario import build_scenario, run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=0.025, help="target mesh size")
    ap.add_argument("--out", default="out/ampoule")
    args = ap.parse_args()

    cfg = ampoule_preset(args.h)
    sc = build_scenario(cfg)
    half = {}

    def watch(s, k):
        if "state" not in half and frozen_fraction(s.phi, sc.ops) >= 0.5:
            half["state"] = s

    res = run_scenario(cfg, args.out, hooks=[watch])
    if res.exit_code:
        raise SystemExit(f"run failed: {res.message}")
    mon = res.monitor
    t, ff = mon.column("t"), mon.column("frozen_fraction")
    for tq in np.linspace(0.0, cfg.params.t_end, 11):
        i = int(np.searchsorted(t, tq - 1e-12))
        print(f"t = {t[i]:6.3f}  frozen fraction {ff[i]:.4f}")
    if "state" in half:
        w = layer_width(sc.mesh, half["state"].phi)
        print(f"half frozen at t = {half['state'].t:.3f}, layer width {w:.4f} ({w / cfg.params.xi:.2f} xi)")
    print(f"{sc.mesh.n_nodes} nodes, {res.steps_done} steps, {res.wall_clock:.1f} s, output in {args.out}")


if __name__ == "__main__":
    main()
