"""Temporal order of the stepper on the coarse freezing run.

Compares dt = 4e-3, 2e-3, 1e-3 against the RK4 reference and prints error,
energy-residual and chain-residual ratios. Takes about four minutes.

    python scripts/convergence_study.py [--ratio 50] [--out out/convergence]
"""
import argparse
import os

from threadpoolctl import threadpool_limits

from phasefield.config import freezing_preset
from phasefield.convergence import oracle_convergence
from phasefield.scenario import build_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ratio", type=int, default=50, help="finest dt / oracle substep")
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()

    sc = build_scenario(freezing_preset())
    with threadpool_limits(limits=1):
        rep = oracle_convergence(sc.initial, (4e-3, 2e-3, 1e-3), sc.config.params, sc.ops, sc.g,
                                 oracle_ratio=args.ratio)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "convergence.csv"), "w") as fh:
        fh.write(rep.to_csv())
    print(f"{sc.mesh.n_nodes} nodes")
    print(rep.to_text())
    print("observed orders:", ", ".join(f"{p:.3f}" for p in rep.observed_orders))


if __name__ == "__main__":
    main()
