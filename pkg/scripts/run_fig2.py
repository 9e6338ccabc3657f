"""Single-realization comparisons for the fig2a-fig2d presets.

    python3 scripts/run_fig2.py [--presets fig2a,fig2c] [--out results]
"""

import argparse
import logging
import time
from pathlib import Path

from dephasim.cli import emit_outputs
from dephasim.experiments import get_preset, run_single_realization


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--presets", default="fig2a,fig2b,fig2c,fig2d")
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    for name in args.presets.split(","):
        spec = get_preset(name).replace(master_seed=args.seed, threads=args.threads)
        start = time.perf_counter()
        rec = run_single_realization(spec)
        emit_outputs(rec, Path(args.out) / name)
        line = "  ".join(
            f"{pair}: I_p {rep.population_infidelity:.4f} I_s {rep.state_infidelity:.4f}"
            for pair, rep in rec.infidelities.items()
        )
        print(f"{name} (disorder seed {rec.disorder_seed}, {time.perf_counter() - start:.0f} s)  {line}")
        if rec.errors:
            print(f"  errors: {rec.errors}")


if __name__ == "__main__":
    main()
