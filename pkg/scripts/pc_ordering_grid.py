"""Power-control method ordering across the (num_bs, panel size) grid.

For each cell, trains the single- and double-layer policies over the seed
list and prints the median sum SE per method.

    python3 scripts/pc_ordering_grid.py --seeds 0,1,2,3,4
"""
import argparse
import time

import numpy as np

from cfxl.config import load_config
from cfxl.experiments import run_seed, sweep_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/pc_desk.toml")
    parser.add_argument("--num-bs", default="1,2")
    parser.add_argument("--antennas", default="8,16")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    args = parser.parse_args()

    base = load_config(args.config)
    seeds = [int(s) for s in args.seeds.split(",")]
    for m in (int(v) for v in args.num_bs.split(",")):
        for n in (int(v) for v in args.antennas.split(",")):
            config = sweep_config(sweep_config(base, "num_bs", m), "bs_antennas", n)
            t0 = time.time()
            medians = {method: [] for method in ("DMaddpg", "Maddpg", "EqualPower")}
            for seed in seeds:
                result, _ = run_seed(config, seed)
                for method in medians:
                    medians[method].append(float(np.median(
                        [r.metrics.sum_se for r in result.by_method(method)])))
            d, s, e = (float(np.median(medians[k])) for k in ("DMaddpg", "Maddpg", "EqualPower"))
            order = "double >= single >= equal" if d >= s >= e else "ordering violated"
            print(f"num_bs={m} antennas={n}: double {d:.3f}  single {s:.3f}  "
                  f"equal {e:.3f}  [{order}]  ({time.time() - t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
