"""Energy-efficiency comparison: all antennas on vs ranked selection vs policy.

Prints per-seed medians and the policy's EE gain over the all-on baseline.

    python3 scripts/ee_study.py --config configs/ee_desk.toml
"""
import argparse
import time

import numpy as np

from cfxl.config import load_config
from cfxl.experiments import run_seed


def median_of(result, method, field):
    return float(np.median([getattr(r.metrics, field) for r in result.by_method(method)]))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/ee_desk.toml")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    args = parser.parse_args()

    config = load_config(args.config)
    gains = []
    for seed in (int(s) for s in args.seeds.split(",")):
        t0 = time.time()
        result, _ = run_seed(config, seed)
        ee = {m: median_of(result, m, "ee") for m in ("NoSelection", "LsfSelection", "MaddpgAs")}
        se = {m: median_of(result, m, "sum_se") for m in ee}
        gains.append(ee["MaddpgAs"] / ee["NoSelection"])
        print(f"seed {seed}: EE all-on {ee['NoSelection']:.3e}  ranked {ee['LsfSelection']:.3e}  "
              f"policy {ee['MaddpgAs']:.3e}  gain {gains[-1]:.4f}  "
              f"(sum SE {se['NoSelection']:.2f}/{se['LsfSelection']:.2f}/{se['MaddpgAs']:.2f})  "
              f"({time.time() - t0:.0f}s)", flush=True)
    print(f"median EE gain over all-on: {np.median(gains):.4f}")


if __name__ == "__main__":
    main()
