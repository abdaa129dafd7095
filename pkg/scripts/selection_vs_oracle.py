"""Train the desk-size selection policy and score it against the exhaustive oracle.

The desk instance has 12 legal assignments, so brute force gives the true
optimum and the policy can be reported as a fraction of it.

    python3 scripts/selection_vs_oracle.py --seeds 0,1,2,3,4
"""
import argparse
import time

import numpy as np

from cfxl.config import load_config
from cfxl.experiments import build_scene, eval_drop_seeds, run_seed
from cfxl.tasks import brute_force_selection_oracle


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/as_oracle_desk.toml")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    args = parser.parse_args()

    config = load_config(args.config)
    chain = config.signal.receive_chain()
    ratios = []
    for seed in (int(s) for s in args.seeds.split(",")):
        t0 = time.time()
        result, _ = run_seed(config, seed)
        policy_se = float(np.mean([r.metrics.sum_se for r in result.by_method("MaddpgAs")]))
        drops = eval_drop_seeds(seed, config.train.eval_drops)
        oracle = brute_force_selection_oracle(build_scene(config, seed), chain, drops)
        ratios.append(policy_se / oracle.sum_se)
        print(f"seed {seed}: policy {policy_se:.4f}  oracle {oracle.sum_se:.4f}  "
              f"ratio {ratios[-1]:.4f}  ({time.time() - t0:.0f}s)", flush=True)
    print(f"median ratio {np.median(ratios):.4f}, "
          f"{sum(r >= 0.95 for r in ratios)}/{len(ratios)} seeds >= 0.95")


if __name__ == "__main__":
    main()
