"""Experiment orchestration: scenes, training loops, evaluation, sweeps.

A master seed fully determines one replicate: scene sampling, channel
drops, network initialization, exploration, and the held-out evaluation
batch all flow from tagged children of that seed, so every run is a pure
function of (config, seed).
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import SceneChannel, generate_visibility_mask, large_scale_fading
from .combining import EpisodeMetrics, PowerAllocation
from .config import (
    METHOD_DMADDPG,
    METHOD_EQUAL_POWER,
    METHOD_LSF_SELECTION,
    METHOD_MADDPG,
    METHOD_MADDPG_AS,
    METHOD_NO_SELECTION,
    TASK_AS,
    TASK_DPC,
    TASK_PC,
    ExperimentConfig,
    default_methods,
)
from .errors import ConfigError
from .geometry import generate_topology
from .marl import MaddpgTrainer, Transition
from .tasks import (
    AntennaSelectionEnv,
    DoubleLayerPowerControlEnv,
    PowerControlEnv,
    equal_power_allocation,
    evaluate_batch,
    lsf_selection,
    no_selection,
)
from .tasks.results import ExperimentResult

# Seed-stream tags: children of the master seed, one per random purpose.
TAG_TOPOLOGY = 0
TAG_SHADOWING = 1
TAG_VISIBILITY = 2
TAG_ENV = 3
TAG_TRAIN = 4
TAG_EVAL = 5

_CADENCE_EVAL_DROPS = 50


def derived_seed(master_seed: int, tag: int) -> int:
    return int(np.random.SeedSequence((master_seed, tag)).generate_state(1, np.uint64)[0])


def build_scene(config: ExperimentConfig, master_seed: int) -> SceneChannel:
    topology = generate_topology(config.topology, derived_seed(master_seed, TAG_TOPOLOGY))
    lsf = large_scale_fading(
        topology, config.channel.shadowing_std_db, derived_seed(master_seed, TAG_SHADOWING)
    )
    mask = generate_visibility_mask(
        topology, config.channel.vr_config(derived_seed(master_seed, TAG_VISIBILITY))
    )
    return SceneChannel(topology, lsf, mask, config.channel.ricean_kappa)


def eval_drop_seeds(master_seed: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, TAG_EVAL)))
    return rng.integers(0, 2**63 - 1, size=n)


_METHOD_FOR_TASK = {TASK_AS: METHOD_MADDPG_AS, TASK_PC: METHOD_MADDPG, TASK_DPC: METHOD_DMADDPG}
TASK_FOR_METHOD = {v: k for k, v in _METHOD_FOR_TASK.items()}
LEARNED_METHODS = frozenset(TASK_FOR_METHOD)


def method_for_task(kind: str) -> str:
    return _METHOD_FOR_TASK[kind]


@dataclass
class TrainOutcome:
    """Everything a finished (or resumed) training run leaves behind."""

    method: str
    seed: int
    env: object
    trainers: list[MaddpgTrainer]
    curve: list[dict]
    cadence_eval: list[dict]


def _curve_row(episode: int, rewards, metrics: EpisodeMetrics, losses, noise_sigma: float) -> dict:
    if losses:
        critic = float(np.mean([c for c, _ in losses]))
        actor = float(np.mean([a for _, a in losses]))
    else:
        critic, actor = float("nan"), float("nan")
    return {
        "episode": episode,
        "reward": float(rewards[0]),
        "sum_se": metrics.sum_se,
        "ee": metrics.ee,
        "infeasible": int(metrics.infeasible),
        "noise_sigma": noise_sigma,
        "critic_loss": critic,
        "actor_objective": actor,
    }


def _policy_metrics(config: ExperimentConfig, outcome: TrainOutcome, drop_seeds) -> list[EpisodeMetrics]:
    """Deterministic-policy evaluation on an explicit drop batch."""
    chain = config.signal.receive_chain()
    kind = TASK_FOR_METHOD[outcome.method]
    env = outcome.env
    if kind == TASK_AS:
        obs = env.reset()
        actions = outcome.trainers[0].act(obs, explore=False)
        assignment = env.decode(actions)
        if assignment is None:
            from .tasks.common import infeasible_metrics

            return [infeasible_metrics(env.scene, chain) for _ in drop_seeds]
        return evaluate_batch(env.scene, drop_seeds, assignment, env.powers, chain)
    if kind == TASK_PC:
        obs = env.reset()
        actions = outcome.trainers[0].act(obs, explore=False)
        powers, rx_weights = env.decode(actions)
        return evaluate_batch(env.scene, drop_seeds, env.assignment, powers, chain, rx_weights)
    obs1 = env.reset()
    a1 = outcome.trainers[0].act(obs1, explore=False)
    budgets = env.budgets_from_actions(a1)
    a2 = outcome.trainers[1].act(env.layer2_observations(budgets), explore=False)
    levels = env.allocate(budgets, a2)
    if env.entity == "ue":
        powers = PowerAllocation(levels.copy(), env.unit_cap * max(len(g) for g in env.groups))
        rx_weights = None
    else:
        powers = PowerAllocation(np.full(env.num_streams, chain.p_max_w), chain.p_max_w)
        rx_weights = levels.reshape(env.num_bs, -1)
    return evaluate_batch(env.scene, drop_seeds, env.assignment, powers, chain, rx_weights)


def _cadence_row(config: ExperimentConfig, outcome: TrainOutcome, episode: int) -> dict:
    seeds = eval_drop_seeds(outcome.seed, min(_CADENCE_EVAL_DROPS, config.train.eval_drops))
    kind = TASK_FOR_METHOD[outcome.method]
    saved = _env_state(outcome.env, kind)
    metrics = _policy_metrics(config, outcome, seeds)
    _restore_env_state(outcome.env, kind, saved)
    return {
        "episode": episode,
        "eval_drops": len(seeds),
        "sum_se_median": float(np.median([m.sum_se for m in metrics])),
        "ee_median": float(np.median([m.ee for m in metrics])),
    }


def _env_state(env, kind: str) -> dict:
    state = {
        "rng_state": env.rng.bit_generator.state,
        "last_sum_se": env._last_sum_se,
    }
    if kind == TASK_PC:
        state["last_level"] = env._last_level.tolist()
    elif kind == TASK_DPC:
        state["last_budgets"] = env._last_budgets.tolist()
        state["last_alloc"] = env._last_alloc.tolist()
    return state


def _restore_env_state(env, kind: str, state: dict) -> None:
    env.rng.bit_generator.state = state["rng_state"]
    env._last_sum_se = state["last_sum_se"]
    if kind == TASK_PC:
        env._last_level = np.asarray(state["last_level"], dtype=float)
    elif kind == TASK_DPC:
        env._last_budgets = np.asarray(state["last_budgets"], dtype=float)
        env._last_alloc = np.asarray(state["last_alloc"], dtype=float)


def _save_train_checkpoint(config, outcome: TrainOutcome, episode: int, path_base: str) -> None:
    extra = {
        "task": config.task.kind,
        "config_hash": config.config_hash(),
        "episode": episode,
        "env": _env_state(outcome.env, config.task.kind),
        "n_trainers": len(outcome.trainers),
    }
    for i, trainer in enumerate(outcome.trainers):
        suffix = "" if len(outcome.trainers) == 1 else f"_l{i + 1}"
        trainer.save_checkpoint(f"{path_base}{suffix}.npz", extra)


def load_train_checkpoint(config: ExperimentConfig, seed: int, path: str) -> tuple[TrainOutcome, int]:
    """Rebuild env and trainers at the exact saved episode boundary."""
    kind = config.task.kind
    first, extra = MaddpgTrainer.load_checkpoint(path)
    if extra.get("task") != kind:
        raise ConfigError(
            f"checkpoint task {extra.get('task')!r} does not match config task {kind!r}"
        )
    if extra.get("config_hash") != config.config_hash():
        raise ConfigError("checkpoint was produced by a different configuration")
    trainers = [first]
    if extra["n_trainers"] == 2:
        base, ext = os.path.splitext(path)
        if not base.endswith("_l1"):
            raise ConfigError("double-layer checkpoints come in _l1/_l2 pairs; pass the _l1 file")
        second, _ = MaddpgTrainer.load_checkpoint(f"{base[:-3]}_l2{ext}")
        trainers.append(second)
    env = _build_env(config, seed)
    _restore_env_state(env, kind, extra["env"])
    outcome = TrainOutcome(
        method=method_for_task(kind),
        seed=seed,
        env=env,
        trainers=trainers,
        curve=[],
        cadence_eval=[],
    )
    return outcome, int(extra["episode"])


def _build_env(config: ExperimentConfig, master_seed: int):
    scene = build_scene(config, master_seed)
    chain = config.signal.receive_chain()
    env_seed = derived_seed(master_seed, TAG_ENV)
    kind = config.task.kind
    if kind == TASK_AS:
        return AntennaSelectionEnv(scene, chain, env_seed)
    if kind == TASK_PC:
        return PowerControlEnv(
            scene, chain, env_seed, config.task.entity, config.task.power_penalty
        )
    return DoubleLayerPowerControlEnv(
        scene, chain, env_seed, config.task.entity, config.task.power_penalty
    )


def train_policy(
    config: ExperimentConfig,
    master_seed: int,
    checkpoint_base: str | None = None,
    resume_from: str | None = None,
) -> TrainOutcome:
    """Run (or resume) the configured task's training for one seed.

    ``checkpoint_base`` enables cadence checkpoints named
    ``{base}_ep{N}`` plus a final ``{base}_final``.
    """
    kind = config.task.kind
    start_episode = 0
    if resume_from is not None:
        outcome, start_episode = load_train_checkpoint(config, master_seed, resume_from)
        env, trainers = outcome.env, outcome.trainers
    else:
        env = _build_env(config, master_seed)
        train_seed = derived_seed(master_seed, TAG_TRAIN)
        if kind == TASK_DPC:
            trainers = [
                MaddpgTrainer(
                    env.layer1_obs_dims, env.layer1_act_dims, config.train.train_config(train_seed)
                ),
                MaddpgTrainer(
                    env.layer2_obs_dims,
                    env.layer2_act_dims,
                    config.train.train_config(derived_seed(master_seed, TAG_TRAIN + 100)),
                ),
            ]
        else:
            trainers = [
                MaddpgTrainer(env.obs_dims, env.act_dims, config.train.train_config(train_seed))
            ]
        outcome = TrainOutcome(
            method=method_for_task(kind),
            seed=master_seed,
            env=env,
            trainers=trainers,
            curve=[],
            cadence_eval=[],
        )

    episodes = config.train.episodes
    cadence = config.train.eval_cadence
    if kind == TASK_DPC:
        obs1 = env.reset() if start_episode == 0 else env.layer1_observations()
        for ep in range(start_episode, episodes):
            a1 = trainers[0].act(obs1)
            budgets = env.budgets_from_actions(a1)
            obs2 = env.layer2_observations(budgets)
            a2 = trainers[1].act(obs2)
            next_obs1, r1, r2, metrics, _ = env.step(a1, a2)
            trainers[0].observe(
                Transition(np.concatenate(obs1), np.concatenate(a1), r1, np.concatenate(next_obs1), True)
            )
            trainers[1].observe(
                Transition(np.concatenate(obs2), np.concatenate(a2), r2, np.concatenate(obs2), True)
            )
            losses = []
            for tr in trainers:
                if tr.ready():
                    losses.extend(tr.update())
            outcome.curve.append(
                _curve_row(ep, r1, metrics, losses, trainers[0].noise_sigma)
            )
            obs1 = next_obs1
            _maybe_cadence(config, outcome, ep, cadence, checkpoint_base)
    else:
        obs = env.reset() if start_episode == 0 else env._observations()
        for ep in range(start_episode, episodes):
            actions = trainers[0].act(obs)
            next_obs, rewards, metrics, _ = env.step(actions)
            trainers[0].observe(
                Transition(
                    np.concatenate(obs), np.concatenate(actions), rewards, np.concatenate(next_obs), True
                )
            )
            losses = trainers[0].update() if trainers[0].ready() else []
            outcome.curve.append(_curve_row(ep, rewards, metrics, losses, trainers[0].noise_sigma))
            obs = next_obs
            _maybe_cadence(config, outcome, ep, cadence, checkpoint_base)

    if checkpoint_base and episodes > start_episode:
        _save_train_checkpoint(config, outcome, episodes, f"{checkpoint_base}_final")
    return outcome


def _maybe_cadence(config, outcome: TrainOutcome, ep: int, cadence: int, checkpoint_base) -> None:
    if (ep + 1) % cadence != 0:
        return
    outcome.cadence_eval.append(_cadence_row(config, outcome, ep + 1))
    if checkpoint_base:
        _save_train_checkpoint(config, outcome, ep + 1, f"{checkpoint_base}_ep{ep + 1}")


def evaluate_methods(
    config: ExperimentConfig,
    master_seed: int,
    methods: tuple[str, ...] | None = None,
    outcomes: dict[str, TrainOutcome] | None = None,
) -> ExperimentResult:
    """Evaluate baselines and (when policies are supplied) learned methods."""
    methods = tuple(methods) if methods else (config.methods or default_methods(config.task.kind))
    outcomes = outcomes or {}
    scene = build_scene(config, master_seed)
    chain = config.signal.receive_chain()
    drop_seeds = eval_drop_seeds(master_seed, config.train.eval_drops)
    result = ExperimentResult(config.config_hash(), scene.topology.num_ue)
    entity = config.task.entity
    for method in methods:
        if method == METHOD_NO_SELECTION:
            _, metrics = no_selection(scene, chain, drop_seeds)
        elif method == METHOD_LSF_SELECTION:
            _, metrics = lsf_selection(scene, chain, drop_seeds)
        elif method == METHOD_EQUAL_POWER:
            _, metrics = equal_power_allocation(
                scene, chain, drop_seeds, config.task.equal_power_fill
            )
        elif method in LEARNED_METHODS:
            if method not in outcomes:
                raise ConfigError(
                    f"method {method} needs a trained policy; train first or pass --checkpoint"
                )
            metrics = _policy_metrics(config, outcomes[method], drop_seeds)
        else:
            raise ConfigError(f"method {method} is not implemented")
        result.extend(method, entity, master_seed, metrics)
    return result


def _config_for_method(config: ExperimentConfig, method: str) -> ExperimentConfig:
    kind = TASK_FOR_METHOD[method]
    if kind == config.task.kind:
        return config
    return replace(config, task=replace(config.task, kind=kind))


def run_seed(
    config: ExperimentConfig,
    master_seed: int,
    out_dir: str | None = None,
    resume_from: str | None = None,
) -> tuple[ExperimentResult, dict[str, TrainOutcome]]:
    """Train every learned method in the set, then evaluate one replicate.

    Each learned method trains under its own task flavor on the same
    scene; ``resume_from`` applies to the config's own task method.
    """
    methods = config.methods or default_methods(config.task.kind)
    own_method = method_for_task(config.task.kind)
    outcomes: dict[str, TrainOutcome] = {}
    if config.train.episodes > 0:
        for method in methods:
            if method not in LEARNED_METHODS:
                continue
            base = (
                os.path.join(out_dir, f"checkpoint_{method}_s{master_seed}") if out_dir else None
            )
            resume = resume_from if method == own_method else None
            outcomes[method] = train_policy(
                _config_for_method(config, method), master_seed, base, resume
            )
    active_methods = tuple(m for m in methods if m not in LEARNED_METHODS or m in outcomes)
    result = evaluate_methods(config, master_seed, active_methods, outcomes)
    return result, outcomes


def merge_results(results: list[ExperimentResult]) -> ExperimentResult:
    if not results:
        raise ValueError("nothing to merge")
    merged = ExperimentResult(results[0].config_hash, results[0].num_ue)
    for r in results:
        if r.config_hash != merged.config_hash:
            raise ValueError("cannot merge results from different configurations")
        merged.records.extend(r.records)
    return merged


# -- sweeps ---------------------------------------------------------------

SWEEP_AXES = ("num_bs", "bs_antennas")


def _near_square_grid(n: int) -> tuple[int, int]:
    """Factor n into the most square (rows, cols) grid, rows <= cols."""
    best = (1, n)
    for r in range(1, int(np.sqrt(n)) + 1):
        if n % r == 0:
            best = (r, n // r)
    return best


def sweep_config(config: ExperimentConfig, axis: str, value: int) -> ExperimentConfig:
    if axis == "num_bs":
        topo = replace(config.topology, num_bs=int(value))
    elif axis == "bs_antennas":
        rows, cols = _near_square_grid(int(value))
        topo = replace(config.topology, bs_rows=rows, bs_cols=cols)
    else:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    return replace(config, topology=topo)


def _sweep_cell(args) -> list[dict]:
    config, axis, value, seed = args
    cell_config = sweep_config(config, axis, value)
    result, _ = run_seed(cell_config, seed)
    rows = []
    for method in sorted({r.method for r in result.records}):
        vals = [r.metrics.sum_se for r in result.by_method(method)]
        ees = [r.metrics.ee for r in result.by_method(method)]
        rows.append(
            {
                "axis": axis,
                "value": value,
                "method": method,
                "seed": seed,
                "median_sum_se": float(np.median(vals)),
                "median_ee": float(np.median(ees)),
                "n_drops": len(vals),
                "config_hash": cell_config.config_hash(),
            }
        )
    return rows


def run_sweep(
    config: ExperimentConfig, axis: str, values, seeds=None, jobs: int = 1
) -> list[dict]:
    """Train/evaluate every (value, seed) cell; rows sorted for stability."""
    seeds = tuple(seeds) if seeds else config.seeds
    cells = [(config, axis, int(v), int(s)) for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nested = list(pool.map(_sweep_cell, cells))
    else:
        nested = [_sweep_cell(c) for c in cells]
    rows = [row for group in nested for row in group]
    rows.sort(key=lambda r: (r["axis"], r["value"], r["method"], r["seed"]))
    return rows
