"""TOML experiment configuration: parsing, validation, canonical hashing.

Every knob lives in a typed section dataclass; ``load_config`` rejects
unknown keys and out-of-range values with the offending field path in
the message, and ``config_hash`` fingerprints the resolved configuration
so every output file can be tied back to it.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .channel import VrConfig
from .combining import LSFD_OPTIMAL, MMSE, PowerModel, dbm_to_watt
from .errors import ConfigError
from .geometry import TopologyConfig
from .marl.maddpg import TrainConfig
from .tasks.common import ReceiveChain

METHOD_NO_SELECTION = "NoSelection"
METHOD_LSF_SELECTION = "LsfSelection"
METHOD_MADDPG_AS = "MaddpgAs"
METHOD_EQUAL_POWER = "EqualPower"
METHOD_MADDPG = "Maddpg"
METHOD_DMADDPG = "DMaddpg"
ALL_METHODS = (
    METHOD_NO_SELECTION,
    METHOD_LSF_SELECTION,
    METHOD_MADDPG_AS,
    METHOD_EQUAL_POWER,
    METHOD_MADDPG,
    METHOD_DMADDPG,
)
AS_METHODS = (METHOD_NO_SELECTION, METHOD_LSF_SELECTION, METHOD_MADDPG_AS)
PC_METHODS = (METHOD_EQUAL_POWER, METHOD_MADDPG, METHOD_DMADDPG)

TASK_AS = "as"
TASK_PC = "pc"
TASK_DPC = "dpc"


@dataclass(frozen=True)
class ChannelSection:
    ricean_kappa_db: float = 3.0
    shadowing_std_db: float = 4.0
    vr_mode: str = "full"
    vr_block_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.shadowing_std_db < 0:
            raise ConfigError(
                f"channel.shadowing_std_db must be >= 0, got {self.shadowing_std_db}"
            )
        # Delegates mode/fraction checks so messages stay field-pathed.
        VrConfig(self.vr_mode, self.vr_block_fraction)

    @property
    def ricean_kappa(self) -> float:
        return 10.0 ** (self.ricean_kappa_db / 10.0)

    def vr_config(self, seed: int) -> VrConfig:
        return VrConfig(self.vr_mode, self.vr_block_fraction, seed)


@dataclass(frozen=True)
class SignalSection:
    bandwidth_hz: float = 20e6
    noise_dbm: float = -94.0
    combiner: str = MMSE
    fusion: str = LSFD_OPTIMAL
    amplifier_efficiency: float = 0.4
    antenna_circuit_w: float = 0.2
    fixed_overhead_w: float = 5.0
    p_max_w: float = 0.2

    def __post_init__(self) -> None:
        try:
            self.receive_chain()
        except ValueError as exc:
            raise ConfigError(f"signal: {exc}") from None

    def receive_chain(self) -> ReceiveChain:
        return ReceiveChain(
            combiner=self.combiner,
            fusion=self.fusion,
            bandwidth_hz=self.bandwidth_hz,
            noise_power_w=dbm_to_watt(self.noise_dbm),
            power_model=PowerModel(
                self.amplifier_efficiency, self.antenna_circuit_w, self.fixed_overhead_w
            ),
            p_max_w=self.p_max_w,
        )


@dataclass(frozen=True)
class TrainSection:
    episodes: int = 5000
    eval_cadence: int = 1000
    eval_drops: int = 500
    gamma: float = 0.0
    tau: float = 0.005
    lr_actor: float = TrainConfig.lr_actor
    lr_critic: float = TrainConfig.lr_critic
    batch_size: int = 256
    buffer_capacity: int = 100_000
    noise_sigma: float = 0.2
    noise_decay: float = 0.999
    noise_floor: float = 0.02
    grad_clip: float = 1.0
    actor_hidden: tuple[int, ...] = (128, 64)
    critic_hidden: tuple[int, ...] = (256, 128)
    share_actor: bool = False

    def __post_init__(self) -> None:
        if self.episodes < 0:
            raise ConfigError(f"train.episodes must be >= 0, got {self.episodes}")
        if self.eval_cadence < 1:
            raise ConfigError(f"train.eval_cadence must be >= 1, got {self.eval_cadence}")
        if self.eval_drops < 1:
            raise ConfigError(f"train.eval_drops must be >= 1, got {self.eval_drops}")
        object.__setattr__(self, "actor_hidden", tuple(int(h) for h in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))
        try:
            self.train_config(0)
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from None

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            gamma=self.gamma,
            tau=self.tau,
            lr_actor=self.lr_actor,
            lr_critic=self.lr_critic,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            noise_sigma=self.noise_sigma,
            noise_decay=self.noise_decay,
            noise_floor=self.noise_floor,
            grad_clip=self.grad_clip,
            actor_hidden=self.actor_hidden,
            critic_hidden=self.critic_hidden,
            share_actor=self.share_actor,
            seed=seed,
        )


@dataclass(frozen=True)
class TaskSection:
    kind: str = TASK_AS
    entity: str = "ue"
    power_penalty: float = 0.0
    equal_power_fill: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (TASK_AS, TASK_PC, TASK_DPC):
            raise ConfigError(f"task.kind must be one of as/pc/dpc, got {self.kind!r}")
        if self.entity not in ("ue", "bs"):
            raise ConfigError(f"task.entity must be 'ue' or 'bs', got {self.entity!r}")
        if self.power_penalty < 0:
            raise ConfigError(f"task.power_penalty must be >= 0, got {self.power_penalty}")
        if not 0.0 <= self.equal_power_fill <= 1.0:
            raise ConfigError(
                f"task.equal_power_fill must be in [0, 1], got {self.equal_power_fill}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelSection = field(default_factory=ChannelSection)
    signal: SignalSection = field(default_factory=SignalSection)
    train: TrainSection = field(default_factory=TrainSection)
    task: TaskSection = field(default_factory=TaskSection)
    methods: tuple[str, ...] = ()
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        for m in self.methods:
            if m not in ALL_METHODS:
                raise ConfigError(f"methods: unknown method {m!r}; valid: {list(ALL_METHODS)}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


_SECTION_TYPES = {
    "topology": TopologyConfig,
    "channel": ChannelSection,
    "signal": SignalSection,
    "train": TrainSection,
    "task": TaskSection,
}


def _build_section(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for name, value in data.items():
        if name in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"{name}: expected a table")
            kwargs[name] = _build_section(_SECTION_TYPES[name], value, name)
        elif name == "methods":
            kwargs["methods"] = tuple(value)
        elif name == "seeds":
            kwargs["seeds"] = tuple(value)
        else:
            raise ConfigError(f"{name}: unknown section")
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def default_methods(task_kind: str) -> tuple[str, ...]:
    return AS_METHODS if task_kind == TASK_AS else PC_METHODS
