"""From-scratch multi-agent actor-critic machinery on plain numpy."""

from .mlp import Mlp, mlp_init, mlp_forward, mlp_backward, sgd_step, soft_update, clone_mlp
from .replay import Transition, TransitionBatch, ReplayBuffer
from .maddpg import AgentPolicy, TrainConfig, MaddpgTrainer, maddpg_update

__all__ = [
    "Mlp",
    "mlp_init",
    "mlp_forward",
    "mlp_backward",
    "sgd_step",
    "soft_update",
    "clone_mlp",
    "Transition",
    "TransitionBatch",
    "ReplayBuffer",
    "AgentPolicy",
    "TrainConfig",
    "MaddpgTrainer",
    "maddpg_update",
]
