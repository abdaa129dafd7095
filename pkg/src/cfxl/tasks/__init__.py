"""The two learned resource-allocation tasks, their baselines, and oracles."""

from .common import ReceiveChain, evaluate_batch, evaluate_drop, infeasible_metrics
from .antenna_selection import (
    AntennaSelectionEnv,
    OracleResult,
    brute_force_selection_oracle,
    decode_selection,
)
from .power_control import DoubleLayerPowerControlEnv, PowerControlEnv
from .baselines import equal_power_allocation, lsf_selection, no_selection

__all__ = [
    "ReceiveChain",
    "evaluate_batch",
    "evaluate_drop",
    "infeasible_metrics",
    "AntennaSelectionEnv",
    "OracleResult",
    "brute_force_selection_oracle",
    "decode_selection",
    "PowerControlEnv",
    "DoubleLayerPowerControlEnv",
    "equal_power_allocation",
    "lsf_selection",
    "no_selection",
]
