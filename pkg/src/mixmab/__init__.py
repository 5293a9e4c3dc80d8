"""LoRaWAN uplink simulator with MIX-MAB, EXP3 and random transmission-parameter policies."""
from .bandit import (
    ActionConfig,
    ActionSpace,
    ConfigError,
    MixMabState,
    PolicyKind,
    compute_learning_rate,
    exp3_policy_init,
    legacy_random_select,
    make_action_space,
    make_policy,
    select_action,
    update,
)
from .engine import SimConfig, SimResult, run
from .metrics import MetricsSeries, convergence_time, cumulative_pdr, energy_per_packet, pdr

__version__ = "0.1.0"

__all__ = [
    "ActionConfig",
    "ActionSpace",
    "ConfigError",
    "MetricsSeries",
    "MixMabState",
    "PolicyKind",
    "SimConfig",
    "SimResult",
    "compute_learning_rate",
    "convergence_time",
    "cumulative_pdr",
    "energy_per_packet",
    "exp3_policy_init",
    "legacy_random_select",
    "make_action_space",
    "make_policy",
    "pdr",
    "run",
    "select_action",
    "update",
]
