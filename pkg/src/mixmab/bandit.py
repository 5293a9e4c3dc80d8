"""Per-device transmission-parameter learners.

Three policies share one interface (``select(rng) -> index`` and
``update(index, reward)``):

* :class:`MixMabPolicy` -- round-robin pre-processing followed by
  exponential-weight sampling with successive elimination and count resets.
* :class:`Exp3Policy` -- plain exponential weights with a uniform start
  (the LoRa-MAB baseline).
* :class:`LegacyPolicy` -- uniform random configuration, no learning.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

SF_RANGE = range(7, 13)
TP_RANGE_DBM = range(-4, 21)
# EU868 band edges
CHANNEL_RANGE_HZ = (863_000_000, 870_000_000)

PAPER_E = 2.71


class ConfigError(ValueError):
    """Raised for invalid user-supplied configuration values."""


class PolicyKind(str, Enum):
    MIXMAB = "mixmab"
    LORAMAB = "loramab"
    LEGACY = "legacy"


@dataclass(frozen=True, order=True)
class ActionConfig:
    sf: int
    channel_hz: int
    tp_dbm: int


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple[ActionConfig, ...]

    @property
    def K(self) -> int:
        return len(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, k: int) -> ActionConfig:
        return self.actions[k]

    def __iter__(self):
        return iter(self.actions)

    def index(self, action: ActionConfig) -> int:
        return self.actions.index(action)


def make_action_space(
    sfs: Iterable[int], channels_hz: Iterable[int], tps_dbm: Iterable[int]
) -> ActionSpace:
    """Cartesian product of the three parameter sets, SF-major, then channel, then power."""
    sfs, channels_hz, tps_dbm = sorted(set(sfs)), sorted(set(channels_hz)), sorted(set(tps_dbm))
    for name, values in (("sfs", sfs), ("channels_hz", channels_hz), ("tps_dbm", tps_dbm)):
        if not values:
            raise ConfigError(f"{name} must not be empty")
    for sf in sfs:
        if sf not in SF_RANGE:
            raise ConfigError(f"sfs: spreading factor {sf} outside 7..12")
    for ch in channels_hz:
        if not CHANNEL_RANGE_HZ[0] <= ch <= CHANNEL_RANGE_HZ[1]:
            raise ConfigError(f"channels_hz: {ch} Hz outside {CHANNEL_RANGE_HZ}")
    for tp in tps_dbm:
        if tp not in TP_RANGE_DBM:
            raise ConfigError(f"tps_dbm: {tp} dBm outside -4..20")
    actions = tuple(
        ActionConfig(int(sf), int(ch), int(tp))
        for sf, ch, tp in itertools.product(sfs, channels_hz, tps_dbm)
    )
    return ActionSpace(actions)


def compute_learning_rate(K: int, T: int, e: float = PAPER_E) -> float:
    """``min(1, sqrt(K ln K / ((e - 1) T)))`` with the truncated constant e = 2.71 by default."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    return min(1.0, math.sqrt(K * math.log(K) / ((e - 1.0) * T)))


def _check_reward(reward: int) -> int:
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    return int(reward)


def _sample(probabilities: Sequence[float], rng: np.random.Generator) -> int:
    # inverse-CDF over the positive entries; a draw landing exactly on a
    # boundary goes to the lower index
    support = [i for i, p in enumerate(probabilities) if p > 0]
    if not support:
        return min(int(rng.random() * len(probabilities)), len(probabilities) - 1)
    cdf = list(itertools.accumulate(probabilities[i] for i in support))
    pos = bisect.bisect_left(cdf, rng.random() * cdf[-1])
    return support[min(pos, len(support) - 1)]


def _exp_weight_probabilities(weights: Sequence[float], gamma: float) -> list[float]:
    K = len(weights)
    scale = (1.0 - gamma) / math.fsum(weights)
    floor = gamma / K
    return [w * scale + floor for w in weights]


@dataclass
class MixMabState:
    """Learner state of one end device.

    ``probabilities`` holds NaN until the first update writes it.
    ``eliminated`` marks actions removed from the sampling support; the
    mask is cleared whenever the counts are reset.
    """

    probabilities: list[float]
    weights: list[float]
    counts: list[int]
    eliminated: list[bool]
    gamma: float
    alpha: int = 1
    l_exp: int = 5
    l_ee: int = 100
    iteration: int = 0
    round_robin_cursor: int = 0
    resets: int = 0

    @classmethod
    def new(cls, K: int, gamma: float, l_exp: int = 5, l_ee: int = 100) -> "MixMabState":
        if K < 1:
            raise ConfigError(f"K must be >= 1, got {K}")
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
        if l_exp < 0 or l_ee < 1:
            raise ConfigError("l_exp must be >= 0 and l_ee >= 1")
        return cls(
            probabilities=[math.nan] * K,
            weights=[1.0] * K,
            counts=[0] * K,
            eliminated=[False] * K,
            gamma=gamma,
            l_exp=l_exp,
            l_ee=l_ee,
        )

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def probabilities_set(self) -> bool:
        return not any(math.isnan(p) for p in self.probabilities)

    @property
    def in_preprocessing(self) -> bool:
        return min(self.counts) <= self.l_exp


def select_action(state: MixMabState, rng: np.random.Generator) -> int:
    """Round-robin while any count is at most ``l_exp``, PDF sampling afterwards."""
    if state.in_preprocessing:
        k = state.round_robin_cursor
        state.round_robin_cursor = (k + 1) % state.K
        return k
    if not any(p > 0 for p in state.probabilities):
        # every action eliminated: sample uniformly and re-admit all actions
        state.eliminated = [False] * state.K
        return min(int(rng.random() * state.K), state.K - 1)
    return _sample(state.probabilities, rng)


def update(state: MixMabState, k: int, reward: int) -> MixMabState:
    """Apply one learning step for the action ``k`` that was just played.

    Mutates ``state`` in place and returns it.
    """
    K, gamma = state.K, state.gamma
    if not 0 <= k < K:
        raise IndexError(f"action index {k} out of range for K={K}")
    reward = _check_reward(reward)

    p = _exp_weight_probabilities(state.weights, gamma)
    # eliminated actions stay out of the support until the next reset
    state.eliminated[k] = False
    p = [0.0 if out else pj for pj, out in zip(p, state.eliminated)]
    total = math.fsum(p)
    p = [pj / total for pj in p]

    if reward:
        state.weights[k] *= math.exp(gamma * reward / (K * p[k]))
    state.counts[k] += 1
    state.iteration += 1

    if state.counts[k] > state.l_exp and p[k] < 0.5 * max(p):
        p[k] = 0.0
        state.eliminated[k] = True
    state.probabilities = p

    if state.counts[k] > state.alpha * state.l_ee:
        state.counts = [0] * K
        state.eliminated = [False] * K
        state.alpha += 1
        state.round_robin_cursor = 0
        state.resets += 1
    return state


@dataclass
class Exp3State:
    probabilities: list[float]
    weights: list[float]
    gamma: float
    iteration: int = 0

    @property
    def K(self) -> int:
        return len(self.weights)


def exp3_policy_init(K: int, T: int, e: float = PAPER_E, gamma: float | None = None) -> Exp3State:
    """Uniform start, ``P_k = 1/K`` and ``W_k = 1``."""
    lr = compute_learning_rate(K, T, e) if gamma is None else gamma
    return Exp3State(probabilities=[1.0 / K] * K, weights=[1.0] * K, gamma=lr)


def exp3_select(state: Exp3State, rng: np.random.Generator) -> int:
    return _sample(state.probabilities, rng)


def exp3_update(state: Exp3State, k: int, reward: int) -> Exp3State:
    K = state.K
    if not 0 <= k < K:
        raise IndexError(f"action index {k} out of range for K={K}")
    reward = _check_reward(reward)
    p = _exp_weight_probabilities(state.weights, state.gamma)
    total = math.fsum(p)
    p = [pj / total for pj in p]
    if reward:
        state.weights[k] *= math.exp(state.gamma * reward / (K * p[k]))
    state.probabilities = p
    state.iteration += 1
    return state


def legacy_random_select(action_space: ActionSpace | int, rng: np.random.Generator) -> int:
    K = action_space if isinstance(action_space, int) else action_space.K
    return min(int(rng.random() * K), K - 1)


# -- uniform policy objects used by the simulator ---------------------------


class MixMabPolicy:
    kind = PolicyKind.MIXMAB

    def __init__(self, K: int, gamma: float, l_exp: int = 5, l_ee: int = 100) -> None:
        self.state = MixMabState.new(K, gamma, l_exp, l_ee)

    def select(self, rng: np.random.Generator) -> int:
        return select_action(self.state, rng)

    def update(self, k: int, reward: int) -> None:
        update(self.state, k, reward)


class Exp3Policy:
    kind = PolicyKind.LORAMAB

    def __init__(self, K: int, gamma: float) -> None:
        self.state = exp3_policy_init(K, 1, gamma=gamma)

    def select(self, rng: np.random.Generator) -> int:
        return exp3_select(self.state, rng)

    def update(self, k: int, reward: int) -> None:
        exp3_update(self.state, k, reward)


@dataclass
class LegacyPolicy:
    K: int
    kind: PolicyKind = field(default=PolicyKind.LEGACY, init=False)

    def select(self, rng: np.random.Generator) -> int:
        return legacy_random_select(self.K, rng)

    def update(self, k: int, reward: int) -> None:
        _check_reward(reward)


def make_policy(
    kind: PolicyKind | str,
    K: int,
    T: int,
    *,
    gamma: float | None = None,
    l_exp: int = 5,
    l_ee: int = 100,
    e: float = PAPER_E,
):
    """Build a fresh policy object; ``gamma`` overrides the horizon-derived learning rate."""
    kind = PolicyKind(kind)
    lr = compute_learning_rate(K, T, e) if gamma is None else float(gamma)
    if kind is PolicyKind.MIXMAB:
        return MixMabPolicy(K, lr, l_exp, l_ee)
    if kind is PolicyKind.LORAMAB:
        return Exp3Policy(K, lr)
    return LegacyPolicy(K)


def arm_history(
    policy, rewards: Sequence[float], n_iter: int, rng: np.random.Generator
) -> np.ndarray:
    """Play ``policy`` against a stationary Bernoulli bandit with success ``rewards``."""
    chosen = np.empty(n_iter, dtype=np.int64)
    for t in range(n_iter):
        k = policy.select(rng)
        chosen[t] = k
        policy.update(k, int(rng.random() < rewards[k]))
    return chosen
