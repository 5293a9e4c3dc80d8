"""MIX-MAB against EXP3 on a stationary Bernoulli bandit.

Arm 0 succeeds 90% of the time and the other five 50%.  For a handful of
seeds we report how often each policy picks arm 0 during the last 1000 of
20000 pulls.
"""
import numpy as np

from mixmab.bandit import arm_history, make_policy

SUCCESS = [0.9, 0.5, 0.5, 0.5, 0.5, 0.5]
PULLS = 20_000


def best_arm_share(kind: str, seed: int) -> float:
    policy = make_policy(kind, len(SUCCESS), PULLS)
    chosen = arm_history(policy, SUCCESS, PULLS, np.random.default_rng(seed))
    return float((chosen[-1000:] == 0).mean())


def main() -> None:
    for kind in ("mixmab", "loramab"):
        shares = [best_arm_share(kind, seed) for seed in range(5)]
        print(f"{kind:8s} " + " ".join(f"{s:.2f}" for s in shares))


if __name__ == "__main__":
    main()
