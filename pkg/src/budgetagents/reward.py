"""Composite final reward for one executed workflow.

Combines a binary task-success reward with a cost-efficiency reward: a flat
penalty for blowing the budget, and a savings bonus (linear in the fraction of
budget left over) that is granted only when the task succeeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RewardConfig:
    w_perf: float = 1.0
    w_cost: float = 1.0
    c_succ: float = 1.0
    c_fail: float = 1.0
    c_overflow: float = 2.0
    bonus_slope: float = 0.5

    def __post_init__(self) -> None:
        fields = (self.w_perf, self.w_cost, self.c_succ, self.c_fail, self.c_overflow, self.bonus_slope)
        if not all(math.isfinite(v) for v in fields):
            raise ValueError("reward constants must be finite")
        if self.w_perf < 0 or self.w_cost < 0 or self.bonus_slope < 0:
            raise ValueError("weights and bonus slope must be >= 0")
        if self.c_succ <= 0 or self.c_fail <= 0 or self.c_overflow <= 0:
            raise ValueError("reward constants must be > 0")


@dataclass(frozen=True)
class Outcome:
    success: bool
    actual_cost: float
    budget: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.actual_cost) or self.actual_cost < 0:
            raise ValueError(f"actual_cost must be finite and >= 0, got {self.actual_cost}")


def compute_reward(outcome: Outcome, config: RewardConfig = RewardConfig()) -> float:
    """Weighted sum of the success reward and the cost-efficiency reward.

    The overflow penalty replaces the savings bonus (never both), and a failed
    run earns no bonus even when under budget.
    """
    if outcome.budget <= 0:
        raise ValueError(f"budget must be > 0, got {outcome.budget}")
    r_perf = config.c_succ if outcome.success else -config.c_fail
    if outcome.actual_cost > outcome.budget:
        r_cost = -config.c_overflow
    elif outcome.success:
        r_cost = config.bonus_slope * (1.0 - outcome.actual_cost / outcome.budget)
    else:
        r_cost = 0.0
    return config.w_perf * r_perf + config.w_cost * r_cost
