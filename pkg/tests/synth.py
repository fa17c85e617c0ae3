"""Synthetic datasets and oracles shared by policy and acceptance tests."""

from __future__ import annotations

import numpy as np

from budgetagents.dataset import Experience, ExperienceDataset, ExperienceOutcome
from budgetagents.policy import PolicyState, loss


def dominant_topology_dataset(
    n_tasks: int = 200,
    dominant: int = 2,
    budget: float = 500.0,
    dominant_cost: float = 300.0,
    other_cost: float = 450.0,
) -> ExperienceDataset:
    """Every task succeeds only under one topology; all four rows per task."""
    experiences = []
    for i in range(n_tasks):
        text = f"task number {i}: compute the value of expression {i * 7} plus {i % 13}"
        for topo in range(4):
            success = topo == dominant
            experiences.append(
                Experience(
                    task_id=f"t{i}",
                    task_text=text,
                    budget=budget,
                    topology=topo,
                    outcome=ExperienceOutcome(
                        success=success,
                        actual_cost=dominant_cost if success else other_cost,
                    ),
                )
            )
    return ExperienceDataset(experiences=tuple(experiences))


def random_states(rng: np.random.Generator, count: int, dim: int = 384) -> list[PolicyState]:
    return [
        PolicyState(embedding=rng.normal(size=dim) / 20.0, budget=float(abs(rng.normal()) + 0.1))
        for _ in range(count)
    ]


def finite_difference_check(params, batch, beta, coords_per_layer=20, h=1e-5, seed=0):
    """Worst relative error between analytic gradients and central differences,
    probed at randomly chosen coordinates of every layer."""
    rng = np.random.default_rng(seed)
    _, grads = loss(params, batch, beta)
    worst = 0.0
    for name, arr in params.arrays().items():
        flat = arr.ravel()
        count = min(coords_per_layer, flat.size)
        for i in rng.choice(flat.size, size=count, replace=False):
            original = flat[i]
            flat[i] = original + h
            up, _ = loss(params, batch, beta)
            flat[i] = original - h
            down, _ = loss(params, batch, beta)
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            analytic = grads[name].ravel()[i]
            worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8))
    return worst


def max_lower_tier_weight_dp(costs_int: list[int], weights: list[int], budget: float) -> list[int]:
    """Exact maxima of budget-feasible lower-tier weight bundles, per tier.

    Returns best[i] = max over multisets of tiers j > i of sum W_j * m_j with
    sum c_j * m_j <= budget, computed by an int64 bounded-knapsack DP (binary
    splitting of counts). Integer costs only; weights must stay below 2^63.
    """
    capacity = int(budget)
    table = np.zeros(capacity + 1, dtype=np.int64)
    num_tiers = len(costs_int)
    best = [0] * num_tiers
    for j in range(num_tiers - 1, 0, -1):
        cost, value = costs_int[j], weights[j]
        count = capacity // cost
        piece = 1
        while count > 0:
            take = min(piece, count)
            w, v = cost * take, value * take
            if w <= capacity:
                table[w:] = np.maximum(table[w:], table[:-w] + v)
            count -= take
            piece *= 2
        best[j - 1] = int(table[capacity])
    return best
