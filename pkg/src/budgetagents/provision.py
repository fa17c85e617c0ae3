"""Budget-feasible LLM pool selection.

Chooses how many instances of each tier to provision so the pool is
lexicographically optimal: stronger tiers are filled first, weaker tiers only
with the residual budget. This is encoded with integer dominance weights
(one unit of tier i is worth more than any budget-affordable bundle of weaker
tiers) and solved exactly by depth-first branch and bound with a fractional
relaxation bound. An exhaustive enumerator with the same contract serves as
the test oracle.

Weights are plain Python ints (they grow multiplicatively and overflow 64-bit
quickly); floor divisions of budget by cost go through Fraction so the floors
are exact for the stored float values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

BRUTE_FORCE_MAX_TIERS = 6
BRUTE_FORCE_MAX_COUNT = 20


@dataclass(frozen=True)
class ProvisionProblem:
    """Instance pool selection problem: budget, per-tier unit costs (tier 1
    first), a per-tier instance cap, and the minimum pool size."""

    budget: float
    tier_costs: tuple[float, ...]
    instance_cap: int = 5
    min_agents: int = 2

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValueError(f"budget must be > 0, got {self.budget}")
        if not self.tier_costs:
            raise ValueError("at least one tier cost required")
        if any(c <= 0 for c in self.tier_costs):
            raise ValueError(f"tier costs must be > 0, got {self.tier_costs}")
        if self.instance_cap < 1:
            raise ValueError("instance_cap must be >= 1")
        if self.min_agents < 0:
            raise ValueError("min_agents must be >= 0")
        object.__setattr__(self, "tier_costs", tuple(float(c) for c in self.tier_costs))


@dataclass(frozen=True)
class DecisionWeights:
    """Per-tier integer weights; the lowest tier has weight 1 and each higher
    tier outweighs every budget-affordable bundle of strictly lower tiers.
    Strictly decreasing whenever each lower tier is affordable at least once."""

    weights: tuple[int, ...]


@dataclass(frozen=True)
class ProvisionSolution:
    counts: tuple[int, ...]
    total_weight: int
    total_cost: float
    feasible: bool
    reason: str | None = None


def _affordable(budget: float, cost: float) -> int:
    # floor(budget / cost), exact for the stored float values
    return int(Fraction(budget) / Fraction(cost))


def compute_weights(problem: ProvisionProblem) -> DecisionWeights:
    """Build the dominance weights bottom-up: weight 1 for the weakest tier,
    then 1 plus the weight of every affordable lower-tier unit for each tier
    above it."""
    costs = problem.tier_costs
    num_tiers = len(costs)
    weights = [0] * num_tiers
    weights[num_tiers - 1] = 1
    for i in range(num_tiers - 2, -1, -1):
        total = 1
        for j in range(i + 1, num_tiers):
            total += weights[j] * _affordable(problem.budget, costs[j])
        weights[i] = total
    return DecisionWeights(weights=tuple(weights))


def _better(a: tuple[int, float, tuple[int, ...]], b: tuple[int, float, tuple[int, ...]]) -> bool:
    """Total order on (weight, cost, counts): higher weight wins, then lower
    cost, then lexicographically smaller count vector."""
    if a[0] != b[0]:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def _max_units(spent: float, cost: float, cap: int, budget: float) -> int:
    """Largest n <= cap with spent + n*cost <= budget, judged by the same
    float expression every solver path uses for feasibility."""
    n = min(cap, int((Fraction(budget) - Fraction(spent)) / Fraction(cost)))
    while n > 0 and spent + n * cost > budget:
        n -= 1
    while n < cap and spent + (n + 1) * cost <= budget:
        n += 1
    return n


def _max_affordable_agents(problem: ProvisionProblem) -> int:
    # Fill cheapest tiers first within caps; optimal for maximizing the count.
    spent = 0.0
    agents = 0
    for cost in sorted(problem.tier_costs):
        take = _max_units(spent, cost, problem.instance_cap, problem.budget)
        agents += take
        spent += take * cost
    return agents


def _infeasible(problem: ProvisionProblem) -> ProvisionSolution:
    most = _max_affordable_agents(problem)
    return ProvisionSolution(
        counts=tuple([0] * len(problem.tier_costs)),
        total_weight=0,
        total_cost=0.0,
        feasible=False,
        reason=(
            f"budget {problem.budget:g} affords at most {most} agent(s); "
            f"at least {problem.min_agents} required"
        ),
    )


def solve(problem: ProvisionProblem) -> ProvisionSolution:
    """Exactly maximize total decision weight subject to the budget, the
    per-tier instance cap, and the minimum pool size.

    Depth-first branch and bound over tiers in descending weight order, trying
    larger counts first so the greedy (lexicographically maximal) vector is
    the first incumbent. Nodes are pruned with the fractional-relaxation bound
    of the remaining bounded knapsack, evaluated in exact rational arithmetic;
    weight ties between distinct feasible vectors are impossible under the
    dominance construction, so pruning on bound <= incumbent is safe.
    """
    weights = compute_weights(problem).weights
    costs = problem.tier_costs
    num_tiers = len(costs)
    budget = problem.budget
    cap = problem.instance_cap

    # Ratio order for the fractional bound (weight per unit cost, descending).
    ratio_order = sorted(
        range(num_tiers), key=lambda i: Fraction(weights[i]) / Fraction(costs[i]), reverse=True
    )
    cost_frac = [Fraction(c) for c in costs]

    def fractional_bound(tier: int, residual: Fraction) -> Fraction:
        bound = Fraction(0)
        for j in ratio_order:
            if j < tier or residual <= 0:
                continue
            take = min(Fraction(cap), residual / cost_frac[j])
            bound += weights[j] * take
            residual -= take * cost_frac[j]
        return bound

    best: list[tuple[int, float, tuple[int, ...]] | None] = [None]

    def dfs(tier: int, spent: float, agents: int, weight_acc: int, counts: list[int]) -> None:
        if tier == num_tiers:
            if agents >= problem.min_agents:
                candidate = (weight_acc, spent, tuple(counts))
                if best[0] is None or _better(candidate, best[0]):
                    best[0] = candidate
            return
        # Cannot reach the minimum pool size even with every remaining tier maxed.
        reachable = agents + sum(
            _max_units(spent, costs[j], cap, budget) for j in range(tier, num_tiers)
        )
        if reachable < problem.min_agents:
            return
        if best[0] is not None:
            residual = Fraction(budget) - Fraction(spent)
            if weight_acc + fractional_bound(tier, residual) <= best[0][0]:
                return
        n_max = _max_units(spent, costs[tier], cap, budget)
        for n in range(n_max, -1, -1):
            dfs(tier + 1, spent + n * costs[tier], agents + n, weight_acc + n * weights[tier], counts + [n])

    dfs(0, 0.0, 0, 0, [])
    if best[0] is None:
        return _infeasible(problem)
    weight, cost, counts = best[0]
    return ProvisionSolution(counts=counts, total_weight=weight, total_cost=cost, feasible=True)


def brute_force_solve(problem: ProvisionProblem) -> ProvisionSolution:
    """Exhaustive enumeration of all feasible count vectors; same optimum and
    tie-break contract as solve. Test oracle for small instances only."""
    costs = problem.tier_costs
    num_tiers = len(costs)
    if num_tiers > BRUTE_FORCE_MAX_TIERS:
        raise ValueError(f"instance too large: {num_tiers} tiers > {BRUTE_FORCE_MAX_TIERS}")
    per_tier_max = [
        _max_units(0.0, c, problem.instance_cap, problem.budget) for c in costs
    ]
    if any(m > BRUTE_FORCE_MAX_COUNT for m in per_tier_max):
        raise ValueError(
            f"instance too large: per-tier count bound {max(per_tier_max)} > {BRUTE_FORCE_MAX_COUNT}"
        )

    weights = compute_weights(problem).weights
    best: list[tuple[int, float, tuple[int, ...]] | None] = [None]

    def enumerate_counts(tier: int, spent: float, agents: int, weight_acc: int, counts: list[int]) -> None:
        if tier == num_tiers:
            if agents >= problem.min_agents:
                candidate = (weight_acc, spent, tuple(counts))
                if best[0] is None or _better(candidate, best[0]):
                    best[0] = candidate
            return
        for n in range(per_tier_max[tier] + 1):
            total = spent + n * costs[tier]
            if total > problem.budget:
                break
            enumerate_counts(tier + 1, total, agents + n, weight_acc + n * weights[tier], counts + [n])

    enumerate_counts(0, 0.0, 0, 0, [])
    if best[0] is None:
        return _infeasible(problem)
    weight, cost, counts = best[0]
    return ProvisionSolution(counts=counts, total_weight=weight, total_cost=cost, feasible=True)
