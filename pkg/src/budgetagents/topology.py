"""Collaboration topologies and the budget-enforced execution engine.

Four workflow patterns over a provisioned agent pool: linear relay, star
fan-out with majority merge, generate-critique-revise feedback, and
planner-driven stepwise execution with bounded replanning. Every call is
costed from backend-reported token usage into a serialized ledger; execution
halts the moment the running total crosses the budget (a call's cost is only
known after it completes, so the final call may be the one that crosses).
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping

from .backend import Backend, BackendError, CallRequest
from .catalog import ModelSpec, estimate_cost
from .evaluators import Evaluator
from .profile import DEFAULT_MAX_TOKENS, TaskSpec


class Topology(IntEnum):
    LINEAR = 0
    STAR = 1
    FEEDBACK = 2
    PLANNER_DRIVEN = 3


TOPOLOGY_NAMES = ("linear", "star", "feedback", "planner")

ROLE_PLANNER = "planner"
ROLE_EXECUTOR = "executor"
ROLE_CRITIC = "critic"

_STEP_RE = re.compile(r"^\s*\d+[.)]\s*(\S.*)$")


def topology_from_name(name: str) -> Topology:
    try:
        return Topology(TOPOLOGY_NAMES.index(name.strip().lower()))
    except ValueError:
        raise ValueError(f"unknown topology {name!r}; expected one of {TOPOLOGY_NAMES}") from None


@dataclass(frozen=True)
class AgentInstance:
    model: ModelSpec
    label: str


@dataclass(frozen=True)
class RoleAssignment:
    """Instances in descending tier-weight order with their assigned roles."""

    instances: tuple[AgentInstance, ...]
    roles: tuple[str, ...]

    def members(self, role: str) -> list[AgentInstance]:
        return [inst for inst, r in zip(self.instances, self.roles) if r == role]


@dataclass(frozen=True)
class ExecutionLimits:
    max_feedback_rounds: int = 3
    max_replans: int = 2
    # Worst-case pre-call budget guard; None leaves enforcement purely post-call.
    precall_slack: float | None = None


@dataclass(frozen=True)
class CallRecord:
    model: str
    instance: str
    role: str
    t_in: int
    t_out: int
    cost: float


@dataclass
class RunTrace:
    task_id: str
    topology: str
    budget: float
    calls: list[CallRecord] = field(default_factory=list)
    cumulative_cost: float = 0.0
    final_answer: str | None = None
    success: bool | None = None
    oob: bool = False
    terminated_early: bool = False
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "topology": self.topology,
            "budget": self.budget,
            "calls": [
                {
                    "model": c.model,
                    "instance": c.instance,
                    "role": c.role,
                    "t_in": c.t_in,
                    "t_out": c.t_out,
                    "cost": c.cost,
                }
                for c in self.calls
            ],
            "cumulative_cost": self.cumulative_cost,
            "final_answer": self.final_answer,
            "success": self.success,
            "oob": self.oob,
            "terminated_early": self.terminated_early,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunTrace":
        return cls(
            task_id=data["task_id"],
            topology=data["topology"],
            budget=float(data["budget"]),
            calls=[
                CallRecord(
                    model=c["model"],
                    instance=c["instance"],
                    role=c["role"],
                    t_in=int(c["t_in"]),
                    t_out=int(c["t_out"]),
                    cost=float(c["cost"]),
                )
                for c in data.get("calls", [])
            ],
            cumulative_cost=float(data["cumulative_cost"]),
            final_answer=data.get("final_answer"),
            success=data.get("success"),
            oob=bool(data["oob"]),
            terminated_early=bool(data["terminated_early"]),
            note=data.get("note"),
        )


def expand_pool(catalog, solution) -> list[AgentInstance]:
    """Turn a provisioning solution's per-tier counts into concrete agents."""
    return [
        AgentInstance(model=model, label=label)
        for model, label in catalog.instances_for_counts(list(solution.counts))
    ]


def assign_roles(instances: list[AgentInstance], topology: Topology) -> RoleAssignment:
    """Map pool instances to roles for one topology.

    Instances must arrive in descending tier-weight order (strongest first);
    the strongest members take the critic/planner seats.
    """
    n = len(instances)
    if n < 2:
        raise ValueError(f"{TOPOLOGY_NAMES[topology]} needs at least 2 instances, pool has {n}")
    if topology in (Topology.LINEAR, Topology.STAR):
        roles = [ROLE_EXECUTOR] * n
    elif topology == Topology.FEEDBACK:
        roles = [ROLE_CRITIC] + [ROLE_EXECUTOR] * (n - 1)
    else:  # PLANNER_DRIVEN
        if n < 3:
            raise ValueError(
                f"planner topology needs at least 3 instances "
                f"(planner + critic + executor), pool has {n}"
            )
        roles = [ROLE_PLANNER, ROLE_CRITIC] + [ROLE_EXECUTOR] * (n - 2)
    return RoleAssignment(instances=tuple(instances), roles=tuple(roles))


def count_oob(traces: list[RunTrace]) -> int:
    """Number of traces whose actual cost exceeded their budget."""
    return sum(1 for t in traces if t.oob)


class _Halt(Exception):
    """Internal control flow: stop issuing calls, keep what we have."""


class _CostLedger:
    """Serialized accumulation point for call costs."""

    def __init__(self, budget: float):
        self.budget = budget
        self.total = 0.0
        self._lock = threading.Lock()

    def commit(self, cost: float) -> float:
        with self._lock:
            self.total += cost
            return self.total

    def exceeded(self) -> bool:
        return self.total > self.budget


def _parse_verdict(text: str) -> tuple[bool, str]:
    """(accepted, critique). Only an explicit REJECT first line triggers revision."""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if lines and lines[0].upper().startswith("REJECT"):
        critique = "\n".join(lines[1:]) or lines[0]
        return False, critique
    return True, ""


def _parse_plan(text: str) -> list[str]:
    """Numbered lines ('1. ...' or '2) ...') become plan steps."""
    steps = []
    for line in text.splitlines():
        match = _STEP_RE.match(line)
        if match:
            steps.append(match.group(1).strip())
    return steps


class _Runner:
    def __init__(
        self,
        task: TaskSpec,
        assignment: RoleAssignment,
        topology: Topology,
        budget: float,
        backends: Mapping[str, Backend],
        evaluator: Evaluator,
        limits: ExecutionLimits,
        max_tokens: Mapping[str, int],
        planned_t_in: int,
    ):
        self.task = task
        self.assignment = assignment
        self.topology = topology
        self.ledger = _CostLedger(budget)
        self.backends = backends
        self.evaluator = evaluator
        self.limits = limits
        self.max_tokens = max_tokens
        self.planned_t_in = planned_t_in
        self.trace = RunTrace(task_id=task.task_id, topology=TOPOLOGY_NAMES[topology], budget=budget)
        self.latest_executor_output: str | None = None
        self.star_outputs: list[tuple[int, str]] = []
        self.failed = False

    def call(self, instance: AgentInstance, role: str, system: str, user: str) -> str:
        limit = self.max_tokens.get(role, DEFAULT_MAX_TOKENS[role])
        if self.limits.precall_slack is not None:
            worst = estimate_cost(instance.model, self.planned_t_in, limit).unit_cost
            if self.ledger.total + worst > self.ledger.budget + self.limits.precall_slack:
                self.trace.note = f"budget guard: skipped {role} call on {instance.label}"
                raise _Halt
        request = CallRequest(
            model=instance.model.name,
            system=system,
            user=user,
            max_tokens=limit,
            role=role,
        )
        backend = self.backends[instance.model.backend_id]
        try:
            response = backend.invoke(request)
        except BackendError:
            try:
                response = backend.invoke(request)
            except BackendError as exc:
                self.failed = True
                self.trace.note = f"backend failure ({role} on {instance.label}): {exc}"
                raise _Halt from exc
        cost = estimate_cost(instance.model, response.prompt_tokens, response.completion_tokens).unit_cost
        self.trace.calls.append(
            CallRecord(
                model=instance.model.name,
                instance=instance.label,
                role=role,
                t_in=response.prompt_tokens,
                t_out=response.completion_tokens,
                cost=cost,
            )
        )
        self.ledger.commit(cost)
        if role == ROLE_EXECUTOR:
            self.latest_executor_output = response.text
        if self.ledger.exceeded():
            self.trace.oob = True
            self.trace.terminated_early = True
            raise _Halt
        return response.text

    # -- topology flows -----------------------------------------------------

    def run_linear(self) -> None:
        previous = None
        for inst in self.assignment.members(ROLE_EXECUTOR):
            user = self.task.text if previous is None else (
                f"{self.task.text}\n\nPrevious agent's output:\n{previous}\n\n"
                "Build on it and give the final answer."
            )
            previous = self.call(inst, ROLE_EXECUTOR, "You solve tasks step by step.", user)

    def run_star(self) -> None:
        for idx, inst in enumerate(self.assignment.members(ROLE_EXECUTOR)):
            text = self.call(
                inst,
                ROLE_EXECUTOR,
                "You solve the task independently and give the final answer.",
                self.task.text,
            )
            self.star_outputs.append((idx, text))

    def _merge_star(self) -> str | None:
        """Majority vote over normalized answers; ties and the no-vote case
        fall back to the highest-weight executor's output."""
        if not self.star_outputs:
            return None
        votes: dict[str, list[int]] = {}
        for idx, text in self.star_outputs:
            key = self.evaluator.normalize(text)
            if key is not None:
                votes.setdefault(key, []).append(idx)
        if not votes:
            return self.star_outputs[0][1]
        best_count = max(len(v) for v in votes.values())
        winner_idx = min(min(v) for v in votes.values() if len(v) == best_count)
        return dict(self.star_outputs)[winner_idx]

    def run_feedback(self) -> None:
        executors = self.assignment.members(ROLE_EXECUTOR)
        critic = self.assignment.members(ROLE_CRITIC)[0]
        draft = None
        for inst in executors:
            user = self.task.text if draft is None else (
                f"{self.task.text}\n\nPrevious agent's output:\n{draft}\n\n"
                "Build on it and give the final answer."
            )
            draft = self.call(inst, ROLE_EXECUTOR, "You solve tasks step by step.", user)
        reviser = executors[-1]
        for round_no in range(1, self.limits.max_feedback_rounds + 1):
            verdict = self.call(
                critic,
                ROLE_CRITIC,
                "You audit a proposed solution. Reply ACCEPT on the first line if it is "
                "correct, otherwise REJECT followed by what must be fixed. Do not solve "
                "the task yourself.",
                f"Task:\n{self.task.text}\n\nProposed solution:\n{draft}",
            )
            accepted, critique = _parse_verdict(verdict)
            if accepted or round_no == self.limits.max_feedback_rounds:
                break
            draft = self.call(
                reviser,
                ROLE_EXECUTOR,
                "You revise your previous solution using the critique.",
                f"Task:\n{self.task.text}\n\nYour previous solution:\n{draft}\n\n"
                f"Critique:\n{critique}\n\nGive the corrected final answer.",
            )

    def run_planner(self) -> None:
        planner = self.assignment.members(ROLE_PLANNER)[0]
        critic = self.assignment.members(ROLE_CRITIC)[0]
        executors = self.assignment.members(ROLE_EXECUTOR)
        critique = None
        for attempt in range(1, self.limits.max_replans + 2):
            user = f"Task:\n{self.task.text}\n\nWrite a numbered step plan (1., 2., ...)."
            if critique:
                user += f"\n\nYour previous plan failed: {critique}\nWrite a corrected plan."
            plan_text = self.call(
                planner,
                ROLE_PLANNER,
                "You are a planner. Output only a numbered list of steps; do not solve "
                "the task yourself.",
                user,
            )
            steps = _parse_plan(plan_text)
            if not steps:
                critique = "plan had no numbered steps"
                continue
            result = None
            for i, step in enumerate(steps):
                inst = executors[i % len(executors)]
                user = f"Task:\n{self.task.text}\n\nPlan:\n{plan_text}\n\nExecute step: {step}"
                if result is not None:
                    user += f"\n\nResult so far:\n{result}"
                result = self.call(inst, ROLE_EXECUTOR, "You execute one plan step.", user)
            verdict = self.call(
                critic,
                ROLE_CRITIC,
                "You audit a result. Reply ACCEPT on the first line if it solves the "
                "task, otherwise REJECT followed by what is wrong.",
                f"Task:\n{self.task.text}\n\nResult:\n{result}",
            )
            accepted, critique = _parse_verdict(verdict)
            if accepted:
                break


def execute(
    task: TaskSpec,
    assignment: RoleAssignment,
    topology: Topology,
    budget: float,
    backends: Mapping[str, Backend],
    evaluator: Evaluator,
    limits: ExecutionLimits = ExecutionLimits(),
    max_tokens: Mapping[str, int] | None = None,
    planned_t_in: int = 500,
) -> RunTrace:
    """Run one task through one topology, ledgering every call's cost.

    The trace records each call's backend-reported token usage and unit cost;
    oob is set exactly when the final cumulative cost exceeds the budget, and
    no call is initiated once the ledger has crossed it.
    """
    if budget <= 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    _validate_assignment(assignment, topology)
    runner = _Runner(
        task=task,
        assignment=assignment,
        topology=topology,
        budget=budget,
        backends=backends,
        evaluator=evaluator,
        limits=limits,
        max_tokens=dict(max_tokens) if max_tokens else dict(DEFAULT_MAX_TOKENS),
        planned_t_in=planned_t_in,
    )
    flows = {
        Topology.LINEAR: runner.run_linear,
        Topology.STAR: runner.run_star,
        Topology.FEEDBACK: runner.run_feedback,
        Topology.PLANNER_DRIVEN: runner.run_planner,
    }
    try:
        flows[topology]()
    except _Halt:
        pass

    trace = runner.trace
    trace.cumulative_cost = runner.ledger.total
    trace.oob = runner.ledger.total > budget
    if topology == Topology.STAR:
        trace.final_answer = runner._merge_star()
    else:
        trace.final_answer = runner.latest_executor_output

    if runner.failed or trace.final_answer is None:
        trace.success = False
    else:
        try:
            trace.success = evaluator.grade(trace.final_answer, task)
        except Exception as exc:  # noqa: BLE001 - evaluator is user-pluggable
            trace.success = False
            trace.note = f"evaluator failure: {exc}"
    return trace


def _validate_assignment(assignment: RoleAssignment, topology: Topology) -> None:
    roles = set(assignment.roles)
    if not assignment.members(ROLE_EXECUTOR):
        raise ValueError("assignment has no executor")
    if topology in (Topology.LINEAR, Topology.STAR) and roles != {ROLE_EXECUTOR}:
        raise ValueError(f"{TOPOLOGY_NAMES[topology]} expects executors only, got {sorted(roles)}")
    if topology == Topology.FEEDBACK and (ROLE_CRITIC not in roles or ROLE_PLANNER in roles):
        raise ValueError("feedback expects one critic plus executors")
    if topology == Topology.PLANNER_DRIVEN and (ROLE_PLANNER not in roles or ROLE_CRITIC not in roles):
        raise ValueError("planner topology expects a planner, a critic, and executors")
