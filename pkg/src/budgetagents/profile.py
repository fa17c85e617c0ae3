"""Task profiles: the tasks to run plus per-run execution settings.

A profile bundles the task list, the provisioning token estimates, per-role
generation limits, the evaluator kind, and (for offline runs) the mock script
that drives the scripted backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import DEFAULT_INPUT_TOKENS, DEFAULT_OUTPUT_TOKENS, estimate_output_tokens

DEFAULT_MAX_TOKENS = {"planner": 384, "executor": 384, "critic": 384}


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    text: str
    answer: str | None = None


@dataclass(frozen=True)
class TaskProfile:
    tasks: tuple[TaskSpec, ...]
    t_in: int = DEFAULT_INPUT_TOKENS
    t_out: int = DEFAULT_OUTPUT_TOKENS
    evaluator_kind: str = "numeric"
    max_tokens: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_MAX_TOKENS))
    mock_script: dict | None = None


def load_profile(path: str | Path) -> TaskProfile:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    return profile_from_dict(data)


def profile_from_dict(data: dict) -> TaskProfile:
    tasks = []
    for i, entry in enumerate(data.get("tasks", [])):
        try:
            tasks.append(
                TaskSpec(
                    task_id=str(entry.get("id", f"task-{i}")),
                    text=entry["text"],
                    answer=entry.get("answer"),
                )
            )
        except KeyError:
            raise ValueError(f"task #{i}: missing 'text'") from None

    t_in = int(data.get("t_in", DEFAULT_INPUT_TOKENS))
    if "t_out" in data:
        t_out = int(data["t_out"])
    elif data.get("output_token_samples"):
        t_out = estimate_output_tokens([int(v) for v in data["output_token_samples"]])
    else:
        t_out = DEFAULT_OUTPUT_TOKENS

    max_tokens = dict(DEFAULT_MAX_TOKENS)
    for role, value in data.get("max_tokens", {}).items():
        if role not in max_tokens:
            raise ValueError(f"unknown role {role!r} in max_tokens")
        max_tokens[role] = int(value)

    return TaskProfile(
        tasks=tuple(tasks),
        t_in=t_in,
        t_out=t_out,
        evaluator_kind=data.get("evaluator", "numeric"),
        max_tokens=max_tokens,
        mock_script=data.get("mock_script"),
    )
