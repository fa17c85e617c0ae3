"""Command-line front end: provision -> collect -> train -> run -> report.

Configuration is a single JSON file plus flag overrides (flags win). All
artifacts land in the configured output directory and are byte-reproducible
given the same inputs and seed. Exit codes: 0 success, 1 usage or config
error, 2 infeasible provisioning.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import backend, dataset, policy, provision, topology
from .catalog import ModelCatalog
from .evaluators import get_evaluator
from .profile import TaskProfile, TaskSpec, load_profile
from .reward import RewardConfig
from .topology import ExecutionLimits, Topology, topology_from_name

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    catalog_path: str
    profile_path: str
    budgets: list[float]
    out_dir: str = "out"
    seed: int = 42
    mock: bool = False
    jobs: int = 1
    instance_cap: int = 5
    min_agents: int = 2
    reward: RewardConfig = field(default_factory=RewardConfig)
    trainer: dict = field(default_factory=dict)
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)
    stamp: bool = False  # include a collection timestamp in dataset headers


def _load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))

    catalog_path = data.get("catalog")
    profile_path = data.get("task_profile")
    if getattr(args, "catalog", None):
        catalog_path = args.catalog
    if getattr(args, "profile", None):
        profile_path = args.profile
    if not catalog_path:
        raise ConfigError("no catalog configured (use --catalog or 'catalog' in the config file)")
    if not profile_path:
        raise ConfigError("no task profile configured (use --profile or 'task_profile')")
    for p in (catalog_path, profile_path):
        if not Path(p).exists():
            raise ConfigError(f"file not found: {p}")

    budgets = [float(b) for b in data.get("budgets", [])]
    if getattr(args, "budget", None) is not None:
        budgets = [float(args.budget)]
    if any(b <= 0 for b in budgets):
        raise ConfigError("budgets must be > 0")

    seed = int(data.get("seed", 42))
    if getattr(args, "seed", None) is not None:
        seed = int(args.seed)

    limits_cfg = data.get("limits", {})
    limits = ExecutionLimits(
        max_feedback_rounds=int(limits_cfg.get("max_feedback_rounds", 3)),
        max_replans=int(limits_cfg.get("max_replans", 2)),
        precall_slack=limits_cfg.get("precall_slack"),
    )
    reward_cfg = RewardConfig(**data.get("reward", {}))

    config = RunConfig(
        catalog_path=catalog_path,
        profile_path=profile_path,
        budgets=budgets,
        out_dir=args.out if getattr(args, "out", None) else data.get("out_dir", "out"),
        seed=seed,
        mock=bool(getattr(args, "mock", False) or data.get("mock", False)),
        jobs=int(args.jobs) if getattr(args, "jobs", None) else int(data.get("jobs", 1)),
        instance_cap=int(data.get("instance_cap", 5)),
        min_agents=int(data.get("min_agents", 2)),
        reward=reward_cfg,
        trainer=data.get("trainer", {}),
        limits=limits,
        stamp=bool(data.get("stamp", False)),
    )
    return config


def _build_backends(config: RunConfig, catalog: ModelCatalog, profile: TaskProfile):
    """Factory returning a fresh backend registry per run."""
    if config.mock:
        script = profile.mock_script
        if script is None:
            raise ConfigError("mock mode requires a 'mock_script' section in the task profile")
        covered = {rule.get("role", "*") for rule in script.get("rules", [])}
        missing = [
            role for role in ("executor", "critic", "planner")
            if role not in covered and "*" not in covered
        ]
        if missing:
            raise ConfigError(f"mock_script has no rule for role(s): {', '.join(missing)}")

        def factory():
            mock = backend.ScriptedBackend.from_config(script)
            return {m.backend_id: mock for m in catalog.models}

        return factory

    endpoints = {}
    catalog_doc = json.loads(Path(config.catalog_path).read_text(encoding="utf-8"))
    backend_cfg = catalog_doc.get("backends", {})
    for model in catalog.models:
        if model.backend_id in endpoints:
            continue
        entry = backend_cfg.get(model.backend_id)
        if not entry or "base_url" not in entry:
            raise ConfigError(
                f"backend {model.backend_id!r} has no 'base_url' in the catalog's 'backends' section"
            )
        api_key = os.environ.get(f"{model.backend_id.upper()}_API_KEY", "")
        endpoints[model.backend_id] = backend.HttpBackend(
            base_url=entry["base_url"],
            api_key=api_key,
            timeout=float(entry.get("timeout", 60.0)),
            requests_per_second=entry.get("requests_per_second"),
        )

    def factory():
        return endpoints

    return factory


def _provision_path(config: RunConfig, budget: float) -> Path:
    return Path(config.out_dir) / f"provision_{budget:g}.json"


def _solve_for_budget(config: RunConfig, catalog: ModelCatalog, profile: TaskProfile, budget: float):
    problem = provision.ProvisionProblem(
        budget=budget,
        tier_costs=tuple(catalog.tier_costs(profile.t_in, profile.t_out)),
        instance_cap=config.instance_cap,
        min_agents=config.min_agents,
    )
    return problem, provision.solve(problem)


def cmd_provision(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.budgets:
        raise ConfigError("no budgets configured")
    catalog = ModelCatalog.load(config.catalog_path)
    profile = load_profile(config.profile_path)
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)

    any_infeasible = False
    for budget in config.budgets:
        problem, solution = _solve_for_budget(config, catalog, profile, budget)
        weights = provision.compute_weights(problem).weights
        doc = {
            "budget": budget,
            "tier_costs": list(problem.tier_costs),
            "counts": list(solution.counts),
            "total_weight": solution.total_weight,
            "total_cost": solution.total_cost,
            "feasible": solution.feasible,
            "reason": solution.reason,
        }
        _provision_path(config, budget).write_text(
            json.dumps(doc, ensure_ascii=False), encoding="utf-8"
        )
        if solution.feasible:
            print(
                f"budget {budget:g}: counts {list(solution.counts)} "
                f"cost {solution.total_cost:g} weight {solution.total_weight}"
            )
        else:
            any_infeasible = True
            print(f"budget {budget:g}: infeasible ({solution.reason})")
        if args.explain:
            for tier, (w, c) in enumerate(zip(weights, problem.tier_costs), start=1):
                print(f"  tier {tier}: unit cost {c:g}, decision weight {w}")
    return EXIT_INFEASIBLE if any_infeasible else EXIT_OK


def _load_pools(config: RunConfig, catalog: ModelCatalog) -> dict[float, list]:
    pools = {}
    for budget in config.budgets:
        path = _provision_path(config, budget)
        if not path.exists():
            raise ConfigError(f"no provisioning output for budget {budget:g}; run 'provision' first")
        doc = json.loads(path.read_text(encoding="utf-8"))
        if not doc["feasible"]:
            raise ConfigError(f"provisioning for budget {budget:g} was infeasible: {doc['reason']}")
        solution = provision.ProvisionSolution(
            counts=tuple(doc["counts"]),
            total_weight=doc["total_weight"],
            total_cost=doc["total_cost"],
            feasible=True,
        )
        pools[budget] = topology.expand_pool(catalog, solution)
    return pools


def cmd_collect(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.budgets:
        raise ConfigError("no budgets configured")
    catalog = ModelCatalog.load(config.catalog_path)
    profile = load_profile(config.profile_path)
    pools = _load_pools(config, catalog)
    factory = _build_backends(config, catalog, profile)
    evaluator = get_evaluator(profile.evaluator_kind)

    header = {"catalog_hash": catalog.content_hash(), "seed": config.seed}
    if config.stamp:
        import datetime

        header["collected_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()

    ds = dataset.collect(
        list(profile.tasks),
        config.budgets,
        pools,
        factory,
        evaluator,
        limits=config.limits,
        max_tokens=profile.max_tokens,
        planned_t_in=profile.t_in,
        header=header,
        jobs=config.jobs,
    )
    out_path = Path(config.out_dir) / "dataset.jsonl"
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    dataset.save(ds, out_path)
    print(f"collected {len(ds)} experiences -> {out_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    ds_path = Path(config.out_dir) / "dataset.jsonl"
    if not ds_path.exists():
        raise ConfigError(f"dataset not found: {ds_path}; run 'collect' first")
    ds = dataset.load(ds_path)
    if len(ds) == 0:
        raise ConfigError("dataset is empty; nothing to train on")

    trainer = policy.TrainerConfig(seed=config.seed, **config.trainer)
    result = policy.train(ds, trainer, reward_config=config.reward)

    weights_path = Path(config.out_dir) / "policy.json"
    policy.save_params(result.params, weights_path, seed=trainer.seed)
    report = {
        "epoch_scores": result.epoch_scores,
        "best_epoch": result.best_epoch,
        "best_score": result.epoch_scores[result.best_epoch - 1],
        "trainer": {
            "learning_rate": trainer.learning_rate,
            "entropy_coeff": trainer.entropy_coeff,
            "batch_size": trainer.batch_size,
            "epochs": trainer.epochs,
            "seed": trainer.seed,
        },
    }
    (Path(config.out_dir) / "training_report.json").write_text(
        json.dumps(report, ensure_ascii=False), encoding="utf-8"
    )
    print(
        f"trained {trainer.epochs} epochs; best epoch {result.best_epoch} "
        f"(expected reward {report['best_score']:.4f}) -> {weights_path}"
    )
    return EXIT_OK


def _run_single(
    config: RunConfig,
    catalog: ModelCatalog,
    profile: TaskProfile,
    task: TaskSpec,
    budget: float,
    factory,
    evaluator,
    params,
    override: Topology | None,
) -> topology.RunTrace:
    _, solution = _solve_for_budget(config, catalog, profile, budget)
    if not solution.feasible:
        raise ConfigError(f"provisioning infeasible for budget {budget:g}: {solution.reason}")
    pool = topology.expand_pool(catalog, solution)
    if override is not None:
        topo = override
    else:
        topo = Topology(policy.select_topology(params, task, budget, mode="greedy"))
    assignment = topology.assign_roles(pool, topo)
    return topology.execute(
        task,
        assignment,
        topo,
        budget,
        factory(),
        evaluator,
        limits=config.limits,
        max_tokens=profile.max_tokens,
        planned_t_in=profile.t_in,
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.budgets:
        raise ConfigError("no budget configured (use --budget)")
    catalog = ModelCatalog.load(config.catalog_path)
    profile = load_profile(config.profile_path)
    factory = _build_backends(config, catalog, profile)
    evaluator = get_evaluator(profile.evaluator_kind)

    override = topology_from_name(args.topology) if args.topology else None
    params = None
    if override is None:
        weights_path = Path(config.out_dir) / "policy.json"
        if not weights_path.exists():
            raise ConfigError(
                f"no trained policy at {weights_path}; run 'train' or pass --topology"
            )
        params = policy.load_params(weights_path)

    if args.task:
        tasks = [TaskSpec(task_id="adhoc", text=args.task, answer=args.answer)]
        out_path = Path(config.out_dir) / "trace.json"
    else:
        tasks = list(profile.tasks)
        out_path = Path(config.out_dir) / "traces.jsonl"
    if not tasks:
        raise ConfigError("no tasks to run")

    budget = config.budgets[0]
    traces = []
    for task in tasks:
        trace = _run_single(
            config, catalog, profile, task, budget, factory, evaluator, params, override
        )
        traces.append(trace)
        print(
            f"{task.task_id}: topology={trace.topology} cost={trace.cumulative_cost:g} "
            f"success={trace.success} oob={trace.oob} answer={trace.final_answer!r}"
        )

    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    if args.task:
        out_path.write_text(traces[0].to_json(), encoding="utf-8")
    else:
        out_path.write_text("\n".join(t.to_json() for t in traces) + "\n", encoding="utf-8")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.traces)
    if not path.exists():
        raise ConfigError(f"trace file not found: {path}")
    traces = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            traces.append(topology.RunTrace.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"{path}: line {lineno}: {exc}") from None

    if not traces:
        print("warning: no traces found")
        print("Acc 0.0%  Avg Cost 0.0  OOB 0/0")
        return EXIT_OK

    n = len(traces)
    successes = sum(1 for t in traces if t.success)
    avg_cost = sum(t.cumulative_cost for t in traces) / n
    oob = topology.count_oob(traces)
    print(f"Acc {100.0 * successes / n:.1f}%  Avg Cost {avg_cost:g}  OOB {oob}/{n}")
    counts = {name: 0 for name in topology.TOPOLOGY_NAMES}
    for t in traces:
        counts[t.topology] = counts.get(t.topology, 0) + 1
    for name in topology.TOPOLOGY_NAMES:
        print(f"  {name}: {counts[name]}/{n}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetagents",
        description="Budget-aware multi-agent pipeline: provision, collect, train, run, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--catalog", help="model catalog JSON")
        p.add_argument("--profile", help="task profile JSON")
        p.add_argument("--budget", type=float, help="single budget override")
        p.add_argument("--seed", type=int, help="global random seed (default 42)")
        p.add_argument("--out", help="output directory (default 'out')")
        p.add_argument("--jobs", type=int, help="worker pool size for collection")
        p.add_argument("--mock", action="store_true", help="use the profile's scripted backend")

    p = sub.add_parser("provision", help="solve the budgeted pool selection")
    common(p)
    p.add_argument("--explain", action="store_true", help="print per-tier decision weights")
    p.set_defaults(func=cmd_provision)

    p = sub.add_parser("collect", help="execute all topologies per task into a dataset")
    common(p)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train the topology-selection policy")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="provision, select a topology, and execute")
    common(p)
    p.add_argument("--task", help="ad-hoc task text (default: run every profile task)")
    p.add_argument("--answer", help="expected answer for the ad-hoc task")
    p.add_argument("--topology", help="bypass the policy with a fixed topology")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a JSONL trace file")
    p.add_argument("traces", help="path to traces.jsonl")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())
