"""Budget-aware multi-agent orchestration.

Provisions a cost-optimal pool of LLM instances under a hard budget (exact
lexicographic integer program), selects a collaboration topology with an
offline-trained policy network, and executes the workflow with per-call cost
ledgering and hard budget enforcement.
"""

from .backend import CallRequest, CallResponse, HttpBackend, ScriptedBackend
from .catalog import CostEstimate, ModelCatalog, ModelSpec, estimate_cost, estimate_output_tokens
from .dataset import Experience, ExperienceDataset, ExperienceOutcome, collect
from .embedder import EMBED_DIM, TaskEmbedding, embed, embed_remote
from .evaluators import Evaluator, LiteralEvaluator, NumericEvaluator, get_evaluator
from .policy import (
    PolicyParams,
    PolicyState,
    TrainerConfig,
    TrainResult,
    evaluate,
    forward,
    init_params,
    load_params,
    loss,
    save_params,
    select_topology,
    train,
)
from .profile import TaskProfile, TaskSpec, load_profile
from .provision import (
    DecisionWeights,
    ProvisionProblem,
    ProvisionSolution,
    brute_force_solve,
    compute_weights,
    solve,
)
from .reward import Outcome, RewardConfig, compute_reward
from .topology import (
    AgentInstance,
    ExecutionLimits,
    RoleAssignment,
    RunTrace,
    Topology,
    TOPOLOGY_NAMES,
    assign_roles,
    count_oob,
    execute,
    expand_pool,
)

__version__ = "0.1.0"
