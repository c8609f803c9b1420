"""Evolving constructive optimization heuristics with a chat model as the
variation operator, demonstrated on TSP tour construction."""

from .engine import (
    EvolutionConfig,
    EvolutionTrace,
    Individual,
    Population,
    initialize_population,
    manage_population,
    run_evolution,
    run_generation,
    select_parents,
)
from .evaluator import (
    EvalLimits,
    FitnessEvaluator,
    FitnessReport,
    SENTINEL_FITNESS,
    evaluate_candidate,
    fitness_from_report,
    two_opt_baselines,
    validate_tour,
)
from .llm import (
    HttpChatTransport,
    LlmExchange,
    LlmOperator,
    LlmSettings,
    RecordingTransport,
    ReplayTransport,
    ScriptedTransport,
    parse_individual,
)
from .programs import CandidateProgram, parse_program
from .prompts import (
    PromptBundle,
    TaskSpec,
    render_crossover_prompt,
    render_init_prompt,
    render_mutation_prompt,
    tsp_task_spec,
)
from .tsp import (
    ScoredParams,
    SelectionContext,
    Tour,
    TspInstance,
    construct_tour,
    gap,
    generate_instance,
    greedy_select_next,
    held_karp,
    instance_batch,
    scored_select_next,
    tour_length,
    two_opt_baseline,
)
from .tuning import load_tuned_params

__version__ = "0.1.0"

__all__ = [
    "CandidateProgram",
    "EvalLimits",
    "EvolutionConfig",
    "EvolutionTrace",
    "FitnessEvaluator",
    "FitnessReport",
    "HttpChatTransport",
    "Individual",
    "LlmExchange",
    "LlmOperator",
    "LlmSettings",
    "Population",
    "PromptBundle",
    "RecordingTransport",
    "ReplayTransport",
    "SENTINEL_FITNESS",
    "ScoredParams",
    "ScriptedTransport",
    "SelectionContext",
    "TaskSpec",
    "Tour",
    "TspInstance",
    "construct_tour",
    "evaluate_candidate",
    "fitness_from_report",
    "gap",
    "generate_instance",
    "greedy_select_next",
    "held_karp",
    "initialize_population",
    "instance_batch",
    "load_tuned_params",
    "manage_population",
    "parse_individual",
    "parse_program",
    "render_crossover_prompt",
    "render_init_prompt",
    "render_mutation_prompt",
    "run_evolution",
    "run_generation",
    "scored_select_next",
    "select_parents",
    "tour_length",
    "tsp_task_spec",
    "two_opt_baseline",
    "two_opt_baselines",
    "validate_tour",
]
