"""The evolution loop: a population of algorithms, varied by a chat model.

Each individual is (description, program, fitness); fitness is the mean gap
of the program's tours to the baseline lengths over a fixed instance batch,
so smaller is better. One run executes:

    initialize population of N individuals (model-created, greedy backfill)
    repeat for the configured number of generations:
        N times: draw parents, maybe recombine (prob crossover_prob) into
        offspring, maybe revise each offspring (prob mutation_prob), evaluate
        merge parents + offspring, keep the N best (dedup, worst-out)

Candidates that fail to parse or to evaluate receive the sentinel-worst
fitness and are flushed out by population management instead of aborting the
run. Runs are deterministic given (config, seed, scripted transport): parent
draws and operator coins come from per-generation seeded streams, so a run
resumed from a checkpoint continues exactly like the uninterrupted one.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, InitializationExhausted
from .evaluator import SENTINEL_FITNESS, FitnessEvaluator, fitness_from_report
from .llm import LlmOperator, LlmSettings, OperatorResult
from .programs import CandidateProgram, parse_program

OP_INIT = "init"
OP_CROSSOVER = "crossover"
OP_MUTATION = "mutation"

GREEDY_DESCRIPTION = "Always travel to the nearest node that has not been visited yet."

_INIT_ATTEMPT_FACTOR = 3


@dataclass
class Individual:
    """One evolved algorithm."""

    id: str
    description: str
    program: CandidateProgram
    operator: str
    parents: tuple[str, ...] = ()
    fitness: float | None = None
    exchange_id: str | None = None

    @property
    def failed(self) -> bool:
        return self.fitness == SENTINEL_FITNESS


@dataclass
class Population:
    members: list[Individual]
    capacity: int

    def __len__(self) -> int:
        return len(self.members)

    def best(self) -> Individual:
        valid = [m for m in self.members if m.fitness is not None and not m.failed]
        if not valid:
            raise ValueError("population has no successfully evaluated member")
        return min(valid, key=lambda m: m.fitness)


@dataclass(frozen=True)
class EvolutionConfig:
    """All loop hyperparameters of one run."""

    population_size: int = 10
    generations: int = 10
    crossover_prob: float = 1.0
    mutation_prob: float = 0.2
    parents_per_crossover: int = 2
    offspring_per_crossover: int = 1
    rng_seed: int = 0
    evaluation_instance_count: int = 64
    evaluation_instance_size: int = 50
    llm: LlmSettings = field(default_factory=LlmSettings)

    def validate(self) -> None:
        if self.population_size < 1:
            raise ConfigError("population_size must be >= 1")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.parents_per_crossover < 1:
            raise ConfigError("parents_per_crossover must be >= 1")
        if self.offspring_per_crossover < 1:
            raise ConfigError("offspring_per_crossover must be >= 1")
        if self.parents_per_crossover > self.population_size:
            raise ConfigError("parents_per_crossover cannot exceed population_size")
        if self.evaluation_instance_count < 1 or self.evaluation_instance_size < 2:
            raise ConfigError("evaluation batch must have >= 1 instances of size >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EvolutionConfig":
        doc = dict(doc)
        llm_doc = dict(doc.pop("llm", {}))
        known = {f for f in cls.__dataclass_fields__ if f != "llm"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            llm = LlmSettings(**llm_doc)
        except TypeError as exc:
            raise ConfigError(f"bad llm settings: {exc}")
        return cls(llm=llm, **doc)

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class CreatedRecord:
    """Trace entry for every individual an operator produced (or failed to)."""

    individual_id: str
    operator: str
    parents: tuple[str, ...]
    exchange_id: str | None
    status: str  # "ok" | parse-error class name | "eval_failed"
    fitness: float | None


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    crossover_attempts: int
    mutation_attempts: int
    created: list[CreatedRecord] = field(default_factory=list)


@dataclass
class EvolutionTrace:
    """Everything needed to audit or re-plot one run."""

    init_record: GenerationRecord | None = None
    generations: list[GenerationRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def all_records(self) -> list[GenerationRecord]:
        head = [self.init_record] if self.init_record is not None else []
        return head + list(self.generations)

    def to_json(self) -> str:
        def encode(record: GenerationRecord) -> dict:
            doc = asdict(record)
            doc["best_fitness"] = _fitness_to_text(record.best_fitness)
            doc["mean_fitness"] = _fitness_to_text(record.mean_fitness)
            for created in doc["created"]:
                created["fitness"] = _fitness_to_text(created["fitness"])
                created["parents"] = list(created["parents"])
            return doc

        doc = {
            "init": encode(self.init_record) if self.init_record else None,
            "generations": [encode(r) for r in self.generations],
            "warnings": list(self.warnings),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fitness_to_text(value: float | None) -> str | None:
    if value is None:
        return None
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def _fitness_from_text(text: str | None) -> float | None:
    if text is None:
        return None
    if text == "inf":
        return math.inf
    return float(text)


class _IdGen:
    def __init__(self, start: int = 0) -> None:
        self.counter = start

    def next(self) -> str:
        self.counter += 1
        return f"a{self.counter:04d}"


def _population_stats(population: Population) -> tuple[float, float]:
    finite = [m.fitness for m in population.members
              if m.fitness is not None and math.isfinite(m.fitness)]
    if not finite:
        return math.inf, math.inf
    return min(finite), sum(finite) / len(finite)


def select_parents(population: Population, l: int, rng: random.Random) -> list[Individual]:
    """Uniform parent draw, order preserved. Without replacement while the
    population is large enough, with replacement otherwise."""
    if len(population) < 1:
        raise ValueError("cannot select from an empty population")
    if l <= len(population):
        return rng.sample(population.members, l)
    return [rng.choice(population.members) for _ in range(l)]


def manage_population(population: Population, capacity: int) -> Population:
    """Shrink back to ``capacity``: drop exact-duplicate program texts (first
    copy wins), then keep the lowest-fitness members, ties broken by age
    (insertion order). Sentinel-fitness members sort last, so they survive
    only when there are not enough valid ones."""
    seen: set[str] = set()
    kept: list[Individual] = []
    dupes: list[Individual] = []
    for member in population.members:
        key = member.program.canonical_text
        if key in seen:
            dupes.append(member)
        else:
            seen.add(key)
            kept.append(member)
    if len(kept) < capacity:  # mostly-duplicate edge: refill oldest-first
        refill = dupes[:capacity - len(kept)]
        order = {id(m): i for i, m in enumerate(population.members)}
        kept = sorted(kept + refill, key=lambda m: order[id(m)])
    survivors = sorted(kept, key=lambda m: m.fitness)[:capacity]
    return Population(members=survivors, capacity=capacity)


def _individual_from_result(result: OperatorResult, operator: str,
                            parents: tuple[str, ...], ids: _IdGen) -> Individual:
    """Build an individual even from an unparseable response; the engine
    assigns it the sentinel fitness and lets management flush it."""
    if result.ok:
        return Individual(id=ids.next(), description=result.description,
                          program=result.program, operator=operator,
                          parents=parents, exchange_id=result.exchange.exchange_id)
    raw = result.exchange.raw_response
    placeholder = raw if raw.strip() else "(empty response)"
    return Individual(id=ids.next(),
                      description=f"(unparseable response: {result.error})",
                      program=CandidateProgram.from_source(placeholder),
                      operator=operator, parents=parents,
                      exchange_id=result.exchange.exchange_id,
                      fitness=SENTINEL_FITNESS)


def _evaluate_into(individuals: list[Individual], evaluator: FitnessEvaluator,
                   records: list[CreatedRecord]) -> None:
    """Assign fitness to every not-yet-failed individual; order-stable."""
    pending = [ind for ind in individuals if ind.fitness is None]
    reports = evaluator.evaluate_many([ind.program for ind in pending])
    for ind, report in zip(pending, reports):
        ind.fitness = fitness_from_report(report)
    by_id = {record.individual_id: record for record in records}
    for ind in individuals:
        record = by_id.get(ind.id)
        if record is not None:
            record.fitness = ind.fitness
            if ind.failed and record.status == "ok":
                record.status = "eval_failed"


def initialize_population(config: EvolutionConfig, llm: LlmOperator,
                          evaluator: FitnessEvaluator,
                          trace: EvolutionTrace | None = None,
                          ids: _IdGen | None = None) -> Population:
    """Ask the model for N fresh algorithms, retrying failures; after
    3*N total attempts the remaining slots are backfilled with the built-in
    greedy individual and a warning is recorded."""
    config.validate()
    trace = trace if trace is not None else EvolutionTrace()
    ids = ids or _IdGen()
    n = config.population_size
    members: list[Individual] = []
    records: list[CreatedRecord] = []
    attempts = 0
    while len(members) < n and attempts < _INIT_ATTEMPT_FACTOR * n:
        attempts += 1
        result = llm.create()
        individual = _individual_from_result(result, OP_INIT, (), ids)
        record = CreatedRecord(individual.id, OP_INIT, (), individual.exchange_id,
                               result.error or "ok", individual.fitness)
        records.append(record)
        if individual.failed:
            continue
        individual.fitness = fitness_from_report(evaluator.evaluate(individual.program))
        record.fitness = individual.fitness
        if individual.failed:
            record.status = "eval_failed"
            continue
        members.append(individual)
    if len(members) < n:
        greedy_fitness = fitness_from_report(evaluator.evaluate(CandidateProgram.greedy()))
        if greedy_fitness == SENTINEL_FITNESS:
            raise InitializationExhausted(
                "model attempts exhausted and the built-in greedy individual "
                "fails evaluation")
        missing = n - len(members)
        trace.warnings.append(
            f"initialization exhausted after {attempts} attempts; "
            f"backfilled {missing} slot(s) with the built-in greedy individual")
        for _ in range(missing):
            individual = Individual(id=ids.next(), description=GREEDY_DESCRIPTION,
                                    program=CandidateProgram.greedy(),
                                    operator=OP_INIT, fitness=greedy_fitness)
            members.append(individual)
            records.append(CreatedRecord(individual.id, OP_INIT, (), None,
                                         "ok", individual.fitness))
    population = Population(members=members, capacity=n)
    best, mean = _population_stats(population)
    trace.init_record = GenerationRecord(generation=0, best_fitness=best,
                                         mean_fitness=mean, crossover_attempts=0,
                                         mutation_attempts=0, created=records)
    return population


def run_generation(population: Population, config: EvolutionConfig,
                   llm: LlmOperator, evaluator: FitnessEvaluator,
                   rng: random.Random, trace: EvolutionTrace | None = None,
                   generation: int = 1, ids: _IdGen | None = None) -> Population:
    """One generation: N iterations of select/recombine/revise, then shrink
    parents+offspring back to N.

    Parent draws and operator coins are drawn sequentially up front in each
    iteration, so evaluation order (which may be concurrent) cannot change
    the outcome."""
    trace = trace if trace is not None else EvolutionTrace()
    ids = ids or _IdGen()
    offspring: list[Individual] = []
    records: list[CreatedRecord] = []
    crossover_attempts = 0
    mutation_attempts = 0
    for _ in range(config.population_size):
        parents = select_parents(population, config.parents_per_crossover, rng)
        if rng.random() >= config.crossover_prob:
            continue  # this iteration contributes no offspring
        crossover_attempts += 1
        parent_ids = tuple(p.id for p in parents)
        for _ in range(config.offspring_per_crossover):
            result = llm.combine(parents)
            child = _individual_from_result(result, OP_CROSSOVER, parent_ids, ids)
            records.append(CreatedRecord(child.id, OP_CROSSOVER, parent_ids,
                                         child.exchange_id, result.error or "ok",
                                         child.fitness))
            final = child
            if not child.failed and rng.random() < config.mutation_prob:
                mutation_attempts += 1
                revision = llm.revise(child)
                final = _individual_from_result(revision, OP_MUTATION,
                                                (child.id,), ids)
                records.append(CreatedRecord(final.id, OP_MUTATION, (child.id,),
                                             final.exchange_id,
                                             revision.error or "ok",
                                             final.fitness))
            offspring.append(final)
    _evaluate_into(offspring, evaluator, records)
    combined = Population(members=population.members + offspring,
                          capacity=config.population_size)
    managed = manage_population(combined, config.population_size)
    best, mean = _population_stats(managed)
    trace.generations.append(GenerationRecord(
        generation=generation, best_fitness=best, mean_fitness=mean,
        crossover_attempts=crossover_attempts, mutation_attempts=mutation_attempts,
        created=records))
    return managed


def _generation_rng(seed: int, generation: int) -> random.Random:
    return random.Random(f"{seed}:gen:{generation}")


def run_evolution(config: EvolutionConfig, llm: LlmOperator,
                  evaluator: FitnessEvaluator,
                  checkpoint_dir: str | Path | None = None,
                  resume_from: str | Path | None = None,
                  ) -> tuple[Individual, EvolutionTrace]:
    """Full run: initialization plus ``config.generations`` generations.

    Returns the minimum-fitness individual ever retained and the run trace.
    With ``checkpoint_dir`` set, a checkpoint document is written after
    initialization and after every generation; ``resume_from`` restarts from
    such a document and reproduces the identical continuation."""
    config.validate()
    trace = EvolutionTrace()
    ids = _IdGen()
    start_generation = 1
    if resume_from is not None:
        population, start_generation, ids, llm_calls = _load_checkpoint_state(
            resume_from, config)
        if hasattr(llm.transport, "skip"):
            llm.transport.skip(llm_calls)
        trace.warnings.append(
            f"resumed from generation {start_generation - 1} checkpoint")
    else:
        population = initialize_population(config, llm, evaluator,
                                           trace=trace, ids=ids)
        if checkpoint_dir is not None:
            write_checkpoint(checkpoint_dir, config, 0, population, ids, llm)
    for generation in range(start_generation, config.generations + 1):
        rng = _generation_rng(config.rng_seed, generation)
        population = run_generation(population, config, llm, evaluator, rng,
                                    trace=trace, generation=generation, ids=ids)
        if checkpoint_dir is not None:
            write_checkpoint(checkpoint_dir, config, generation, population,
                             ids, llm)
    return population.best(), trace


def _count_llm_calls(llm: LlmOperator) -> int | None:
    calls = getattr(llm.transport, "calls_made", None)
    return int(calls) if calls is not None else None


def checkpoint_path(directory: str | Path, generation: int) -> Path:
    return Path(directory) / f"checkpoint_gen{generation:03d}.json"


def write_checkpoint(directory: str | Path, config: EvolutionConfig,
                     generation: int, population: Population, ids: _IdGen,
                     llm: LlmOperator | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": "evolution-checkpoint",
        "version": 1,
        "config_hash": config.content_hash(),
        "generation": generation,
        "id_counter": ids.counter,
        "llm_calls": _count_llm_calls(llm) if llm is not None else None,
        "population": [
            {
                "id": m.id,
                "description": m.description,
                "program": m.program.canonical_text,
                "fitness": _fitness_to_text(m.fitness),
                "operator": m.operator,
                "parents": list(m.parents),
                "exchange_id": m.exchange_id,
            }
            for m in population.members
        ],
    }
    path = checkpoint_path(directory, generation)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "evolution-checkpoint":
        raise ConfigError(f"{path}: not an evolution checkpoint")
    return doc


def _load_checkpoint_state(path: str | Path, config: EvolutionConfig,
                           ) -> tuple[Population, int, _IdGen, int]:
    doc = load_checkpoint(path)
    if doc["config_hash"] != config.content_hash():
        raise ConfigError("checkpoint was produced by a different configuration")
    members = [
        Individual(
            id=entry["id"],
            description=entry["description"],
            program=parse_program(entry["program"]),
            operator=entry["operator"],
            parents=tuple(entry["parents"]),
            fitness=_fitness_from_text(entry["fitness"]),
            exchange_id=entry.get("exchange_id"),
        )
        for entry in doc["population"]
    ]
    population = Population(members=members, capacity=config.population_size)
    ids = _IdGen(start=int(doc["id_counter"]))
    llm_calls = int(doc["llm_calls"] or 0)
    return population, int(doc["generation"]) + 1, ids, llm_calls
