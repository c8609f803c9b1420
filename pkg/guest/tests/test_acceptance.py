"""Acceptance: the guest harness against the host package's wire surfaces.

Exercises the host evaluator end-to-end with this guest as the child process:
source-shipped greedy must reproduce native greedy tours exactly, runaway
candidates must be killed at the deadline, and invalid choices must surface
as failures without crashing the host engine.

Run with:  pytest guest/tests/test_acceptance.py -v -s
"""

import math
import time

import pytest

from algoevolve.engine import EvolutionConfig, run_evolution
from algoevolve.evaluator import (
    EvalLimits,
    FitnessEvaluator,
    SENTINEL_FITNESS,
    evaluate_candidate,
    fitness_from_report,
    two_opt_baselines,
)
from algoevolve.llm import LlmOperator, ScriptedTransport
from algoevolve.programs import CandidateProgram
from algoevolve.tsp import construct_tour, greedy_select_next, instance_batch

from conftest import GREEDY_SOURCE, GUEST_CMD, GuestTalker

INFINITE_LOOP_SOURCE = """\
def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    while True:
        pass
"""

VISITED_NODE_SOURCE = """\
def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    return destination_node
"""


def announce(name, checks):
    try:
        checks()
    except AssertionError:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


@pytest.fixture(scope="module")
def tsp50_batch():
    return instance_batch(50, 64, base_seed=0)


@pytest.fixture(scope="module")
def tsp50_baselines(tsp50_batch):
    return two_opt_baselines(tsp50_batch, parallel=4)


class TestGuestEquivalence:
    def test_guest_greedy_tours_match_native(self, tsp50_batch, tsp50_baselines):
        def checks():
            # wire-level: every tour the guest builds equals the native one
            guest = GuestTalker()
            try:
                assert guest.load(GREEDY_SOURCE) == {"op": "ready"}
                for inst in tsp50_batch:
                    reply = guest.solve(inst.coords.tolist(), start=0,
                                        instance_id=inst.instance_id)
                    assert reply["op"] == "tour", reply
                    native = construct_tour(greedy_select_next, inst, start=0)
                    assert reply["order"] == native.order.tolist(), \
                        f"{inst.instance_id}: guest tour differs"
            finally:
                guest.shutdown()

            # evaluator-level: identical per-instance lengths and mean gap
            limits = EvalLimits(batch_timeout_s=120, guest_command=GUEST_CMD)
            guest_report = evaluate_candidate(
                CandidateProgram.from_source(GREEDY_SOURCE),
                tsp50_batch, tsp50_baselines, limits)
            native_report = evaluate_candidate(
                CandidateProgram.greedy(), tsp50_batch, tsp50_baselines)
            assert guest_report.ok
            assert [r.length for r in guest_report.per_instance] \
                == [r.length for r in native_report.per_instance]
            assert guest_report.mean_gap == native_report.mean_gap

        announce("guest-equivalence", checks)


class TestRunawayCandidate:
    def test_infinite_loop_killed_within_grace(self, tsp50_batch, tsp50_baselines):
        def checks():
            timeout = 3.0
            limits = EvalLimits(batch_timeout_s=timeout, guest_command=GUEST_CMD)
            started = time.monotonic()
            report = evaluate_candidate(
                CandidateProgram.from_source(INFINITE_LOOP_SOURCE),
                tsp50_batch, tsp50_baselines, limits)
            elapsed = time.monotonic() - started
            assert elapsed < timeout + 2.0, f"kill took {elapsed:.1f}s"
            assert not report.ok
            assert report.per_instance[-1].status == "timeout"
            assert fitness_from_report(report) == SENTINEL_FITNESS

        announce("guest-timeout-kill", checks)


class TestInvalidChoiceCandidate:
    def test_visited_node_fails_without_crashing_engine(self):
        def checks():
            batch = instance_batch(15, 4, base_seed=40)
            baselines = two_opt_baselines(batch)
            limits = EvalLimits(batch_timeout_s=30, guest_command=GUEST_CMD)

            report = evaluate_candidate(
                CandidateProgram.from_source(VISITED_NODE_SOURCE),
                batch, baselines, limits)
            assert not report.ok
            assert all(r.status == "runtime_error" for r in report.per_instance)
            assert "not unvisited" in report.per_instance[0].detail
            assert fitness_from_report(report) == SENTINEL_FITNESS

            # a full evolution whose model keeps emitting the bad candidate
            # must still complete (bad offspring flushed by management)
            config = EvolutionConfig(
                population_size=3, generations=2, crossover_prob=1.0,
                mutation_prob=0.0, parents_per_crossover=2,
                offspring_per_crossover=1, rng_seed=5,
                evaluation_instance_count=4, evaluation_instance_size=15)
            responses = [
                "Algorithm: Nearest neighbour.\n```\ngreedy\n```\n",
                ("Algorithm: Go straight home.\n```python\n"
                 + VISITED_NODE_SOURCE + "```\n"),
            ]
            llm = LlmOperator(ScriptedTransport(responses, cycle=True))
            evaluator = FitnessEvaluator(batch=batch, baselines=baselines,
                                         limits=limits)
            best, trace = run_evolution(config, llm, evaluator)
            assert best.fitness is not None and math.isfinite(best.fitness)
            bad_created = [r for gen in trace.generations for r in gen.created
                           if r.status == "eval_failed"]
            assert bad_created, "expected sentinel-fitness offspring in trace"

        announce("guest-invalid-choice", checks)
