import math
import time

import pytest

from algoevolve.evaluator import (
    EvalLimits,
    FitnessEvaluator,
    SENTINEL_FITNESS,
    evaluate_candidate,
    fitness_from_report,
    two_opt_baselines,
    validate_tour,
)
from algoevolve.programs import CandidateProgram
from algoevolve.tsp import construct_tour, gap, instance_batch, two_opt_baseline


@pytest.fixture(scope="module")
def batch():
    return instance_batch(12, 4, base_seed=100)


@pytest.fixture(scope="module")
def baselines(batch):
    return two_opt_baselines(batch)


class TestValidateTour:
    def test_accepts_permutation(self):
        assert validate_tour([0, 1, 2, 3], 4) is None

    def test_duplicate(self):
        assert "duplicate" in validate_tour([0, 1, 1, 3], 4)

    def test_missing_node(self):
        assert validate_tour([0, 1, 2], 4) is not None

    def test_out_of_range(self):
        assert "range" in validate_tour([0, 1, 2, 7], 4)

    def test_non_integer(self):
        assert validate_tour([0, 1, "x", 3], 4) is not None

    def test_numpy_style_integers_accepted(self):
        import numpy as np

        assert validate_tour(list(np.asarray([0, 1, 2, 3])), 4) is None


class TestNativeEvaluation:
    def test_dispatch_matches_direct_calls(self, batch, baselines):
        report = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert report.ok
        expected = []
        for inst in batch:  # independent recomputation
            tour = construct_tour(CandidateProgram.greedy().selector(), inst, 0)
            expected.append(gap(tour.length, baselines[inst.instance_id]))
        got = [r.gap for r in report.per_instance]
        assert got == pytest.approx(expected, rel=1e-15)
        assert report.mean_gap == pytest.approx(sum(expected) / len(expected),
                                                rel=1e-12)

    def test_mean_gap_is_arithmetic_mean(self, batch, baselines):
        report = evaluate_candidate(
            CandidateProgram.scored(1, 0.75, 0.5, 0.25, math.inf), batch, baselines)
        gaps = [r.gap for r in report.per_instance]
        assert report.mean_gap == pytest.approx(sum(gaps) / len(gaps), abs=1e-12)

    def test_idempotent(self, batch, baselines):
        a = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        b = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert a.per_instance == b.per_instance
        assert a.mean_gap == b.mean_gap
        assert a.overall_status == b.overall_status

    def test_greedy_gap_nonnegative(self, batch, baselines):
        report = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert all(r.gap >= -1e-12 for r in report.per_instance)

    def test_missing_baseline_rejected(self, batch):
        with pytest.raises(ValueError):
            evaluate_candidate(CandidateProgram.greedy(), batch, {})

    def test_fitness_mapping(self, batch, baselines):
        report = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert fitness_from_report(report) == report.mean_gap


class TestGuestEvaluation:
    def test_fake_guest_greedy_matches_native(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        guest = evaluate_candidate(CandidateProgram.from_source("fake-greedy"),
                                   batch, baselines, limits)
        native = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert guest.ok
        assert [r.length for r in guest.per_instance] == pytest.approx(
            [r.length for r in native.per_instance], rel=1e-15)

    def test_no_guest_command_fails_cleanly(self, batch, baselines):
        report = evaluate_candidate(CandidateProgram.from_source("fake-greedy"),
                                    batch, baselines, EvalLimits(guest_command=None))
        assert not report.ok
        assert "guest" in report.detail
        assert fitness_from_report(report) == SENTINEL_FITNESS

    def test_load_error(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-loadfail"),
                                    batch, baselines, limits)
        assert not report.ok
        assert "load_error" in report.detail

    def test_timeout_kills_within_grace(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=1.5, guest_command=fake_guest_cmd)
        started = time.monotonic()
        report = evaluate_candidate(CandidateProgram.from_source("fake-sleep"),
                                    batch, baselines, limits)
        elapsed = time.monotonic() - started
        assert elapsed < limits.batch_timeout_s + 2.0
        assert not report.ok
        assert report.per_instance[-1].status == "timeout"

    def test_crash_aborts_batch(self, baselines, fake_guest_cmd, batch):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-crash"),
                                    batch, baselines, limits)
        assert not report.ok
        assert report.per_instance[0].status == "runtime_error"
        assert len(report.per_instance) == 1  # batch aborted at the crash

    def test_timeout_preserves_earlier_results(self, baselines, fake_guest_cmd,
                                               batch):
        # guest completes instance 0, then hangs: the finished row must keep
        # its native-equal result while instance 1 is reported as the timeout
        limits = EvalLimits(batch_timeout_s=1.5, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-sleep-later"),
                                    batch, baselines, limits)
        native = evaluate_candidate(CandidateProgram.greedy(), batch, baselines)
        assert not report.ok
        assert report.per_instance[0].status == "ok"
        assert report.per_instance[0].length == pytest.approx(
            native.per_instance[0].length, rel=1e-15)
        assert report.per_instance[1].status == "timeout"
        assert len(report.per_instance) == 2

    def test_bad_node_reported_invalid_tour(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-badnode"),
                                    batch, baselines, limits)
        assert not report.ok
        assert all(r.status == "invalid_tour" for r in report.per_instance)

    def test_step_error_reported(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-steperr"),
                                    batch, baselines, limits)
        assert not report.ok
        assert all(r.status == "runtime_error" for r in report.per_instance)
        assert "boom" in report.per_instance[0].detail

    def test_garbage_reply_is_runtime_error(self, batch, baselines, fake_guest_cmd):
        limits = EvalLimits(batch_timeout_s=30, guest_command=fake_guest_cmd)
        report = evaluate_candidate(CandidateProgram.from_source("fake-garbage"),
                                    batch, baselines, limits)
        assert not report.ok
        assert report.per_instance[0].status == "runtime_error"


class TestFitnessEvaluator:
    def test_for_run_is_reproducible(self):
        a = FitnessEvaluator.for_run(10, 3, seed=5)
        b = FitnessEvaluator.for_run(10, 3, seed=5)
        assert [i.instance_id for i in a.batch] == [i.instance_id for i in b.batch]
        assert a.baselines == b.baselines

    def test_baselines_match_solver(self):
        ev = FitnessEvaluator.for_run(10, 2, seed=5)
        for inst in ev.batch:
            assert ev.baselines[inst.instance_id] == two_opt_baseline(inst)

    def test_evaluate_many_keeps_order(self, batch, baselines):
        ev = FitnessEvaluator(batch=batch, baselines=baselines, parallel=3)
        programs = [CandidateProgram.greedy(),
                    CandidateProgram.scored(1, 0.75, 0.5, 0.25, math.inf),
                    CandidateProgram.greedy()]
        reports = ev.evaluate_many(programs)
        assert reports[0].mean_gap == reports[2].mean_gap
        assert reports[1].mean_gap != reports[0].mean_gap

    def test_parallel_equals_serial(self, batch, baselines):
        programs = [CandidateProgram.scored(1, c2, 0.5, 0.25, math.inf)
                    for c2 in (0.0, 0.25, 0.5, 0.75)]
        serial = FitnessEvaluator(batch=batch, baselines=baselines, parallel=1)
        threaded = FitnessEvaluator(batch=batch, baselines=baselines, parallel=4)
        assert ([r.mean_gap for r in serial.evaluate_many(programs)]
                == [r.mean_gap for r in threaded.evaluate_many(programs)])
