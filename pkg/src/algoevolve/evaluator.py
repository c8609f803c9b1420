"""Turns a candidate program into a fitness value.

Native programs run in-process through the TSP step contract; guest source is
shipped to an isolated child process speaking the sandbox protocol (one JSON
message per line over stdin/stdout):

    host -> guest   {"op": "load", "source": <text>}
    guest -> host   {"op": "ready"} | {"op": "load_error", "msg": <text>}
    host -> guest   {"op": "solve", "instance_id": <id>, "n": <int>,
                     "coords": [[x, y], ...], "start": <int>}
    guest -> host   {"op": "tour", "instance_id": <id>, "order": [<int>, ...]}
                    | {"op": "step_error", "msg": <text>}
    host -> guest   {"op": "shutdown"}   (guest exits)

The guest recomputes the distance matrix from the coordinates with the same
Euclidean formula the host uses, so both backends agree bit for bit.

The sandbox is a robustness boundary only: it gives crash isolation, output
validation, and a wall-clock kill switch. It is NOT a security boundary; do
not feed it source from untrusted humans.

Fitness is the mean relative gap to the per-instance baseline lengths over a
fixed batch. Failure semantics are strict: one bad instance fails the whole
candidate.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import InvalidStep
from .programs import CandidateProgram
from .tsp import TspInstance, construct_tour, gap, instance_batch, two_opt_baseline

STATUS_OK = "ok"
STATUS_INVALID_TOUR = "invalid_tour"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_TIMEOUT = "timeout"

SENTINEL_FITNESS = math.inf

DEFAULT_BATCH_TIMEOUT_S = 60.0
_KILL_GRACE_S = 0.5


@dataclass(frozen=True)
class EvalLimits:
    """Resource limits for one candidate evaluation."""

    batch_timeout_s: float = DEFAULT_BATCH_TIMEOUT_S
    guest_command: tuple[str, ...] | None = None


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    status: str
    length: float | None = None
    gap: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class FitnessReport:
    """Per-instance outcomes plus the aggregate fitness of one candidate."""

    per_instance: tuple[InstanceResult, ...]
    mean_gap: float
    overall_status: str  # "ok" | "failed"
    wall_time_s: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.overall_status == "ok"


def fitness_from_report(report: FitnessReport) -> float:
    """Engine-facing fitness: failed candidates get the sentinel-worst value."""
    return report.mean_gap if report.ok else SENTINEL_FITNESS


def two_opt_baselines(batch: list[TspInstance], parallel: int = 1,
                      restarts: int | None = None) -> dict[str, float]:
    """Per-instance baseline lengths from the multistart 2-opt solver."""
    kwargs = {} if restarts is None else {"restarts": restarts}
    if parallel <= 1 or len(batch) <= 1:
        return {i.instance_id: two_opt_baseline(i, **kwargs) for i in batch}
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        lengths = list(pool.map(lambda i: two_opt_baseline(i, **kwargs), batch))
    return {i.instance_id: length for i, length in zip(batch, lengths)}


def validate_tour(order, n: int) -> str | None:
    """None when ``order`` is a permutation of 0..n-1, else a description of
    the violation."""
    if len(order) != n:
        return f"tour has {len(order)} nodes, expected {n}"
    seen = set()
    for node in order:
        if not isinstance(node, int) or isinstance(node, bool):
            try:
                node = int(node)
            except (TypeError, ValueError):
                return f"non-integer node {node!r}"
        if not 0 <= node < n:
            return f"node {node} out of range"
        if node in seen:
            return f"duplicate node {node}"
        seen.add(node)
    return None


def _finish_report(results: list[InstanceResult], started: float,
                   detail: str = "") -> FitnessReport:
    ok_gaps = [r.gap for r in results if r.status == STATUS_OK]
    failed = (len(ok_gaps) != len(results)) or not results
    mean_gap = (sum(ok_gaps) / len(ok_gaps)) if ok_gaps else math.nan
    return FitnessReport(
        per_instance=tuple(results),
        mean_gap=mean_gap,
        overall_status="failed" if failed else "ok",
        wall_time_s=time.monotonic() - started,
        detail=detail,
    )


def _evaluate_native(program: CandidateProgram, batch: list[TspInstance],
                     baselines: dict[str, float], start_node: int,
                     started: float) -> FitnessReport:
    selector = program.selector()
    results: list[InstanceResult] = []
    for inst in batch:
        base = baselines[inst.instance_id]
        try:
            tour = construct_tour(selector, inst, start=start_node)
        except InvalidStep as exc:
            results.append(InstanceResult(inst.instance_id, STATUS_INVALID_TOUR,
                                          detail=str(exc)))
            break
        except Exception as exc:  # defensive: a broken selector must not abort
            results.append(InstanceResult(inst.instance_id, STATUS_RUNTIME_ERROR,
                                          detail=f"{type(exc).__name__}: {exc}"))
            break
        results.append(InstanceResult(inst.instance_id, STATUS_OK,
                                      length=tour.length,
                                      gap=gap(tour.length, base)))
    return _finish_report(results, started)


class _GuestProcess:
    """Host side of the sandbox protocol: one child per candidate per batch."""

    def __init__(self, command: tuple[str, ...]) -> None:
        self.proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)  # EOF marker

    def send(self, message: dict) -> bool:
        try:
            self.proc.stdin.write(json.dumps(message) + "\n")
            self.proc.stdin.flush()
            return True
        except (BrokenPipeError, OSError, ValueError):
            return False

    def recv(self, deadline: float) -> dict | None:
        """Next protocol message, or None on deadline/EOF/garbage."""
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return None
        try:
            line = self._lines.get(timeout=remaining)
        except queue.Empty:
            return None
        if line is None:
            return None
        try:
            doc = json.loads(line)
        except ValueError:
            return None
        return doc if isinstance(doc, dict) else None

    def alive(self) -> bool:
        return self.proc.poll() is None

    def shutdown(self) -> None:
        if self.alive():
            self.send({"op": "shutdown"})
            try:
                self.proc.wait(timeout=_KILL_GRACE_S)
            except subprocess.TimeoutExpired:
                pass
        self.kill()

    def kill(self) -> None:
        if self.alive():
            self.proc.kill()
            try:
                self.proc.wait(timeout=_KILL_GRACE_S)
            except subprocess.TimeoutExpired:
                pass
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass


def _evaluate_guest(program: CandidateProgram, batch: list[TspInstance],
                    baselines: dict[str, float], limits: EvalLimits,
                    start_node: int, started: float) -> FitnessReport:
    if not limits.guest_command:
        return _finish_report([], started,
                              detail="no guest runtime configured for source candidates")
    deadline = time.monotonic() + limits.batch_timeout_s
    guest = _GuestProcess(limits.guest_command)
    results: list[InstanceResult] = []
    detail = ""
    try:
        if not guest.send({"op": "load", "source": program.source}):
            return _finish_report([], started, detail="guest process unreachable")
        reply = guest.recv(deadline)
        if reply is None:
            guest.kill()
            return _finish_report([], started, detail="guest did not answer load")
        if reply.get("op") != "ready":
            return _finish_report([], started,
                                  detail=f"load_error: {reply.get('msg', '')}")
        for inst in batch:
            base = baselines[inst.instance_id]
            sent = guest.send({
                "op": "solve",
                "instance_id": inst.instance_id,
                "n": inst.n,
                "coords": inst.coords.tolist(),
                "start": start_node,
            })
            reply = guest.recv(deadline) if sent else None
            if reply is None:
                guest.kill()
                status = STATUS_TIMEOUT if time.monotonic() >= deadline else STATUS_RUNTIME_ERROR
                results.append(InstanceResult(inst.instance_id, status,
                                              detail="no reply from guest"))
                break
            if reply.get("op") == "step_error":
                results.append(InstanceResult(inst.instance_id, STATUS_RUNTIME_ERROR,
                                              detail=str(reply.get("msg", ""))))
                continue
            if reply.get("op") != "tour":
                results.append(InstanceResult(inst.instance_id, STATUS_RUNTIME_ERROR,
                                              detail=f"unexpected reply {reply.get('op')!r}"))
                break
            order = reply.get("order", [])
            violation = validate_tour(order, inst.n)
            if violation is not None:
                results.append(InstanceResult(inst.instance_id, STATUS_INVALID_TOUR,
                                              detail=violation))
                continue
            order = [int(x) for x in order]
            length = float(inst.dist[order, ([*order[1:], order[0]])].sum())
            results.append(InstanceResult(inst.instance_id, STATUS_OK,
                                          length=length, gap=gap(length, base)))
    finally:
        guest.shutdown()
    return _finish_report(results, started, detail=detail)


def evaluate_candidate(program: CandidateProgram, batch: list[TspInstance],
                       baselines: dict[str, float],
                       limits: EvalLimits | None = None,
                       start_node: int = 0) -> FitnessReport:
    """Run one candidate over the whole batch and aggregate the mean gap.

    Never raises for candidate-level problems; every failure mode is encoded
    in the report. Baselines must cover every instance in the batch.
    """
    limits = limits or EvalLimits()
    missing = [i.instance_id for i in batch if i.instance_id not in baselines]
    if missing:
        raise ValueError(f"baselines missing for instances: {missing[:3]}")
    started = time.monotonic()
    if program.is_native:
        return _evaluate_native(program, batch, baselines, start_node, started)
    return _evaluate_guest(program, batch, baselines, limits, start_node, started)


@dataclass
class FitnessEvaluator:
    """A fixed evaluation batch with precomputed baselines, shared by every
    candidate of an evolution run."""

    batch: list[TspInstance]
    baselines: dict[str, float]
    limits: EvalLimits = field(default_factory=EvalLimits)
    parallel: int = 1

    @classmethod
    def from_batch(cls, batch: list[TspInstance], limits: EvalLimits | None = None,
                   parallel: int = 1, restarts: int | None = None,
                   baselines: dict[str, float] | None = None) -> "FitnessEvaluator":
        if baselines is None:
            baselines = two_opt_baselines(batch, parallel=parallel, restarts=restarts)
        return cls(batch=batch, baselines=baselines,
                   limits=limits or EvalLimits(), parallel=parallel)

    @classmethod
    def for_run(cls, instance_size: int, instance_count: int, seed: int,
                limits: EvalLimits | None = None, parallel: int = 1,
                baselines: dict[str, float] | None = None) -> "FitnessEvaluator":
        """The per-run batch: instance seeds are derived from the run seed so
        one evolution run always sees one fixed batch."""
        batch = instance_batch(instance_size, instance_count, base_seed=seed * 100000)
        return cls.from_batch(batch, limits=limits, parallel=parallel,
                              baselines=baselines)

    def evaluate(self, program: CandidateProgram) -> FitnessReport:
        return evaluate_candidate(program, self.batch, self.baselines, self.limits)

    def evaluate_many(self, programs: list[CandidateProgram]) -> list[FitnessReport]:
        """Evaluate distinct candidates, concurrently when parallel > 1.
        Results keep the input order, so callers stay deterministic."""
        if self.parallel <= 1 or len(programs) <= 1:
            return [self.evaluate(p) for p in programs]
        with ThreadPoolExecutor(max_workers=self.parallel) as pool:
            return list(pool.map(self.evaluate, programs))
