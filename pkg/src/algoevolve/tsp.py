"""TSP problem kit: instances, the step-by-step construction contract, built-in
selection heuristics, local-search baseline, exact small-instance solver, and
gap arithmetic.

All tours are closed (they return to the start node) and all distances are
Euclidean in the unit square. Node sets handed to step selectors are kept in
ascending index order so that argmin tie-breaking is reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InstanceTooLarge, InvalidStep

HELD_KARP_MAX_NODES = 13
DEFAULT_RESTARTS = 5


@dataclass(frozen=True)
class TspInstance:
    """A Euclidean TSP instance on the unit square."""

    n: int
    coords: np.ndarray  # shape (n, 2)
    dist: np.ndarray    # shape (n, n), symmetric, zero diagonal
    seed: int

    @property
    def instance_id(self) -> str:
        return f"n{self.n}-s{self.seed}"


@dataclass(frozen=True)
class Tour:
    """A visiting permutation of one instance's nodes plus its closed length."""

    order: np.ndarray
    length: float


@dataclass(frozen=True)
class SelectionContext:
    """Everything a step selector may look at when choosing the next node.

    `unvisited` is sorted ascending; `current_node` and `destination_node`
    are never in it.
    """

    current_node: int
    destination_node: int
    unvisited: np.ndarray
    dist: np.ndarray


StepSelector = Callable[[SelectionContext], int]


def distance_matrix(coords: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances. The exact expression matters: the guest
    harness computes distances from the same coordinates with the same
    formula, so both sides agree bit for bit."""
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def generate_instance(n: int, seed: int) -> TspInstance:
    """Sample ``n`` points i.i.d. uniformly in [0,1]^2, reproducibly per seed."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    rng = np.random.default_rng(seed)
    coords = rng.random((n, 2))
    return TspInstance(n=n, coords=coords, dist=distance_matrix(coords), seed=seed)


def instance_batch(n: int, count: int, base_seed: int) -> list[TspInstance]:
    """A fixed evaluation batch: seeds base_seed..base_seed+count-1."""
    return [generate_instance(n, base_seed + k) for k in range(count)]


def tour_length(dist: np.ndarray, order: np.ndarray) -> float:
    o = np.asarray(order)
    return float(dist[o, np.roll(o, -1)].sum())


def greedy_select_next(ctx: SelectionContext) -> int:
    """Nearest unvisited node; ties go to the smallest index."""
    u = ctx.unvisited
    return int(u[int(np.argmin(ctx.dist[ctx.current_node, u]))])


@dataclass(frozen=True)
class ScoredParams:
    """Weights of the score-and-threshold selection heuristic."""

    c1: float
    c2: float
    c3: float
    c4: float
    tau: float  # greedy fallback threshold; +inf disables it

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.c1, self.c2, self.c3, self.c4, self.tau)


def scored_node_scores(ctx: SelectionContext, params: ScoredParams) -> np.ndarray:
    """Score of every unvisited node, aligned with ctx.unvisited:

    score(j) = c1*d(current,j) - c2*mean(d(j, others)) + c3*std(d(j, others))
               - c4*d(j, destination)

    where "others" are the unvisited nodes besides j; mean/std of an empty
    set are 0.
    """
    u = ctx.unvisited
    k = u.size
    d_cur = ctx.dist[ctx.current_node, u]
    d_dest = ctx.dist[u, ctx.destination_node]
    if k <= 1:
        mean = np.zeros(k)
        std = np.zeros(k)
    else:
        sub = ctx.dist[np.ix_(u, u)]
        s1 = sub.sum(axis=1)          # d(j,j)=0, so this is the sum over others
        s2 = (sub * sub).sum(axis=1)
        mean = s1 / (k - 1)
        var = np.maximum(s2 / (k - 1) - mean * mean, 0.0)
        std = np.sqrt(var)
    return params.c1 * d_cur - params.c2 * mean + params.c3 * std - params.c4 * d_dest


def scored_select_next(ctx: SelectionContext, params: ScoredParams) -> int:
    """Take the lowest-scoring unvisited node, unless even the minimum score
    exceeds tau, in which case the step falls back to the plain nearest-node
    choice so remote nodes are not grabbed too early. Ties go to the smallest
    index; a single remaining node is forced.
    """
    u = ctx.unvisited
    if u.size == 1:
        return int(u[0])
    scores = scored_node_scores(ctx, params)
    if float(scores.min()) > params.tau:
        return greedy_select_next(ctx)
    return int(u[int(np.argmin(scores))])


def construct_tour(selector: StepSelector, instance: TspInstance, start: int = 0) -> Tour:
    """Build a closed tour by repeatedly asking ``selector`` for the next node.

    The destination node presented to the selector is the fixed start node.
    Every choice is validated; a visited or out-of-range node raises
    InvalidStep.
    """
    n = instance.n
    if not 0 <= start < n:
        raise ValueError(f"start node {start} out of range for n={n}")
    order = np.empty(n, dtype=np.int64)
    order[0] = start
    unvisited = np.delete(np.arange(n, dtype=np.int64), start)
    current = start
    for step in range(1, n):
        ctx = SelectionContext(current_node=current, destination_node=start,
                               unvisited=unvisited, dist=instance.dist)
        chosen = selector(ctx)
        try:
            chosen = int(chosen)
        except (TypeError, ValueError):
            raise InvalidStep(f"step {step}: selector returned non-integer {chosen!r}")
        pos = np.searchsorted(unvisited, chosen)
        if pos >= unvisited.size or unvisited[pos] != chosen:
            raise InvalidStep(f"step {step}: node {chosen} is not unvisited")
        order[step] = chosen
        unvisited = np.delete(unvisited, pos)
        current = chosen
    return Tour(order=order, length=tour_length(instance.dist, order))


def greedy_tour(instance: TspInstance, start: int = 0) -> Tour:
    return construct_tour(greedy_select_next, instance, start)


def _two_opt_descend(order: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """First-improvement sweeps (ascending i, first improving j per row) until
    no 2-opt move improves the closed tour."""
    order = np.array(order, dtype=np.int64)
    n = order.size
    eps = 1e-12
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            a = order[i]
            b = order[i + 1]
            j_hi = n if i > 0 else n - 1  # (n-1,0) edge is adjacent to (0,1)
            js = np.arange(i + 2, j_hi)
            if js.size == 0:
                continue
            c = order[js]
            d_after = order[(js + 1) % n]
            delta = (dist[a, c] + dist[b, d_after]
                     - dist[a, b] - dist[c, d_after])
            hits = np.nonzero(delta < -eps)[0]
            if hits.size:
                j = int(js[hits[0]])
                order[i + 1:j + 1] = order[i + 1:j + 1][::-1]
                improved = True
    return order


def two_opt_baseline(instance: TspInstance, restarts: int = DEFAULT_RESTARTS) -> float:
    """Best length over multistart 2-opt: one greedy start plus restarts-1
    seeded random-permutation starts, each descended to 2-opt local optimality.
    Never worse than greedy, since greedy is one of the starts."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    starts = [greedy_tour(instance).order]
    rng = np.random.default_rng([instance.seed, 20270])
    for _ in range(restarts - 1):
        starts.append(rng.permutation(instance.n))
    best = np.inf
    for s in starts:
        length = tour_length(instance.dist, _two_opt_descend(s, instance.dist))
        best = min(best, length)
    return float(best)


def held_karp(instance: TspInstance) -> float:
    """Exact optimal closed-tour length by dynamic programming over subsets.

    Guarded to n <= HELD_KARP_MAX_NODES; the table is O(2^n * n).
    """
    n = instance.n
    if n > HELD_KARP_MAX_NODES:
        raise InstanceTooLarge(f"held_karp limited to n<={HELD_KARP_MAX_NODES}, got {n}")
    dist = instance.dist
    full = 1 << n
    dp = np.full((full, n), np.inf)
    dp[1, 0] = 0.0
    for mask in range(1, full):
        if not mask & 1:
            continue
        for last in range(n):
            if not mask & (1 << last):
                continue
            cur = dp[mask, last]
            if not np.isfinite(cur):
                continue
            rest = (~mask) & (full - 1)
            m = rest
            while m:
                nxt = (m & -m).bit_length() - 1
                nm = mask | (1 << nxt)
                cand = cur + dist[last, nxt]
                if cand < dp[nm, nxt]:
                    dp[nm, nxt] = cand
                m &= m - 1
    closing = dp[full - 1, 1:] + dist[1:, 0]
    return float(closing.min()) if n > 1 else 0.0


def gap(length: float, baseline: float) -> float:
    """Relative excess of ``length`` over ``baseline``."""
    if baseline <= 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return (length - baseline) / baseline


def save_instance(instance: TspInstance, path: str | Path) -> None:
    """Write an instance as a self-describing JSON document with full-precision
    decimal coordinates."""
    doc = {
        "format": "tsp-instance",
        "n": instance.n,
        "seed": instance.seed,
        "coords": [[repr(float(x)), repr(float(y))] for x, y in instance.coords],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> TspInstance:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "tsp-instance":
        raise ValueError(f"{path}: not a tsp-instance file")
    coords = np.array([[float(x), float(y)] for x, y in doc["coords"]])
    return TspInstance(n=int(doc["n"]), coords=coords,
                       dist=distance_matrix(coords), seed=int(doc["seed"]))


def load_baseline_lengths(path: str | Path) -> dict[str, float]:
    """Per-instance-id baseline lengths imported from an external solver."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return {str(k): float(v) for k, v in doc.items()}
