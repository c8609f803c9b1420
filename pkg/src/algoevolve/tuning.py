"""Grid search that produced the tuned scored-heuristic fixture.

Two stages, all seeds fixed so the search is reproducible:

1. every weight vector on the lattice {0, 0.25, 0.5, 0.75, 1}^4 with the
   threshold disabled, ranked by mean tour length on a small instance batch;
2. for the top vectors, threshold candidates taken from quantiles of the
   per-step minimum scores observed on that batch, evaluated on the full
   batch; the overall winner is frozen into fixtures/tuned_scored.json.

Rerun with ``python -m algoevolve.tuning`` (takes a minute or two).
"""

from __future__ import annotations

import itertools
import json
import math
from pathlib import Path

import numpy as np

from .tsp import (
    ScoredParams,
    SelectionContext,
    TspInstance,
    construct_tour,
    instance_batch,
    scored_node_scores,
    scored_select_next,
)

FIXTURE_PATH = Path(__file__).parent / "fixtures" / "tuned_scored.json"

LATTICE = (0.0, 0.25, 0.5, 0.75, 1.0)
STAGE1_INSTANCES = 16
FINAL_INSTANCES = 64
MINSCORE_INSTANCES = 8
TOP_K = 5
TAU_QUANTILES = (0.6, 0.75, 0.9, 0.97)
SIZE = 50
BASE_SEED = 0


def _selector(params: ScoredParams):
    return lambda ctx: scored_select_next(ctx, params)


def _mean_length(params: ScoredParams, batch: list[TspInstance]) -> float:
    lengths = [construct_tour(_selector(params), inst).length for inst in batch]
    return float(np.mean(lengths))


def _min_scores(params: ScoredParams, batch: list[TspInstance]) -> list[float]:
    """Per-step minimum score when running the heuristic threshold-free."""
    collected: list[float] = []

    def selector(ctx: SelectionContext) -> int:
        if ctx.unvisited.size > 1:
            collected.append(float(scored_node_scores(ctx, params).min()))
        return scored_select_next(ctx, params)

    for inst in batch:
        construct_tour(selector, inst)
    return collected


def tune_scored_params(verbose: bool = False) -> dict:
    """Run the documented two-stage search and return the result document."""
    stage1_batch = instance_batch(SIZE, STAGE1_INSTANCES, BASE_SEED)
    ranked: list[tuple[float, tuple[float, float, float, float]]] = []
    for c in itertools.product(LATTICE, repeat=4):
        if c == (0.0, 0.0, 0.0, 0.0):
            continue
        length = _mean_length(ScoredParams(*c, tau=math.inf), stage1_batch)
        ranked.append((length, c))
    ranked.sort()
    if verbose:
        for length, c in ranked[:TOP_K]:
            print(f"stage1 c={c} mean_length={length:.4f}")

    final_batch = instance_batch(SIZE, FINAL_INSTANCES, BASE_SEED)
    best_length = math.inf
    best_params: ScoredParams | None = None
    for _, c in ranked[:TOP_K]:
        mins = _min_scores(ScoredParams(*c, tau=math.inf),
                           stage1_batch[:MINSCORE_INSTANCES])
        taus = [float(q) for q in np.quantile(mins, TAU_QUANTILES)] + [math.inf]
        for tau in taus:
            params = ScoredParams(*c, tau=tau)
            length = _mean_length(params, final_batch)
            if verbose:
                print(f"stage2 c={c} tau={tau:.4g} mean_length={length:.4f}")
            if length < best_length:
                best_length = length
                best_params = params

    return {
        "format": "tuned-scored-params",
        "c1": best_params.c1,
        "c2": best_params.c2,
        "c3": best_params.c3,
        "c4": best_params.c4,
        "tau": "inf" if math.isinf(best_params.tau) else best_params.tau,
        "search": {
            "lattice": list(LATTICE),
            "stage1_instances": STAGE1_INSTANCES,
            "final_instances": FINAL_INSTANCES,
            "tau_quantiles": list(TAU_QUANTILES),
            "size": SIZE,
            "base_seed": BASE_SEED,
            "mean_length": best_length,
        },
    }


def load_tuned_params(path: str | Path = FIXTURE_PATH) -> ScoredParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "tuned-scored-params":
        raise ValueError(f"{path}: not a tuned-params fixture")
    tau = math.inf if doc["tau"] == "inf" else float(doc["tau"])
    return ScoredParams(c1=float(doc["c1"]), c2=float(doc["c2"]),
                        c3=float(doc["c3"]), c4=float(doc["c4"]), tau=tau)


def main() -> None:
    doc = tune_scored_params(verbose=True)
    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {FIXTURE_PATH}")


if __name__ == "__main__":
    main()
