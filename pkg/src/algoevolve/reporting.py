"""Run artifacts: trace CSV, evaluation tables, the run manifest, and figure
rendering (convergence curves and per-instance route drawings).

Everything written here is byte-reproducible for a fixed (config, seed,
scripted transport), except manifest timestamps, which record wall-clock
start/finish on purpose.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import EvolutionConfig, EvolutionTrace, Individual
from .errors import ConfigError
from .programs import parse_program
from .tsp import Tour, TspInstance

TRACE_CSV_HEADER = ["generation", "best_gap", "mean_gap"]
MANIFEST_NAME = "manifest.json"
TRACE_CSV_NAME = "trace.csv"
TRACE_JSON_NAME = "trace.json"
BEST_PROGRAM_NAME = "best_program.txt"
BEST_JSON_NAME = "best_algorithm.json"


def _cell(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def write_trace_csv(trace: EvolutionTrace, path: str | Path) -> None:
    """One row per generation: generation index, best gap, mean gap."""
    lines = [",".join(TRACE_CSV_HEADER)]
    for record in trace.generations:
        lines.append(f"{record.generation},{_cell(record.best_fitness)},"
                     f"{_cell(record.mean_fitness)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [
            {
                "generation": int(row["generation"]),
                "best_gap": float(row["best_gap"]),
                "mean_gap": float(row["mean_gap"]),
            }
            for row in reader
        ]
    return rows


@dataclass
class RunManifest:
    """Self-description of one evolution run directory."""

    config: EvolutionConfig
    llm_mode: str  # "live" | "mock:<path>" | "replay:<path>"
    output_dir: str
    started_at: str
    finished_at: str
    best: dict  # id, description, program, fitness

    def to_json(self) -> str:
        doc = {
            "format": "evolution-run-manifest",
            "version": 1,
            "config": self.config.to_dict(),
            "config_hash": self.config.content_hash(),
            "llm_mode": self.llm_mode,
            "output_dir": self.output_dir,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "best": self.best,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        doc = json.loads(text)
        if doc.get("format") != "evolution-run-manifest":
            raise ConfigError("not a run manifest")
        return cls(
            config=EvolutionConfig.from_dict(doc["config"]),
            llm_mode=doc["llm_mode"],
            output_dir=doc["output_dir"],
            started_at=doc["started_at"],
            finished_at=doc["finished_at"],
            best=doc["best"],
        )


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def best_snapshot(best: Individual) -> dict:
    return {
        "id": best.id,
        "description": best.description,
        "program": best.program.canonical_text,
        "fitness": repr(float(best.fitness)),
    }


def write_run_outputs(out_dir: str | Path, manifest: RunManifest,
                      trace: EvolutionTrace, best: Individual) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    write_trace_csv(trace, out / TRACE_CSV_NAME)
    (out / TRACE_JSON_NAME).write_text(trace.to_json(), encoding="utf-8")
    (out / BEST_PROGRAM_NAME).write_text(best.program.canonical_text + "\n",
                                         encoding="utf-8")
    (out / BEST_JSON_NAME).write_text(
        json.dumps(best_snapshot(best), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")


def load_manifest(run_dir: str | Path) -> RunManifest:
    path = Path(run_dir) / MANIFEST_NAME
    if not path.is_file():
        raise ConfigError(f"missing manifest: {path}")
    try:
        return RunManifest.from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"corrupt manifest {path}: {exc}")


@dataclass(frozen=True)
class SizeReportRow:
    size: int
    instances: int
    mean_length: float
    mean_gap: float


def write_report_table(rows: list[SizeReportRow], txt_path: str | Path,
                       csv_path: str | Path) -> str:
    """Aligned text plus CSV, one row per problem size."""
    header = f"{'size':>6} {'instances':>10} {'mean_length':>13} {'mean_gap':>10}"
    lines = [header]
    for row in rows:
        lines.append(f"{row.size:>6} {row.instances:>10} "
                     f"{row.mean_length:>13.4f} {row.mean_gap * 100:>9.2f}%")
    text = "\n".join(lines) + "\n"
    Path(txt_path).write_text(text, encoding="utf-8")
    csv_lines = ["size,instances,mean_length,mean_gap"]
    for row in rows:
        csv_lines.append(f"{row.size},{row.instances},"
                         f"{_cell(row.mean_length)},{_cell(row.mean_gap)}")
    Path(csv_path).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    return text


def render_convergence(trace: EvolutionTrace, path: str | Path) -> None:
    """Best/mean gap per generation, generation 0 being the initial population."""
    records = trace.all_records()
    gens = [r.generation for r in records]
    best = [r.best_fitness * 100 for r in records]
    mean = [r.mean_fitness * 100 if math.isfinite(r.mean_fitness) else math.nan
            for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(gens, mean, marker="o", color="tab:orange", label="population mean")
    ax.plot(gens, best, marker="s", color="tab:red", label="population best")
    ax.set_xlabel("generation")
    ax.set_ylabel("gap to baseline (%)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_route(instance: TspInstance, tour: Tour, path: str | Path,
                 label: str = "") -> None:
    """Nodes as points, the closed tour as a polyline, start node highlighted."""
    order = tour.order
    xs = instance.coords[order, 0]
    ys = instance.coords[order, 1]
    xs = list(xs) + [xs[0]]
    ys = list(ys) + [ys[0]]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(xs, ys, color="tab:blue", linewidth=0.8, zorder=1)
    ax.scatter(instance.coords[:, 0], instance.coords[:, 1], s=12,
               color="black", zorder=2)
    start = order[0]
    ax.scatter([instance.coords[start, 0]], [instance.coords[start, 1]], s=60,
               color="red", zorder=3, label="start")
    title = f"{instance.instance_id}  length={tour.length:.4f}"
    if label:
        title = f"{label}  {title}"
    ax.set_title(title, fontsize=9)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def manifest_best_program(manifest: RunManifest):
    return parse_program(manifest.best["program"])
