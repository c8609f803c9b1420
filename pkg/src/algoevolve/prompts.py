"""Prompt rendering for the three LLM operators.

Each prompt is assembled from an external template file (UTF-8 text with
``{placeholder}`` fields) plus blocks built from the TaskSpec. Every rendered
prompt carries, in order: the task description, the parent algorithms (for
crossover and mutation only), an operator-specific hint, the expected-output
contract, and optional extra hints. Rendering is pure: same inputs, same
bytes.

Placeholder vocabulary:
    init.txt       {task_description} {expected_output} {other_hints}
    crossover.txt  {task_description} {parent_count} {parents}
                   {expected_output} {other_hints}
    mutation.txt   {task_description} {parent} {expected_output} {other_hints}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import MissingParentProgram

if TYPE_CHECKING:
    from .engine import Individual

OP_INIT = "init"
OP_CROSSOVER = "crossover"
OP_MUTATION = "mutation"

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"

CODE_FENCE = "```"


@dataclass(frozen=True)
class TaskSpec:
    """What the evolved function must do and what it must look like."""

    task_description: str
    function_name: str
    inputs: tuple[tuple[str, str], ...]  # (name, meaning), in call order
    output: tuple[str, str]              # (name, meaning)
    extra_hints: str = ""

    def __post_init__(self) -> None:
        if not self.function_name.strip():
            raise ValueError("function_name must be non-empty")
        if not self.inputs or any(not name.strip() for name, _ in self.inputs):
            raise ValueError("every input needs a non-empty name")
        if not self.output[0].strip():
            raise ValueError("output name must be non-empty")

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.inputs)


@dataclass(frozen=True)
class PromptBundle:
    """A rendered operator prompt, ready for the chat transport."""

    operator: str
    rendered_text: str
    parent_ids: tuple[str, ...] = field(default=())


def tsp_task_spec(extra_hints: str = "") -> TaskSpec:
    """The TSP next-node selection task."""
    return TaskSpec(
        task_description=(
            "a travelling-salesman tour must visit every node of a set exactly "
            "once and finally return to its starting node; shorter closed tours "
            "are better. The tour is built step by step: standing on the current "
            "node, a rule picks which of the still-unvisited nodes to travel to "
            "next. You are designing that rule."
        ),
        function_name="select_next_node",
        inputs=(
            ("current_node", "id of the node the partial tour currently ends at"),
            ("destination_node", "id of the start node the tour must finally return to"),
            ("unvisited_nodes", "ids of the nodes not visited yet, in ascending order"),
            ("distance_matrix", "square array of pairwise distances between all nodes"),
        ),
        output=("next_node", "id of the chosen unvisited node"),
        extra_hints=extra_hints,
    )


def _expected_output_block(task: TaskSpec) -> str:
    args = ", ".join(task.input_names)
    lines = [
        "Respond exactly in this format, with nothing before or after it:",
        "",
        "Algorithm: <your algorithm described in at most two sentences>",
        f"{CODE_FENCE}python",
        f"def {task.function_name}({args}):",
        "    ...",
        f"    return {task.output[0]}",
        CODE_FENCE,
        "",
        "Inputs:",
    ]
    lines += [f"- {name}: {meaning}" for name, meaning in task.inputs]
    lines += [
        f"Output: {task.output[0]}: {task.output[1]}",
        "",
        f"The function must be named {task.function_name} and accept exactly "
        "these inputs in this order. The code may use numpy as np. Do not add "
        "comments, print statements, or any explanation outside the format.",
    ]
    return "\n".join(lines)


def _other_hints_section(task: TaskSpec) -> str:
    if not task.extra_hints.strip():
        return ""
    return f"Other hints: {task.extra_hints.strip()}"


def _parent_block(index: int, parent: "Individual") -> str:
    program_text = parent.program.canonical_text
    if not program_text.strip():
        raise MissingParentProgram(f"parent {parent.id} has no program text")
    return (f"Algorithm {index}: {parent.description}\n"
            f"{CODE_FENCE}\n{program_text}\n{CODE_FENCE}\n")


def _read_template(name: str, template_dir: Path | None) -> str:
    directory = Path(template_dir) if template_dir is not None else DEFAULT_TEMPLATE_DIR
    return (directory / name).read_text(encoding="utf-8")


def _finish(text: str) -> str:
    return text.rstrip() + "\n"


def render_init_prompt(task: TaskSpec, template_dir: Path | None = None) -> PromptBundle:
    """Creation prompt: task, novelty hint, output contract. No parents."""
    text = _read_template("init.txt", template_dir).format(
        task_description=task.task_description,
        expected_output=_expected_output_block(task),
        other_hints=_other_hints_section(task),
    )
    return PromptBundle(operator=OP_INIT, rendered_text=_finish(text))


def render_crossover_prompt(task: TaskSpec, parents: list["Individual"],
                            template_dir: Path | None = None) -> PromptBundle:
    """Recombination prompt: parents appear in draw order, numbered from 1."""
    if not parents:
        raise ValueError("crossover needs at least one parent")
    blocks = "\n".join(_parent_block(i + 1, p) for i, p in enumerate(parents))
    text = _read_template("crossover.txt", template_dir).format(
        task_description=task.task_description,
        parent_count=len(parents),
        parents=blocks,
        expected_output=_expected_output_block(task),
        other_hints=_other_hints_section(task),
    )
    return PromptBundle(operator=OP_CROSSOVER, rendered_text=_finish(text),
                        parent_ids=tuple(p.id for p in parents))


def render_mutation_prompt(task: TaskSpec, parent: "Individual",
                           template_dir: Path | None = None) -> PromptBundle:
    """Revision prompt: one parent, asked for a revised version."""
    text = _read_template("mutation.txt", template_dir).format(
        task_description=task.task_description,
        parent=_parent_block(1, parent),
        expected_output=_expected_output_block(task),
        other_hints=_other_hints_section(task),
    )
    return PromptBundle(operator=OP_MUTATION, rendered_text=_finish(text),
                        parent_ids=(parent.id,))
