"""Candidate programs: what an evolved individual actually runs.

A candidate is either guest-language source text (a Python function executed
in the guest harness) or a natively interpreted heuristic expressed in a
one-line mini-DSL. The natives make the whole evolution loop testable without
any LLM or guest process:

    greedy
    scored c1=1.0 c2=0.75 c3=0.5 c4=0.25 tau=inf

Whatever the variant, ``canonical_text`` is its textual identity:
``parse_program(p.canonical_text)`` reproduces the program exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import partial

from .tsp import ScoredParams, StepSelector, greedy_select_next, scored_select_next

KIND_GREEDY = "greedy"
KIND_SCORED = "scored"
KIND_SOURCE = "source"

_SCORED_RE = re.compile(
    r"^scored\s+c1=(?P<c1>\S+)\s+c2=(?P<c2>\S+)\s+c3=(?P<c3>\S+)"
    r"\s+c4=(?P<c4>\S+)\s+tau=(?P<tau>\S+)$"
)


def _fmt(x: float) -> str:
    if x == float("inf"):
        return "inf"
    return repr(float(x))


@dataclass(frozen=True)
class CandidateProgram:
    """One evolved program, with a canonical textual form."""

    kind: str
    source: str = ""
    params: ScoredParams | None = None

    @classmethod
    def greedy(cls) -> "CandidateProgram":
        return cls(kind=KIND_GREEDY)

    @classmethod
    def scored(cls, c1: float, c2: float, c3: float, c4: float, tau: float) -> "CandidateProgram":
        return cls(kind=KIND_SCORED, params=ScoredParams(c1, c2, c3, c4, tau))

    @classmethod
    def from_source(cls, source: str) -> "CandidateProgram":
        if not source.strip():
            raise ValueError("empty candidate source")
        return cls(kind=KIND_SOURCE, source=source)

    @property
    def is_native(self) -> bool:
        return self.kind in (KIND_GREEDY, KIND_SCORED)

    @property
    def canonical_text(self) -> str:
        if self.kind == KIND_GREEDY:
            return "greedy"
        if self.kind == KIND_SCORED:
            p = self.params
            return (f"scored c1={_fmt(p.c1)} c2={_fmt(p.c2)} c3={_fmt(p.c3)} "
                    f"c4={_fmt(p.c4)} tau={_fmt(p.tau)}")
        return self.source

    def selector(self) -> StepSelector:
        """The per-step selection function for native variants."""
        if self.kind == KIND_GREEDY:
            return greedy_select_next
        if self.kind == KIND_SCORED:
            return partial(scored_select_next, params=self.params)
        raise ValueError("guest-source programs have no native selector")


def parse_native(text: str) -> CandidateProgram | None:
    """Parse one mini-DSL line; None if the text is not mini-DSL."""
    line = text.strip()
    if line == "greedy":
        return CandidateProgram.greedy()
    m = _SCORED_RE.match(line)
    if m is None:
        return None
    try:
        vals = {k: float(m.group(k)) for k in ("c1", "c2", "c3", "c4", "tau")}
    except ValueError:
        return None
    return CandidateProgram.scored(**vals)


def parse_program(text: str) -> CandidateProgram:
    """Canonical-text parser: mini-DSL lines become native variants, anything
    else is guest source."""
    native = parse_native(text)
    if native is not None:
        return native
    return CandidateProgram.from_source(text)
