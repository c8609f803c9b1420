"""Chat-model gateway: transports, response parsing, and the operator facade.

Transports all expose ``chat(bundle) -> LlmExchange``:

* HttpChatTransport  - live OpenAI-compatible endpoint, retry with backoff
* ScriptedTransport  - canned responses for tests, optionally cycling
* ReplayTransport    - byte-identical replay of a recorded transcript
* RecordingTransport - wraps another transport, appends every exchange to a
                       JSON-lines transcript file

``parse_individual`` turns a raw response into (description, program) or
raises one of the typed parse errors so callers can count failure modes.
"""

from __future__ import annotations

import json
import ast
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import (
    AuthError,
    EmptyDescription,
    LlmUnavailable,
    NoCodeBlock,
    ResponseParseError,
    ScriptExhausted,
    WrongFunctionSignature,
)
from .programs import CandidateProgram, parse_native
from .prompts import (
    PromptBundle,
    TaskSpec,
    render_crossover_prompt,
    render_init_prompt,
    render_mutation_prompt,
    tsp_task_spec,
)

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass
class LlmSettings:
    """Connection and sampling settings for the chat transports."""

    model: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    temperature_by_operator: dict[str, float] = field(default_factory=dict)
    max_retries: int = 3
    base_url: str = "https://api.openai.com"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 120.0
    backoff_base_s: float = 1.0

    def temperature_for(self, operator: str) -> float:
        return self.temperature_by_operator.get(operator, self.temperature)


@dataclass(frozen=True)
class LlmExchange:
    """One prompt/response round trip, kept for the audit transcript."""

    exchange_id: str
    prompt: PromptBundle
    raw_response: str
    model: str
    latency_s: float
    attempt: int


class ChatTransport(Protocol):
    def chat(self, bundle: PromptBundle) -> LlmExchange: ...


class _ExchangeCounter:
    """Thread-safe monotonically increasing exchange ids."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._n = 0

    def next_id(self) -> str:
        with self._lock:
            self._n += 1
            return f"x{self._n:05d}"


class HttpChatTransport:
    """POSTs to an OpenAI-compatible ``/v1/chat/completions`` endpoint.

    The bearer token is read from the environment variable named by
    ``settings.api_key_env``. Transient failures (connection errors,
    timeouts, 408/409/429/5xx) are retried up to ``max_retries`` times with
    exponentially growing delays; 401/403 raises AuthError immediately.
    """

    def __init__(self, settings: LlmSettings,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        self.settings = settings
        self._session = session or requests.Session()
        self._sleep = sleep
        self._counter = _ExchangeCounter()

    def chat(self, bundle: PromptBundle) -> LlmExchange:
        settings = self.settings
        api_key = os.environ.get(settings.api_key_env, "")
        if not api_key:
            raise AuthError(f"environment variable {settings.api_key_env} is not set")
        url = settings.base_url.rstrip("/") + "/v1/chat/completions"
        payload = {
            "model": settings.model,
            "messages": [{"role": "user", "content": bundle.rendered_text}],
            "temperature": settings.temperature_for(bundle.operator),
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        started = time.monotonic()
        last_error = "no attempt made"
        for attempt in range(1, settings.max_retries + 2):
            try:
                resp = self._session.post(url, json=payload, headers=headers,
                                          timeout=settings.timeout_s)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"endpoint rejected credential (HTTP {resp.status_code})")
                if resp.status_code == 200:
                    try:
                        content = resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise LlmUnavailable(f"malformed completion body: {exc}")
                    return LlmExchange(
                        exchange_id=self._counter.next_id(),
                        prompt=bundle,
                        raw_response=str(content),
                        model=settings.model,
                        latency_s=time.monotonic() - started,
                        attempt=attempt,
                    )
                last_error = f"HTTP {resp.status_code}"
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise LlmUnavailable(f"non-retryable response: {last_error}")
            if attempt <= settings.max_retries:
                self._sleep(settings.backoff_base_s * (2 ** (attempt - 1)))
        raise LlmUnavailable(
            f"gave up after {settings.max_retries + 1} attempts: {last_error}")


class ScriptedTransport:
    """Deterministic mock: replays a fixed list of response texts in order.

    With ``cycle=True`` the script wraps around instead of raising
    ScriptExhausted, which is how long evolution runs are driven without a
    huge script file. Access to the cursor is serialized.
    """

    def __init__(self, responses: list[str], cycle: bool = False,
                 model: str = "scripted") -> None:
        if not responses:
            raise ValueError("scripted transport needs at least one response")
        self.responses = list(responses)
        self.cycle = cycle
        self.model = model
        self._cursor = 0
        self._lock = threading.Lock()
        self._counter = _ExchangeCounter()

    @property
    def calls_made(self) -> int:
        return self._cursor

    def skip(self, count: int) -> None:
        """Advance the cursor, used when resuming a checkpointed run."""
        self._cursor += count

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedTransport":
        """Load a script file: JSON lines of {"response": ...}; an optional
        leading {"cycle": true} line makes the script wrap around."""
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
                 if ln.strip()]
        cycle = False
        responses: list[str] = []
        for i, line in enumerate(lines):
            doc = json.loads(line)
            if i == 0 and "response" not in doc:
                cycle = bool(doc.get("cycle", False))
                continue
            responses.append(str(doc["response"]))
        return cls(responses, cycle=cycle)

    def chat(self, bundle: PromptBundle) -> LlmExchange:
        with self._lock:
            index = self._cursor
            if index >= len(self.responses):
                if not self.cycle:
                    raise ScriptExhausted(
                        f"script of {len(self.responses)} responses exhausted")
                index %= len(self.responses)
            self._cursor += 1
        return LlmExchange(
            exchange_id=self._counter.next_id(),
            prompt=bundle,
            raw_response=self.responses[index],
            model=self.model,
            latency_s=0.0,
            attempt=1,
        )


class RecordingTransport:
    """Wraps a transport and appends every exchange to a transcript file."""

    def __init__(self, inner: ChatTransport, path: str | Path) -> None:
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def chat(self, bundle: PromptBundle) -> LlmExchange:
        exchange = self.inner.chat(bundle)
        record = {
            "exchange_id": exchange.exchange_id,
            "operator": bundle.operator,
            "parent_ids": list(bundle.parent_ids),
            "prompt_text": bundle.rendered_text,
            "raw_response": exchange.raw_response,
            "model": exchange.model,
            "latency_s": exchange.latency_s,
            "attempt": exchange.attempt,
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return exchange

    def __getattr__(self, name: str):
        return getattr(self.inner, name)


class ReplayTransport(ScriptedTransport):
    """Replays the responses of a recorded transcript, in recorded order."""

    def __init__(self, path: str | Path) -> None:
        responses = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                responses.append(str(json.loads(line)["raw_response"]))
        super().__init__(responses, cycle=False, model="replay")


def chat(bundle: PromptBundle, settings: LlmSettings) -> LlmExchange:
    """One-shot live call without keeping a transport around."""
    return HttpChatTransport(settings).chat(bundle)


_FENCE_RE = re.compile(r"```(.*?)```", re.DOTALL)
_DESCRIPTION_RE = re.compile(r"^\s*algorithm\s*:\s*(\S.*)$", re.IGNORECASE | re.MULTILINE)
_LANGUAGE_TAGS = {"python", "python3", "py", "text", "txt"}
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def _first_code_block(raw: str) -> str:
    match = _FENCE_RE.search(raw)
    if match is None:
        raise NoCodeBlock("no fenced code block in response")
    inner = match.group(1)
    first_line, newline, rest = inner.partition("\n")
    if newline and first_line.strip().lower() in _LANGUAGE_TAGS | {""}:
        inner = rest
    code = inner.strip()
    if not code:
        raise NoCodeBlock("fenced code block is empty")
    return code


def _check_guest_signature(source: str, task: TaskSpec) -> None:
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise WrongFunctionSignature(f"code block is not valid Python: {exc}")
    wanted = task.function_name
    n_inputs = len(task.inputs)
    for node in ast.walk(tree):
        if isinstance(node, ast.FunctionDef) and node.name == wanted:
            positional = list(node.args.posonlyargs) + list(node.args.args)
            required = len(positional) - len(node.args.defaults)
            accepts = (required <= n_inputs
                       and (len(positional) >= n_inputs or node.args.vararg is not None))
            if accepts:
                return
            raise WrongFunctionSignature(
                f"{wanted} must accept {n_inputs} positional arguments "
                f"(found {len(positional)} with {required} required)")
    raise WrongFunctionSignature(f"no function named {wanted} in code block")


def _truncate_sentences(text: str, limit: int = 2) -> str:
    parts = _SENTENCE_SPLIT_RE.split(text.strip())
    return " ".join(parts[:limit]).strip()


def _extract_description(raw: str) -> str:
    match = _DESCRIPTION_RE.search(raw)
    if match:
        description = match.group(1).strip()
        if description:
            return description
    outside = _FENCE_RE.sub("\n", raw)
    for line in outside.splitlines():
        line = line.strip()
        if line:
            return line
    raise EmptyDescription("no description text in response")


def parse_individual(raw_response: str, task: TaskSpec) -> tuple[str, CandidateProgram]:
    """Extract (description, program) from a raw model response.

    The first fenced code block wins. A block consisting of one mini-DSL line
    becomes a native program; anything else is guest source and must define
    the task's callable with a compatible signature. Descriptions longer than
    two sentences are kept but truncated to the first two.
    """
    code = _first_code_block(raw_response)
    native = parse_native(code)
    if native is not None:
        program = native
    else:
        _check_guest_signature(code, task)
        program = CandidateProgram.from_source(code)
    description = _truncate_sentences(_extract_description(raw_response))
    if not description:
        raise EmptyDescription("description is empty after truncation")
    return description, program


@dataclass(frozen=True)
class OperatorResult:
    """Outcome of one create/combine/revise call, parse failures included."""

    exchange: LlmExchange
    description: str | None = None
    program: CandidateProgram | None = None
    error: str | None = None  # typed parse-error class name

    @property
    def ok(self) -> bool:
        return self.error is None


class LlmOperator:
    """Binds a chat transport to a task: renders the operator prompt, sends
    it, and parses the reply. Transport-level failures (LlmUnavailable,
    AuthError, ScriptExhausted) propagate; parse failures are captured in the
    result so the caller can count them."""

    def __init__(self, transport: ChatTransport, task: TaskSpec | None = None,
                 template_dir: Path | None = None) -> None:
        self.transport = transport
        self.task = task if task is not None else tsp_task_spec()
        self.template_dir = template_dir

    def _run(self, bundle: PromptBundle) -> OperatorResult:
        exchange = self.transport.chat(bundle)
        try:
            description, program = parse_individual(exchange.raw_response, self.task)
        except ResponseParseError as exc:
            return OperatorResult(exchange=exchange, error=type(exc).__name__)
        return OperatorResult(exchange=exchange, description=description,
                              program=program)

    def create(self) -> OperatorResult:
        return self._run(render_init_prompt(self.task, self.template_dir))

    def combine(self, parents) -> OperatorResult:
        return self._run(render_crossover_prompt(self.task, parents, self.template_dir))

    def revise(self, parent) -> OperatorResult:
        return self._run(render_mutation_prompt(self.task, parent, self.template_dir))
