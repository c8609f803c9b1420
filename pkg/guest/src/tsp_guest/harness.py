"""Guest-side harness for tour-construction candidates.

The host process ships candidate Python source and TSP instances over a
line-delimited JSON protocol on stdin/stdout:

    host -> guest   {"op": "load", "source": <text>}
    guest -> host   {"op": "ready"} | {"op": "load_error", "msg": <text>}
    host -> guest   {"op": "solve", "instance_id": <id>, "n": <int>,
                     "coords": [[x, y], ...], "start": <int>}
    guest -> host   {"op": "tour", "instance_id": <id>, "order": [<int>, ...]}
                    | {"op": "step_error", "msg": <text>}
    host -> guest   {"op": "shutdown"}   (clean exit, code 0)

One candidate per process lifetime. The candidate must define

    def select_next_node(current_node, destination_node, unvisited_nodes,
                         distance_matrix): ...

extra trailing parameters with defaults are allowed. Per step the harness
passes the unvisited node ids as a fresh ascending list and the distance
matrix as a dense 2-D numpy array; it validates every returned node and maps
any exception to step_error. The distance matrix is computed from the shipped
coordinates with plain Euclidean differences, matching the host's formula bit
for bit, and is never mutated between steps.

This is a robustness boundary (crash isolation, validation, host-enforced
deadline), not a security sandbox: the source is exec'd with normal builtins
and may do anything the process may do. Malformed protocol lines terminate
the process with a nonzero exit code.
"""

from __future__ import annotations

import ast
import json
import math
import sys

import numpy as np

MAX_ERROR_CHARS = 300

EXIT_OK = 0
EXIT_PROTOCOL_ERROR = 2

REQUIRED_FUNCTION = "select_next_node"
REQUIRED_ARITY = 4


def compute_distance_matrix(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _truncate(message: str) -> str:
    message = " ".join(str(message).split())
    if len(message) > MAX_ERROR_CHARS:
        return message[:MAX_ERROR_CHARS] + "..."
    return message


def _signature_problem(source: str) -> str | None:
    """Static check that the required callable exists with a workable arity."""
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return f"source does not parse: {exc}"
    for node in ast.walk(tree):
        if isinstance(node, ast.FunctionDef) and node.name == REQUIRED_FUNCTION:
            positional = list(node.args.posonlyargs) + list(node.args.args)
            required = len(positional) - len(node.args.defaults)
            if required <= REQUIRED_ARITY and (
                    len(positional) >= REQUIRED_ARITY or node.args.vararg):
                return None
            return (f"{REQUIRED_FUNCTION} must accept {REQUIRED_ARITY} "
                    f"positional arguments")
    return f"no function named {REQUIRED_FUNCTION}"


class GuestSession:
    """Holds the loaded step function; one candidate per process."""

    def __init__(self) -> None:
        self.step_function = None

    @property
    def loaded(self) -> bool:
        return self.step_function is not None

    def load(self, source: str) -> str | None:
        """Compile the candidate; returns an error message or None."""
        if self.loaded:
            return "a candidate is already loaded in this process"
        problem = _signature_problem(source)
        if problem is not None:
            return problem
        namespace = {"np": np, "numpy": np, "math": math}
        try:
            exec(compile(source, "<candidate>", "exec"), namespace)  # noqa: S102
        except BaseException as exc:
            return _truncate(f"{type(exc).__name__}: {exc}")
        function = namespace.get(REQUIRED_FUNCTION)
        if not callable(function):
            return f"{REQUIRED_FUNCTION} is not callable after exec"
        self.step_function = function
        return None

    def solve(self, coords: list, start: int) -> tuple[list[int] | None, str | None]:
        """Run the construction loop; returns (order, None) or (None, error)."""
        if not self.loaded:
            return None, "no candidate loaded"
        coords_arr = np.asarray(coords, dtype=float)
        n = len(coords_arr)
        if not 0 <= start < n:
            return None, f"start node {start} out of range"
        dist = compute_distance_matrix(coords_arr)
        order = [start]
        unvisited = sorted(set(range(n)) - {start})
        remaining = set(unvisited)
        current = start
        for step in range(1, n):
            try:
                choice = self.step_function(current, start, list(unvisited), dist)
            except BaseException as exc:
                return None, _truncate(
                    f"step {step}: {type(exc).__name__}: {exc}")
            try:
                choice = int(choice)
            except (TypeError, ValueError):
                return None, f"step {step}: non-integer choice {choice!r}"
            if choice not in remaining:
                return None, f"step {step}: node {choice} is not unvisited"
            order.append(choice)
            remaining.discard(choice)
            unvisited.remove(choice)
            current = choice
        return order, None


def serve(stdin=None, stdout=None) -> int:
    """Answer protocol messages until shutdown or stream close."""
    stdin = stdin if stdin is not None else sys.stdin
    proto_out = stdout if stdout is not None else sys.stdout
    # candidate print() calls must not corrupt the protocol stream
    sys.stdout = sys.stderr

    def reply(message: dict) -> None:
        proto_out.write(json.dumps(message) + "\n")
        proto_out.flush()

    session = GuestSession()
    for line in stdin:
        if not line.strip():
            continue
        try:
            message = json.loads(line)
            op = message["op"]
        except (ValueError, KeyError, TypeError):
            return EXIT_PROTOCOL_ERROR
        if op == "load":
            error = session.load(str(message.get("source", "")))
            if error is None:
                reply({"op": "ready"})
            else:
                reply({"op": "load_error", "msg": error})
        elif op == "solve":
            order, error = session.solve(message.get("coords", []),
                                         int(message.get("start", 0)))
            if error is None:
                reply({"op": "tour",
                       "instance_id": message.get("instance_id"),
                       "order": order})
            else:
                reply({"op": "step_error", "msg": error})
        elif op == "shutdown":
            return EXIT_OK
        else:
            return EXIT_PROTOCOL_ERROR
    return EXIT_OK


def main() -> None:
    sys.exit(serve())


if __name__ == "__main__":
    main()
