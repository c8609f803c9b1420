import json
import subprocess
import sys

import pytest

GUEST_CMD = (sys.executable, "-m", "tsp_guest")

GREEDY_SOURCE = """\
import numpy as np

def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    distances = [distance_matrix[current_node][node] for node in unvisited_nodes]
    next_node = unvisited_nodes[int(np.argmin(distances))]
    return next_node
"""

SQUARE_COORDS = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]


class GuestTalker:
    """Drives one guest process over the line protocol."""

    def __init__(self):
        self.proc = subprocess.Popen(
            list(GUEST_CMD), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1)

    def send(self, message: dict) -> None:
        self.proc.stdin.write(json.dumps(message) + "\n")
        self.proc.stdin.flush()

    def send_raw(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv(self, timeout: float = 10.0) -> dict:
        import threading

        box = {}

        def read():
            box["line"] = self.proc.stdout.readline()

        thread = threading.Thread(target=read, daemon=True)
        thread.start()
        thread.join(timeout)
        if "line" not in box or not box["line"]:
            raise TimeoutError("no reply from guest")
        return json.loads(box["line"])

    def ask(self, message: dict) -> dict:
        self.send(message)
        return self.recv()

    def load(self, source: str) -> dict:
        return self.ask({"op": "load", "source": source})

    def solve(self, coords, start=0, instance_id="t0") -> dict:
        return self.ask({"op": "solve", "instance_id": instance_id,
                         "n": len(coords), "coords": coords, "start": start})

    def shutdown(self, timeout: float = 5.0) -> int:
        try:
            self.send({"op": "shutdown"})
        except (BrokenPipeError, OSError):
            pass
        try:
            return self.proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            return self.proc.wait()

    def kill(self):
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


@pytest.fixture
def guest():
    talker = GuestTalker()
    yield talker
    talker.kill()
