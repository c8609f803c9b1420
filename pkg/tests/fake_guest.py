"""Minimal protocol counterpart for evaluator tests.

Speaks the sandbox protocol on stdio but interprets the loaded "source" as a
behavior directive instead of executing it:

    fake-greedy      solve instances with a nearest-neighbor loop
    fake-loadfail    answer load with load_error
    fake-sleep       never answer solve requests
    fake-sleep-later solve the first instance, then hang
    fake-crash       exit(1) on the first solve
    fake-badnode     reply a tour with a duplicated node
    fake-steperr     reply step_error to every solve
    fake-garbage     reply a non-protocol line
"""

import json
import sys

import numpy as np


def greedy_order(coords, start):
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    n = len(coords)
    order = [start]
    unvisited = np.delete(np.arange(n), start)
    current = start
    while unvisited.size:
        nxt = int(unvisited[int(np.argmin(dist[current, unvisited]))])
        order.append(nxt)
        unvisited = unvisited[unvisited != nxt]
        current = nxt
    return order


def main():
    mode = None
    solves = 0
    for line in sys.stdin:
        if not line.strip():
            continue
        msg = json.loads(line)
        op = msg.get("op")
        if op == "load":
            mode = msg.get("source", "").strip()
            if mode == "fake-loadfail":
                print(json.dumps({"op": "load_error", "msg": "refused"}), flush=True)
            else:
                print(json.dumps({"op": "ready"}), flush=True)
        elif op == "solve":
            solves += 1
            if mode == "fake-sleep" or (mode == "fake-sleep-later" and solves > 1):
                while True:
                    import time
                    time.sleep(1)
            if mode == "fake-crash":
                sys.exit(1)
            if mode == "fake-steperr":
                print(json.dumps({"op": "step_error", "msg": "boom"}), flush=True)
                continue
            if mode == "fake-garbage":
                print("this is not a protocol message", flush=True)
                continue
            order = greedy_order(msg["coords"], msg["start"])
            if mode == "fake-badnode":
                order[1] = order[0]
            print(json.dumps({"op": "tour", "instance_id": msg["instance_id"],
                              "order": order}), flush=True)
        elif op == "shutdown":
            return


if __name__ == "__main__":
    main()
