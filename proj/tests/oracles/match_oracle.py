"""Exhaustive reference matcher, written independently of the C++ code.

Emits random small vessel graphs together with the optimal variant, cost and
per-edge classes under the bundled templates. Output: tests/data/match_oracle.json
"""
import json
import math
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]


def load_templates():
    return json.loads((ROOT / "data" / "templates.json").read_text())["templates"]


def is_port(kind):
    return kind == "ChamberPort"


def port_mismatch(gn, tn):
    if not is_port(gn["kind"]) and not is_port(tn["kind"]):
        return False
    return not (is_port(gn["kind"]) and is_port(tn["kind"]) and gn["chamber"] == tn["chamber"])


def deviation(v, nominal, tol):
    return min(1.0, max(0.0, max(0.0, abs(v - nominal) - tol) / nominal))


def find_edge(t, a, b):
    for i, e in enumerate(t["edges"]):
        if {e["source"], e["target"]} == {a, b} and (a != b):
            return i
    return -1


def cost_of(graph, t, node_map):
    w = t.get("weights", {})
    wp, wk = w.get("port", 10), w.get("kind", 2)
    wl, wr = w.get("length", 1), w.get("radius", 1)
    wm, wx = w.get("miss", 5), w.get("extra", 1)
    claimed = {}
    edge_map = []
    for e in graph["edges"]:
        a, b = node_map[e["source"]], node_map[e["target"]]
        te = -1
        if a >= 0 and b >= 0:
            cand = find_edge(t, a, b)
            if cand >= 0 and cand not in claimed:
                claimed[cand] = e["id"]
                te = cand
        edge_map.append(te)
    node = 0.0
    for i, m in enumerate(node_map):
        if m >= 0:
            gn, tn = graph["nodes"][i], t["nodes"][m]
            node += wp * (1.0 if port_mismatch(gn, tn) else 0.0) + wk * (1.0 if gn["kind"] != tn["kind"] else 0.0)
    edge = 0.0
    rejected = 0
    for e, te in zip(graph["edges"], edge_map):
        if te < 0:
            rejected += 1
            continue
        tt = t["edges"][te]
        edge += wl * deviation(e["length"], tt["length"], tt.get("length_tol", 0.0)) + \
            wr * deviation(e["radius"], tt["radius"], tt.get("radius_tol", 0.0))
    missed = sum(1 for i, tt in enumerate(t["edges"]) if not tt.get("optional", False) and i not in claimed)
    structural = wm * missed + wx * rejected
    return node + edge + structural, edge_map


def assignments(graph, t):
    n = len(graph["nodes"])
    out = [-1] * n
    used = set()

    def rec(i):
        if i == n:
            yield list(out)
            return
        for tn in range(len(t["nodes"])):
            if tn in used or port_mismatch(graph["nodes"][i], t["nodes"][tn]):
                continue
            used.add(tn)
            out[i] = tn
            yield from rec(i + 1)
            used.discard(tn)
        out[i] = -1
        yield from rec(i + 1)

    yield from rec(0)


def solve(graph, templates):
    best = None
    for ti, t in enumerate(templates):
        for m in assignments(graph, t):
            c, em = cost_of(graph, t, m)
            key = (c, ti, [x if x >= 0 else 2**31 - 1 for x in m])
            if best is None or key < best[0]:
                best = (key, ti, m, em)
    (c, ti, _), _, m, em = best
    t = templates[ti]
    classes = ["Unclassified" if te < 0 else t["edges"][te]["class"] for te in em]
    return {"variant": t["variant"], "cost": c, "node_map": m, "classes": classes}


def random_graph(rng):
    n = rng.randint(1, 6)
    nodes = []
    for i in range(n):
        kind = rng.choice(["Junction", "Endpoint", "ChamberPort"])
        node = {"id": i, "kind": kind, "voxel": [i, 0, 0], "position": [float(i), 0.0, 0.0], "radius": 3.0}
        if kind == "ChamberPort":
            node["chamber"] = rng.choice(["LV", "RV", "LA", "RA"])
        nodes.append(node)
    edges = []
    for i in range(rng.randint(0, 7)):
        a, b = sorted((rng.randrange(n), rng.randrange(n)))
        edges.append({"id": i, "source": a, "target": b, "length": float(rng.choice([18, 26, 30, 48, 120, 166]) + rng.randint(-20, 20)),
                      "radius": round(rng.uniform(2.0, 6.0), 2), "direction": [0.0, 0.0, 0.0]})
    return {"grid": {"dims": [8, 1, 1], "spacing": [1.0, 1.0, 1.0], "origin": [0.0, 0.0, 0.0]},
            "nodes": nodes, "edges": edges}


def main():
    rng = random.Random(20240607)
    templates = load_templates()
    cases = []
    for _ in range(int(sys.argv[1]) if len(sys.argv) > 1 else 40):
        g = random_graph(rng)
        cases.append({"graph": g, "expected": solve(g, templates)})
    out = ROOT / "tests" / "data" / "match_oracle.json"
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")
    print(f"{len(cases)} cases -> {out}")


if __name__ == "__main__":
    main()
