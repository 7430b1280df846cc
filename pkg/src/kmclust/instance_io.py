"""Instance files.

Edge-list text: a header ``n m`` followed by ``u v w`` lines.  Cost file: one
rational per line.  The JSON form carries both.  Rationals are written as
``p/q`` (or ``p`` when integral) and read back exactly.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .graph import CostVector, WeightedGraph

SCHEMA_VERSION = 1


def format_edge_list(graph: WeightedGraph) -> str:
    lines = [f"{graph.n} {graph.m}"]
    lines += [f"{u} {v} {w}" for u, v, w in graph.edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> WeightedGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError("edge list must start with an 'n m' header")
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = []
    for row in rows[1:]:
        if len(row) != 3:
            raise ValueError(f"bad edge line: {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1]), Fraction(row[2])))
    if len(edges) != m:
        raise ValueError(f"header announces {m} edges, found {len(edges)}")
    return WeightedGraph(n, tuple(edges))


def format_costs(costs: CostVector) -> str:
    return "".join(f"{f}\n" for f in costs)


def parse_costs(text: str) -> CostVector:
    return CostVector(tuple(Fraction(ln.strip()) for ln in text.splitlines() if ln.strip()))


def instance_to_json(graph: WeightedGraph, costs: CostVector | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "n": graph.n,
        "edges": [[u, v, str(w)] for u, v, w in graph.edges],
        "costs": None if costs is None else [str(f) for f in costs],
    }


def instance_from_json(data: dict) -> tuple[WeightedGraph, CostVector | None]:
    graph = WeightedGraph(int(data["n"]), tuple((int(u), int(v), Fraction(w)) for u, v, w in data["edges"]))
    costs = data.get("costs")
    return graph, None if costs is None else CostVector(tuple(Fraction(f) for f in costs))


def write_instance(prefix: str | Path, graph: WeightedGraph, costs: CostVector | None, fmt: str = "text") -> list[Path]:
    """Write ``prefix.edges`` (+ ``prefix.costs``) or ``prefix.json``; returns the paths."""
    prefix = Path(prefix)
    if fmt == "json":
        path = prefix.with_suffix(".json")
        path.write_text(json.dumps(instance_to_json(graph, costs), indent=2, sort_keys=True) + "\n")
        return [path]
    paths = [prefix.with_suffix(".edges")]
    paths[0].write_text(format_edge_list(graph))
    if costs is not None:
        paths.append(prefix.with_suffix(".costs"))
        paths[1].write_text(format_costs(costs))
    return paths


def read_instance(path: str | Path, costs_path: str | Path | None = None):
    """Load a ``.json`` instance, or an edge list with an optional cost file.

    For ``foo.edges`` the cost file defaults to ``foo.costs`` when it exists.
    """
    path = Path(path)
    if path.suffix == ".json":
        return instance_from_json(json.loads(path.read_text()))
    graph = parse_edge_list(path.read_text())
    if costs_path is None and path.with_suffix(".costs").exists():
        costs_path = path.with_suffix(".costs")
    costs = parse_costs(Path(costs_path).read_text()) if costs_path else None
    if costs is not None and len(costs) != graph.n:
        raise ValueError("cost file length does not match the graph")
    return graph, costs
