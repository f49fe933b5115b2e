"""Chip topologies and qubit layouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

from ..errors import TopologyError


@dataclass(frozen=True)
class Topology:
    """Undirected coupling graph on nodes ``0..n-1`` with optional edge fidelities."""

    n: int
    edges: tuple[tuple[int, int], ...]
    fidelity: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("topology needs at least one node")
        norm = []
        seen = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop on node {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise TopologyError(f"edge ({a}, {b}) outside nodes 0..{self.n - 1}")
            e = (min(a, b), max(a, b))
            if e in seen:
                raise TopologyError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        fid = {}
        for e, f in self.fidelity.items():
            e = (min(e), max(e))
            if e not in seen:
                raise TopologyError(f"fidelity given for missing edge {e}")
            if not 0 < f <= 1:
                raise TopologyError(f"edge fidelity must be in (0, 1], got {f}")
            fid[e] = float(f)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "fidelity", fid)
        g = self.graph
        if not nx.is_connected(g):
            raise TopologyError("topology is not connected")
        object.__setattr__(self, "_dist", dict(nx.all_pairs_shortest_path_length(g)))

    @property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in set(self.edges)

    def distance(self, a: int, b: int) -> int:
        return self._dist[a][b]

    def edge_fidelity(self, a: int, b: int) -> float:
        return self.fidelity.get((min(a, b), max(a, b)), 1.0)

    def edge_cost(self, a: int, b: int) -> float:
        """``-log`` fidelity: 0 for perfect edges."""
        return -math.log(self.edge_fidelity(a, b))

    # constructors ---------------------------------------------------------

    @classmethod
    def path(cls, n: int) -> "Topology":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def circle(cls, n: int) -> "Topology":
        if n < 3:
            return cls.path(n)
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "Topology":
        edges = []
        for r in range(rows):
            for c in range(cols):
                i = r * cols + c
                if c + 1 < cols:
                    edges.append((i, i + 1))
                if r + 1 < rows:
                    edges.append((i, i + cols))
        return cls(rows * cols, tuple(edges))

    @classmethod
    def parse(cls, text: str) -> "Topology":
        """Line format: ``nodes N`` first, then ``edge a b [fidelity]``; ``#`` comments."""
        n = None
        edges, fid = [], {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "nodes" and len(parts) == 2 and n is None:
                    n = int(parts[1])
                elif parts[0] == "edge" and len(parts) in (3, 4) and n is not None:
                    a, b = int(parts[1]), int(parts[2])
                    edges.append((a, b))
                    if len(parts) == 4:
                        fid[(a, b)] = float(parts[3])
                else:
                    raise ValueError
            except ValueError:
                raise TopologyError(f"line {lineno}: cannot parse {raw.strip()!r}") from None
        if n is None:
            raise TopologyError("missing 'nodes N' line")
        return cls(n, tuple(edges), fid)

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.parse(Path(path).read_text())

    def dumps(self) -> str:
        lines = [f"nodes {self.n}"]
        for a, b in self.edges:
            f = self.fidelity.get((a, b))
            lines.append(f"edge {a} {b}" + (f" {f!r}" if f is not None else ""))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Layout:
    """``v2p[v]`` is the physical qubit holding virtual qubit ``v``."""

    v2p: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "v2p", tuple(int(x) for x in self.v2p))
        if len(set(self.v2p)) != len(self.v2p):
            raise ValueError("layout must be injective")

    def __getitem__(self, v: int) -> int:
        return self.v2p[v]

    def __len__(self):
        return len(self.v2p)

    @property
    def p2v(self) -> dict[int, int]:
        return {p: v for v, p in enumerate(self.v2p)}

    @classmethod
    def trivial(cls, n: int) -> "Layout":
        return cls(tuple(range(n)))
