"""Topology mapping by SWAP-free segments stitched with SWAP chains.

1. Walk the dependency DAG from its in-degree-0 nodes and grow a segment
   while the segment's interaction graph still embeds into the topology
   (subgraph monomorphism). A two-qubit gate that would break the embedding
   blocks its qubits; later gates on blocked qubits wait for the next segment.
2. For each segment enumerate a bounded number of embeddings and keep the one
   needing the fewest SWAPs from the current layout, then the highest product
   of edge fidelities, then the first found.
3. Move qubits into place with token swapping: greedy swaps that bring two
   tokens closer ("happy" swaps), falling back to routing along a spanning
   tree, which always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import GraphMatcher
from scipy.optimize import linear_sum_assignment

from ..circuit import Gate, Measure, Program, swap
from ..dag import build_dag
from ..errors import TopologyError, Unsupported
from .topology import Layout, Topology

MAX_EMBEDDINGS = 32


@dataclass
class MappingReport:
    swaps: int = 0
    segments: int = 0
    initial_layout: Layout | None = None
    final_layout: Layout | None = None
    layouts: list = field(default_factory=list)


def _embeds(topo_graph: nx.Graph, edges: set) -> bool:
    g = nx.Graph()
    g.add_edges_from(sorted(edges))
    return GraphMatcher(topo_graph, g).subgraph_is_monomorphic()


def _segments(p: Program, topo: Topology) -> list[list[int]]:
    dag = build_dag(p)
    tg = topo.graph
    remaining = dag.topological_order()
    segs = []
    while remaining:
        edges: set = set()
        blocked: set = set()
        seg, rest = [], []
        for i in remaining:
            ins = p.body[i]
            qs = ins.qubits if isinstance(ins, Gate) else (ins.qubit,)
            if blocked.intersection(qs):
                blocked.update(qs)
                rest.append(i)
                continue
            if isinstance(ins, Gate) and len(qs) == 2:
                e = (min(qs), max(qs))
                if e not in edges and not _embeds(tg, edges | {e}):
                    blocked.update(qs)
                    rest.append(i)
                    continue
                edges.add(e)
            seg.append(i)
        segs.append((seg, edges))
        remaining = rest
    return segs


def _embeddings(topo: Topology, edges: set) -> list[dict[int, int]]:
    """Up to MAX_EMBEDDINGS virtual->physical maps realising ``edges`` on the chip."""
    if not edges:
        return [{}]
    g = nx.Graph()
    g.add_edges_from(sorted(edges))
    out = []
    for m in GraphMatcher(topo.graph, g).subgraph_monomorphisms_iter():
        out.append({v: pq for pq, v in m.items()})
        if len(out) >= MAX_EMBEDDINGS:
            break
    return out


# --------------------------------------------------------------------------- token swapping

def token_swaps(topo: Topology, pos: dict[int, int], target: dict[int, int]) -> list[tuple[int, int]]:
    """Physical swaps moving each token ``v`` from ``pos[v]`` to ``target[v]``.

    Tokens absent from ``target`` may end anywhere.
    """
    occ = {pq: v for v, pq in pos.items()}
    swaps: list[tuple[int, int]] = []

    def do(a, b):
        va, vb = occ.get(a), occ.get(b)
        occ.pop(a, None)
        occ.pop(b, None)
        if va is not None:
            occ[b] = va
            pos[va] = b
        if vb is not None:
            occ[a] = vb
            pos[vb] = a
        swaps.append((min(a, b), max(a, b)))

    def gain(v, src, dst):
        if v is None or v not in target:
            return 0
        return topo.distance(src, target[v]) - topo.distance(dst, target[v])

    while any(pos[v] != target[v] for v in target):
        best, best_key = None, None
        for a, b in topo.edges:
            ga, gb = gain(occ.get(a), a, b), gain(occ.get(b), b, a)
            if ga < 0 or gb < 0 or ga + gb <= 0:
                continue
            key = -(ga + gb)
            if best_key is None or key < best_key:
                best, best_key = (a, b), key
        if best is None:
            break
        do(*best)
    if any(pos[v] != target[v] for v in target):
        _tree_route(topo, occ, target, do)
    return swaps


def _tree_route(topo, occ, target, do):
    tree = nx.bfs_tree(topo.graph, 0).to_undirected()
    want = {pq: v for v, pq in target.items()}
    alive = set(tree.nodes)
    while alive:
        leaf = min(x for x in alive if sum(1 for y in tree[x] if y in alive) <= 1)
        sub = tree.subgraph(alive)
        v = want.get(leaf)
        if v is not None:
            src = next(pq for pq, w in occ.items() if w == v)
            path = nx.shortest_path(sub, src, leaf)
            for a, b in zip(path, path[1:]):
                do(a, b)
        elif occ.get(leaf) in target and len(alive) > 1:
            # pull the nearest token without a target onto the leaf
            dist = nx.single_source_shortest_path_length(sub, leaf)
            src = min((d, x) for x, d in dist.items() if occ.get(x) not in target)[1]
            path = nx.shortest_path(sub, src, leaf)
            for a, b in zip(path, path[1:]):
                do(a, b)
        alive.discard(leaf)


# --------------------------------------------------------------------------- placement

def _place_rest(topo: Topology, n: int, fixed: dict[int, int], partners) -> dict[int, int]:
    free_v = [v for v in range(n) if v not in fixed]
    if not free_v:
        return dict(fixed)
    used = set(fixed.values())
    free_p = [pq for pq in range(topo.n) if pq not in used]
    cost = np.zeros((len(free_v), len(free_p)))
    for i, v in enumerate(free_v):
        for w in partners.get(v, ()):
            if w in fixed:
                cost[i] += [topo.distance(pq, fixed[w]) for pq in free_p]
    rows, cols = linear_sum_assignment(cost)
    out = dict(fixed)
    for r, c in zip(rows, cols):
        out[free_v[r]] = free_p[c]
    return out


def map_to_topology(p: Program, topo: Topology, initial: Layout | None = None):
    """Return ``(program on physical qubits, final layout, report)``.

    Virtual qubit ``v`` starts on ``report.initial_layout[v]``; the final
    layout tells where each virtual qubit ends after the inserted SWAPs.
    The mapper picks the starting placement unless ``initial`` fixes it.
    """
    n = p.qubit_count
    if n > topo.n:
        raise TopologyError(f"{n} program qubits but only {topo.n} physical qubits")
    for ins in p.body:
        if isinstance(ins, Gate) and ins.arity > 2:
            raise Unsupported(f"{ins.kind.value} acts on {ins.arity} qubits; decompose first")
        if not isinstance(ins, (Gate, Measure)):
            raise Unsupported("mapping needs a flat circuit")
    partners: dict[int, set] = {}
    for g in p.gates():
        if g.arity == 2:
            a, b = g.qubits
            partners.setdefault(a, set()).add(b)
            partners.setdefault(b, set()).add(a)

    report = MappingReport()
    body = []
    pos: dict[int, int] | None = None
    if initial is not None:
        if len(initial) != n or any(not 0 <= pq < topo.n for pq in initial.v2p):
            raise TopologyError("initial layout does not fit the program and topology")
        pos = {v: initial[v] for v in range(n)}
        report.initial_layout = initial
    for seg, edges in _segments(p, topo):
        cands = _embeddings(topo, edges)
        best = None
        for emb in cands:
            fid = sum(topo.edge_cost(emb[a], emb[b]) for a, b in edges)
            if pos is None:
                key, sw = (0, fid), []
            else:
                sw = token_swaps(topo, dict(pos), emb)
                key = (len(sw), fid)
            if best is None or key < best[0]:
                best = (key, emb, sw)
        _, emb, sw = best
        if pos is None:
            pos = _place_rest(topo, n, emb, partners)
            report.initial_layout = Layout(tuple(pos[v] for v in range(n)))
        else:
            sw = token_swaps(topo, pos, emb)
            body += [swap(a, b) for a, b in sw]
            report.swaps += len(sw)
        report.segments += 1
        report.layouts.append(Layout(tuple(pos[v] for v in range(n))))
        for i in seg:
            ins = p.body[i]
            if isinstance(ins, Measure):
                body.append(Measure(pos[ins.qubit], ins.cbit))
            else:
                body.append(_relabel(ins, pos))
    if pos is None:
        pos = _place_rest(topo, n, {}, partners)
        report.initial_layout = Layout(tuple(pos[v] for v in range(n)))
    report.final_layout = Layout(tuple(pos[v] for v in range(n)))
    for g in body:
        if isinstance(g, Gate) and g.arity == 2 and not topo.has_edge(*g.qubits):
            raise AssertionError("mapper produced a gate off the topology")
    return Program(topo.n, p.cbit_count, tuple(body)), report.final_layout, report


def _relabel(g: Gate, pos) -> Gate:
    return g.replace(targets=tuple(pos[q] for q in g.targets),
                     controls=tuple(pos[q] for q in g.controls))
