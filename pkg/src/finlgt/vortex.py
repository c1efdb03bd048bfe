"""Structure of plaquette sets: vortices, compatibility, minimal vortices,
enclosing cubes, well-separation, the J-hierarchy and knots."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np

from .errors import BudgetError
from .lattice import DIM, DIRSETS, Box, CubeRegion, Loop, cube

DEFAULT_VORTEX_CAP = 5


def _as_set(P):
    return frozenset(int(p) for p in P)


def three_cells_of(region: CubeRegion, P) -> set:
    t = region.plaquette_three_cells
    out = set()
    for p in P:
        out.update(int(c) for c in t[p] if c >= 0)
    return out


@lru_cache(maxsize=64)
def _three_cell_faces(region):
    idx, _ = region.boundary_table(3)
    return idx


def plaquette_neighbors(region: CubeRegion, p: int) -> set:
    """Plaquettes other than ``p`` sharing a region 3-cell with ``p``."""
    faces = _three_cell_faces(region)
    out = set()
    for c in region.plaquette_three_cells[p]:
        if c >= 0:
            out.update(int(q) for q in faces[c])
    out.discard(int(p))
    return out


def closure(region: CubeRegion, V) -> frozenset:
    """``V`` together with every plaquette sharing a 3-cell with it."""
    out = set(V)
    for p in V:
        out |= plaquette_neighbors(region, p)
    return frozenset(out)


def adjacency_graph(region: CubeRegion, P) -> nx.Graph:
    P = _as_set(P)
    g = nx.Graph()
    g.add_nodes_from(sorted(P))
    faces = _three_cell_faces(region)
    for c in three_cells_of(region, P):
        members = sorted(int(q) for q in faces[c] if int(q) in P)
        g.add_edges_from(itertools.combinations(members, 2))
    return g


@dataclass(frozen=True)
class VortexDecomposition:
    parts: tuple

    def __len__(self):
        return len(self.parts)

    def to_json(self):
        return [sorted(v) for v in self.parts]


def vortex_decompose(region: CubeRegion, P) -> VortexDecomposition:
    g = adjacency_graph(region, P)
    parts = [frozenset(c) for c in nx.connected_components(g)]
    parts.sort(key=min)
    return VortexDecomposition(tuple(parts))


def is_vortex(region, V) -> bool:
    return len(V) > 0 and nx.is_connected(adjacency_graph(region, V))


def compatible(region: CubeRegion, P1, P2) -> bool:
    return not (three_cells_of(region, P1) & three_cells_of(region, P2))


def is_vortex_of(region, V, P) -> bool:
    """True when ``V`` is one of the parts of the vortex decomposition of ``P``."""
    V, P = _as_set(V), _as_set(P)
    if not V or not V <= P:
        return False
    if (closure(region, V) & P) != V:
        return False
    return is_vortex(region, V)


def in_neighborhood(region, V, W) -> bool:
    """Membership test for N(V): vortex ``W`` is incompatible with ``V``."""
    return not compatible(region, V, W)


def minimal_vortex_edge(region: CubeRegion, V):
    """Edge ``e`` with ``P(e) = V`` (region-truncated), or ``None``."""
    V = _as_set(V)
    if not V:
        return None
    pe = region.plaquette_edges
    common = set(int(e) for e in pe[min(V)])
    for p in V:
        common &= set(int(e) for e in pe[p])
    for e in sorted(common):
        if region.minimal_vortex(e) == V:
            return e
    return None


def incompatible_minimal_vortices(region: CubeRegion, e: int) -> list:
    """Edges ``e' != e`` whose minimal vortex is incompatible with ``P(e)``."""
    V = region.minimal_vortex(e)
    cells = three_cells_of(region, V)
    faces = _three_cell_faces(region)
    pe = region.plaquette_edges
    cand = set()
    for c in cells:
        for p in faces[c]:
            cand.update(int(x) for x in pe[p])
    cand.discard(int(e))
    return sorted(f for f in cand if cells & three_cells_of(region, region.minimal_vortex(f)))


def enumerate_vortices(region: CubeRegion, m: int, anchor: int, cap: int = DEFAULT_VORTEX_CAP, return_list=False):
    """Count connected plaquette sets of size ``m`` containing ``anchor``.

    Each set is produced exactly once by branching on include/exclude of the
    first frontier plaquette.
    """
    if m > cap:
        raise BudgetError(f"vortex size {m} exceeds cap {cap}", required=m)
    if m < 1:
        return (0, []) if return_list else 0
    nbr_cache = {}

    def nbrs(p):
        if p not in nbr_cache:
            nbr_cache[p] = plaquette_neighbors(region, p)
        return nbr_cache[p]

    found = []
    count = 0
    # iterative DFS over (chosen set, ordered frontier, excluded)
    stack = [((anchor,), tuple(sorted(nbrs(anchor))), frozenset())]
    while stack:
        chosen, frontier, excluded = stack.pop()
        if len(chosen) == m:
            count += 1
            if return_list:
                found.append(frozenset(chosen))
            continue
        if not frontier:
            continue
        c, rest = frontier[0], frontier[1:]
        stack.append((chosen, rest, excluded | {c}))
        taken = set(chosen) | set(rest) | excluded | {c}
        grow = tuple(sorted(q for q in nbrs(c) if q not in taken))
        stack.append((chosen + (c,), rest + grow, excluded))
    return (count, found) if return_list else count


def vortex_count_bound(m: int) -> float:
    return (20 * math.e) ** m


# ---------------------------------------------------------------- cubes and separation

@lru_cache(maxsize=64)
def _plaquette_vertices(region):
    base = region.cell_bases(2)
    did = region.cell_dirsets(2)
    out = np.empty((len(base), 4, DIM), dtype=np.int64)
    eye = np.eye(DIM, dtype=np.int64)
    di = np.array([ds[0] for ds in DIRSETS[2]])[did] - 1
    dj = np.array([ds[1] for ds in DIRSETS[2]])[did] - 1
    out[:, 0] = base
    out[:, 1] = base + eye[di]
    out[:, 2] = base + eye[di] + eye[dj]
    out[:, 3] = base + eye[dj]
    return out


def _in_box(verts, box):
    lo = np.asarray(box.corner)
    hi = lo + np.asarray(box.sides)
    return np.all((verts >= lo) & (verts <= hi), axis=(-1, -2))


def _on_box_boundary(verts, box):
    lo = np.asarray(box.corner)
    hi = lo + np.asarray(box.sides)
    inside = np.all((verts >= lo) & (verts <= hi), axis=-1)
    bnd = np.any((verts == lo) | (verts == hi), axis=-1)
    return np.all(inside & bnd, axis=-1)


def in_s2(region, P, box) -> np.ndarray:
    """Per-plaquette flag: plaquette lies in the box."""
    return _in_box(_plaquette_vertices(region)[sorted(P)], box)


def in_boundary_s2(region, P, box) -> np.ndarray:
    """Per-plaquette flag: on the box boundary but not on the region boundary."""
    v = _plaquette_vertices(region)[sorted(P)]
    return _on_box_boundary(v, box) & ~_on_box_boundary(v, region.as_box())


def _cube_ok(region, verts, box):
    return bool(np.all(_in_box(verts, box)) and not np.any(_on_box_boundary(verts, box) & ~_on_box_boundary(verts, region.as_box())))


def enclosing_cube(region: CubeRegion, P) -> Box:
    """Smallest cube B inside the region with P in S2(B) and none of P in the
    boundary shell of B; ties broken by lexicographically smallest corner."""
    P = sorted(_as_set(P))
    if not P:
        raise ValueError("enclosing_cube needs a nonempty set")
    verts = _plaquette_vertices(region)[P]
    lo_v = verts.min(axis=(0, 1))
    hi_v = verts.max(axis=(0, 1))
    r_lo = np.asarray(region.corner)
    r_hi = r_lo + region.side
    for s in range(1, region.side + 1):
        ranges = []
        for i in range(DIM):
            a_min = max(r_lo[i], hi_v[i] - s)
            a_max = min(lo_v[i], r_hi[i] - s)
            if a_min > a_max:
                break
            ranges.append(range(int(a_min), int(a_max) + 1))
        else:
            for corner in itertools.product(*ranges):
                box = cube(corner, s)
                if _cube_ok(region, verts, box):
                    return box
    return region.as_box()


def well_separated(region: CubeRegion, P1, P2, box: Box) -> bool:
    P1, P2 = _as_set(P1), _as_set(P2)
    if not region.contains_box(box):
        return False
    if P1 and not np.all(in_s2(region, P1, box)):
        return False
    both = P1 | P2
    if both and np.any(in_boundary_s2(region, both, box)):
        return False
    if P2:
        # P2 must avoid S2(B) except for the boundary shell (already excluded)
        if np.any(in_s2(region, P2, box)):
            return False
    return True


def _boxes(region, sides_iter):
    r_lo = np.asarray(region.corner)
    for sides in sides_iter:
        ranges = [range(int(r_lo[i]), int(r_lo[i] + region.side - sides[i]) + 1) for i in range(DIM)]
        for corner in itertools.product(*ranges):
            yield Box(corner, tuple(sides))


def find_separating_cube(region: CubeRegion, P1, P2):
    """First cube (side < region side, then lexicographic corner) that
    well-separates P1 from P2, or ``None``."""
    for box in _boxes(region, ((s,) * DIM for s in range(1, region.side))):
        if well_separated(region, P1, P2, box):
            return box
    return None


def find_separating_rectangle(region: CubeRegion, P1, P2):
    """Like :func:`find_separating_cube` but over rectangles with every side
    smaller than the region side."""
    sides = sorted(itertools.product(range(region.side), repeat=DIM), key=lambda t: (sum(t), t))
    for box in _boxes(region, sides):
        if well_separated(region, P1, P2, box):
            return box
    return None


# ---------------------------------------------------------------- J-hierarchy and knots

class _CubeCache:
    def __init__(self, region):
        self.region = region
        self.cache = {}

    def __call__(self, P):
        P = _as_set(P)
        if P not in self.cache:
            self.cache[P] = enclosing_cube(self.region, P)
        return self.cache[P]


def _meets_cube(region, P, box):
    return bool(np.any(in_s2(region, P, box)))


def j_predicate(region: CubeRegion, P, P2, cubes=None) -> int:
    cubes = cubes or _CubeCache(region)
    return int(_meets_cube(region, P, cubes(P2)) or _meets_cube(region, P2, cubes(P)))


@dataclass(frozen=True)
class HierarchyLevel:
    nodes: tuple
    edges: tuple


def hierarchy(region: CubeRegion, P, cubes=None) -> list:
    """Levels G^0, G^1, ... until the node set stops changing.

    G^0 has the vortices of P as nodes; each next level merges the connected
    components of the previous J-graph.
    """
    cubes = cubes or _CubeCache(region)
    nodes = list(vortex_decompose(region, P).parts)
    levels = []
    while True:
        edges = [(a, b) for a, b in itertools.combinations(range(len(nodes)), 2) if j_predicate(region, nodes[a], nodes[b], cubes)]
        levels.append(HierarchyLevel(tuple(nodes), tuple(edges)))
        g = nx.Graph()
        g.add_nodes_from(range(len(nodes)))
        g.add_edges_from(edges)
        merged = [frozenset().union(*(nodes[i] for i in comp)) for comp in nx.connected_components(g)]
        merged.sort(key=min)
        if len(merged) == len(nodes):
            return levels
        nodes = merged


@dataclass(frozen=True)
class KnotDecomposition:
    minimal: tuple  # (edge, plaquette set) pairs
    knots: tuple
    levels: tuple = field(default=(), repr=False, compare=False)

    def parts(self):
        return [v for _, v in self.minimal] + list(self.knots)

    def to_json(self):
        return {"minimal": [{"edge": e, "plaquettes": sorted(v)} for e, v in self.minimal], "knots": [sorted(k) for k in self.knots]}


def knot_decompose(region: CubeRegion, P) -> KnotDecomposition:
    """Split out minimal vortices, then group the remaining vortices by the
    fixed point of the J-hierarchy."""
    minimal, rest = [], []
    for v in vortex_decompose(region, P).parts:
        e = minimal_vortex_edge(region, v)
        if e is None:
            rest.append(v)
        else:
            minimal.append((e, v))
    if not rest:
        return KnotDecomposition(tuple(minimal), ())
    levels = hierarchy(region, frozenset().union(*rest))
    return KnotDecomposition(tuple(minimal), levels[-1].nodes, tuple(levels))


def count_ngamma(region: CubeRegion, P, loop: Loop) -> int:
    """Number of loop edges whose minimal vortex is a part of P's decomposition."""
    parts = set(vortex_decompose(region, P).parts)
    idx, _ = loop.edge_arrays(region)
    return sum(1 for e in idx if region.minimal_vortex(int(e)) in parts)


def vortex_probe(region: CubeRegion, V):
    """(plaquettes of V, plaquettes that must be absent, V connected) for a
    fast "V is a vortex of the support" test."""
    V = _as_set(V)
    nbr = closure(region, V) - V
    return sorted(V), sorted(nbr), is_vortex(region, V)
