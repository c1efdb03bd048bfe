"""Edge configurations for general finite groups: holonomy, action, Wilson
loops, gauge transformations and tree gauge fixing."""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .groups import GroupTable, UnitaryRep, group_by_id
from .lattice import DIM, CubeRegion, Loop

DEFAULT_PRIORITY = (1, 2, 3, 4, -1, -2, -3, -4)


class EdgeConfig:
    """One group element per positive edge; reversed edges carry the inverse."""

    def __init__(self, region: CubeRegion, group: GroupTable, values=None):
        self.region = region
        self.group = group
        n = region.n_cells(1)
        v = np.zeros(n, dtype=np.int64) if values is None else np.array(values, dtype=np.int64)
        if v.shape != (n,):
            raise ValueError(f"expected {n} edge values, got shape {v.shape}")
        if n and (v.min() < 0 or v.max() >= group.order):
            raise ValueError("edge values out of range for the group")
        v.setflags(write=False)
        self.values = v

    @classmethod
    def identity(cls, region, group):
        return cls(region, group)

    @classmethod
    def random(cls, rng, region, group):
        return cls(region, group, rng.integers(0, group.order, region.n_cells(1)))

    def with_values(self, values):
        return EdgeConfig(self.region, self.group, values)

    def __eq__(self, other):
        return isinstance(other, EdgeConfig) and self.region == other.region and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    @cached_property
    def holonomies(self):
        """Holonomy of every positive plaquette (counter-clockwise product)."""
        pe = self.region.plaquette_edges
        m, inv, v = self.group.mul, self.group.inv, self.values
        out = m[m[m[v[pe[:, 0]], v[pe[:, 1]]], inv[v[pe[:, 2]]]], inv[v[pe[:, 3]]]]
        out.setflags(write=False)
        return out

    def support(self):
        return frozenset(int(p) for p in np.nonzero(self.holonomies != 0)[0])


def plaquette_holonomy(sigma: EdgeConfig, p: int, start: int = 0, reverse: bool = False) -> int:
    """Ordered product around plaquette ``p`` starting at corner ``start``.

    ``reverse`` traverses the opposite orientation.
    """
    pe = sigma.region.plaquette_edges[p]
    g = sigma.group
    factors = []
    for k in range(4):
        v = int(sigma.values[pe[k]])
        factors.append(int(g.inv[v]) if sigma.region.PLAQ_INVERSE[k] else v)
    if reverse:
        factors = [int(g.inv[f]) for f in reversed(factors)]
    factors = factors[start:] + factors[:start]
    acc = 0
    for f in factors:
        acc = int(g.mul[acc, f])
    return acc


def action(sigma: EdgeConfig, rep: UnitaryRep) -> float:
    """Sum over plaquettes of Re(chi(1) - chi(sigma_p))."""
    return float(np.sum(rep.action_values[sigma.holonomies]))


def action_counts(sigma: EdgeConfig) -> np.ndarray:
    """Number of plaquettes with each holonomy value."""
    return np.bincount(sigma.holonomies, minlength=sigma.group.order)


def boltzmann_weight(sigma: EdgeConfig, rep: UnitaryRep, beta: float) -> float:
    return float(np.exp(-beta * action(sigma, rep)))


def loop_holonomy(sigma: EdgeConfig, loop: Loop) -> int:
    idx, sg = loop.edge_arrays(sigma.region)
    g = sigma.group
    acc = 0
    for e, s in zip(idx, sg):
        v = int(sigma.values[e])
        acc = int(g.mul[acc, v if s > 0 else g.inv[v]])
    return acc


def wilson_loop(sigma: EdgeConfig, loop: Loop, rep: UnitaryRep) -> complex:
    return complex(rep.character[loop_holonomy(sigma, loop)])


def support(sigma: EdgeConfig) -> frozenset:
    return sigma.support()


@dataclass(frozen=True, eq=False)
class GaugeTransform:
    values: np.ndarray

    @classmethod
    def identity(cls, region):
        return cls(np.zeros(region.n_cells(0), dtype=np.int64))

    @classmethod
    def random(cls, rng, region, group, fix_vertex=None):
        h = rng.integers(0, group.order, region.n_cells(0))
        if fix_vertex is not None:
            h[fix_vertex] = 0
        return cls(h)


def gauge_transform(sigma: EdgeConfig, h: GaugeTransform) -> EdgeConfig:
    """Edge (x, y) becomes h_x sigma_e h_y^{-1}."""
    tail, head = sigma.region.edge_endpoints
    m, inv = sigma.group.mul, sigma.group.inv
    hv = np.asarray(h.values)
    return sigma.with_values(m[m[hv[tail], sigma.values], inv[hv[head]]])


class SpanningTree:
    """BFS spanning tree of the region's 1-skeleton."""

    def __init__(self, region: CubeRegion, root=None, priority=DEFAULT_PRIORITY):
        self.region = region
        root = region.corner if root is None else tuple(root)
        self.root = region.vertex_index(root)
        if self.root < 0:
            raise ValueError("root outside region")
        self.priority = tuple(priority)
        nv = region.n_cells(0)
        coords = region.cell_bases(0)
        parent = np.full(nv, -1, dtype=np.int64)
        parent_edge = np.full(nv, -1, dtype=np.int64)
        order = [self.root]
        seen = np.zeros(nv, dtype=bool)
        seen[self.root] = True
        queue = deque([self.root])
        while queue:
            x = queue.popleft()
            cx = coords[x]
            for d in self.priority:
                i = abs(d)
                y_c = cx.copy()
                y_c[i - 1] += 1 if d > 0 else -1
                y = region.vertex_index(tuple(y_c))
                if y < 0 or seen[y]:
                    continue
                e = region.edge_index(tuple(cx) if d > 0 else tuple(y_c), i)
                seen[y] = True
                parent[y] = x
                parent_edge[y] = e
                order.append(y)
                queue.append(y)
        self.parent = parent
        self.parent_edge = parent_edge
        self.order = np.array(order, dtype=np.int64)
        mask = np.zeros(region.n_cells(1), dtype=bool)
        mask[parent_edge[parent_edge >= 0]] = True
        self.edge_mask = mask

    @property
    def edges(self):
        return np.nonzero(self.edge_mask)[0]

    @property
    def non_tree_edges(self):
        return np.nonzero(~self.edge_mask)[0]

    def is_valid(self):
        nv = self.region.n_cells(0)
        if self.edge_mask.sum() != nv - 1:
            return False
        tail, head = self.region.edge_endpoints
        # union-find over tree edges: acyclic and spanning iff no merge fails
        comp = list(range(nv))

        def find(a):
            while comp[a] != a:
                comp[a] = comp[comp[a]]
                a = comp[a]
            return a

        for e in self.edges:
            a, b = find(tail[e]), find(head[e])
            if a == b:
                return False
            comp[a] = b
        return True


def gauge_fix(sigma: EdgeConfig, tree: SpanningTree):
    """Return ``(tau, h)`` with ``tau`` trivial on the tree and
    ``gauge_transform(tau, h) == sigma``; ``h`` is 1 at the root."""
    g = sigma.group
    m, inv = g.mul, g.inv
    tail, head = sigma.region.edge_endpoints
    h = np.zeros(sigma.region.n_cells(0), dtype=np.int64)
    for y in tree.order[1:]:
        x = tree.parent[y]
        e = tree.parent_edge[y]
        s = sigma.values[e]
        # want h_x^{-1} sigma_(x,y) h_y = 1
        if tail[e] == x:
            h[y] = m[inv[s], h[x]]
        else:
            h[y] = m[s, h[x]]
    hinv = GaugeTransform(inv[h])
    tau = gauge_transform(sigma, hinv)
    return tau, GaugeTransform(h)


def in_gauge(sigma: EdgeConfig, tree: SpanningTree) -> bool:
    return bool(np.all(sigma.values[tree.edge_mask] == 0))


def gauge_fixed_preimage_counts_z2(region: CubeRegion, tree: SpanningTree) -> np.ndarray:
    """For Z2, the number of configurations gauge-fixing to each element of
    GF(tree), over all ``2**edges`` configurations.

    Over Z2 gauge fixing is linear, so the walk XORs basis images in
    Gray-code order instead of fixing every configuration separately.
    Keys index GF(tree) by the bits of the non-tree edges.
    """
    from . import _kernels
    from .groups import build_cyclic

    z2 = build_cyclic(2)
    free = tree.non_tree_edges
    bit = {int(e): k for k, e in enumerate(free)}
    n_e = region.n_cells(1)
    image = np.zeros(n_e, dtype=np.int64)
    for e in range(n_e):
        v = np.zeros(n_e, dtype=np.int64)
        v[e] = 1
        tau, _ = gauge_fix(EdgeConfig(region, z2, v), tree)
        for f in np.nonzero(tau.values)[0]:
            image[e] |= 1 << bit[int(f)]
    counts = np.zeros(1 << len(free), dtype=np.int64)
    _kernels.gray_preimage_counts(image, counts)
    return counts


# ---------------------------------------------------------------- snapshots

_MAGIC = b"FLGT"
_VERSION = 1


def save_config(sigma: EdgeConfig, path, group_id=None):
    """Binary snapshot: header (region, group id) then one little-endian
    element index per positive edge in index order."""
    gid = (group_id or sigma.group.name).encode("utf-8")
    width = 1 if sigma.group.order <= 256 else (2 if sigma.group.order <= 65536 else 4)
    dtype = {1: "<u1", 2: "<u2", 4: "<u4"}[width]
    header = _MAGIC + struct.pack("<H4iIH", _VERSION, *sigma.region.corner, sigma.region.side, len(gid))
    header += gid + struct.pack("<IB", len(sigma.values), width)
    Path(path).write_bytes(header + sigma.values.astype(dtype).tobytes())


def load_config(path, group: GroupTable | None = None) -> EdgeConfig:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError("not a configuration snapshot")
    off = 4
    version, a1, a2, a3, a4, side, glen = struct.unpack_from("<H4iIH", data, off)
    if version != _VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    off += struct.calcsize("<H4iIH")
    gid = data[off:off + glen].decode("utf-8")
    off += glen
    n, width = struct.unpack_from("<IB", data, off)
    off += struct.calcsize("<IB")
    dtype = {1: "<u1", 2: "<u2", 4: "<u4"}[width]
    vals = np.frombuffer(data, dtype=dtype, count=n, offset=off).astype(np.int64)
    region = CubeRegion((a1, a2, a3, a4), side)
    return EdgeConfig(region, group or group_by_id(gid), vals)
