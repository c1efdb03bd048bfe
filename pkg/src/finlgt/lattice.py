"""The 4-d cubical lattice: regions, oriented cells, incidence and loops."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .errors import InvalidPairError, NotACycleError

DIM = 4
DIRS = (1, 2, 3, 4)
# direction sets of each degree in the fixed block order used for indexing
DIRSETS = {k: tuple(itertools.combinations(DIRS, k)) for k in range(DIM + 1)}
UNIT = {i: tuple(1 if j == i else 0 for j in DIRS) for i in DIRS}


def _add(x, y):
    return tuple(a + b for a, b in zip(x, y))


def _perm_sign(seq):
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True, order=True)
class OrientedCell:
    base: tuple
    dirs: tuple
    sign: int = 1

    @property
    def k(self):
        return len(self.dirs)

    def __neg__(self):
        return OrientedCell(self.base, self.dirs, -self.sign)

    @property
    def positive(self):
        return OrientedCell(self.base, self.dirs, 1)

    def vertices(self):
        out = []
        for bits in itertools.product((0, 1), repeat=len(self.dirs)):
            x = list(self.base)
            for b, d in zip(bits, self.dirs):
                x[d - 1] += b
            out.append(tuple(x))
        return out

    def faces(self):
        """Oriented (k-1)-cells contained in this cell, respecting orientation."""
        if self.k == 0:
            return []
        out = []
        for j, i in enumerate(self.dirs, start=1):
            rest = tuple(d for d in self.dirs if d != i)
            s = (-1) ** j * self.sign
            out.append(OrientedCell(self.base, rest, s))
            out.append(OrientedCell(_add(self.base, UNIT[i]), rest, -s))
        return out


class _Zero:
    """Marker for a wedge product with a repeated direction."""

    def __repr__(self):
        return "ZERO"

    def __bool__(self):
        return False


ZERO = _Zero()


def canonicalize(x, dirs):
    dirs = list(dirs)
    if any(d not in DIRS for d in dirs):
        raise ValueError(f"directions must lie in 1..4, got {dirs}")
    if len(set(dirs)) != len(dirs):
        return ZERO
    return OrientedCell(tuple(int(v) for v in x), tuple(sorted(dirs)), _perm_sign(dirs))


def incidence(cprime: OrientedCell, c: OrientedCell) -> int:
    if cprime.k != c.k - 1:
        raise InvalidPairError(f"need dim(c') = dim(c) - 1, got {cprime.k} and {c.k}")
    target = cprime.positive
    for f in c.positive.faces():
        if f.positive == target:
            return f.sign * cprime.sign * c.sign
    return 0


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[a, a + sides]`` in Z^4 (sides may differ)."""

    corner: tuple
    sides: tuple

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(v) for v in self.corner))
        object.__setattr__(self, "sides", tuple(int(v) for v in self.sides))
        if any(s < 0 for s in self.sides):
            raise ValueError("box sides must be nonnegative")

    @property
    def upper(self):
        return _add(self.corner, self.sides)

    def contains_vertex(self, x):
        return all(a <= v <= a + s for v, a, s in zip(x, self.corner, self.sides))

    def is_boundary_vertex(self, x):
        return self.contains_vertex(x) and any(v == a or v == a + s for v, a, s in zip(x, self.corner, self.sides))

    def cell_in(self, cell):
        return all(self.contains_vertex(v) for v in cell.vertices())

    def cell_on_boundary(self, cell):
        return all(self.is_boundary_vertex(v) for v in cell.vertices())

    def classify(self, cell):
        if not self.cell_in(cell):
            return "outside"
        return "on-boundary" if self.cell_on_boundary(cell) else "in-interior"

    def contains_box(self, other):
        return all(a <= b and b + t <= a + s for a, s, b, t in zip(self.corner, self.sides, other.corner, other.sides))

    def vertex_mask(self, coords):
        """Boolean masks (inside, boundary) for an array of vertex coordinates."""
        lo = np.asarray(self.corner)
        hi = lo + np.asarray(self.sides)
        inside = np.all((coords >= lo) & (coords <= hi), axis=-1)
        edge = np.any((coords == lo) | (coords == hi), axis=-1)
        return inside, inside & edge


def cube(corner, side):
    return Box(tuple(corner), (side,) * DIM)


class CubeRegion(Box):
    """The finite lattice: a cube of side ``N`` with lower corner ``a``.

    Positive k-cells are indexed densely: blocks per direction set in
    lexicographic order, row-major base offsets inside each block.
    """

    def __init__(self, corner=(0, 0, 0, 0), side=1):
        if int(side) < 1:
            raise ValueError("region side must be >= 1")
        super().__init__(tuple(corner), (int(side),) * DIM)

    # frozen dataclass parent: keep hashing by value
    def __hash__(self):
        return hash((self.corner, self.sides))

    def __eq__(self, other):
        return isinstance(other, Box) and (self.corner, self.sides) == (other.corner, other.sides)

    def __repr__(self):
        return f"CubeRegion(corner={self.corner}, side={self.side})"

    def __reduce__(self):
        return (CubeRegion, (self.corner, self.side))

    @property
    def side(self):
        return self.sides[0]

    def as_box(self):
        return Box(self.corner, self.sides)

    # ------------------------------------------------------------ indexing
    def _extents(self, dirs):
        n = self.side
        return tuple(n if d in dirs else n + 1 for d in DIRS)

    @cached_property
    def _blocks(self):
        out = {}
        for k in range(DIM + 1):
            off = 0
            for ds in DIRSETS[k]:
                ext = self._extents(ds)
                out[ds] = (off, ext)
                off += int(np.prod(ext))
        return out

    def n_cells(self, k):
        n = self.side
        return comb(DIM, k) * n ** k * (n + 1) ** (DIM - k)

    def index(self, cell):
        """Dense index of the positive version of ``cell`` or ``-1`` if outside."""
        off, ext = self._blocks[cell.dirs]
        r = 0
        for v, a, e in zip(cell.base, self.corner, ext):
            o = v - a
            if o < 0 or o >= e:
                return -1
            r = r * e + o
        return off + r

    def edge_index(self, x, i):
        return self.index(OrientedCell(tuple(x), (i,)))

    @cached_property
    def _cell_arrays(self):
        out = {}
        for k in range(DIM + 1):
            bases, dids = [], []
            for t, ds in enumerate(DIRSETS[k]):
                ext = self._extents(ds)
                grid = np.stack(np.meshgrid(*[np.arange(e) for e in ext], indexing="ij"), axis=-1).reshape(-1, DIM)
                bases.append(grid + np.asarray(self.corner))
                dids.append(np.full(len(grid), t))
            out[k] = (np.concatenate(bases).astype(np.int64), np.concatenate(dids).astype(np.int64))
        return out

    def cell_bases(self, k):
        return self._cell_arrays[k][0]

    def cell_dirsets(self, k):
        return self._cell_arrays[k][1]

    def cell(self, k, idx):
        base, did = self._cell_arrays[k]
        return OrientedCell(tuple(int(v) for v in base[idx]), DIRSETS[k][did[idx]])

    def positive_cells(self, k):
        return [self.cell(k, i) for i in range(self.n_cells(k))]

    def _index_array(self, k, bases, dirsets):
        """Vectorised index lookup; ``dirsets`` are block ids; -1 when outside."""
        out = np.full(len(bases), -1, dtype=np.int64)
        rel = bases - np.asarray(self.corner)
        for t, ds in enumerate(DIRSETS[k]):
            sel = dirsets == t
            if not sel.any():
                continue
            off, ext = self._blocks[ds]
            ext = np.asarray(ext)
            r = rel[sel]
            ok = np.all((r >= 0) & (r < ext), axis=1)
            flat = np.ravel_multi_index(np.where(ok[:, None], r, 0).T, tuple(ext))
            out[np.nonzero(sel)[0]] = np.where(ok, off + flat, -1)
        return out

    @cached_property
    def _boundaries(self):
        """For each k >= 1: (face index, face sign) arrays of shape (n_k, 2k)."""
        out = {}
        for k in range(1, DIM + 1):
            base, did = self._cell_arrays[k]
            idx_cols, sign_cols = [], []
            for j in range(1, k + 1):
                face_ids, face_dir_ids, shifts = [], [], []
                for t, ds in enumerate(DIRSETS[k]):
                    i = ds[j - 1]
                    rest = tuple(d for d in ds if d != i)
                    face_dir_ids.append(DIRSETS[k - 1].index(rest))
                    shifts.append(UNIT[i])
                fdid = np.asarray(face_dir_ids)[did]
                shift = np.asarray(shifts)[did]
                s = (-1) ** j
                idx_cols.append(self._index_array(k - 1, base, fdid))
                sign_cols.append(np.full(len(base), s))
                idx_cols.append(self._index_array(k - 1, base + shift, fdid))
                sign_cols.append(np.full(len(base), -s))
            out[k] = (np.stack(idx_cols, axis=1), np.stack(sign_cols, axis=1))
        return out

    def boundary_table(self, k):
        """Faces of every positive k-cell with their incidence numbers."""
        return self._boundaries[k]

    @cached_property
    def _cofaces(self):
        out = {}
        for k in range(0, DIM):
            fidx, fsign = self._boundaries[k + 1]
            n = self.n_cells(k)
            rows = fidx.ravel()
            cols = np.repeat(np.arange(fidx.shape[0]), fidx.shape[1])
            signs = fsign.ravel()
            order = np.argsort(rows, kind="stable")
            rows, cols, signs = rows[order], cols[order], signs[order]
            counts = np.bincount(rows, minlength=n)
            width = int(counts.max())
            ci = np.full((n, width), -1, dtype=np.int64)
            cs = np.zeros((n, width), dtype=np.int64)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            pos = np.arange(len(rows)) - starts[rows]
            ci[rows, pos] = cols
            cs[rows, pos] = signs
            out[k] = (ci, cs)
        return out

    def coboundary_table(self, k):
        """Positive (k+1)-cells containing each k-cell, padded with -1 / sign 0."""
        return self._cofaces[k]

    @cached_property
    def incidence_matrices(self):
        """Sparse integer matrices ``B_k[c', c] = I(c', c)`` for k = 1..4."""
        from scipy import sparse

        out = {}
        for k in range(1, DIM + 1):
            fidx, fsign = self._boundaries[k]
            n = fidx.shape[0]
            cols = np.repeat(np.arange(n), fidx.shape[1])
            out[k] = sparse.csr_matrix((fsign.ravel(), (fidx.ravel(), cols)), shape=(self.n_cells(k - 1), n), dtype=np.int64)
        return out

    # ------------------------------------------------------------ gauge-field tables
    @cached_property
    def plaquette_edges(self):
        """Edges of each plaquette in holonomy order with an inverse flag.

        Plaquette ``(x, {i, j})``, i < j, is traversed
        x -> x+e_i -> x+e_i+e_j -> x+e_j -> x.
        """
        base, did = self._cell_arrays[2]
        di = np.array([ds[0] for ds in DIRSETS[2]])[did]
        dj = np.array([ds[1] for ds in DIRSETS[2]])[did]
        eye = np.eye(DIM, dtype=np.int64)
        ei, ej = eye[di - 1], eye[dj - 1]
        cols = [
            self._index_array(1, base, di - 1),
            self._index_array(1, base + ei, dj - 1),
            self._index_array(1, base + ej, di - 1),
            self._index_array(1, base, dj - 1),
        ]
        pe = np.stack(cols, axis=1)
        assert (pe >= 0).all()
        return pe

    PLAQ_INVERSE = np.array([False, False, True, True])

    @cached_property
    def edge_plaquettes(self):
        """(plaquette ids, position in plaquette) per edge, padded with -1."""
        pe = self.plaquette_edges
        n = self.n_cells(1)
        ids = np.full((n, 6), -1, dtype=np.int64)
        pos = np.full((n, 6), -1, dtype=np.int64)
        fill = np.zeros(n, dtype=np.int64)
        for p in range(pe.shape[0]):
            for k in range(4):
                e = pe[p, k]
                ids[e, fill[e]] = p
                pos[e, fill[e]] = k
                fill[e] += 1
        return ids, pos

    @cached_property
    def plaquette_three_cells(self):
        """Three-cells of the region containing each plaquette (padded -1)."""
        ci, _ = self.coboundary_table(2)
        return ci

    @cached_property
    def edge_endpoints(self):
        base = self.cell_bases(1)
        did = self.cell_dirsets(1)
        eye = np.eye(DIM, dtype=np.int64)
        head = base + eye[did]
        return self._index_array(0, base, np.zeros(len(base), dtype=np.int64)), self._index_array(0, head, np.zeros(len(base), dtype=np.int64))

    def vertex_index(self, x):
        return self.index(OrientedCell(tuple(x), ()))

    # ------------------------------------------------------------ geometry helpers
    def three_cells_containing(self, e):
        e = e if isinstance(e, OrientedCell) else self.cell(1, e)
        ps = self.plaquettes_containing(e)
        cells = set()
        for p in ps:
            for c in self.plaquette_three_cells[p]:
                if c >= 0:
                    cells.add(int(c))
        return sorted(cells)

    def plaquettes_containing(self, e):
        idx = e if isinstance(e, (int, np.integer)) else self.index(e)
        ids, _ = self.edge_plaquettes
        return sorted(int(p) for p in ids[idx] if p >= 0)

    def minimal_vortex(self, e):
        """Plaquettes of the region containing the edge (truncated at the boundary)."""
        return frozenset(self.plaquettes_containing(e))

    def is_interior_edge(self, e):
        """True when all six plaquettes containing ``e`` lie in the region."""
        return len(self.plaquettes_containing(e)) == 6

    def is_interior_plaquette(self, p):
        """True when all four three-cells containing ``p`` lie in the region."""
        return int((self.plaquette_three_cells[p] >= 0).sum()) == 4

    def on_region_boundary(self, cell):
        return self.cell_on_boundary(cell)


# ---------------------------------------------------------------- loops

def _parse_step(s):
    if isinstance(s, (int, np.integer)):
        d = int(s)
    else:
        t = str(s).strip().replace("−", "-")
        d = int(t)
    if abs(d) not in DIRS:
        raise ValueError(f"bad step {s!r}")
    return d


class Loop:
    """A closed lattice path given by a start vertex and signed unit steps."""

    def __init__(self, start, steps):
        self.start = tuple(int(v) for v in start)
        self.steps = tuple(_parse_step(s) for s in steps)
        verts = [self.start]
        for d in self.steps:
            x = list(verts[-1])
            x[abs(d) - 1] += 1 if d > 0 else -1
            verts.append(tuple(x))
        self.vertices = tuple(verts)

    def __len__(self):
        return len(self.steps)

    @property
    def length(self):
        return len(self.steps)

    @property
    def closed(self):
        return self.vertices[-1] == self.vertices[0]

    def directed_edges(self):
        """List of (positive edge cell, orientation +1/-1) along the loop."""
        out = []
        for x, d in zip(self.vertices[:-1], self.steps):
            i = abs(d)
            if d > 0:
                out.append((OrientedCell(x, (i,)), 1))
            else:
                out.append((OrientedCell(_add(x, tuple(-u for u in UNIT[i])), (i,)), -1))
        return out

    @property
    def self_avoiding(self):
        edges = [e for e, _ in self.directed_edges()]
        return len(set(edges)) == len(edges)

    def edge_arrays(self, region):
        """Positive edge indices and orientations inside ``region``."""
        de = self.directed_edges()
        idx = np.array([region.index(e) for e, _ in de], dtype=np.int64)
        if (idx < 0).any():
            raise ValueError("loop leaves the region")
        return idx, np.array([s for _, s in de], dtype=np.int64)

    def one_form(self, region):
        """Integer 1-form with +1/-1 on traversed edges (summing repeats)."""
        idx, sg = self.edge_arrays(region)
        out = np.zeros(region.n_cells(1), dtype=np.int64)
        np.add.at(out, idx, sg)
        return out

    def bounding_box(self):
        v = np.array(self.vertices)
        lo = v.min(axis=0)
        return Box(tuple(lo), tuple(v.max(axis=0) - lo))

    def to_json(self):
        return {"start": list(self.start), "steps": [f"{d:+d}" for d in self.steps]}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(doc["start"], doc["steps"])

    def __repr__(self):
        return f"Loop(start={self.start}, length={self.length})"

    def __eq__(self, other):
        return isinstance(other, Loop) and (self.start, self.steps) == (other.start, other.steps)

    def __hash__(self):
        return hash((self.start, self.steps))


def rectangle_loop(corner, width, height, plane=(1, 2)):
    """Counter-clockwise ``width x height`` rectangle in coordinate plane ``(i, j)``."""
    i, j = plane
    if i == j or i not in DIRS or j not in DIRS:
        raise ValueError(f"bad plane {plane}")
    if width < 1 or height < 1:
        raise ValueError("rectangle sides must be >= 1")
    steps = [i] * width + [j] * height + [-i] * width + [-j] * height
    return Loop(corner, steps)


def require_closed(loop):
    if not loop.closed:
        raise NotACycleError("loop does not return to its start")


def random_loop(rng, region, max_len=40, max_tries=10000):
    """Random closed loop with no repeated edge, joining 2-4 random waypoints by
    coordinate-ordered paths."""
    lo = np.asarray(region.corner)
    for _ in range(max_tries):
        k = int(rng.integers(2, 5))
        pts = [lo + rng.integers(0, region.side + 1, size=DIM) for _ in range(k)]
        steps = []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            for d in rng.permutation(DIM):
                delta = int(b[d] - a[d])
                steps += [(d + 1) * (1 if delta > 0 else -1)] * abs(delta)
        if not steps or len(steps) > max_len:
            continue
        loop = Loop(tuple(pts[0]), steps)
        if loop.self_avoiding:
            return loop
    raise RuntimeError("could not draw a loop")
