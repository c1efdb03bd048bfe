"""Group-valued differential forms on a cubical region for Abelian groups.

Group addition is the table multiplication and negation is the inverse, so
any Abelian ``GroupTable`` works without a separate additive encoding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegreeError, NotACycleError, NotClosedError
from .groups import GroupTable
from .lattice import DIM, DIRS, DIRSETS, Box, CubeRegion, Loop, OrientedCell


def _require_abelian(group):
    if not group.is_abelian:
        raise ValueError(f"{group.name} is not Abelian")


def combine(group: GroupTable, values, idx, coeff):
    """Row-wise ``sum_j coeff[r, j] * values[idx[r, j]]`` in the group.

    ``idx`` entries of -1 (with any coefficient) are ignored.
    """
    out = np.zeros(idx.shape[0], dtype=np.int64)
    for j in range(idx.shape[1]):
        col = idx[:, j]
        ok = col >= 0
        term = group.power(values[np.where(ok, col, 0)], np.where(ok, coeff[:, j], 0))
        out = group.mul[out, term]
    return out


@dataclass(frozen=True, eq=False)
class KForm:
    """G-valued k-form: one group element per positive k-cell of the region."""

    region: CubeRegion
    group: GroupTable
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= DIM:
            raise DegreeError(f"degree must be in 0..4, got {self.degree}")
        v = np.asarray(self.values, dtype=np.int64)
        if v.shape != (self.region.n_cells(self.degree),):
            raise ValueError("wrong number of values for this degree")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, region, group, degree):
        return cls(region, group, degree, np.zeros(region.n_cells(degree), dtype=np.int64))

    @classmethod
    def random(cls, rng, region, group, degree):
        return cls(region, group, degree, rng.integers(0, group.order, region.n_cells(degree)))

    def __call__(self, cell: OrientedCell):
        i = self.region.index(cell)
        v = int(self.values[i])
        return v if cell.sign > 0 else int(self.group.inv[v])

    def is_zero(self):
        return bool(np.all(self.values == 0))

    def __eq__(self, other):
        return isinstance(other, KForm) and self.degree == other.degree and np.array_equal(self.values, other.values)

    def to_json(self):
        return {"degree": self.degree, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class IntTwoForm:
    """Integer-valued 2-form (one integer per positive plaquette)."""

    region: CubeRegion
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        if v.shape != (self.region.n_cells(2),):
            raise ValueError("wrong number of values for a 2-form")
        object.__setattr__(self, "values", v)

    def support(self):
        return np.nonzero(self.values)[0]

    def to_json(self):
        nz = self.support()
        return {"plaquettes": nz.tolist(), "values": self.values[nz].tolist()}


def exterior_derivative(f: KForm) -> KForm:
    if f.degree >= DIM:
        raise DegreeError("exterior derivative of a 4-form is not defined")
    _require_abelian(f.group)
    idx, sign = f.region.boundary_table(f.degree + 1)
    return KForm(f.region, f.group, f.degree + 1, combine(f.group, f.values, idx, sign))


def coderivative(f: KForm) -> KForm:
    if f.degree == 0:
        raise DegreeError("coderivative of a 0-form is not defined")
    _require_abelian(f.group)
    idx, sign = f.region.coboundary_table(f.degree - 1)
    return KForm(f.region, f.group, f.degree - 1, combine(f.group, f.values, idx, sign))


def int_exterior_derivative(region, degree, values):
    return region.incidence_matrices[degree + 1].T @ np.asarray(values, dtype=np.int64)


def int_coderivative(region, degree, values):
    return region.incidence_matrices[degree] @ np.asarray(values, dtype=np.int64)


def pairing(f: KForm, g_int) -> int:
    """``<f, g> = sum_c g(c) f(c)`` for an integer form ``g`` of the same degree."""
    _require_abelian(f.group)
    g_int = np.asarray(g_int, dtype=np.int64)
    terms = f.group.power(f.values, g_int)
    acc = 0
    for t in terms[g_int != 0]:
        acc = int(f.group.mul[acc, t])
    return acc


def pairing2(df: KForm, h) -> int:
    if df.degree != 2:
        raise DegreeError("pairing2 expects a 2-form")
    return pairing(df, h.values if isinstance(h, IntTwoForm) else h)


def ordered_loop_sum(sigma_values, group, loop: Loop, region) -> int:
    """Sum of an Abelian edge field along the loop, traversal order."""
    idx, sg = loop.edge_arrays(region)
    acc = 0
    for e, s in zip(idx, sg):
        v = int(sigma_values[e])
        acc = int(group.mul[acc, v if s > 0 else group.inv[v]])
    return acc


# ---------------------------------------------------------------- Poincaré solvers
#
# Both solvers use the comb tree of a box with corner a: the tree path from a to
# x raises coordinate 1, then 2, 3, 4.  Edge (x, i) is a tree edge exactly when
# x_k = a_k for every k > i.  Its fundamental cycle is filled by the ladder of
# plaquettes (z, {i, k}) along the tree path from u = (x_1..x_i, a_{i+1}..a_4)
# to x, each with coefficient -1.

def _ladder(x, i, a):
    """Plaquettes (base, (i, k)) of the ladder filling the fundamental cycle of
    non-tree edge (x, i); empty for tree edges."""
    out = []
    z = list(x[:i]) + list(a[i:])
    for k in range(i + 1, DIM + 1):
        while z[k - 1] < x[k - 1]:
            out.append((tuple(z), (i, k)))
            z[k - 1] += 1
    return out


def surface_fill(loop: Loop, region: CubeRegion) -> IntTwoForm:
    """Integer 2-form ``S`` with ``delta S = loop`` supported in the loop's bounding box."""
    gamma = loop.one_form(region)
    if np.any(int_coderivative(region, 1, gamma)):
        raise NotACycleError("loop 1-form is not closed")
    box = loop.bounding_box()
    a = box.corner
    s = np.zeros(region.n_cells(2), dtype=np.int64)
    for e in np.nonzero(gamma)[0]:
        cell = region.cell(1, e)
        for base, dirs in _ladder(cell.base, cell.dirs[0], a):
            s[region.index(OrientedCell(base, dirs))] -= gamma[e]
    out = IntTwoForm(region, s)
    if not np.array_equal(int_coderivative(region, 2, s), gamma):
        raise AssertionError("surface_fill postcondition failed")
    return out


def _cells_in_box(region, k, box):
    bases = region.cell_bases(k)
    did = region.cell_dirsets(k)
    lo = np.asarray(box.corner)
    hi = lo + np.asarray(box.sides)
    ext = np.array([[1 if d in ds else 0 for d in DIRS] for ds in DIRSETS[k]])[did]
    inside = np.all((bases >= lo) & (bases + ext <= hi), axis=1)
    return inside


def _cells_on_box_boundary(region, k, box):
    bases = region.cell_bases(k)
    did = region.cell_dirsets(k)
    ok = _cells_in_box(region, k, box)
    for ds_id, ds in enumerate(DIRSETS[k]):
        sel = did == ds_id
        for bits in itertools.product((0, 1), repeat=k):
            shift = np.zeros(DIM, dtype=np.int64)
            for b, d in zip(bits, ds):
                shift[d - 1] += b
            _, bnd = box.vertex_mask(bases[sel] + shift)
            ok[np.nonzero(sel)[0]] &= bnd
    return ok


def poincare_primitive(q: KForm, box: Box | None = None) -> KForm:
    """1-form ``h`` on the region with ``dh = q`` on the plaquettes of ``box``.

    ``h`` vanishes on edges outside ``box``.  When ``q`` vanishes on the
    boundary plaquettes of the box, ``h`` is made to vanish on the boundary
    edges as well.
    """
    if q.degree != 2:
        raise DegreeError("poincare_primitive expects a 2-form")
    _require_abelian(q.group)
    region, group = q.region, q.group
    box = box or region.as_box()
    in3 = _cells_in_box(region, 3, box)
    dq = exterior_derivative(q).values
    if np.any(dq[in3] != 0):
        raise NotClosedError("dq != 0 inside the box")
    a = box.corner
    h = np.zeros(region.n_cells(1), dtype=np.int64)
    in1 = np.nonzero(_cells_in_box(region, 1, box))[0]
    for e in in1:
        cell = region.cell(1, e)
        acc = 0
        for base, dirs in _ladder(cell.base, cell.dirs[0], a):
            acc = group.mul[acc, q.values[region.index(OrientedCell(base, dirs))]]
        h[e] = group.inv[acc]
    in2 = _cells_in_box(region, 2, box)
    on2 = _cells_on_box_boundary(region, 2, box)
    if not np.any(q.values[on2]):
        h = _clear_boundary(region, group, h, box)
    out = KForm(region, group, 1, h)
    if not np.array_equal(exterior_derivative(out).values[in2], q.values[in2]):
        raise AssertionError("poincare_primitive postcondition failed")
    return out


def _clear_boundary(region, group, h, box):
    """Subtract ``d phi`` where ``phi`` integrates ``h`` over the boundary shell."""
    on1 = _cells_on_box_boundary(region, 1, box)
    tail, head = region.edge_endpoints
    nv = region.n_cells(0)
    adj = [[] for _ in range(nv)]
    for e in np.nonzero(on1)[0]:
        adj[tail[e]].append((head[e], e, 1))
        adj[head[e]].append((tail[e], e, -1))
    phi = np.zeros(nv, dtype=np.int64)
    seen = np.zeros(nv, dtype=bool)
    starts = [v for v in range(nv) if adj[v]]
    for root in starts:
        if seen[root]:
            continue
        seen[root] = True
        stack = [root]
        while stack:
            x = stack.pop()
            for y, e, s in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    step = h[e] if s > 0 else group.inv[h[e]]
                    phi[y] = group.mul[phi[x], step]
                    stack.append(y)
    # (d phi)(e) = phi(head) - phi(tail); boundary-only phi, zero elsewhere
    dphi = group.mul[phi[head], group.inv[phi[tail]]]
    dphi[~_cells_in_box(region, 1, box)] = 0
    return group.mul[h, group.inv[dphi]]


def single_edge_form(region, group, e, g):
    """1-form equal to ``g`` on edge ``e`` and 0 elsewhere."""
    v = np.zeros(region.n_cells(1), dtype=np.int64)
    v[e] = g
    return KForm(region, group, 1, v)
