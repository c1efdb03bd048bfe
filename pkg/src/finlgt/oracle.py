"""Exact ground truth on tiny regions.

Two engines:

* gauge-fixed enumeration: every configuration that is trivial on a spanning
  tree is visited once by a compiled odometer.  Tallies are integer counts
  binned by how many plaquettes fall in each action class, so any ``beta`` is
  evaluated afterwards from exact integers.
* support-restricted search: all gauge-fixed configurations with support
  exactly ``P``, found by constraint propagation.  This reaches ``Phi(P)`` on
  regions far too large for full enumeration.

A third, independent route (character expansion) computes ``Z`` and Wilson
loop numerators for prime-order cyclic groups.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .dec import surface_fill
from .errors import BudgetError, ConditioningOnNullError, PreconditionError
from .groups import GroupTable, UnitaryRep
from .gauge import SpanningTree
from .lattice import CubeRegion, Loop
from .vortex import (
    closure,
    compatible,
    find_separating_rectangle,
    minimal_vortex_edge,
    vortex_probe,
)

DEFAULT_MAX_CONFIGS = 2**27
DEFAULT_MAX_SECONDS = 600.0
ACTION_DECIMALS = 12
_MAX_BINS = 5_000_000


@dataclass(frozen=True)
class EnumerationBudget:
    max_configs: int = DEFAULT_MAX_CONFIGS
    max_seconds: float = DEFAULT_MAX_SECONDS

    @classmethod
    def from_env(cls, default=None):
        """Budget from ``LGT_BUDGET`` (max configurations) if set."""
        raw = os.environ.get("LGT_BUDGET")
        base = default or cls()
        if raw:
            return cls(int(float(raw)), base.max_seconds)
        return base

    def require(self, count, what="configurations"):
        if count > self.max_configs:
            raise BudgetError(
                f"enumeration needs {count} {what}, budget is {self.max_configs}", required=count
            )


# ---------------------------------------------------------------- action classes

@dataclass(frozen=True)
class ActionClasses:
    """Group elements grouped by plaquette action value; class 0 is the identity."""

    cls: np.ndarray
    values: np.ndarray  # action value of classes 1..m

    @classmethod
    def of(cls, rep: UnitaryRep):
        a = np.round(rep.action_values, ACTION_DECIMALS)
        distinct = sorted(set(a[1:].tolist()))
        index = {v: i + 1 for i, v in enumerate(distinct)}
        c = np.array([0] + [index[v] for v in a[1:]], dtype=np.int64)
        return cls(c, np.array(distinct, dtype=float))

    @property
    def n(self):
        return len(self.values)


# ---------------------------------------------------------------- tally specification

@dataclass(frozen=True)
class VortexEvent:
    """All of ``present`` are vortices of the support, none of ``absent`` is,
    and the support avoids ``avoid``."""

    present: tuple = ()
    absent: tuple = ()
    avoid: frozenset = frozenset()

    @staticmethod
    def make(present=(), absent=(), avoid=()):
        return VortexEvent(tuple(frozenset(v) for v in present), tuple(frozenset(v) for v in absent), frozenset(avoid))


@dataclass
class TallySpec:
    loops: list = field(default_factory=list)
    events: list = field(default_factory=list)
    queries: list = field(default_factory=list)


def _pad(rows, fill=-1):
    """Ragged integer rows as a (len(rows), max width) array padded with ``fill``."""
    width = max([len(r) for r in rows] + [1])
    out = np.full((len(rows), width), fill, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def _mask_words(region, sets):
    n_words = (region.n_cells(2) + 63) // 64
    out = np.zeros((len(sets), n_words), dtype=np.uint64)
    for i, s in enumerate(sets):
        for p in s:
            out[i, p >> 6] |= np.uint64(1) << np.uint64(p & 63)
    return out


class _Probes:
    """Deduplicated "V is a vortex of the support" tests."""

    def __init__(self, region):
        self.region = region
        self.index = {}
        self.rows = []

    def add(self, V):
        V = frozenset(V)
        if V not in self.index:
            self.index[V] = len(self.rows)
            self.rows.append(vortex_probe(self.region, V))
        return self.index[V]

    def arrays(self):
        ins = [r[0] for r in self.rows]
        outs = [r[1] for r in self.rows]
        ok = np.array([r[2] for r in self.rows], dtype=np.bool_)
        return _mask_words(self.region, ins), _mask_words(self.region, outs), ok


# ---------------------------------------------------------------- enumeration

@dataclass
class Enumeration:
    """Integer tallies of a gauge-fixed (or full) enumeration."""

    region: CubeRegion
    rep: UnitaryRep
    classes: ActionClasses
    n_free: int
    multiplicity: int  # N_1 for gauge-fixed walks, 1 for full walks
    count_bin: np.ndarray
    loop_hol: np.ndarray
    ngamma: np.ndarray
    event_cnt: np.ndarray
    query_cnt: np.ndarray
    visited: int
    spec: TallySpec
    loop_lengths: list

    # -- bins
    def _bin_counts(self):
        n_p = self.region.n_cells(2)
        b = np.arange(self.count_bin.size)
        cols = []
        for _ in range(self.classes.n):
            cols.append(b % (n_p + 1))
            b = b // (n_p + 1)
        return np.stack(cols, axis=1) if cols else np.zeros((self.count_bin.size, 0), dtype=np.int64)

    def _weights(self, beta):
        s = self._bin_counts() @ self.classes.values if self.classes.n else np.zeros(self.count_bin.size)
        return np.exp(-beta * s)

    def _sum(self, counts, beta):
        """``sum_b counts[b] * w_b`` with exact-rounded float summation."""
        w = self._weights(beta)
        nz = np.nonzero(counts)[0]
        return math.fsum(float(counts[b]) * float(w[b]) for b in nz)

    # -- observables
    def gauge_fixed_sum(self, beta):
        return self._sum(self.count_bin, beta)

    def partition_function(self, beta):
        return self.multiplicity * self.gauge_fixed_sum(beta)

    def wilson(self, beta, j=0) -> complex:
        z = self.gauge_fixed_sum(beta)
        chi = self.rep.character
        re = math.fsum(chi[g].real * self._sum(self.loop_hol[:, j, g], beta) for g in range(chi.size))
        im = math.fsum(chi[g].imag * self._sum(self.loop_hol[:, j, g], beta) for g in range(chi.size))
        return complex(re, im) / z

    def loop_holonomy_law(self, beta, j=0):
        z = self.gauge_fixed_sum(beta)
        return np.array([self._sum(self.loop_hol[:, j, g], beta) for g in range(self.loop_hol.shape[2])]) / z

    def ngamma_pmf(self, beta, j=0):
        z = self.gauge_fixed_sum(beta)
        ell = self.loop_lengths[j]
        return np.array([self._sum(self.ngamma[:, j, c], beta) for c in range(ell + 1)]) / z

    def event_prob(self, beta, v=0):
        return self._sum(self.event_cnt[:, v], beta) / self.gauge_fixed_sum(beta)

    def phi_query(self, beta, v=0):
        """``Phi(P)`` for the ``v``-th exact-support query."""
        return self._sum(self.query_cnt[:, v], beta)

    # -- exact rational evaluation
    def _exact_sum(self, counts, beta):
        xs = [Fraction(math.exp(-beta * a)) for a in self.classes.values]
        bc = self._bin_counts()
        total = Fraction(0)
        for b in np.nonzero(counts)[0]:
            term = Fraction(int(counts[b]))
            for c, x in enumerate(xs):
                term *= x ** int(bc[b, c])
            total += term
        return total

    def event_prob_exact(self, beta, v=0) -> Fraction:
        """Event probability as an exact rational in the (float-rounded) Boltzmann factors."""
        return self._exact_sum(self.event_cnt[:, v], beta) / self._exact_sum(self.count_bin, beta)

    def phi_query_exact(self, beta, v=0) -> Fraction:
        return self._exact_sum(self.query_cnt[:, v], beta)

    def gauge_fixed_sum_exact(self, beta) -> Fraction:
        return self._exact_sum(self.count_bin, beta)

    def exact_r_beta(self, beta) -> Fraction:
        """``r_beta`` in the same exact arithmetic as :meth:`event_prob_exact`."""
        xs = [Fraction(math.exp(-beta * a)) for a in self.classes.values]
        return sum((xs[c - 1] ** 6 for c in self.classes.cls[1:]), Fraction(0))


def _tables(region):
    ids, pos = region.edge_plaquettes
    return region.plaquette_edges, ids, pos


def _compile_spec(region, spec: TallySpec):
    probes = _Probes(region)
    loop_rows, sign_rows, probe_rows, lengths = [], [], [], []
    for loop in spec.loops:
        idx, sg = loop.edge_arrays(region)
        loop_rows.append(list(idx))
        sign_rows.append(list(sg))
        probe_rows.append([probes.add(region.minimal_vortex(int(e))) for e in idx])
        lengths.append(len(idx))
    req_rows, forb_rows, avoid_sets = [], [], []
    for ev in spec.events:
        req_rows.append([probes.add(V) for V in ev.present])
        forb_rows.append([probes.add(V) for V in ev.absent])
        avoid_sets.append(ev.avoid)
    p_in, p_nbr, p_ok = probes.arrays() if probes.rows else (
        np.zeros((0, (region.n_cells(2) + 63) // 64), np.uint64),) * 2 + (np.zeros(0, np.bool_),)
    return dict(
        loop_edges=_pad(loop_rows),
        loop_sign=_pad(sign_rows, 0),
        loop_probe=_pad(probe_rows),
        probe_in=p_in,
        probe_nbr=p_nbr,
        probe_ok=p_ok,
        ev_req=_pad(req_rows),
        ev_forb=_pad(forb_rows),
        ev_avoid=_mask_words(region, avoid_sets),
        query_masks=_mask_words(region, [frozenset(q) for q in spec.queries]),
        lengths=lengths,
    )


def enumerate_configurations(region: CubeRegion, rep: UnitaryRep, free_edges, spec: TallySpec | None = None,
                             multiplicity=1, budget: EnumerationBudget | None = None, jobs=1) -> Enumeration:
    """Walk every assignment of ``free_edges`` (all other edges identity)."""
    spec = spec or TallySpec()
    budget = budget or EnumerationBudget.from_env()
    group = rep.group
    free = np.asarray(free_edges, dtype=np.int64)
    total = group.order ** int(free.size)
    budget.require(total)
    classes = ActionClasses.of(rep)
    n_p = region.n_cells(2)
    n_bins = (n_p + 1) ** classes.n
    if n_bins > _MAX_BINS:
        raise BudgetError(f"{n_bins} action bins exceed the tally limit", required=n_bins)
    strides = np.array([(n_p + 1) ** c for c in range(classes.n)], dtype=np.int64)
    c = _compile_spec(region, spec)
    pe, ep_ids, _ = _tables(region)
    n_loops = c["loop_edges"].shape[0]
    max_len = max(c["lengths"] + [0])

    def fresh():
        return (np.zeros(n_bins, np.int64), np.zeros((n_bins, n_loops, group.order), np.int64),
                np.zeros((n_bins, n_loops, max_len + 1), np.int64),
                np.zeros((n_bins, c["ev_req"].shape[0]), np.int64),
                np.zeros((n_bins, c["query_masks"].shape[0]), np.int64))

    def run(top):
        out = fresh()
        visited = _kernels.enumerate_tally(
            free, region.n_cells(1), top, group.mul, group.inv, pe, ep_ids, classes.cls, classes.n, strides,
            c["loop_edges"], c["loop_sign"], c["loop_probe"], c["probe_in"], c["probe_nbr"], c["probe_ok"],
            c["ev_req"], c["ev_forb"], c["ev_avoid"], c["query_masks"], *out)
        return visited, out

    start = time.monotonic()
    shards = [-1] if free.size < 2 or total < 2**16 else list(range(group.order))
    results = []
    if jobs > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, shards))
    else:
        for s in shards:
            results.append(run(s))
            if time.monotonic() - start > budget.max_seconds and s != shards[-1]:
                raise BudgetError(
                    f"enumeration exceeded {budget.max_seconds} s after {sum(r[0] for r in results)} configurations",
                    required=total)
    # fixed-order combination keeps results independent of the shard count
    acc = fresh()
    visited = 0
    for v, out in results:
        visited += v
        for a, b in zip(acc, out):
            a += b
    if visited != total:
        raise AssertionError(f"visited {visited} of {total} configurations")
    return Enumeration(region, rep, classes, int(free.size), multiplicity, *acc, visited, spec, c["lengths"])


def enumerate_gauge_fixed(region: CubeRegion, rep: UnitaryRep, tree: SpanningTree | None = None, visitor=None,
                          spec: TallySpec | None = None, budget: EnumerationBudget | None = None, jobs=1):
    """Every configuration trivial on ``tree``, in odometer order over the
    non-tree edges (lowest index fastest).

    With a ``visitor`` callable, each configuration's edge values are passed
    to it in order (interpreted, for small walks) and the visit count is
    returned.  Otherwise compiled integer tallies are returned as an
    :class:`Enumeration`.
    """
    tree = tree or SpanningTree(region)
    group = rep.group if isinstance(rep, UnitaryRep) else rep
    free = tree.non_tree_edges
    n1 = group.order ** (region.n_cells(0) - 1)
    if visitor is None:
        return enumerate_configurations(region, rep, free, spec, multiplicity=n1, budget=budget, jobs=jobs)
    budget = budget or EnumerationBudget.from_env()
    budget.require(group.order ** int(free.size))
    return _visit(region, group, free, visitor)


def _visit(region, group: GroupTable, free, visitor):
    sigma = np.zeros(region.n_cells(1), dtype=np.int64)
    n = group.order
    count = 0
    while True:
        visitor(sigma.copy())
        count += 1
        j = 0
        while j < free.size:
            e = free[j]
            sigma[e] += 1
            if sigma[e] < n:
                break
            sigma[e] = 0
            j += 1
        if j == free.size:
            return count


def enumerate_full(region, rep, spec=None, budget=None, jobs=1) -> Enumeration:
    """Every edge configuration, without gauge fixing."""
    return enumerate_configurations(region, rep, np.arange(region.n_cells(1)), spec, 1, budget, jobs)


@dataclass
class Z2FullWalk:
    """Histogram of every Z2 configuration by excited-plaquette count and loop parity."""

    hist: np.ndarray
    rep: UnitaryRep

    def counts_by_action(self):
        return self.hist.sum(axis=1)

    def _sum(self, col, beta):
        a = self.rep.action_values[1]
        return math.fsum(float(c) * math.exp(-beta * a * k) for k, c in enumerate(col) if c)

    def partition_function(self, beta):
        return self._sum(self.counts_by_action(), beta)

    def wilson(self, beta):
        chi = self.rep.character.real
        num = math.fsum([chi[0] * self._sum(self.hist[:, 0], beta), chi[1] * self._sum(self.hist[:, 1], beta)])
        return num / self.partition_function(beta)


def enumerate_full_z2(region: CubeRegion, rep: UnitaryRep, loop: Loop | None = None,
                      budget: EnumerationBudget | None = None) -> Z2FullWalk:
    """Every configuration of a Z2 field, visited in Gray-code order."""
    if rep.group.order != 2:
        raise PreconditionError("Gray-code walk needs the group Z2")
    n_p, n_e = region.n_cells(2), region.n_cells(1)
    if n_p > 63:
        raise PreconditionError("Gray-code walk supports at most 63 plaquettes")
    (budget or EnumerationBudget.from_env()).require(2**n_e)
    flip = np.zeros(n_e, dtype=np.uint64)
    for p, row in enumerate(region.plaquette_edges):
        for e in row:
            flip[e] |= np.uint64(1) << np.uint64(p)
    loop_bit = np.uint64(1) << np.uint64(63)
    if loop is not None:
        idx, _ = loop.edge_arrays(region)
        for e in idx:
            flip[e] ^= loop_bit
    hist = np.zeros((n_p + 1, 2), dtype=np.int64)
    _kernels.gray_walk_z2(flip, np.uint64((1 << n_p) - 1), loop_bit, hist)
    return Z2FullWalk(hist, rep)


def partition_function(region, rep, beta, tree=None, budget=None, jobs=1) -> float:
    return enumerate_gauge_fixed(region, rep, tree, budget=budget, jobs=jobs).partition_function(beta)


def wilson_exact(region, rep, beta, gamma: Loop, tree=None, budget=None, jobs=1) -> complex:
    if not gamma.closed or not gamma.self_avoiding:
        raise PreconditionError("loop must be closed and self-avoiding")
    en = enumerate_gauge_fixed(region, rep, tree, spec=TallySpec(loops=[gamma]), budget=budget, jobs=jobs)
    return en.wilson(beta, 0)


def ngamma_pmf_exact(region, rep, beta, gamma: Loop, tree=None, budget=None, jobs=1) -> np.ndarray:
    en = enumerate_gauge_fixed(region, rep, tree, spec=TallySpec(loops=[gamma]), budget=budget, jobs=jobs)
    return en.ngamma_pmf(beta, 0)


def vortex_event_prob(region, rep, beta, present=(), absent=(), tree=None, budget=None, jobs=1) -> float:
    """``P(all of present are vortices of the support, none of absent is)``.

    An incompatible ``present`` collection has probability zero.
    """
    present = [frozenset(v) for v in present]
    for i in range(len(present)):
        for j in range(i + 1, len(present)):
            if not compatible(region, present[i], present[j]):
                return 0.0
    ev = VortexEvent.make(present, absent)
    en = enumerate_gauge_fixed(region, rep, tree, spec=TallySpec(events=[ev]), budget=budget, jobs=jobs)
    return en.event_prob(beta, 0)


def correlation_event(region, minimal=(), extra=()) -> VortexEvent:
    """Event whose probability is the reduced correlation of
    ``N(minimal) + extra``: no part of the decomposition is incompatible
    with a vortex of ``minimal`` and none of ``extra`` appears."""
    avoid = frozenset().union(*[closure(region, V) for V in minimal]) if minimal else frozenset()
    return VortexEvent.make((), extra, avoid)


def reduced_correlation(region, rep, beta, minimal=(), extra=(), tree=None, budget=None, jobs=1) -> float:
    ev = correlation_event(region, minimal, extra)
    en = enumerate_gauge_fixed(region, rep, tree, spec=TallySpec(events=[ev]), budget=budget, jobs=jobs)
    return en.event_prob(beta, 0)


# ---------------------------------------------------------------- character expansion

def _mod_inverse(a, p):
    return pow(int(a), p - 2, p)


def solve_mod_p(A, b, p):
    """Particular solution and null-space basis of ``A x = b (mod p)``, ``p`` prime.

    Returns ``(x0, basis)`` or ``(None, basis)`` if inconsistent.
    """
    A = np.array(A, dtype=np.int64) % p
    b = np.array(b, dtype=np.int64) % p
    m, n = A.shape
    M = np.concatenate([A, b[:, None]], axis=1)
    pivots = []
    row = 0
    for col in range(n):
        nz = np.nonzero(M[row:, col])[0]
        if nz.size == 0:
            continue
        r = row + nz[0]
        M[[row, r]] = M[[r, row]]
        M[row] = (M[row] * _mod_inverse(M[row, col], p)) % p
        others = np.nonzero(M[:, col])[0]
        for r2 in others:
            if r2 != row:
                M[r2] = (M[r2] - M[r2, col] * M[row]) % p
        pivots.append(col)
        row += 1
        if row == m:
            break
    if np.any(M[row:, n] != 0):
        x0 = None
    else:
        x0 = np.zeros(n, dtype=np.int64)
        for i, col in enumerate(pivots):
            x0[col] = M[i, n]
    free = [c for c in range(n) if c not in set(pivots)]
    basis = []
    for f in free:
        v = np.zeros(n, dtype=np.int64)
        v[f] = 1
        for i, col in enumerate(pivots):
            v[col] = (-M[i, f]) % p
        basis.append(v)
    return x0, np.array(basis, dtype=np.int64).reshape(len(basis), n)


def _cyclic_charge(rep: UnitaryRep):
    n = rep.group.order
    if rep.dim != 1 or not rep.group.is_cyclic or n < 2 or any(n % q == 0 for q in range(2, int(n**0.5) + 1)):
        raise PreconditionError("character expansion needs a 1-d character of a prime-order cyclic group")
    gen = rep.group.generator()
    k = int(round(np.angle(rep.character[gen]) * n / (2 * np.pi))) % n
    # element index -> exponent with respect to the generator
    expo = np.zeros(n, dtype=np.int64)
    x = 0
    for t in range(n):
        expo[x] = t
        x = int(rep.group.mul[x, gen])
    return n, k, expo


def dual_sum(region: CubeRegion, rep: UnitaryRep, beta, loop: Loop | None = None, max_terms=2**22):
    """``Z`` (``loop=None``) or the Wilson numerator by character expansion.

    With ``phi(g) = sum_m c_m w^{m g}``, summing out the edges leaves
    ``|G|^E sum_{n : delta n = -k gamma} prod_p c_{n_p}`` over integer
    2-forms mod p.
    """
    p, k, expo = _cyclic_charge(rep)
    phi = np.exp(-beta * rep.action_values)
    # phi as a function of the exponent t
    phi_t = np.empty(p)
    phi_t[expo] = phi
    w = np.exp(2j * np.pi / p)
    coef = np.array([sum(phi_t[t] * w ** (-m * t) for t in range(p)) / p for m in range(p)])
    coef = coef.real
    B = region.incidence_matrices[2].toarray()
    rhs = np.zeros(region.n_cells(1), dtype=np.int64)
    if loop is not None:
        rhs = (-k * loop.one_form(region)) % p
    x0, basis = solve_mod_p(B, rhs, p)
    if x0 is None:
        return 0.0
    d = basis.shape[0]
    if p ** d > max_terms:
        raise BudgetError(f"character expansion needs {p ** d} terms", required=p**d)
    combos = np.array(np.meshgrid(*[np.arange(p)] * d, indexing="ij")).reshape(d, -1).T if d else np.zeros((1, 0), np.int64)
    n_forms = (x0[None, :] + combos @ basis) % p
    terms = np.prod(coef[n_forms], axis=1)
    return float(p ** region.n_cells(1)) * math.fsum(terms.tolist())


def dual_wilson(region, rep, beta, loop):
    return dual_sum(region, rep, beta, loop) / dual_sum(region, rep, beta)


# ---------------------------------------------------------------- support-restricted search

def support_configs(region: CubeRegion, group: GroupTable, P, tree: SpanningTree | None = None,
                    max_solutions=1_000_000) -> np.ndarray:
    """All configurations trivial on ``tree`` with support exactly ``P`` (rows)."""
    tree = tree or SpanningTree(region)
    in_p = np.zeros(region.n_cells(2), dtype=np.bool_)
    in_p[list(P)] = True
    pe, ep_ids, _ = _tables(region)
    cap = 1024
    while True:
        out = np.empty((cap, region.n_cells(1)), dtype=np.int64)
        found = _kernels.support_search(region.n_cells(1), tree.edge_mask, in_p, pe, ep_ids, group.mul, group.inv, out)
        if found <= cap:
            return out[:found]
        if found > max_solutions:
            raise BudgetError(f"support {sorted(P)[:8]}... has {found} configurations", required=found)
        cap = found


def _holonomies(region, group, sols):
    pe = region.plaquette_edges
    m, inv = group.mul, group.inv
    return m[m[m[sols[:, pe[:, 0]], sols[:, pe[:, 1]]], inv[sols[:, pe[:, 2]]]], inv[sols[:, pe[:, 3]]]]


def _weights(rep, beta, hol, P):
    cols = sorted(P)
    if not cols:
        return np.ones(hol.shape[0])
    return np.exp(-beta * rep.action_values[hol[:, cols]].sum(axis=1))


def phi_of_set(region, rep, beta, P, tree=None) -> float:
    """Sum of Boltzmann weights over gauge-fixed configurations with support ``P``."""
    sols = support_configs(region, rep.group, P, tree)
    hol = _holonomies(region, rep.group, sols)
    return math.fsum(_weights(rep, beta, hol, P).tolist())


def phi_gamma_of_set(region, rep, beta, P, gamma: Loop, tree=None) -> complex:
    sols = support_configs(region, rep.group, P, tree)
    hol = _holonomies(region, rep.group, sols)
    w = _weights(rep, beta, hol, P)
    idx, sg = gamma.edge_arrays(region)
    g = rep.group
    acc = np.zeros(sols.shape[0], dtype=np.int64)
    for e, s in zip(idx, sg):
        v = sols[:, e]
        acc = g.mul[acc, v if s > 0 else g.inv[v]]
    chi = rep.character[acc]
    return complex(math.fsum((w * chi.real).tolist()), math.fsum((w * chi.imag).tolist()))


def phi_s_of_set(region, rep, beta, P, S, tree=None) -> complex:
    """Abelian ``Phi_S(P) = sum prod_p phi(q_p) chi(S_p q_p)`` with ``q = d sigma``."""
    g = rep.group
    if not g.is_abelian:
        raise PreconditionError("Phi_S is defined for Abelian groups")
    S = np.asarray(getattr(S, "values", S), dtype=np.int64)
    sols = support_configs(region, g, P, tree)
    hol = _holonomies(region, g, sols)
    w = _weights(rep, beta, hol, P)
    nz = np.nonzero(S)[0]
    acc = np.zeros(sols.shape[0], dtype=np.int64)
    for p in nz:
        acc = g.mul[acc, g.power(hol[:, p], np.full(sols.shape[0], S[p]))]
    chi = rep.character[acc]
    return complex(math.fsum((w * chi.real).tolist()), math.fsum((w * chi.imag).tolist()))


def phi_via_qforms(region, rep, beta, P, max_terms=2_000_000) -> float:
    """Abelian ``Phi(P)`` as a sum over closed 2-forms ``q`` with support ``P``.

    Independent of trees and of the restricted search: every assignment of
    non-identity values to ``P`` is tested for ``dq = 0`` directly.
    """
    from .dec import KForm, exterior_derivative

    g = rep.group
    if not g.is_abelian:
        raise PreconditionError("q-form enumeration needs an Abelian group")
    cols = sorted(P)
    total = (g.order - 1) ** len(cols)
    if total > max_terms:
        raise BudgetError(f"q-form enumeration needs {total} terms", required=total)
    phi = np.exp(-beta * rep.action_values)
    terms = []
    q = np.zeros(region.n_cells(2), dtype=np.int64)
    for vals in np.ndindex(*([g.order - 1] * len(cols))):
        q[cols] = np.asarray(vals, dtype=np.int64) + 1
        if exterior_derivative(KForm(region, g, 2, q)).is_zero():
            terms.append(float(np.prod(phi[q[cols]])))
    return math.fsum(terms)


# ---------------------------------------------------------------- factorization and conditionals

@dataclass(frozen=True)
class Factorization:
    residual: float
    phi_union: float
    phi1: float
    phi2: float
    mode: str
    witness: object = None


FACTORIZATION_MODES = ("minimal-vortex", "well-separated", "abelian-compatible")


def factorization_check(region, rep, beta, P1, P2, mode, tree=None, eps=1e-300) -> Factorization:
    """Relative defect of ``Phi(P1 | P2) = Phi(P1) Phi(P2)`` after checking the
    mode's structural hypothesis."""
    P1, P2 = frozenset(P1), frozenset(P2)
    if P1 & P2:
        raise PreconditionError("P1 and P2 overlap")
    witness = None
    if mode == "abelian-compatible":
        if not rep.group.is_abelian:
            raise PreconditionError("group is not Abelian")
        if not compatible(region, P1, P2):
            raise PreconditionError("sets are not compatible")
    elif mode == "minimal-vortex":
        e = minimal_vortex_edge(region, P1)
        if e is None or not region.is_interior_edge(e):
            raise PreconditionError("P1 is not a minimal vortex P(e) inside the region")
        if not compatible(region, P1, P2):
            raise PreconditionError("sets are not compatible")
        witness = e
    elif mode == "well-separated":
        witness = find_separating_rectangle(region, P1, P2)
        if witness is None:
            raise PreconditionError("no separating rectangle with sides below the region side")
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {FACTORIZATION_MODES}")
    phi_u = phi_of_set(region, rep, beta, P1 | P2, tree)
    phi1 = phi_of_set(region, rep, beta, P1, tree)
    phi2 = phi_of_set(region, rep, beta, P2, tree)
    res = abs(phi_u - phi1 * phi2) / max(phi1 * phi2, eps)
    return Factorization(res, phi_u, phi1, phi2, mode, witness)


def abelian_conditional(region, rep, beta, P, gamma: Loop, tree=None) -> complex:
    """``E[W_gamma | support = P] = Phi_S(P) / Phi(P)`` with ``S`` a filling of gamma."""
    if not rep.group.is_abelian:
        raise PreconditionError("conditional formula needs an Abelian group")
    S = surface_fill(gamma, region)
    phi = phi_of_set(region, rep, beta, P, tree)
    if phi == 0.0:
        raise ConditioningOnNullError("support P has probability zero")
    return phi_s_of_set(region, rep, beta, P, S, tree) / phi


__all__ = [
    "ActionClasses", "Enumeration", "EnumerationBudget", "Factorization", "TallySpec", "VortexEvent",
    "abelian_conditional", "correlation_event", "dual_sum", "dual_wilson", "enumerate_configurations",
    "enumerate_full", "enumerate_full_z2", "Z2FullWalk", "enumerate_gauge_fixed", "factorization_check", "ngamma_pmf_exact", "partition_function",
    "phi_gamma_of_set", "phi_of_set", "phi_s_of_set", "phi_via_qforms", "reduced_correlation", "solve_mod_p",
    "support_configs", "vortex_event_prob", "wilson_exact",
]
