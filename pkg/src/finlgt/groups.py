"""Finite groups as multiplication tables, unitary representations, and the
spectral quantities that drive the first-order Wilson loop formula."""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    GroupAxiomError,
    InvalidOrderError,
    NotCyclicError,
    OrderTooSmallError,
    RepresentationError,
    WrongRegimeError,
)

REP_TOL = 1e-12
G0_TOL = 1e-10
FAITHFUL_TOL = 1e-10


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class GroupTable:
    """A finite group stored as a dense multiplication table.

    Elements are integers ``0..order-1`` and the identity is always ``0``.
    """

    def __init__(self, mul, labels=None, name="custom", check=True):
        mul = np.asarray(mul, dtype=np.int64)
        if mul.ndim != 2 or mul.shape[0] != mul.shape[1] or mul.shape[0] < 1:
            raise InvalidOrderError("multiplication table must be a non-empty square array")
        n = mul.shape[0]
        self.order = n
        self.identity = 0
        self.name = name
        self.mul = _frozen(mul)
        if labels is None:
            labels = [str(i) for i in range(n)]
        self.labels = tuple(labels)
        if check:
            self._check_closed_identity()
        inv = np.empty(n, dtype=np.int64)
        for g in range(n):
            hits = np.nonzero(mul[g] == 0)[0]
            if len(hits) != 1:
                raise GroupAxiomError(f"element {g} has no unique inverse")
            inv[g] = hits[0]
        self.inv = _frozen(inv)
        if check:
            self._check_inverse()
            self._check_associative()
        self._power = None

    def _check_closed_identity(self):
        m = self.mul
        if m.min() < 0 or m.max() >= self.order:
            raise GroupAxiomError("table entries out of range")
        ar = np.arange(self.order)
        if not (np.array_equal(m[0], ar) and np.array_equal(m[:, 0], ar)):
            raise GroupAxiomError("element 0 is not a two-sided identity")

    def _check_inverse(self):
        ar = np.arange(self.order)
        if not (np.all(self.mul[ar, self.inv] == 0) and np.all(self.mul[self.inv, ar] == 0)):
            raise GroupAxiomError("inverse table inconsistent")

    def _check_associative(self, seed=0):
        m = self.mul
        n = self.order
        if n <= 64:
            ab_c = m[m[:, :, None], np.arange(n)[None, None, :]]
            a_bc = m[np.arange(n)[:, None, None], m[None, :, :]]
            ok = np.array_equal(ab_c, a_bc)
        else:
            rng = np.random.default_rng(seed)
            a, b, c = rng.integers(0, n, size=(3, 20000))
            ok = np.array_equal(m[m[a, b], c], m[a, m[b, c]])
        if not ok:
            raise GroupAxiomError("multiplication is not associative")

    @property
    def is_abelian(self):
        return bool(np.array_equal(self.mul, self.mul.T))

    def power(self, g, k):
        """``g`` raised to the integer power ``k`` (vectorised over arrays)."""
        if self._power is None:
            n = self.order
            table = np.zeros((n, n), dtype=np.int64)
            cur = np.zeros(n, dtype=np.int64)
            for j in range(n):
                table[:, j] = cur
                cur = self.mul[cur, np.arange(n)]
            self._power = _frozen(table)
        return self._power[g, np.mod(k, self.order)]

    def element_order(self, g):
        k, x = 1, g
        while x != 0:
            x = self.mul[x, g]
            k += 1
        return k

    def element_orders(self):
        return np.array([self.element_order(g) for g in range(self.order)], dtype=np.int64)

    def generator(self):
        """Smallest element generating the whole group, or ``None``."""
        for g in range(self.order):
            if self.element_order(g) == self.order:
                return g
        return None

    @property
    def is_cyclic(self):
        return self.generator() is not None

    def conjugacy_class_ids(self):
        """Class index of every element (classes numbered by smallest member)."""
        m, inv = self.mul, self.inv
        ids = np.full(self.order, -1, dtype=np.int64)
        k = 0
        for g in range(self.order):
            if ids[g] < 0:
                ids[m[m[np.arange(self.order), g], inv]] = k
                k += 1
        return ids

    def __repr__(self):
        return f"GroupTable({self.name}, order={self.order})"


def build_cyclic(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidOrderError(f"cyclic group needs n >= 1, got {n}")
    n = int(n)
    ar = np.arange(n)
    return GroupTable((ar[:, None] + ar[None, :]) % n, name=f"z{n}")


def _perm_order(p):
    k, q = 1, p
    ident = tuple(range(len(p)))
    while q != ident:
        q = tuple(p[i] for i in q)
        k += 1
    return k


def build_symmetric(n):
    """Symmetric group on ``n`` letters; ``mul(a, b)`` is ``a`` after ``b``."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidOrderError(f"symmetric group needs n >= 2, got {n}")
    perms = sorted(itertools.permutations(range(n)), key=lambda p: (_perm_order(p), p))
    index = {p: i for i, p in enumerate(perms)}
    size = len(perms)
    mul = np.empty((size, size), dtype=np.int64)
    for i, a in enumerate(perms):
        for j, b in enumerate(perms):
            mul[i, j] = index[tuple(a[b[t]] for t in range(n))]
    g = GroupTable(mul, labels=["".join(map(str, p)) for p in perms], name=f"s{n}")
    g.permutations = tuple(perms)
    return g


def build_dihedral(n):
    """Dihedral group of order ``2n``; element ``k + n*f`` is ``r^k s^f``."""
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise InvalidOrderError(f"dihedral group needs n >= 3, got {n}")
    size = 2 * n
    mul = np.empty((size, size), dtype=np.int64)
    for a in range(size):
        k1, f1 = a % n, a // n
        for b in range(size):
            k2, f2 = b % n, b // n
            k = (k1 + (k2 if f1 == 0 else -k2)) % n
            mul[a, b] = k + n * ((f1 + f2) % 2)
    labels = [f"r{k}" for k in range(n)] + [f"sr{k}" if k else "s" for k in range(n)]
    return GroupTable(mul, labels=labels, name=f"d{n}")


_Q8_LABELS = ["1", "-1", "i", "-i", "j", "-j", "k", "-k"]


def _q8_matrices():
    one = np.eye(2, dtype=complex)
    qi = np.array([[1j, 0], [0, -1j]])
    qj = np.array([[0, 1], [-1, 0]], dtype=complex)
    qk = qi @ qj
    out = []
    for base in (one, qi, qj, qk):
        out.extend([base, -base])
    return np.array(out)


def build_quaternion():
    mats = _q8_matrices()
    mul = np.empty((8, 8), dtype=np.int64)
    for a in range(8):
        for b in range(8):
            prod = mats[a] @ mats[b]
            hits = [c for c in range(8) if np.allclose(prod, mats[c])]
            mul[a, b] = hits[0]
    return GroupTable(mul, labels=_Q8_LABELS, name="q8")


class UnitaryRep:
    """Unitary matrices ``rho(g)`` for every element of a group."""

    def __init__(self, group: GroupTable, matrices, name="custom", check=True):
        mats = np.asarray(matrices, dtype=np.complex128)
        if mats.ndim != 3 or mats.shape[0] != group.order or mats.shape[1] != mats.shape[2]:
            raise RepresentationError("need one square matrix per group element")
        self.group = group
        self.dim = int(mats.shape[1])
        self.name = name
        self.matrices = _frozen(mats)
        # traces averaged over conjugacy classes, so conjugate holonomies
        # give bit-identical characters
        tr = np.trace(mats, axis1=1, axis2=2)
        cid = group.conjugacy_class_ids()
        sums = np.zeros(cid.max() + 1, dtype=np.complex128)
        np.add.at(sums, cid, tr)
        chi = (sums / np.bincount(cid))[cid]
        chi = (chi + np.conj(chi[group.inv])) / 2
        self.character = _frozen(chi)
        if check:
            self.check()
        # Re(chi(1) - chi(g)), the per-plaquette action of each element
        self.action_values = _frozen(self.dim - self.character.real)

    def residuals(self):
        m = self.matrices
        n = self.group.order
        eye = np.eye(self.dim)
        unit = np.abs(np.conj(np.transpose(m, (0, 2, 1))) @ m - eye).max()
        prod = m[:, None] @ m[None, :]
        hom = np.abs(prod - m[self.group.mul]).max() if n else 0.0
        chi_inv = np.abs(self.character - np.conj(self.character[self.group.inv])).max()
        return {"unitarity": float(unit), "homomorphism": float(hom), "character": float(chi_inv)}

    def check(self):
        if not np.array_equal(self.matrices[0], np.eye(self.dim)):
            raise RepresentationError("identity element must map to the identity matrix exactly")
        res = self.residuals()
        bad = {k: v for k, v in res.items() if v > REP_TOL}
        if bad:
            raise RepresentationError(f"representation residuals too large: {bad}")

    def __repr__(self):
        return f"UnitaryRep({self.name}, group={self.group.name}, dim={self.dim})"


def cyclic_character_rep(group: GroupTable, k: int) -> UnitaryRep:
    gen = group.generator()
    if gen is None:
        raise NotCyclicError(f"{group.name} is not cyclic")
    n = group.order
    phases = np.empty(n, dtype=np.complex128)
    x = 0
    for j in range(n):
        phases[x] = np.exp(2j * np.pi * j * k / n)
        x = group.mul[x, gen]
    phases[0] = 1.0
    # exact values for the real axis keep e.g. the Z2 sign rep at exactly -1
    phases.real[np.isclose(phases.real, 0, atol=1e-15)] = 0.0
    phases.imag[np.isclose(phases.imag, 0, atol=1e-15)] = 0.0
    return UnitaryRep(group, phases[:, None, None], name=f"{group.name}-k{k}")


def _helmert(n):
    """Orthonormal basis (columns) of the zero-sum subspace of R^n."""
    q = np.zeros((n, n - 1))
    for k in range(1, n):
        q[:k, k - 1] = 1.0
        q[k, k - 1] = -k
        q[:, k - 1] /= math.sqrt(k * (k + 1))
    return q


def regular_faithful_subrep(group: GroupTable) -> UnitaryRep:
    """Regular representation restricted to the zero-sum subspace."""
    n = group.order
    if n < 3:
        raise OrderTooSmallError(f"need |G| >= 3, got {n}")
    q = _helmert(n)
    mats = np.empty((n, n - 1, n - 1))
    for g in range(n):
        perm = np.zeros((n, n))
        perm[group.mul[g], np.arange(n)] = 1.0
        mats[g] = q.T @ perm @ q
    mats[0] = np.eye(n - 1)
    return UnitaryRep(group, mats, name=f"{group.name}-regular-sub")


def standard_rep_symmetric(group: GroupTable) -> UnitaryRep:
    perms = getattr(group, "permutations", None)
    if perms is None:
        raise RepresentationError("group was not built by build_symmetric")
    n = len(perms[0])
    q = _helmert(n)
    mats = np.empty((group.order, n - 1, n - 1))
    for g, p in enumerate(perms):
        perm = np.zeros((n, n))
        perm[list(p), np.arange(n)] = 1.0
        mats[g] = q.T @ perm @ q
    mats[0] = np.eye(n - 1)
    return UnitaryRep(group, mats, name=f"{group.name}-std{n - 1}")


def dihedral_rep(group: GroupTable, k=1) -> UnitaryRep:
    n = group.order // 2
    mats = np.empty((group.order, 2, 2))
    refl = np.diag([1.0, -1.0])
    for a in range(group.order):
        j, f = a % n, a // n
        t = 2 * np.pi * j * k / n
        rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        mats[a] = rot @ refl if f else rot
    mats[0] = np.eye(2)
    return UnitaryRep(group, mats, name=f"{group.name}-2d" if k == 1 else f"{group.name}-2d-k{k}")


def quaternion_rep(group: GroupTable) -> UnitaryRep:
    mats = _q8_matrices()
    return UnitaryRep(group, mats, name="q8-2d")


def is_faithful(rep: UnitaryRep) -> bool:
    eye = np.eye(rep.dim)
    dev = np.abs(rep.matrices[1:] - eye).max(axis=(1, 2)) if rep.group.order > 1 else np.array([1.0])
    return bool(np.all(dev > FAITHFUL_TOL))


def hermitian_part(m):
    return (m + np.conj(m.T)) / 2


@dataclass(frozen=True)
class RepSpectrum:
    delta_g: float
    g0: frozenset
    a_limit: np.ndarray = field(repr=False)
    a_limit_op_norm: float
    faithful: bool


def spectrum(rep: UnitaryRep) -> RepSpectrum:
    n = rep.group.order
    faithful = is_faithful(rep)
    if n == 1:
        z = np.zeros((rep.dim, rep.dim), dtype=complex)
        return RepSpectrum(math.inf, frozenset(), z, 0.0, True)
    acts = rep.action_values[1:]
    delta = float(acts.min())
    tol = G0_TOL * max(1.0, abs(delta))
    g0 = frozenset(int(g) + 1 for g in np.nonzero(np.abs(acts - delta) <= tol)[0])
    a = hermitian_part(rep.matrices[sorted(g0)].mean(axis=0))
    norm = float(np.abs(np.linalg.eigvalsh(a)).max())
    return RepSpectrum(delta, g0, a, norm, faithful)


def phi_table(rep: UnitaryRep, beta: float) -> np.ndarray:
    """Boltzmann factor exp(-beta * Re(chi(1) - chi(g))) for every element."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    out = np.exp(-beta * rep.action_values)
    out[0] = 1.0
    return out


def phi_beta(rep: UnitaryRep, beta: float, g: int) -> float:
    return float(phi_table(rep, beta)[g])


def _sixth_power_weights(rep, beta):
    """Weights phi^6 for g != 1, scaled by exp(6 beta delta) to avoid underflow."""
    acts = rep.action_values[1:]
    shift = acts.min()
    w = np.exp(-6.0 * beta * (acts - shift))
    return w, float(shift)


def log_r_beta(rep: UnitaryRep, beta: float) -> float:
    if rep.group.order == 1:
        return -math.inf
    w, shift = _sixth_power_weights(rep, beta)
    return -6.0 * beta * shift + math.log(w.sum())


def r_beta(rep: UnitaryRep, beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if rep.group.order == 1:
        return 0.0
    return float(np.sum(phi_table(rep, beta)[1:] ** 6))


def a_beta(rep: UnitaryRep, beta: float) -> np.ndarray:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if rep.group.order == 1:
        return np.zeros((rep.dim, rep.dim), dtype=complex)
    w, _ = _sixth_power_weights(rep, beta)
    levels, sums, counts = _action_level_sums(rep)
    wl = w[levels]
    a = np.tensordot(wl, sums, axes=1) / float(np.dot(wl, counts))
    return hermitian_part(a)


def _action_level_sums(rep):
    """Matrix sums over non-identity elements grouped by equal action value.

    Entries at round-off level are set to zero, so level sums that vanish
    exactly (e.g. over the transpositions of S3) do not leave noise that
    would dominate a tiny weighted average.
    """
    cached = getattr(rep, "_level_sums", None)
    if cached is not None:
        return cached
    acts = rep.action_values[1:]
    _, first, inverse = np.unique(acts, return_index=True, return_inverse=True)
    sums = np.zeros((first.size, rep.dim, rep.dim), dtype=np.complex128)
    np.add.at(sums, inverse, rep.matrices[1:])
    counts = np.bincount(inverse).astype(float)
    noise = 64 * np.finfo(float).eps * counts[:, None, None]
    sums.real[np.abs(sums.real) < noise] = 0.0
    sums.imag[np.abs(sums.imag) < noise] = 0.0
    rep._level_sums = (first, sums, counts)
    return rep._level_sums


def a_beta_eigenvalues(rep: UnitaryRep, beta: float) -> np.ndarray:
    return np.linalg.eigvalsh(a_beta(rep, beta))


def a_beta_op_norm(rep: UnitaryRep, beta: float) -> float:
    return float(np.abs(a_beta_eigenvalues(rep, beta)).max())


def _safe_log_inv(x):
    return math.inf if x == 0 else -math.log(x)


def c_beta_main(rep: UnitaryRep, beta: float) -> float:
    norm = a_beta_op_norm(rep, beta)
    if norm >= 1 - REP_TOL:
        raise DegenerateSpectrumError(f"||A_beta||_op = {norm:.15g} >= 1 for {rep.name}")
    return min(0.15, 2.0 ** -19 * _safe_log_inv(norm), 1.0 - norm)


def c_beta_abelian(rep: UnitaryRep, beta: float) -> float:
    if rep.dim != 1:
        raise WrongRegimeError("abelian constant needs a one-dimensional representation")
    a = float(a_beta(rep, beta)[0, 0].real)
    if abs(a) >= 1 - REP_TOL:
        raise DegenerateSpectrumError(f"|A_beta| = {abs(a):.15g} >= 1 for {rep.name}")
    return min(0.15, 0.5 * _safe_log_inv(abs(a)), 1.0 - a)


# ---------------------------------------------------------------- catalog

_GROUP_PATTERNS = [
    (re.compile(r"z(\d+)$"), lambda m: build_cyclic(int(m[1]))),
    (re.compile(r"s(\d+)$"), lambda m: build_symmetric(int(m[1]))),
    (re.compile(r"d(\d+)$"), lambda m: build_dihedral(int(m[1]))),
    (re.compile(r"q8$"), lambda m: build_quaternion()),
]

_group_cache: dict = {}


def group_by_id(gid: str) -> GroupTable:
    gid = gid.lower()
    if gid not in _group_cache:
        for pat, make in _GROUP_PATTERNS:
            m = pat.match(gid)
            if m:
                _group_cache[gid] = make(m)
                break
        else:
            raise KeyError(f"unknown group id {gid!r}")
    return _group_cache[gid]


def rep_by_id(rep_id: str) -> UnitaryRep:
    """Look up a representation by catalog id, e.g. ``"z3-k1"`` or ``"s3-std2"``.

    Accepted forms: ``zN-kK``, ``z2-sign``, ``GROUP-regular-sub``,
    ``sN-stdM``, ``dN-2d``, ``q8-2d``.
    """
    rid = rep_id.lower()
    if rid == "z2-sign":
        rid = "z2-k1"
    gid, _, tail = rid.partition("-")
    group = group_by_id(gid)
    if m := re.fullmatch(r"k(-?\d+)", tail):
        rep = cyclic_character_rep(group, int(m[1]))
    elif tail == "regular-sub":
        rep = regular_faithful_subrep(group)
    elif re.fullmatch(r"std\d*", tail) and gid.startswith("s"):
        rep = standard_rep_symmetric(group)
        if tail != "std" and tail != f"std{rep.dim}":
            raise KeyError(f"{rep_id!r}: standard rep of {gid} has dimension {rep.dim}")
    elif tail == "2d" and gid.startswith("d"):
        rep = dihedral_rep(group)
    elif tail == "2d" and gid == "q8":
        rep = quaternion_rep(group)
    else:
        raise KeyError(f"unknown representation id {rep_id!r}")
    rep.name = rep_id.lower()
    return rep


def builtin_rep_ids():
    ids = ["z2-sign", "z3-k1", "z4-k1", "z5-k1", "z6-k1", "s3-std2", "s4-std3", "d4-2d", "d5-2d", "q8-2d"]
    ids += [f"z{n}-regular-sub" for n in range(3, 9)]
    ids += ["s3-regular-sub", "d4-regular-sub", "q8-regular-sub"]
    return ids


def load_custom(doc):
    """Load a group and its representations from a JSON document or path.

    Format: ``{"order": n, "mul_table": [[...]], "reps": [{"dim": d,
    "matrices": [{"re": [[...]], "im": [[...]]}, ...]}]}``.
    """
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text())
    order = int(doc["order"])
    mul = np.asarray(doc["mul_table"], dtype=np.int64)
    if mul.shape != (order, order):
        raise GroupAxiomError("mul_table shape does not match order")
    group = GroupTable(mul, labels=doc.get("labels"), name=doc.get("name", "custom"))
    reps = []
    for i, spec in enumerate(doc.get("reps", [])):
        d = int(spec["dim"])
        mats = []
        for entry in spec["matrices"]:
            if isinstance(entry, dict):
                re_, im_ = entry["re"], entry.get("im", np.zeros((d, d)))
            else:
                re_, im_ = entry
            mats.append(np.asarray(re_, float) + 1j * np.asarray(im_, float))
        reps.append(UnitaryRep(group, np.array(mats).reshape(order, d, d), name=spec.get("name", f"{group.name}-rep{i}")))
    return group, reps
