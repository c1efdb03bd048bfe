"""Markov chain Monte Carlo for the finite-group lattice gauge measure.

Random numbers come from a counter-based generator keyed by
``(seed, sweep, edge, draw)``, so a trajectory depends only on the seed and
the schedule, never on thread timing or class ordering.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .gauge import EdgeConfig
from .groups import UnitaryRep, phi_table
from .lattice import CubeRegion, Loop
from .vortex import vortex_probe

ALGORITHMS = {"heatbath": 0, "metropolis": 1}
SCHEDULES = ("sequential", "checkerboard")
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 10
MIN_BATCHES = 20

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------- RNG (reference twin)

def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def counter_uniform(seed: int, sweep: int, edge: int, draw: int = 0) -> float:
    """Pure-Python twin of the compiled generator."""
    key = splitmix64(seed & _MASK64)
    h = splitmix64(key ^ (sweep & _MASK64))
    h = splitmix64(h ^ (((edge << 2) | draw) & _MASK64))
    return (h >> 11) * 2.0**-53


def chain_seed(seed: int, chain: int) -> int:
    """Seed of the ``chain``-th independent chain of a run."""
    return splitmix64((seed + chain * 0xD1B54A32D192ED03) & _MASK64) if chain else seed & _MASK64


# ---------------------------------------------------------------- schedules

def checkerboard_classes(region: CubeRegion) -> list:
    """Edges split by direction and parity of the transverse coordinates.

    Two edges sharing a plaquette either point in different directions or
    differ by one unit in a transverse coordinate, so no class contains both.
    """
    bases = region.cell_bases(1)
    dirs = np.array([region.cell(1, e).dirs[0] for e in range(region.n_cells(1))])
    out = []
    for i in range(1, 5):
        trans = bases.sum(axis=1) - bases[:, i - 1]
        for parity in (0, 1):
            out.append(np.nonzero((dirs == i) & (trans % 2 == parity))[0])
    return out


def sweep_order(region: CubeRegion, schedule: str = "sequential") -> np.ndarray:
    if schedule == "sequential":
        return np.arange(region.n_cells(1), dtype=np.int64)
    if schedule == "checkerboard":
        return np.concatenate(checkerboard_classes(region)).astype(np.int64)
    raise ValueError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")


# ---------------------------------------------------------------- chain state

@dataclass(frozen=True)
class ChainState:
    config: EdgeConfig
    rep: UnitaryRep
    beta: float
    seed: int
    sweeps_done: int = 0

    @classmethod
    def start(cls, region, rep, beta, seed=0, start="cold"):
        if start == "cold":
            cfg = EdgeConfig.identity(region, rep.group)
        elif start == "hot":
            vals = np.array([min(int(counter_uniform(seed, -1 & _MASK64, e) * rep.group.order), rep.group.order - 1)
                             for e in range(region.n_cells(1))])
            cfg = EdgeConfig(region, rep.group, vals)
        else:
            raise ValueError("start must be 'cold' or 'hot'")
        return cls(cfg, rep, float(beta), int(seed) & _MASK64, 0)

    @property
    def region(self):
        return self.config.region


class _Tables:
    def __init__(self, state: ChainState):
        r = state.region
        ids, pos = r.edge_plaquettes
        g = state.rep.group
        self.args = (ids, pos, r.plaquette_edges, g.mul, g.inv, phi_table(state.rep, state.beta))


def conditional(state: ChainState, e: int) -> np.ndarray:
    """Exact conditional law of edge ``e`` given all other edges."""
    t = _Tables(state)
    w = np.empty(state.rep.group.order)
    _kernels.edge_weights(np.array(state.config.values), int(e), *t.args, w)
    return w / w.sum()


def _edge_update(state, e, algo, debug):
    if debug and algo == 0:
        p = conditional(state, e)
        if abs(p.sum() - 1.0) > 1e-12:
            raise AssertionError("heat-bath conditional is not normalised")
    sigma = np.array(state.config.values)
    t = _Tables(state)
    _kernels.single_update(sigma, int(e), np.uint64(state.seed), state.sweeps_done, algo, *t.args)
    return replace(state, config=state.config.with_values(sigma))


def heatbath_edge_update(state: ChainState, e: int, debug=False) -> ChainState:
    """Redraw edge ``e`` from its conditional law (draw keyed by the current sweep)."""
    return _edge_update(state, e, 0, debug)


def metropolis_edge_update(state: ChainState, e: int) -> ChainState:
    """Uniform proposal, accepted with probability min(1, weight ratio)."""
    return _edge_update(state, e, 1, False)


def sweep(state: ChainState, schedule="sequential", algo="heatbath", n=1) -> ChainState:
    sigma = np.array(state.config.values)
    t = _Tables(state)
    _kernels.run_sweeps(sigma, sweep_order(state.region, schedule), np.uint64(state.seed), state.sweeps_done, n,
                        ALGORITHMS[algo], *t.args)
    return replace(state, config=state.config.with_values(sigma), sweeps_done=state.sweeps_done + n)


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True)
class MeasurementRecord:
    observable: str
    n: int
    mean: complex
    stderr: float
    ess: float
    histogram: dict | None = None
    imag_stderr: float = 0.0

    def to_json(self):
        out = {"observable": self.observable, "n": self.n, "mean_re": self.mean.real, "mean_im": self.mean.imag,
               "stderr": self.stderr, "ess": self.ess}
        if self.histogram is not None:
            out["histogram"] = self.histogram
        return out


def batch_means(x, n_batches=MIN_BATCHES):
    """``(mean, stderr, ess)`` from non-overlapping batch means.

    ``x`` may be 2-d (chains x samples): every chain is cut into
    ``n_batches`` batches and all batch means are pooled.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if n_batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches")
    per = x.shape[1] // n_batches
    if per < 1:
        raise ValueError(f"need at least {n_batches} samples per chain")
    used = x[:, : per * n_batches]
    bm = used.reshape(x.shape[0] * n_batches, per).mean(axis=1)
    mean = float(used.mean())
    se = float(bm.std(ddof=1) / math.sqrt(bm.size))
    var = float(used.var())
    ess = float(used.size) if se == 0.0 else min(float(used.size), var / se**2)
    return mean, se, ess


# ---------------------------------------------------------------- measurement runs

@dataclass
class SamplerParams:
    region: CubeRegion
    rep: UnitaryRep
    beta: float
    loops: list = field(default_factory=list)
    n_samples: int = 1000
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    seed: int = 0
    algo: str = "heatbath"
    schedule: str = "sequential"
    chains: int = 1
    start: str = "cold"
    vortices: list = field(default_factory=list)
    n_batches: int = MIN_BATCHES


@dataclass
class ChainSamples:
    """Raw per-sample records: loop holonomies and vortex-probe flags."""

    params: SamplerParams
    holonomy: np.ndarray  # chains x samples x loops
    probes: np.ndarray  # chains x samples x probes (bool)
    loop_probe: list  # per loop: probe column of each edge
    vortex_probe_cols: list  # per requested vortex: probe column
    final_states: list


def _probe_arrays(region, sets):
    rows = [vortex_probe(region, V) for V in sets]
    width_in = max([len(r[0]) for r in rows] + [1])
    width_out = max([len(r[1]) for r in rows] + [1])
    p_in = np.full((len(rows), width_in), -1, dtype=np.int64)
    p_out = np.full((len(rows), width_out), -1, dtype=np.int64)
    for i, (a, b, _) in enumerate(rows):
        p_in[i, : len(a)] = a
        p_out[i, : len(b)] = b
    ok = np.array([r[2] for r in rows], dtype=np.bool_)
    return p_in, p_out, ok


def run_chains(params: SamplerParams, jobs=1) -> ChainSamples:
    region, rep = params.region, params.rep
    index, sets = {}, []

    def probe(V):
        V = frozenset(V)
        if V not in index:
            index[V] = len(sets)
            sets.append(V)
        return index[V]

    loop_rows, sign_rows, loop_probe = [], [], []
    for loop in params.loops:
        if not loop.closed:
            raise ValueError("loops must be closed")
        idx, sg = loop.edge_arrays(region)
        loop_rows.append(idx)
        sign_rows.append(sg)
        loop_probe.append([probe(region.minimal_vortex(int(e))) for e in idx])
    vcols = [probe(V) for V in params.vortices]
    width = max([len(r) for r in loop_rows] + [1])
    loop_edges = np.full((len(loop_rows), width), -1, dtype=np.int64)
    loop_sign = np.zeros((len(loop_rows), width), dtype=np.int64)
    for j, (a, b) in enumerate(zip(loop_rows, sign_rows)):
        loop_edges[j, : len(a)] = a
        loop_sign[j, : len(b)] = b
    if sets:
        p_in, p_out, p_ok = _probe_arrays(region, sets)
    else:
        p_in = p_out = np.full((0, 1), -1, dtype=np.int64)
        p_ok = np.zeros(0, dtype=np.bool_)
    order = sweep_order(region, params.schedule)
    algo = ALGORITHMS[params.algo]

    def one(c):
        st = ChainState.start(region, rep, params.beta, chain_seed(params.seed, c), params.start)
        t = _Tables(st)
        sigma = np.array(st.config.values)
        hol = np.zeros((params.n_samples, len(loop_rows)), dtype=np.int64)
        flags = np.zeros((params.n_samples, len(sets)), dtype=np.bool_)
        done = _kernels.run_chain(sigma, order, np.uint64(st.seed), 0, params.burn_in, params.n_samples, params.thin, algo,
                                  *t.args, loop_edges, loop_sign, p_in, p_out, p_ok, hol, flags)
        final = replace(st, config=st.config.with_values(sigma), sweeps_done=int(done))
        return hol, flags, final

    if jobs > 1 and params.chains > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            res = list(pool.map(one, range(params.chains)))
    else:
        res = [one(c) for c in range(params.chains)]
    return ChainSamples(params, np.stack([r[0] for r in res]), np.stack([r[1] for r in res]), loop_probe, vcols,
                        [r[2] for r in res])


def wilson_record(samples: ChainSamples, j=0) -> MeasurementRecord:
    chi = samples.params.rep.character[samples.holonomy[:, :, j]]
    nb = samples.params.n_batches
    m_re, se_re, ess = batch_means(chi.real, nb)
    m_im, se_im, _ = batch_means(chi.imag, nb)
    return MeasurementRecord(f"wilson[{j}]", int(chi.size), complex(m_re, m_im), se_re, ess, imag_stderr=se_im)


def ngamma_counts(samples: ChainSamples, j=0) -> np.ndarray:
    """N_gamma of every sample (chains x samples)."""
    cols = samples.loop_probe[j]
    return samples.probes[:, :, cols].sum(axis=2)


def ngamma_record(samples: ChainSamples, j=0) -> MeasurementRecord:
    """Empirical pmf of N_gamma with a batch-means error per bin."""
    n_g = ngamma_counts(samples, j)
    ell = len(samples.loop_probe[j])
    nb = samples.params.n_batches
    pmf, se = [], []
    for k in range(ell + 1):
        m, s, _ = batch_means((n_g == k).astype(float), nb)
        pmf.append(m)
        se.append(s)
    mean, se_mean, ess = batch_means(n_g, nb)
    hist = {"k": list(range(ell + 1)), "pmf": pmf, "stderr": se}
    return MeasurementRecord(f"ngamma[{j}]", int(n_g.size), complex(mean, 0.0), se_mean, ess, histogram=hist)


def vortex_record(samples: ChainSamples, i=0) -> MeasurementRecord:
    x = samples.probes[:, :, samples.vortex_probe_cols[i]].astype(float)
    m, s, ess = batch_means(x, samples.params.n_batches)
    return MeasurementRecord(f"vortex[{i}]", int(x.size), complex(m, 0.0), s, ess)


def measure_wilson(params: SamplerParams, jobs=1) -> MeasurementRecord:
    """Re/Im mean of the character of the first loop's holonomy."""
    for loop in params.loops[:1]:
        if not loop.self_avoiding:
            raise ValueError("loop must be self-avoiding")
    return wilson_record(run_chains(params, jobs), 0)


def measure_ngamma(params: SamplerParams, jobs=1) -> MeasurementRecord:
    return ngamma_record(run_chains(params, jobs), 0)


def measure_vortex_event(params: SamplerParams, jobs=1) -> MeasurementRecord:
    """Frequency with which ``params.vortices[0]`` is a vortex of the support."""
    return vortex_record(run_chains(params, jobs), 0)

