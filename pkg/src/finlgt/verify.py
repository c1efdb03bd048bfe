"""Named invariant suites for quick self-checks from the command line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dec import (
    KForm,
    coderivative,
    exterior_derivative,
    int_coderivative,
    pairing,
    poincare_primitive,
    surface_fill,
)
from .gauge import (
    EdgeConfig,
    GaugeTransform,
    SpanningTree,
    action,
    gauge_fix,
    gauge_transform,
    in_gauge,
    wilson_loop,
)
from .groups import build_cyclic, group_by_id, rep_by_id
from .lattice import CubeRegion, OrientedCell, random_loop, rectangle_loop
from .vortex import (
    compatible,
    enumerate_vortices,
    incompatible_minimal_vortices,
    vortex_count_bound,
    vortex_decompose,
)


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def suite_dec(seed=0, n=50):
    rng = np.random.default_rng(seed)
    region = CubeRegion((0, 0, 0, 0), 2)
    out = []
    for gid in ("z2", "z3", "z6"):
        g = group_by_id(gid)
        bad_dd = bad_cc = bad_adj = 0
        for _ in range(n):
            k = int(rng.integers(0, 3))
            f = KForm.random(rng, region, g, k)
            bad_dd += not exterior_derivative(exterior_derivative(f)).is_zero()
            h = KForm.random(rng, region, g, k + 2)
            bad_cc += not coderivative(coderivative(h)).is_zero()
            f1 = KForm.random(rng, region, g, k)
            h1 = rng.integers(-3, 4, region.n_cells(k + 1))
            lhs = pairing(f1, int_coderivative(region, k + 1, h1))
            rhs = pairing(exterior_derivative(f1), h1)
            bad_adj += lhs != rhs
        out.append(Check(f"dd=0 on {gid}", bad_dd == 0, f"{n} forms"))
        out.append(Check(f"coderivative squared = 0 on {gid}", bad_cc == 0, f"{n} forms"))
        out.append(Check(f"<f, delta h> = <df, h> on {gid}", bad_adj == 0, f"{n} pairs"))
    big = CubeRegion((0, 0, 0, 0), 7)
    bad = 0
    for _ in range(20):
        loop = random_loop(rng, big)
        s = surface_fill(loop, big)
        bad += not np.array_equal(int_coderivative(big, 2, s.values), loop.one_form(big))
    out.append(Check("surface fill boundary equals loop", bad == 0, "20 loops on side 7"))
    z3 = build_cyclic(3)
    q = exterior_derivative(KForm.random(rng, region, z3, 1))
    h = poincare_primitive(q)
    out.append(Check("Poincare primitive of an exact 2-form", exterior_derivative(h) == q))
    return out


def suite_gauge(seed=0, n=20):
    rng = np.random.default_rng(seed)
    region = CubeRegion((0, 0, 0, 0), 1)
    loop = rectangle_loop((0, 0, 0, 0), 1, 1, (1, 3))
    out = []
    for rid in ("z2-sign", "z6-k1", "s3-std2", "q8-2d"):
        rep = rep_by_id(rid)
        g = rep.group
        bad = 0
        for _ in range(n):
            s = EdgeConfig.random(rng, region, g)
            t = gauge_transform(s, GaugeTransform.random(rng, region, g))
            bad += (wilson_loop(s, loop, rep) != wilson_loop(t, loop, rep) or action(s, rep) != action(t, rep)
                    or s.support() != t.support())
        out.append(Check(f"gauge invariance for {rid}", bad == 0, f"{n} transforms"))
        tree = SpanningTree(region, root=(1, 0, 1, 0))
        s = EdgeConfig.random(rng, region, g)
        tau, h = gauge_fix(s, tree)
        out.append(Check(f"gauge fix round trip for {rid}", in_gauge(tau, tree) and gauge_transform(tau, h) == s))
    return out


def suite_vortex(seed=0):
    region = CubeRegion((0, 0, 0, 0), 6)
    anchor = region.index(OrientedCell((3, 3, 3, 3), (1, 2)))
    counts = {m: enumerate_vortices(region, m, anchor) for m in (1, 2, 3)}
    out = [Check("one vortex of size 1 at an anchor", counts[1] == 1, str(counts[1])),
           Check("twenty vortices of size 2 at an anchor", counts[2] == 20, str(counts[2])),
           Check("size-3 count within (20e)^3", counts[3] <= vortex_count_bound(3), str(counts[3]))]
    e = region.edge_index((3, 3, 3, 3), 1)
    inc = len(incompatible_minimal_vortices(region, e))
    out.append(Check("incompatible minimal vortices at most 144", inc <= 144, str(inc)))
    rng = np.random.default_rng(seed)
    P = set(rng.choice(region.n_cells(2), 40, replace=False).tolist())
    parts = vortex_decompose(region, P).parts
    ok = set().union(*parts) == P and all(
        compatible(region, a, b) for i, a in enumerate(parts) for b in parts[i + 1:])
    out.append(Check("vortex decomposition is a compatible partition", ok, f"{len(parts)} parts"))
    return out


def suite_factorization(seed=0, n=3):
    from .oracle import factorization_check
    from .errors import PreconditionError

    rng = np.random.default_rng(seed)
    region = CubeRegion((0, 0, 0, 0), 2)
    interior = [e for e in range(region.n_cells(1)) if region.is_interior_edge(e)]
    out = []
    for rid in ("z3-k1", "s3-std2"):
        rep = rep_by_id(rid)
        worst, done = 0.0, 0
        for _ in range(50):
            if done >= n:
                break
            e1 = int(rng.choice(interior))
            P1 = region.minimal_vortex(e1)
            s = np.zeros(region.n_cells(1), dtype=np.int64)
            far = [f for f in range(region.n_cells(1)) if compatible(region, P1, region.minimal_vortex(f))]
            s[int(rng.choice(far))] = int(rng.integers(1, rep.group.order))
            P2 = EdgeConfig(region, rep.group, s).support()
            try:
                res = factorization_check(region, rep, 1.0, P1, P2, "minimal-vortex")
            except PreconditionError:
                continue
            worst = max(worst, res.residual)
            done += 1
        out.append(Check(f"minimal-vortex factorization for {rid}", done > 0 and worst <= 1e-9,
                         f"{done} pairs, worst {worst:.2e}"))
    return out


def suite_oracle_mc(seed=0):
    from .oracle import TallySpec, enumerate_gauge_fixed
    from .sampler import SamplerParams, run_chains, wilson_record

    region = CubeRegion((0, 0, 0, 0), 1)
    rep = rep_by_id("z2-sign")
    loop = rectangle_loop((0, 0, 0, 0), 1, 1, (1, 2))
    exact = enumerate_gauge_fixed(region, rep, spec=TallySpec(loops=[loop])).wilson(0.5).real
    rec = wilson_record(run_chains(SamplerParams(region, rep, 0.5, [loop], n_samples=20000, burn_in=200, thin=2,
                                                 seed=seed)))
    ok = abs(rec.mean.real - exact) <= 3 * rec.stderr
    return [Check("MC Wilson loop within 3 standard errors of the exact value", ok,
                  f"mc {rec.mean.real:.4f} +- {rec.stderr:.4f}, exact {exact:.4f}")]


SUITES = {
    "dec": suite_dec,
    "gauge": suite_gauge,
    "vortex": suite_vortex,
    "factorization": suite_factorization,
    "oracle-mc": suite_oracle_mc,
}


def run_suite(name, seed=0):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed)
