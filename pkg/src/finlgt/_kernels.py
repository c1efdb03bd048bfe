"""Compiled inner loops shared by the sampler and the exact oracle.

Conventions: group elements are int64 indices with identity 0; plaquette
holonomy is ``f0 * f1 * f2^-1 * f3^-1`` over ``plaq_edges[p]``.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
S2 = np.uint64(2)
INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------- counter-based RNG

@njit(cache=True, inline="always")
def splitmix64(x):
    z = x + GOLDEN
    z = (z ^ (z >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    return z ^ (z >> S31)


@njit(cache=True, inline="always")
def counter_uniform(key, sweep, edge, draw):
    """Uniform double in [0, 1) keyed by (key, sweep, edge, draw).

    ``key`` is ``splitmix64(seed)``, precomputed once per chain.
    """
    h = splitmix64(key ^ np.uint64(sweep))
    h = splitmix64(h ^ ((np.uint64(edge) << S2) | np.uint64(draw)))
    return np.float64(h >> S11) * INV53


@njit(cache=True)
def counter_uniform_array(seed, sweep, edges, draw):
    key = splitmix64(np.uint64(seed))
    out = np.empty(edges.size)
    for i in range(edges.size):
        out[i] = counter_uniform(key, sweep, edges[i], draw)
    return out


# ---------------------------------------------------------------- local updates

@njit(cache=True, inline="always")
def plaquette_hol(sigma, p, plaq_edges, mul, inv):
    a = mul[sigma[plaq_edges[p, 0]], sigma[plaq_edges[p, 1]]]
    a = mul[a, inv[sigma[plaq_edges[p, 2]]]]
    return mul[a, inv[sigma[plaq_edges[p, 3]]]]


@njit(cache=True)
def edge_weights(sigma, e, edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w):
    """Unnormalised conditional weights of every value of edge ``e``."""
    n = mul.shape[0]
    for g in range(n):
        w[g] = 1.0
    for s in range(edge_plaq.shape[1]):
        p = edge_plaq[e, s]
        if p < 0:
            break
        k = edge_pos[e, s]
        left = 0
        for t in range(k):
            v = sigma[plaq_edges[p, t]]
            if t >= 2:
                v = inv[v]
            left = mul[left, v]
        right = 0
        for t in range(k + 1, 4):
            v = sigma[plaq_edges[p, t]]
            if t >= 2:
                v = inv[v]
            right = mul[right, v]
        for g in range(n):
            x = g if k < 2 else inv[g]
            w[g] *= phi[mul[mul[left, x], right]]


@njit(cache=True, inline="always")
def _heatbath(sigma, e, u, edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w):
    edge_weights(sigma, e, edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)
    n = mul.shape[0]
    total = 0.0
    for g in range(n):
        total += w[g]
    target = u * total
    acc = 0.0
    pick = n - 1
    for g in range(n):
        acc += w[g]
        if target < acc:
            pick = g
            break
    sigma[e] = pick


@njit(cache=True, inline="always")
def _metropolis(sigma, e, u1, u2, edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w):
    n = mul.shape[0]
    g = min(int(u1 * n), n - 1)
    cur = sigma[e]
    if g == cur:
        return
    edge_weights(sigma, e, edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)
    if u2 * w[cur] < w[g]:
        sigma[e] = g


@njit(cache=True, nogil=True)
def run_sweeps(sigma, order, seed, sweep0, n_sweeps, algo, edge_plaq, edge_pos, plaq_edges, mul, inv, phi):
    """Apply ``n_sweeps`` sweeps in edge ``order``; algo 0 heat bath, 1 Metropolis."""
    key = splitmix64(np.uint64(seed))
    w = np.empty(mul.shape[0])
    for s in range(n_sweeps):
        sw = sweep0 + s
        for i in range(order.size):
            e = order[i]
            if algo == 0:
                _heatbath(sigma, e, counter_uniform(key, sw, e, 0), edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)
            else:
                _metropolis(sigma, e, counter_uniform(key, sw, e, 0), counter_uniform(key, sw, e, 1),
                            edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)


@njit(cache=True)
def single_update(sigma, e, seed, sweep, algo, edge_plaq, edge_pos, plaq_edges, mul, inv, phi):
    key = splitmix64(np.uint64(seed))
    w = np.empty(mul.shape[0])
    if algo == 0:
        _heatbath(sigma, e, counter_uniform(key, sweep, e, 0), edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)
    else:
        _metropolis(sigma, e, counter_uniform(key, sweep, e, 0), counter_uniform(key, sweep, e, 1),
                    edge_plaq, edge_pos, plaq_edges, mul, inv, phi, w)


@njit(cache=True, inline="always")
def _loop_product(sigma, loop_edges, loop_sign, j, mul, inv):
    acc = 0
    for t in range(loop_edges.shape[1]):
        e = loop_edges[j, t]
        if e < 0:
            break
        v = sigma[e]
        if loop_sign[j, t] < 0:
            v = inv[v]
        acc = mul[acc, v]
    return acc


@njit(cache=True, inline="always")
def _probe_present(sigma, q, probe_in, probe_out, probe_ok, plaq_edges, mul, inv):
    if not probe_ok[q]:
        return False
    for t in range(probe_in.shape[1]):
        p = probe_in[q, t]
        if p < 0:
            break
        if plaquette_hol(sigma, p, plaq_edges, mul, inv) == 0:
            return False
    for t in range(probe_out.shape[1]):
        p = probe_out[q, t]
        if p < 0:
            break
        if plaquette_hol(sigma, p, plaq_edges, mul, inv) != 0:
            return False
    return True


@njit(cache=True, nogil=True)
def run_chain(sigma, order, seed, sweep0, burn_in, n_meas, thin, algo, edge_plaq, edge_pos, plaq_edges, mul, inv, phi,
              loop_edges, loop_sign, probe_in, probe_out, probe_ok, hol_out, probe_out_flags):
    """Burn in, then record loop holonomies and probe flags every ``thin`` sweeps.

    Returns the number of sweeps performed.
    """
    run_sweeps(sigma, order, seed, sweep0, burn_in, algo, edge_plaq, edge_pos, plaq_edges, mul, inv, phi)
    sw = sweep0 + burn_in
    for m in range(n_meas):
        run_sweeps(sigma, order, seed, sw, thin, algo, edge_plaq, edge_pos, plaq_edges, mul, inv, phi)
        sw += thin
        for j in range(loop_edges.shape[0]):
            hol_out[m, j] = _loop_product(sigma, loop_edges, loop_sign, j, mul, inv)
        for q in range(probe_ok.size):
            probe_out_flags[m, q] = _probe_present(sigma, q, probe_in, probe_out, probe_ok, plaq_edges, mul, inv)
    return sw - sweep0


# ---------------------------------------------------------------- exact enumeration

@njit(cache=True, inline="always")
def _popcount_words_subset(supp, mask, q):
    for w in range(supp.size):
        if (supp[w] & mask[q, w]) != mask[q, w]:
            return False
    return True


@njit(cache=True, inline="always")
def _words_disjoint(supp, mask, q):
    for w in range(supp.size):
        if (supp[w] & mask[q, w]) != 0:
            return False
    return True


@njit(cache=True, inline="always")
def _words_equal(supp, mask, q):
    for w in range(supp.size):
        if supp[w] != mask[q, w]:
            return False
    return True


@njit(cache=True, nogil=True)
def enumerate_tally(free_edges, n_edges, top_value, mul, inv, plaq_edges, edge_plaq, cls, n_cls, strides,
                    loop_edges, loop_sign, loop_probe, probe_in, probe_nbr, probe_ok,
                    ev_req, ev_forb, ev_avoid, query_masks,
                    count_bin, loop_hol, ngamma, event_cnt, query_cnt):
    """Visit every assignment of ``free_edges`` (others fixed to identity) in
    odometer order and accumulate integer tallies per action bin.

    When ``top_value >= 0`` the last free edge is pinned to that value (one
    shard of the full walk).  Returns the number of configurations visited.
    """
    n = mul.shape[0]
    n_p = plaq_edges.shape[0]
    n_words = (n_p + 63) // 64
    sigma = np.zeros(n_edges, dtype=np.int64)
    k = free_edges.size
    n_digits = k
    if top_value >= 0 and k > 0:
        sigma[free_edges[k - 1]] = top_value
        n_digits = k - 1
    hol = np.empty(n_p, dtype=np.int64)
    cls_cnt = np.zeros(n_cls + 1, dtype=np.int64)
    supp = np.zeros(n_words, dtype=np.uint64)
    one = np.uint64(1)
    for p in range(n_p):
        h = plaquette_hol(sigma, p, plaq_edges, mul, inv)
        hol[p] = h
        cls_cnt[cls[h]] += 1
        if h != 0:
            supp[p >> 6] |= one << np.uint64(p & 63)
    n_probe = probe_ok.size
    present = np.zeros(max(n_probe, 1), dtype=np.bool_)
    visited = 0
    while True:
        # ---- tally current configuration
        b = 0
        for c in range(1, n_cls + 1):
            b += cls_cnt[c] * strides[c - 1]
        count_bin[b] += 1
        for q in range(n_probe):
            present[q] = probe_ok[q] and _popcount_words_subset(supp, probe_in, q) and _words_disjoint(supp, probe_nbr, q)
        for j in range(loop_edges.shape[0]):
            g = _loop_product(sigma, loop_edges, loop_sign, j, mul, inv)
            loop_hol[b, j, g] += 1
            c = 0
            for t in range(loop_probe.shape[1]):
                q = loop_probe[j, t]
                if q < 0:
                    break
                if present[q]:
                    c += 1
            ngamma[b, j, c] += 1
        for v in range(ev_req.shape[0]):
            ok = _words_disjoint(supp, ev_avoid, v)
            if ok:
                for t in range(ev_req.shape[1]):
                    q = ev_req[v, t]
                    if q < 0:
                        break
                    if not present[q]:
                        ok = False
                        break
            if ok:
                for t in range(ev_forb.shape[1]):
                    q = ev_forb[v, t]
                    if q < 0:
                        break
                    if present[q]:
                        ok = False
                        break
            if ok:
                event_cnt[b, v] += 1
        for v in range(query_masks.shape[0]):
            if _words_equal(supp, query_masks, v):
                query_cnt[b, v] += 1
        visited += 1
        # ---- odometer increment with incremental plaquette updates
        j = 0
        while j < n_digits:
            e = free_edges[j]
            nv = sigma[e] + 1
            carry = nv == n
            sigma[e] = 0 if carry else nv
            for s in range(edge_plaq.shape[1]):
                p = edge_plaq[e, s]
                if p < 0:
                    break
                h = plaquette_hol(sigma, p, plaq_edges, mul, inv)
                old = hol[p]
                if h != old:
                    cls_cnt[cls[old]] -= 1
                    cls_cnt[cls[h]] += 1
                    if (old == 0) != (h == 0):
                        supp[p >> 6] ^= one << np.uint64(p & 63)
                    hol[p] = h
            if not carry:
                break
            j += 1
        if j == n_digits:
            break
    return visited


# ---------------------------------------------------------------- support-restricted search

@njit(cache=True, inline="always")
def _assign(e, g, val, unk, trail, tpos, queue, qpos, edge_plaq):
    val[e] = g
    trail[tpos] = e
    tpos += 1
    for s in range(edge_plaq.shape[1]):
        p = edge_plaq[e, s]
        if p < 0:
            break
        unk[p] -= 1
        queue[qpos] = p
        qpos += 1
    return tpos, qpos


@njit(cache=True, nogil=True)
def support_search(n_edges, fixed, in_p, plaq_edges, edge_plaq, mul, inv, out):
    """All edge configurations with ``val = 0`` on ``fixed`` edges whose
    plaquette support is exactly ``in_p``.

    Solutions are written to ``out`` (rows) until it is full; the total
    count is returned either way.
    """
    n = mul.shape[0]
    n_p = plaq_edges.shape[0]
    val = np.full(n_edges, -1, dtype=np.int64)
    unk = np.full(n_p, 4, dtype=np.int64)
    trail = np.empty(n_edges, dtype=np.int64)
    queue = np.empty(n_edges * 6 + n_p + 8, dtype=np.int64)
    dec_edge = np.empty(n_edges, dtype=np.int64)
    dec_val = np.empty(n_edges, dtype=np.int64)
    dec_tpos = np.empty(n_edges, dtype=np.int64)
    depth = 0
    tpos = 0
    qpos = 0
    for e in range(n_edges):
        if fixed[e]:
            tpos, qpos = _assign(e, 0, val, unk, trail, tpos, queue, qpos, edge_plaq)
    for p in range(n_p):
        queue[qpos] = p
        qpos += 1
    base_tpos = tpos
    found = 0
    while True:
        # ---- propagate
        ok = True
        while qpos > 0 and ok:
            qpos -= 1
            p = queue[qpos]
            u = unk[p]
            if u == 0:
                h = plaquette_hol(val, p, plaq_edges, mul, inv)
                if in_p[p]:
                    ok = h != 0
                else:
                    ok = h == 0
            elif u == 1 and not in_p[p]:
                kk = 0
                for t in range(4):
                    if val[plaq_edges[p, t]] < 0:
                        kk = t
                left = 0
                for t in range(kk):
                    v = val[plaq_edges[p, t]]
                    if t >= 2:
                        v = inv[v]
                    left = mul[left, v]
                right = 0
                for t in range(kk + 1, 4):
                    v = val[plaq_edges[p, t]]
                    if t >= 2:
                        v = inv[v]
                    right = mul[right, v]
                x = mul[inv[left], inv[right]]
                if kk >= 2:
                    x = inv[x]
                tpos, qpos = _assign(plaq_edges[p, kk], x, val, unk, trail, tpos, queue, qpos, edge_plaq)
        if ok:
            # ---- choose a branching edge: unknown edge of the flat plaquette
            # with the fewest unknowns, else any unknown edge
            best_p = -1
            best_u = 5
            for p in range(n_p):
                u = unk[p]
                if u >= 2 and not in_p[p] and u < best_u:
                    best_u = u
                    best_p = p
                    if u == 2:
                        break
            pick = -1
            if best_p >= 0:
                for t in range(4):
                    if val[plaq_edges[best_p, t]] < 0:
                        pick = plaq_edges[best_p, t]
                        break
            else:
                for e in range(n_edges):
                    if val[e] < 0:
                        pick = e
                        break
            if pick < 0:
                if found < out.shape[0]:
                    for e in range(n_edges):
                        out[found, e] = val[e]
                found += 1
                ok = False
            else:
                dec_edge[depth] = pick
                dec_val[depth] = 0
                dec_tpos[depth] = tpos
                depth += 1
                tpos, qpos = _assign(pick, 0, val, unk, trail, tpos, queue, qpos, edge_plaq)
                continue
        # ---- backtrack
        qpos = 0
        advanced = False
        while depth > 0:
            d = depth - 1
            while tpos > dec_tpos[d]:
                tpos -= 1
                e = trail[tpos]
                val[e] = -1
                for s in range(edge_plaq.shape[1]):
                    p = edge_plaq[e, s]
                    if p < 0:
                        break
                    unk[p] += 1
            nv = dec_val[d] + 1
            if nv < n:
                dec_val[d] = nv
                tpos, qpos = _assign(dec_edge[d], nv, val, unk, trail, tpos, queue, qpos, edge_plaq)
                advanced = True
                break
            depth -= 1
        if not advanced:
            break
    return found


# ---------------------------------------------------------------- Z2 Gray-code walks

@njit(cache=True, inline="always")
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True, inline="always")
def _ctz(i):
    j = 0
    while (i & 1) == 0:
        i >>= 1
        j += 1
    return j


@njit(cache=True, nogil=True)
def gray_walk_z2(flip, plaq_bits, loop_bits, hist):
    """Visit all ``2**len(flip)`` configurations of a Z2 field in Gray-code
    order.  ``flip[e]`` is the set of plaquette bits (low word) toggled by
    edge ``e``; ``loop_bits`` selects loop-parity bits.  ``hist[k, s]``
    counts configurations with ``k`` excited plaquettes and loop parity
    ``s``."""
    state = np.uint64(0)
    n = flip.size
    hist[0, 0] += 1
    for i in range(1, 1 << n):
        state ^= flip[_ctz(i)]
        k = _popcount64(state & plaq_bits)
        s = _popcount64(state & loop_bits) & np.uint64(1)
        hist[k, s] += 1


@njit(cache=True, nogil=True)
def gray_preimage_counts(image, counts):
    """``counts[key]`` = number of inputs mapped to ``key`` by the GF(2)-linear
    map whose basis images are ``image``; all ``2**len(image)`` inputs."""
    state = np.int64(0)
    n = image.size
    counts[0] += 1
    for i in range(1, 1 << n):
        state ^= image[_ctz(i)]
        counts[state] += 1
