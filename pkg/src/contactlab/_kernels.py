"""Numba kernels shared by the public simulation API and the batch drivers.

Events are stored as four parallel arrays sorted by time:
``times`` (float64), ``kinds`` (int8), ``src`` and ``dst`` (int64).
For a cross or an up-flip ``src == dst`` is the vertex.

Randomness comes from a counter-based hash (SplitMix64 finaliser) keyed by
``(seed, replica, kind, a, b, attempt)``; draw ``c`` of a stream is a pure
function of the key and ``c``, so streams can be generated in any order.
"""

import math

import numpy as np
from numba import njit

CROSS = 0
ARROW = 1
UP = 2
BERNOULLI = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, replica, kind, a, b, attempt):
    k = mix64(np.uint64(seed) + _GOLDEN)
    k = mix64(k ^ (np.uint64(replica) * _M1 + _GOLDEN))
    k = mix64(k ^ (np.uint64(kind) * _M2 + _GOLDEN))
    k = mix64(k ^ (np.uint64(a) * _M1 + _M2))
    k = mix64(k ^ (np.uint64(b) * _M2 + _M1))
    k = mix64(k ^ (np.uint64(attempt) + _GOLDEN))
    return k


@njit(cache=True, inline="always")
def uniform(key, counter):
    z = mix64(key + (np.uint64(counter) + np.uint64(1)) * _GOLDEN)
    z = mix64(z ^ key)
    return (float(z >> _S11) + 0.5) * _INV53


@njit(cache=True)
def _grow(arr, size):
    out = np.empty(size, arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _append_stream(times, kinds, src, dst, n, key, rate, t0, t1, kind, a, b):
    """Append one Poisson(rate) stream on (t0, t1); returns the new fill count."""
    if rate <= 0.0:
        return times, kinds, src, dst, n
    t = t0
    c = 0
    while True:
        t += -math.log(uniform(key, c)) / rate
        c += 1
        if t >= t1:
            break
        if n == times.shape[0]:
            size = 2 * n + 16
            times = _grow(times, size)
            kinds = _grow(kinds, size)
            src = _grow(src, size)
            dst = _grow(dst, size)
        times[n] = t
        kinds[n] = kind
        src[n] = a
        dst[n] = b
        n += 1
    return times, kinds, src, dst, n


@njit(cache=True)
def generate_events(n_vertices, esrc, edst, lam, up_rate, t0, t1, seed, replica):
    """Crosses (rate 1) per vertex, arrows (rate lam) per directed edge and
    optional up-flips (rate up_rate) per vertex, merged in time order.

    Regenerates with a bumped attempt counter on an exact time tie.
    """
    span = t1 - t0
    expected = span * (n_vertices * (1.0 + up_rate) + lam * esrc.shape[0])
    cap = int(expected + 6.0 * math.sqrt(expected + 1.0)) + 16
    attempt = 0
    while True:
        times = np.empty(cap, np.float64)
        kinds = np.empty(cap, np.int8)
        src = np.empty(cap, np.int64)
        dst = np.empty(cap, np.int64)
        n = 0
        for v in range(n_vertices):
            key = stream_key(seed, replica, CROSS, v, v, attempt)
            times, kinds, src, dst, n = _append_stream(
                times, kinds, src, dst, n, key, 1.0, t0, t1, CROSS, v, v)
            if up_rate > 0.0:
                key = stream_key(seed, replica, UP, v, v, attempt)
                times, kinds, src, dst, n = _append_stream(
                    times, kinds, src, dst, n, key, up_rate, t0, t1, UP, v, v)
        if lam > 0.0:
            for e in range(esrc.shape[0]):
                key = stream_key(seed, replica, ARROW, esrc[e], edst[e], attempt)
                times, kinds, src, dst, n = _append_stream(
                    times, kinds, src, dst, n, key, lam, t0, t1, ARROW,
                    esrc[e], edst[e])
        order = np.argsort(times[:n], kind="mergesort")
        times = times[:n][order]
        tie = False
        for i in range(1, n):
            if times[i] == times[i - 1]:
                tie = True
                break
        if not tie:
            return times, kinds[:n][order], src[:n][order], dst[:n][order]
        attempt += 1


@njit(cache=True)
def bernoulli_bits(n_vertices, members, rho, seed, replica):
    out = np.zeros(n_vertices, np.uint8)
    for v in members:
        key = stream_key(seed, replica, BERNOULLI, v, v, 0)
        if uniform(key, 0) < rho:
            out[v] = 1
    return out


@njit(cache=True)
def evolve_range(times, kinds, src, dst, state0, i_lo, i_hi, groups, use_groups):
    """Process events ``i_lo <= i < i_hi`` from ``state0``.

    Returns the final state and the flip records (time, vertex, new value).
    Arrows whose endpoints carry different ``groups`` labels are skipped when
    ``use_groups`` is set.
    """
    state = state0.copy()
    m = max(i_hi - i_lo, 0)
    ftime = np.empty(m, np.float64)
    fvert = np.empty(m, np.int64)
    fval = np.empty(m, np.uint8)
    nf = 0
    for i in range(i_lo, i_hi):
        k = kinds[i]
        if k == CROSS:
            v = src[i]
            if state[v] == 1:
                state[v] = 0
                ftime[nf] = times[i]
                fvert[nf] = v
                fval[nf] = 0
                nf += 1
        elif k == ARROW:
            u = src[i]
            w = dst[i]
            if state[u] == 1 and state[w] == 0:
                if use_groups and groups[u] != groups[w]:
                    continue
                state[w] = 1
                ftime[nf] = times[i]
                fvert[nf] = w
                fval[nf] = 1
                nf += 1
        else:
            v = src[i]
            if state[v] == 0:
                state[v] = 1
                ftime[nf] = times[i]
                fvert[nf] = v
                fval[nf] = 1
                nf += 1
    return state, ftime[:nf], fvert[:nf], fval[:nf]


@njit(cache=True)
def backward_range(times, kinds, src, dst, n_vertices, y, i_lo, i_hi, groups,
                   use_groups):
    """Backward exploration from vertex ``y`` through events ``i_hi-1 .. i_lo``.

    Returns the active set at the lower end and the time of the cross that
    emptied it (``-inf`` if the set survives).
    """
    active = np.zeros(n_vertices, np.bool_)
    active[y] = True
    count = 1
    for i in range(i_hi - 1, i_lo - 1, -1):
        k = kinds[i]
        if k == CROSS:
            v = src[i]
            if active[v]:
                active[v] = False
                count -= 1
                if count == 0:
                    return active, times[i]
        elif k == ARROW:
            u = src[i]
            w = dst[i]
            if active[w] and not active[u]:
                if use_groups and groups[u] != groups[w]:
                    continue
                active[u] = True
                count += 1
    return active, -np.inf


@njit(cache=True)
def extinction_run(n_vertices, esrc, edst, lam, x, horizon, seed, replica):
    """Extinction time of the process started from the single infection ``x``
    on (0, horizon); returns -1.0 when still alive at the horizon."""
    times, kinds, src, dst = generate_events(
        n_vertices, esrc, edst, lam, 0.0, 0.0, horizon, seed, replica)
    state = np.zeros(n_vertices, np.uint8)
    state[x] = 1
    alive = 1
    for i in range(times.shape[0]):
        if kinds[i] == CROSS:
            v = src[i]
            if state[v] == 1:
                state[v] = 0
                alive -= 1
                if alive == 0:
                    return times[i]
        else:
            u = src[i]
            w = dst[i]
            if state[u] == 1 and state[w] == 0:
                state[w] = 1
                alive += 1
    return -1.0


@njit(cache=True)
def final_state_counts(n_vertices, esrc, edst, lam, state0, t, seed, first,
                       n_rep):
    """Histogram of final configurations (bit ``v`` = vertex ``v``) over
    replicas ``first .. first + n_rep - 1``."""
    counts = np.zeros(1 << n_vertices, np.int64)
    dummy = np.zeros(1, np.int64)
    for r in range(first, first + n_rep):
        times, kinds, src, dst = generate_events(
            n_vertices, esrc, edst, lam, 0.0, 0.0, t, seed, r)
        state, _, _, _ = evolve_range(
            times, kinds, src, dst, state0, 0, times.shape[0], dummy, False)
        idx = 0
        for v in range(n_vertices):
            if state[v] == 1:
                idx |= 1 << v
        counts[idx] += 1
    return counts


@njit(cache=True)
def _heap_push(ht, hid, size, t, ident):
    i = size
    ht[i] = t
    hid[i] = ident
    while i > 0:
        p = (i - 1) >> 1
        if ht[p] <= ht[i]:
            break
        ht[p], ht[i] = ht[i], ht[p]
        hid[p], hid[i] = hid[i], hid[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(ht, hid, size):
    t = ht[0]
    ident = hid[0]
    size -= 1
    ht[0] = ht[size]
    hid[0] = hid[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        if left + 1 < size and ht[left + 1] < ht[left]:
            c = left + 1
        if ht[i] <= ht[c]:
            break
        ht[c], ht[i] = ht[i], ht[c]
        hid[c], hid[i] = hid[i], hid[c]
        i = c
    return t, ident, size


@njit(cache=True)
def extinction_run_lazy(n_vertices, indptr, out_edges, esrc, edst, lam, x,
                        horizon, seed, replica):
    """Same result as :func:`extinction_run`, drawing only the clocks of
    infected vertices and their outgoing arrows.

    Each stream is advanced from time 0 with the same gap arithmetic as the
    eager generator, so event times agree bit for bit (the eager generator's
    tie redraw is not mirrored; ties have probability zero).
    """
    n_ent = n_vertices + esrc.shape[0]
    keys = np.zeros(n_ent, np.uint64)
    keyed = np.zeros(n_ent, np.bool_)
    counter = np.zeros(n_ent, np.int64)
    last = np.zeros(n_ent, np.float64)
    scheduled = np.zeros(n_ent, np.bool_)
    cap = 16
    ht = np.empty(cap, np.float64)
    hid = np.empty(cap, np.int64)
    size = 0
    state = np.zeros(n_vertices, np.uint8)

    # schedule everything attached to x at time 0
    pending = np.empty(1 + indptr[x + 1] - indptr[x], np.int64)
    alive = 1
    state[x] = 1
    now = 0.0
    np_ = 0
    pending[np_] = x
    np_ += 1
    for j in range(indptr[x], indptr[x + 1]):
        pending[np_] = n_vertices + out_edges[j]
        np_ += 1
    while True:
        for j in range(np_):
            ent = pending[j]
            if scheduled[ent]:
                continue
            if not keyed[ent]:
                if ent < n_vertices:
                    keys[ent] = stream_key(seed, replica, CROSS, ent, ent, 0)
                else:
                    e = ent - n_vertices
                    keys[ent] = stream_key(seed, replica, ARROW, esrc[e], edst[e], 0)
                keyed[ent] = True
            rate = 1.0 if ent < n_vertices else lam
            if rate <= 0.0:
                continue
            t = last[ent]
            while True:
                t += -math.log(uniform(keys[ent], counter[ent])) / rate
                counter[ent] += 1
                if t > now:
                    break
            last[ent] = t
            if t >= horizon:
                continue
            if size == cap:
                cap *= 2
                ht = _grow(ht, cap)
                hid = _grow(hid, cap)
            size = _heap_push(ht, hid, size, t, ent)
            scheduled[ent] = True
        np_ = 0
        if size == 0:
            return -1.0
        now, ent, size = _heap_pop(ht, hid, size)
        scheduled[ent] = False
        if ent < n_vertices:
            # a cross is only ever scheduled while its vertex is infected
            state[ent] = 0
            alive -= 1
            if alive == 0:
                return now
        else:
            e = ent - n_vertices
            u = esrc[e]
            w = edst[e]
            if state[u] == 0:
                continue
            if state[w] == 0:
                state[w] = 1
                alive += 1
                need = 2 + indptr[w + 1] - indptr[w]
                if pending.shape[0] < need:
                    pending = np.empty(need, np.int64)
                pending[np_] = w
                np_ += 1
                for j in range(indptr[w], indptr[w + 1]):
                    pending[np_] = n_vertices + out_edges[j]
                    np_ += 1
            pending[np_] = ent
            np_ += 1


@njit(cache=True)
def replay_states(initial, flip_vertices, flip_values, cuts, vertices):
    """Row ``j`` is the state on ``vertices`` after the first ``cuts[j]`` flips."""
    state = initial.copy()
    out = np.empty((cuts.shape[0], vertices.shape[0]), np.uint8)
    done = 0
    for j in range(cuts.shape[0]):
        for i in range(done, cuts[j]):
            state[flip_vertices[i]] = flip_values[i]
        done = cuts[j]
        for k in range(vertices.shape[0]):
            out[j, k] = state[vertices[k]]
    return out
