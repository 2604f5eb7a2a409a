"""Compiled inner loops for the archive-based searches and the baseline EAs.

Solutions live in bit-packed uint64 word arrays; profit, weight and
last-item index are maintained incrementally across mutations instead of
being recomputed per offspring. The loops run in fixed-size chunks so the
Python wrappers can check wall-clock limits and grow the store arrays
between chunks without giving up compiled speed.

The random stream is a numpy Generator consumed through ``random()`` and
``integers()`` only; numba's Generator bindings advance the underlying
bit generator exactly like numpy does, so the pure-Python reference loop in
``qd.py`` draws identical values for identical seeds.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_CHUNK_DONE = 0
STATUS_TARGET = 1
STATUS_STORE_FULL = 2

_U0 = np.uint64(0)
_U1 = np.uint64(1)


@njit(cache=True)
def _msb64(word):
    """Index of the highest set bit of a nonzero uint64."""
    b = 0
    w = word
    if w >> np.uint64(32):
        w >>= np.uint64(32)
        b += 32
    if w >> np.uint64(16):
        w >>= np.uint64(16)
        b += 16
    if w >> np.uint64(8):
        w >>= np.uint64(8)
        b += 8
    if w >> np.uint64(4):
        w >>= np.uint64(4)
        b += 4
    if w >> np.uint64(2):
        w >>= np.uint64(2)
        b += 2
    if w >> np.uint64(1):
        b += 1
    return b


@njit(cache=True)
def sample_positions(g, n, out):
    """Geometric-gap sampling of flip positions at rate 1/n (see core)."""
    if n == 1:
        out[0] = 0
        return 1
    p = 1.0 / n
    inv_lq = 1.0 / math.log1p(-p)
    cnt = 0
    pos = -1
    while True:
        u = g.random()
        if u <= 0.0:
            break
        gap = math.log(u) * inv_lq
        if pos + 1.0 + gap >= n:
            break
        pos += 1 + int(gap)
        out[cnt] = pos
        cnt += 1
    return cnt


@njit(cache=True)
def _mutate_incremental(scratch, weights, profits, flip_buf, nf, p, w, v):
    """Apply flips to scratch words, returning updated (profit, weight, v)."""
    maxadd = -1
    top_removed = False
    for fi in range(nf):
        pos = flip_buf[fi]
        wi = pos >> 6
        bit = _U1 << np.uint64(pos & 63)
        if scratch[wi] & bit:
            p -= profits[pos]
            w -= weights[pos]
            if pos == v - 1:
                top_removed = True
        else:
            p += profits[pos]
            w += weights[pos]
            if pos >= v:
                maxadd = pos
        scratch[wi] ^= bit
    if maxadd >= 0:
        v = maxadd + 1
    elif top_removed:
        newv = 0
        idx = v - 2
        if idx >= 0:
            wi = idx >> 6
            off = idx & 63
            if off == 63:
                m = ~_U0
            else:
                m = (_U1 << np.uint64(off + 1)) - _U1
            while wi >= 0:
                word = scratch[wi] & m
                if word != _U0:
                    newv = (wi << 6) + _msb64(word) + 1
                    break
                wi -= 1
                m = ~_U0
        v = newv
    return p, w, v


@njit(cache=True)
def insert_evaluated(
    profit_space,
    literal,
    capacity,
    gnum,
    gden,
    rows,
    grid,
    store_words,
    store_p,
    store_w,
    store_v,
    scal,
    xwords,
    p,
    w,
    v,
):
    """Archive insertion of one evaluated solution (both spaces, both modes).

    scal[0] is the store length; the caller must guarantee room for one
    append. Weight space rejects infeasible solutions; otherwise the base
    cell is (v+1, bucket) and the filtering loop offers the base cell's slot
    to every higher row of the same bucket.
    """
    if (not profit_space) and w > capacity:
        return
    keyval = p if profit_space else w
    col = keyval * gden // gnum + 1
    row = v + 1
    nw = store_words.shape[1]
    store_len = scal[0]
    base = grid[row, col]
    if base == 0:
        store_len += 1
        for k in range(nw):
            store_words[store_len, k] = xwords[k]
        store_p[store_len] = p
        store_w[store_len] = w
        store_v[store_len] = v
        grid[row, col] = store_len
        base = store_len
        scal[0] = store_len
    else:
        if profit_space:
            better = w < store_w[base]
        else:
            better = p > store_p[base]
        if better:
            if literal or store_v[base] == v:
                for k in range(nw):
                    store_words[base, k] = xwords[k]
                store_p[base] = p
                store_w[base] = w
                store_v[base] = v
            else:
                store_len += 1
                for k in range(nw):
                    store_words[store_len, k] = xwords[k]
                store_p[store_len] = p
                store_w[store_len] = w
                store_v[store_len] = v
                grid[row, col] = store_len
                base = store_len
                scal[0] = store_len
    for j in range(row + 1, rows + 1):
        cur = grid[j, col]
        if cur != base:
            if cur == 0:
                grid[j, col] = base
            else:
                if profit_space:
                    win = w < store_w[cur]
                else:
                    win = p > store_p[cur]
                if win:
                    grid[j, col] = base


@njit(cache=True)
def qd_chunk(
    g,
    profit_space,
    literal,
    weights,
    profits,
    n,
    capacity,
    gnum,
    gden,
    rows,
    grid,
    store_words,
    store_p,
    store_w,
    store_v,
    best_words,
    scal,
    scratch,
    flip_buf,
    chunk_end,
    target,
    has_target,
    stride,
    traj_evals,
    traj_pop,
    traj_best,
):
    """Run MAP-Elites iterations until chunk_end evaluations, the target
    profit, or a full store. scal = [store_len, best, evals, next_sample_at].
    Returns (samples_written, status)."""
    nw = store_words.shape[1]
    ns = 0
    status = STATUS_CHUNK_DONE
    while scal[2] < chunk_end:
        if scal[0] + 1 >= store_words.shape[0]:
            status = STATUS_STORE_FULL
            break
        parent = 1 + g.integers(0, scal[0])
        for k in range(nw):
            scratch[k] = store_words[parent, k]
        p, w, v = _mutate_incremental(
            scratch, weights, profits, flip_buf,
            sample_positions(g, n, flip_buf),
            store_p[parent], store_w[parent], store_v[parent],
        )
        scal[2] += 1
        insert_evaluated(
            profit_space, literal, capacity, gnum, gden, rows, grid,
            store_words, store_p, store_w, store_v, scal, scratch, p, w, v,
        )
        if w <= capacity and p > scal[1]:
            scal[1] = p
            for k in range(nw):
                best_words[k] = scratch[k]
        if has_target and scal[1] >= target:
            status = STATUS_TARGET
            break
        if scal[2] >= scal[3]:
            traj_evals[ns] = scal[2]
            traj_pop[ns] = scal[0]
            traj_best[ns] = scal[1]
            ns += 1
            scal[3] += stride
    return ns, status


@njit(cache=True)
def replay_inserts(
    profit_space,
    literal,
    capacity,
    gnum,
    gden,
    rows,
    grid,
    store_words,
    store_p,
    store_w,
    store_v,
    scal,
    off_words,
    off_p,
    off_w,
    off_v,
    start,
):
    """Insert a pre-evaluated offspring sequence (for replay verification).

    Returns (next_index, status); a full store pauses before the offending
    offspring so the caller can grow the arrays and resume.
    """
    for t in range(start, off_p.shape[0]):
        if scal[0] + 1 >= store_words.shape[0]:
            return t, STATUS_STORE_FULL
        insert_evaluated(
            profit_space, literal, capacity, gnum, gden, rows, grid,
            store_words, store_p, store_w, store_v, scal,
            off_words[t], off_p[t], off_w[t], off_v[t],
        )
        if off_w[t] <= capacity and off_p[t] > scal[1]:
            scal[1] = off_p[t]
    return off_p.shape[0], STATUS_CHUNK_DONE


@njit(cache=True)
def baseline_chunk(
    g,
    mu,
    weights,
    profits,
    n,
    capacity,
    pop_words,
    pop_p,
    pop_w,
    pop_fit,
    best_words,
    scal,
    scratch,
    flip_buf,
    chunk_end,
    target,
    has_target,
    stride,
    traj_evals,
    traj_pop,
    traj_best,
):
    """(mu+1) EA chunk with capacity-overflow penalty fitness.

    With mu == 1 no parent draw is consumed, so a (1+1) run and a (mu=1)+1
    run see identical random streams. The offspring replaces the first
    worst member whenever its penalized fitness is >= that member's.
    """
    nw = pop_words.shape[1]
    ns = 0
    status = STATUS_CHUNK_DONE
    while scal[2] < chunk_end:
        if mu == 1:
            parent = 0
        else:
            parent = g.integers(0, mu)
        for k in range(nw):
            scratch[k] = pop_words[parent, k]
        p, w, _ = _mutate_incremental(
            scratch, weights, profits, flip_buf,
            sample_positions(g, n, flip_buf),
            pop_p[parent], pop_w[parent], 0,
        )
        scal[2] += 1
        fit = p if w <= capacity else capacity - w
        worst = 0
        fw = pop_fit[0]
        for i in range(1, mu):
            if pop_fit[i] < fw:
                fw = pop_fit[i]
                worst = i
        if fit >= fw:
            for k in range(nw):
                pop_words[worst, k] = scratch[k]
            pop_p[worst] = p
            pop_w[worst] = w
            pop_fit[worst] = fit
        if w <= capacity and p > scal[1]:
            scal[1] = p
            for k in range(nw):
                best_words[k] = scratch[k]
        if has_target and scal[1] >= target:
            status = STATUS_TARGET
            break
        if scal[2] >= scal[3]:
            traj_evals[ns] = scal[2]
            traj_pop[ns] = mu
            traj_best[ns] = scal[1]
            ns += 1
            scal[3] += stride
    return ns, status


def mask_to_words(mask: int, n: int) -> np.ndarray:
    nw = max(1, (n + 63) // 64)
    words = np.zeros(nw, dtype=np.uint64)
    for k in range(nw):
        words[k] = (mask >> (64 * k)) & 0xFFFFFFFFFFFFFFFF
    return words

def words_to_mask(words: np.ndarray) -> int:
    mask = 0
    for k in range(words.shape[0]):
        mask |= int(words[k]) << (64 * k)
    return mask
