"""Compiled hot paths: genome decoding, stochastic assembly, classification.

Everything here is numba-compiled with ``nogil`` so classification batches can
run on a thread pool.  Randomness comes from a splitmix64 stream derived from
(seed, genome index, run index); results are therefore bit-identical for a
given seed no matter how work is batched or scheduled.

Grid cells hold ``tile*4 + orientation`` (-1 = empty).  Orientation r rotates
a tile clockwise by 90*r degrees, so the edge facing direction ``dir``
(0=N, 1=E, 2=S, 3=W) carries original edge index ``(dir - r) mod 4``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Single-run outcomes.
RUN_BOUNDED = 0
RUN_TRIVIAL = 1
RUN_UNBOUND = 2
RUN_OVERFLOW = 3  # movelist capacity exceeded; unreachable for valid d

# Final classification codes (shared with classify.py).
CLS_DETERMINISTIC = 0
CLS_TRIVIAL = 1
CLS_STERIC = 2
CLS_UNBOUND = 3
CLS_ERROR = 255

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_MASK32 = np.uint64(0xFFFFFFFF)
_U1 = np.uint64(1)


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _stream_state(seed, genome_index, run_index):
    z = _mix64(seed ^ (_GOLDEN * (genome_index + _U1)))
    return _mix64(z ^ (_MIX_A * (np.uint64(run_index) + _U1)))


@njit(inline="always")
def _rng_next(rs):
    rs[0] = rs[0] + _GOLDEN
    return _mix64(rs[0])


@njit(inline="always")
def _rng_below(rs, n):
    # 32-bit multiply-shift; bias is negligible for the tiny n used here.
    return np.int64(((_rng_next(rs) >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32))


# -- one-at-a-time hash --------------------------------------------------------

@njit(inline="always")
def _oat_add(h, key):
    h = (h + key) & _MASK32
    h = (h + ((h << np.uint64(10)) & _MASK32)) & _MASK32
    return h ^ (h >> np.uint64(6))


@njit(inline="always")
def _oat_final(h):
    h = (h + ((h << np.uint64(3)) & _MASK32)) & _MASK32
    h = h ^ (h >> np.uint64(11))
    return (h + ((h << np.uint64(15)) & _MASK32)) & _MASK32


@njit(cache=True, nogil=True)
def oat_hash_bytes(data):
    """32-bit one-at-a-time hash of a uint8 array."""
    h = np.uint64(0)
    for i in range(data.shape[0]):
        h = _oat_add(h, np.uint64(data[i]))
    return np.uint32(_oat_final(h))


# -- assembly ------------------------------------------------------------------

@njit(inline="always")
def _bonds(i, j):
    # labels bond in pairs 1-2, 3-4, ...; 0 is inert
    return i != 0 and j == ((i - 1) ^ 1) + 1


@njit(cache=True, nogil=True)
def _assemble(edges, a, d, strict, seed, genome_index, run_index,
              grid, in_stack, stack, placed):
    """One stochastic assembly on clean work buffers.

    Returns (outcome, n_placed, sp, minr, minc, maxr, maxc).  The caller must
    restore the buffers via _cleanup using placed[:n_placed] and stack[:sp].

    The movelist is a LIFO stack over empty frontier cells with an in-stack
    bitmap preventing duplicate insertion; a popped cell with no consistent
    candidate is dropped but becomes pushable again the next time a tile is
    placed beside it, so assembly always runs until no further tile can bond
    anywhere (or the structure reaches the grid border).
    """
    rs = np.empty(1, np.uint64)
    rs[0] = _stream_state(seed, genome_index, run_index)
    dd = d * d
    half = d >> 1
    center = half * d + half
    grid[center] = 0  # seed tile, orientation 0
    placed[0] = center
    n_placed = 1
    minr = half
    maxr = half
    minc = half
    maxc = half
    nb = np.empty(4, np.int64)
    nb[0] = center - d
    nb[1] = center + 1
    nb[2] = center + d
    nb[3] = center - 1
    for j in range(3, 0, -1):
        q = _rng_below(rs, j + 1)
        t = nb[j]
        nb[j] = nb[q]
        nb[q] = t
    sp = 0
    for j in range(4):
        in_stack[nb[j]] = 1
        stack[sp] = nb[j]
        sp += 1

    while sp > 0:
        sp -= 1
        cell = stack[sp]
        in_stack[cell] = 0
        r = cell // d
        c = cell % d
        # labels presented toward this cell by occupied neighbours (-1 = none)
        p0 = np.int64(-1)
        p1 = np.int64(-1)
        p2 = np.int64(-1)
        p3 = np.int64(-1)
        if r > 0:
            v = grid[cell - d]
            if v >= 0:
                p0 = np.int64(edges[(v >> 2) * 16 + (v & 3) * 4 + 2])
        if c < d - 1:
            v = grid[cell + 1]
            if v >= 0:
                p1 = np.int64(edges[(v >> 2) * 16 + (v & 3) * 4 + 3])
        if r < d - 1:
            v = grid[cell + d]
            if v >= 0:
                p2 = np.int64(edges[(v >> 2) * 16 + (v & 3) * 4 + 0])
        if c > 0:
            v = grid[cell - 1]
            if v >= 0:
                p3 = np.int64(edges[(v >> 2) * 16 + (v & 3) * 4 + 1])

        found = np.int64(-1)
        found_v = np.int64(-1)
        ambiguous = False
        for t in range(a):
            for rt in range(4):
                base = t * 16 + rt * 4
                e0 = np.int64(edges[base])
                e1 = np.int64(edges[base + 1])
                e2 = np.int64(edges[base + 2])
                e3 = np.int64(edges[base + 3])
                bond = False
                ok = True
                if p0 >= 0:
                    if _bonds(e0, p0):
                        bond = True
                    elif strict and e0 != 0 and p0 != 0:
                        ok = False
                if ok and p1 >= 0:
                    if _bonds(e1, p1):
                        bond = True
                    elif strict and e1 != 0 and p1 != 0:
                        ok = False
                if ok and p2 >= 0:
                    if _bonds(e2, p2):
                        bond = True
                    elif strict and e2 != 0 and p2 != 0:
                        ok = False
                if ok and p3 >= 0:
                    if _bonds(e3, p3):
                        bond = True
                    elif strict and e3 != 0 and p3 != 0:
                        ok = False
                if ok and bond:
                    code = (e0 << 24) | (e1 << 16) | (e2 << 8) | e3
                    if found < 0:
                        found = code
                        found_v = t * 4 + rt
                    elif code != found:
                        ambiguous = True
                        break
            if ambiguous:
                break
        if ambiguous:
            return RUN_TRIVIAL, n_placed, sp, minr, minc, maxr, maxc
        if found < 0:
            continue
        if r == 0 or c == 0 or r == d - 1 or c == d - 1:
            return RUN_UNBOUND, n_placed, sp, minr, minc, maxr, maxc
        grid[cell] = np.int16(found_v)
        placed[n_placed] = cell
        n_placed += 1
        if r < minr:
            minr = r
        if r > maxr:
            maxr = r
        if c < minc:
            minc = c
        if c > maxc:
            maxc = c
        m = 0
        if grid[cell - d] < 0 and in_stack[cell - d] == 0:
            nb[m] = cell - d
            m += 1
        if grid[cell + 1] < 0 and in_stack[cell + 1] == 0:
            nb[m] = cell + 1
            m += 1
        if grid[cell + d] < 0 and in_stack[cell + d] == 0:
            nb[m] = cell + d
            m += 1
        if grid[cell - 1] < 0 and in_stack[cell - 1] == 0:
            nb[m] = cell - 1
            m += 1
        for j in range(m - 1, 0, -1):
            q = _rng_below(rs, j + 1)
            t2 = nb[j]
            nb[j] = nb[q]
            nb[q] = t2
        for j in range(m):
            if sp >= dd:
                return RUN_OVERFLOW, n_placed, sp, minr, minc, maxr, maxc
            in_stack[nb[j]] = 1
            stack[sp] = nb[j]
            sp += 1
    return RUN_BOUNDED, n_placed, sp, minr, minc, maxr, maxc


@njit(inline="always")
def _cleanup(grid, in_stack, stack, placed, n_placed, sp):
    for i in range(sp):
        in_stack[stack[i]] = 0
    for i in range(n_placed):
        grid[placed[i]] = -1


@njit(cache=True, nogil=True)
def _hash_region(grid, d, minr, minc, maxr, maxc):
    """Hash the cropped shape: width, height, then (x, y) of each occupied
    cell in row-major order, one byte per value."""
    w = maxc - minc + 1
    h = maxr - minr + 1
    st = np.uint64(0)
    st = _oat_add(st, np.uint64(w))
    st = _oat_add(st, np.uint64(h))
    ncells = 0
    for y in range(h):
        row = (minr + y) * d + minc
        for x in range(w):
            if grid[row + x] >= 0:
                st = _oat_add(st, np.uint64(x))
                st = _oat_add(st, np.uint64(y))
                ncells += 1
    return np.uint32(_oat_final(st)), w, h, ncells


@njit(cache=True, nogil=True)
def _pack_region(grid, d, minr, minc, maxr, maxc, out_words):
    """Pack the cropped occupancy bitmap row-major, LSB-first per word."""
    out_words[:] = np.uint64(0)
    w = maxc - minc + 1
    h = maxr - minr + 1
    bit = 0
    for y in range(h):
        row = (minr + y) * d + minc
        for x in range(w):
            if grid[row + x] >= 0:
                out_words[bit >> 6] |= _U1 << np.uint64(bit & 63)
            bit += 1


@njit(inline="always")
def _class_at(kp, trivial_at, first_unbound, first_mismatch):
    if 0 <= trivial_at < kp:
        return CLS_TRIVIAL
    if 0 <= first_unbound < kp:
        return CLS_UNBOUND
    if 0 <= first_mismatch < kp:
        return CLS_STERIC
    return CLS_DETERMINISTIC


@njit(cache=True, nogil=True)
def _classify_edges(edges, a, d, kmax, hist_k, seed, genome_index, strict,
                    grid, in_stack, stack, placed, run_hash, shape_words):
    """Run up to ``kmax`` redundant assemblies and fold the outcomes.

    Returns (status, trivial_at, first_unbound, first_mismatch, hist_hash,
    width, height, cells).  status != 0 signals a capacity overflow.  For a
    deterministic or steric classification at ``hist_k`` the attributed
    shape is packed into ``shape_words`` (majority shape across the first
    hist_k runs for sterics, smallest hash winning ties).
    """
    trivial_at = np.int64(-1)
    first_unbound = np.int64(-1)
    first_mismatch = np.int64(-1)
    w0 = 0
    h0 = 0
    c0 = 0
    for run in range(kmax):
        outcome, n_placed, sp, minr, minc, maxr, maxc = _assemble(
            edges, a, d, strict, seed, genome_index, run,
            grid, in_stack, stack, placed)
        if outcome == RUN_OVERFLOW:
            _cleanup(grid, in_stack, stack, placed, n_placed, sp)
            return 1, trivial_at, first_unbound, first_mismatch, np.uint32(0), 0, 0, 0
        if outcome == RUN_TRIVIAL:
            _cleanup(grid, in_stack, stack, placed, n_placed, sp)
            trivial_at = run
            break
        if outcome == RUN_UNBOUND:
            if first_unbound < 0:
                first_unbound = run
            run_hash[run] = 0
            _cleanup(grid, in_stack, stack, placed, n_placed, sp)
            continue
        hsh, w, h, nc = _hash_region(grid, d, minr, minc, maxr, maxc)
        run_hash[run] = hsh
        if run == 0:
            _pack_region(grid, d, minr, minc, maxr, maxc, shape_words)
            w0 = w
            h0 = h
            c0 = nc
        elif first_mismatch < 0 and first_unbound != 0 and run_hash[run] != run_hash[0]:
            first_mismatch = run
        _cleanup(grid, in_stack, stack, placed, n_placed, sp)

    hist_cls = _class_at(hist_k, trivial_at, first_unbound, first_mismatch)
    if hist_cls == CLS_DETERMINISTIC:
        return 0, trivial_at, first_unbound, first_mismatch, run_hash[0], w0, h0, c0
    if hist_cls != CLS_STERIC:
        return 0, trivial_at, first_unbound, first_mismatch, np.uint32(0), 0, 0, 0

    # steric: attribute the genome to its majority shape over the first
    # hist_k runs (all bounded here)
    best_hash = np.uint32(0)
    best_count = 0
    for j in range(hist_k):
        hj = run_hash[j]
        cnt = 0
        for l in range(hist_k):
            if run_hash[l] == hj:
                cnt += 1
        if cnt > best_count or (cnt == best_count and hj < best_hash):
            best_count = cnt
            best_hash = hj
    if best_hash == run_hash[0]:
        return 0, trivial_at, first_unbound, first_mismatch, best_hash, w0, h0, c0
    for j in range(1, hist_k):
        if run_hash[j] == best_hash:
            outcome, n_placed, sp, minr, minc, maxr, maxc = _assemble(
                edges, a, d, strict, seed, genome_index, j,
                grid, in_stack, stack, placed)
            hsh, w, h, nc = _hash_region(grid, d, minr, minc, maxr, maxc)
            _pack_region(grid, d, minr, minc, maxr, maxc, shape_words)
            _cleanup(grid, in_stack, stack, placed, n_placed, sp)
            return 0, trivial_at, first_unbound, first_mismatch, best_hash, w, h, nc
    return 0, trivial_at, first_unbound, first_mismatch, best_hash, w0, h0, c0


@njit(inline="always")
def _decode_edges(idx, a, bpl, mask_pos, mask_val, free_pos, bits, labels, edges):
    L = a * 4 * bpl
    for j in range(L):
        bits[j] = 0
    for j in range(mask_pos.shape[0]):
        bits[mask_pos[j]] = mask_val[j]
    for j in range(free_pos.shape[0]):
        bits[free_pos[j]] = np.uint8((idx >> np.uint64(j)) & _U1)
    for te in range(a * 4):
        v = 0
        for j in range(bpl):
            v = (v << 1) | bits[te * bpl + j]
        labels[te] = v
    for t in range(a):
        for rt in range(4):
            for dr in range(4):
                edges[t * 16 + rt * 4 + dr] = np.uint8(labels[t * 4 + ((dr - rt) & 3)])


@njit(cache=True, nogil=True)
def classify_batch(indices, a, bpl, mask_pos, mask_val, free_pos, d, ks,
                   hist_k, seed, strict,
                   out_class, out_hash, out_w, out_h, out_cells, out_shape):
    """Classify a batch of enumeration indices.

    ``ks`` is ascending; out_class[i, q] is the classification the first
    ks[q] runs would have produced (prefix classification: identical
    substreams make it bit-equal to a standalone run at that k).  The
    histogram attribution (hash/shape columns) is taken at ``hist_k``.
    """
    n = indices.shape[0]
    L = a * 4 * bpl
    dd = d * d
    grid = np.full(dd, -1, np.int16)
    in_stack = np.zeros(dd, np.uint8)
    stack = np.empty(dd, np.int64)
    placed = np.empty(dd, np.int64)
    bits = np.empty(L, np.uint8)
    labels = np.empty(a * 4, np.int64)
    edges = np.empty(a * 16, np.uint8)
    kmax = ks[ks.shape[0] - 1]
    run_hash = np.empty(kmax, np.uint32)
    shape_words = np.empty(out_shape.shape[1], np.uint64)
    for i in range(n):
        idx = indices[i]
        _decode_edges(idx, a, bpl, mask_pos, mask_val, free_pos, bits, labels, edges)
        status, trivial_at, first_unbound, first_mismatch, hist_hash, w, h, nc = \
            _classify_edges(edges, a, d, kmax, hist_k, seed, idx, strict,
                            grid, in_stack, stack, placed, run_hash, shape_words)
        if status != 0:
            for q in range(ks.shape[0]):
                out_class[i, q] = CLS_ERROR
            continue
        for q in range(ks.shape[0]):
            out_class[i, q] = _class_at(ks[q], trivial_at, first_unbound,
                                        first_mismatch)
        hist_cls = _class_at(hist_k, trivial_at, first_unbound, first_mismatch)
        if hist_cls == CLS_DETERMINISTIC or hist_cls == CLS_STERIC:
            out_hash[i] = hist_hash
            out_w[i] = np.uint8(w)
            out_h[i] = np.uint8(h)
            out_cells[i] = np.uint16(nc)
            out_shape[i, :] = shape_words
        else:
            out_hash[i] = 0
            out_w[i] = 0
            out_h[i] = 0
            out_cells[i] = 0


@njit(cache=True, nogil=True)
def assemble_single(edges, a, d, seed, genome_index, run_index, strict, out_grid):
    """One assembly run, grid copied out. Returns (outcome, minr, minc, maxr,
    maxc, n_placed)."""
    dd = d * d
    grid = np.full(dd, -1, np.int16)
    in_stack = np.zeros(dd, np.uint8)
    stack = np.empty(dd, np.int64)
    placed = np.empty(dd, np.int64)
    outcome, n_placed, sp, minr, minc, maxr, maxc = _assemble(
        edges, a, d, strict, seed, genome_index, run_index,
        grid, in_stack, stack, placed)
    out_grid[:] = grid
    return outcome, minr, minc, maxr, maxc, n_placed


@njit(cache=True, nogil=True)
def classify_single(edges, a, d, k, seed, genome_index, strict, shape_words):
    """Classify one tile set. Returns (status, cls, hash, w, h, cells)."""
    dd = d * d
    grid = np.full(dd, -1, np.int16)
    in_stack = np.zeros(dd, np.uint8)
    stack = np.empty(dd, np.int64)
    placed = np.empty(dd, np.int64)
    run_hash = np.empty(k, np.uint32)
    status, trivial_at, first_unbound, first_mismatch, hist_hash, w, h, nc = \
        _classify_edges(edges, a, d, k, k, seed, genome_index, strict,
                        grid, in_stack, stack, placed, run_hash, shape_words)
    cls = _class_at(k, trivial_at, first_unbound, first_mismatch)
    return status, cls, hist_hash, w, h, nc


def edges_from_labels(labels: np.ndarray, a: int) -> np.ndarray:
    """In-situ edge table edges[t*16 + orient*4 + dir] from flat N,E,S,W labels."""
    edges = np.empty(a * 16, np.uint8)
    for t in range(a):
        for rt in range(4):
            for dr in range(4):
                edges[t * 16 + rt * 4 + dr] = labels[t * 4 + ((dr - rt) & 3)]
    return edges
