# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def decode_runs(frame_on, onset_on, bint gated=True):
    cdef const unsigned char[:, ::1] f = np.ascontiguousarray(frame_on, dtype=np.uint8)
    cdef const unsigned char[:, ::1] o = np.ascontiguousarray(onset_on, dtype=np.uint8)
    cdef Py_ssize_t n_frames = f.shape[0], n_pitches = f.shape[1]
    cdef Py_ssize_t p, t, start, n = 0
    # every run needs at least one active frame and one inactive separator
    cdef cnp.int64_t[:, ::1] out = np.empty(((n_frames + 1) // 2 * n_pitches + 1, 3), dtype=np.int64)
    for p in range(n_pitches):
        start = -1
        for t in range(n_frames):
            if f[t, p]:
                if start < 0 and (not gated or o[t, p]):
                    start = t
            elif start >= 0:
                out[n, 0] = p
                out[n, 1] = start
                out[n, 2] = t
                n += 1
                start = -1
        if start >= 0:
            out[n, 0] = p
            out[n, 1] = start
            out[n, 2] = n_frames
            n += 1
    return np.asarray(out[:n]).copy()


def max_bipartite_matching(Py_ssize_t n_left, Py_ssize_t n_right, indptr, indices):
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    match_left = np.full(n_left, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] match_l = match_left
    cdef cnp.int64_t[::1] match_r = np.full(n_right, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] seen = np.full(n_right, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] it = np.zeros(n_left, dtype=np.int64)
    cdef cnp.int64_t[::1] stack_l = np.zeros(n_left + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] stack_v = np.zeros(n_left + 1, dtype=np.int64)
    cdef Py_ssize_t u, depth, x, v, w, k
    for u in range(n_left):
        depth = 0
        stack_l[0] = u
        it[u] = ptr[u]
        while depth >= 0:
            x = stack_l[depth]
            if it[x] < ptr[x + 1]:
                v = idx[it[x]]
                it[x] += 1
                if seen[v] == u:
                    continue
                seen[v] = u
                stack_v[depth] = v
                w = match_r[v]
                if w < 0:
                    for k in range(depth + 1):
                        match_l[stack_l[k]] = stack_v[k]
                        match_r[stack_v[k]] = stack_l[k]
                    break
                depth += 1
                stack_l[depth] = w
                it[w] = ptr[w]
            else:
                depth -= 1
    return match_left
