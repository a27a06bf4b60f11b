"""Pure-Python kernels. Mirrors ``_ckernels.pyx`` line for line."""

import numpy as np


def decode_runs(frame_on, onset_on, gated=True):
    """Segment thresholded frame activity into notes.

    ``frame_on``/``onset_on`` are T x P uint8 masks. Returns an (n, 3) int64
    array of ``(pitch_index, start_frame, stop_frame)`` with ``stop``
    exclusive, sorted by pitch then start.
    """
    frame_on = np.ascontiguousarray(frame_on, dtype=np.uint8)
    onset_on = np.ascontiguousarray(onset_on, dtype=np.uint8)
    n_frames, n_pitches = frame_on.shape
    frame_cols = frame_on.T.tolist()
    onset_cols = onset_on.T.tolist()
    out = []
    for p in range(n_pitches):
        fcol = frame_cols[p]
        ocol = onset_cols[p]
        start = -1
        for t in range(n_frames):
            if fcol[t]:
                if start < 0 and (not gated or ocol[t]):
                    start = t
            elif start >= 0:
                out.append((p, start, t))
                start = -1
        if start >= 0:
            out.append((p, start, n_frames))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def max_bipartite_matching(n_left, n_right, indptr, indices):
    """Maximum-cardinality matching by repeated augmenting-path search.

    The graph is given in CSR form: left vertex ``u`` is adjacent to
    ``indices[indptr[u]:indptr[u + 1]]``. Returns ``match_left`` with the
    matched right vertex per left vertex, or -1.
    """
    indptr = np.asarray(indptr, dtype=np.int64).tolist()
    indices = np.asarray(indices, dtype=np.int64).tolist()
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    seen = [-1] * n_right
    it = [0] * n_left
    stack_l = [0] * (n_left + 1)
    stack_v = [0] * (n_left + 1)
    for u in range(n_left):
        depth = 0
        stack_l[0] = u
        it[u] = indptr[u]
        while depth >= 0:
            x = stack_l[depth]
            if it[x] < indptr[x + 1]:
                v = indices[it[x]]
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
                it[w] = indptr[w]
            else:
                depth -= 1
    return np.array(match_l, dtype=np.int64)
