"""Hot kernels for mask labeling and boundary tracing.

Each kernel has a loop form (numba-compiled when enabled) and a pure-NumPy
fallback. Both produce the same component partition / contour sequence.
"""

import numpy as np

from foodcal import backend

# Moore neighborhood in clockwise order for image coordinates (y down):
# E, SE, S, SW, W, NW, N, NE
_DX = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)
_DY = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)

# _DIR_INDEX[dy + 1, dx + 1] -> direction index; center entry unused
_DIR_INDEX = np.full((3, 3), -1, dtype=np.int64)
for _d in range(8):
    _DIR_INDEX[_DY[_d] + 1, _DX[_d] + 1] = _d
del _d


def _label_loops(mask, labels, stack):
    """Scan-order flood fill. Labels components 1..k; returns k."""
    h, w = mask.shape
    count = 0
    for y0 in range(h):
        for x0 in range(w):
            if mask[y0, x0] == 0 or labels[y0, x0] != 0:
                continue
            count += 1
            labels[y0, x0] = count
            stack[0, 0] = y0
            stack[0, 1] = x0
            top = 1
            while top > 0:
                top -= 1
                y = stack[top, 0]
                x = stack[top, 1]
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        ny = y + dy
                        nx = x + dx
                        if 0 <= ny < h and 0 <= nx < w:
                            if mask[ny, nx] != 0 and labels[ny, nx] == 0:
                                labels[ny, nx] = count
                                stack[top, 0] = ny
                                stack[top, 1] = nx
                                top += 1
    return count


_label_numba = backend.compile_kernel(_label_loops)


def label_numba(mask):
    labels = np.zeros(mask.shape, dtype=np.int64)
    stack = np.empty((mask.size + 1, 2), dtype=np.int64)
    _label_numba(mask, labels, stack)
    return labels


def label_numpy(mask):
    """Label by iterated max-propagation of unique seeds over 8-neighborhoods.

    Converges in O(geodesic diameter) vectorized sweeps; callers crop to the
    foreground bounding box to keep that cheap. Component numbering differs
    from the flood-fill kernel; callers renumber, so only the partition matters.
    """
    fg = mask != 0
    h, w = mask.shape
    labels = np.where(fg, np.arange(1, h * w + 1, dtype=np.int64).reshape(h, w), 0)
    while True:
        p = np.pad(labels, 1)
        neigh = np.maximum.reduce(
            [
                p[0:h, 0:w],
                p[0:h, 1 : w + 1],
                p[0:h, 2 : w + 2],
                p[1 : h + 1, 0:w],
                p[1 : h + 1, 2 : w + 2],
                p[2 : h + 2, 0:w],
                p[2 : h + 2, 1 : w + 1],
                p[2 : h + 2, 2 : w + 2],
            ]
        )
        new = np.where(fg, np.maximum(labels, neigh), 0)
        if np.array_equal(new, labels):
            return labels
        labels = new


def _trace_loops(mask, dxs, dys, dir_index, out):
    """Clockwise border following from the first foreground pixel in
    row-major order. State is the directed edge (previous, current); the
    predecessor of the start on the clockwise cycle is found up front by a
    counterclockwise scan, so the walk stops exactly when that closing edge
    recurs. Writes (x, y) rows into ``out``; returns the point count, 0 for
    an empty mask, or -1 if the safety cap in ``out`` is hit (which would
    indicate a bug, not bad input)."""
    h, w = mask.shape
    sy = -1
    sx = -1
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 0:
                sy = y
                sx = x
                break
        if sy >= 0:
            break
    if sy < 0:
        return 0
    out[0, 0] = sx
    out[0, 1] = sy
    n = 1
    # The start is topmost-then-leftmost, so its W neighbor is background;
    # scanning counterclockwise from W finds the pixel that re-enters the
    # start at the end of the clockwise cycle.
    ppy = -1
    ppx = -1
    for k in range(8):
        d = (4 - k) % 8
        ny = sy + dys[d]
        nx = sx + dxs[d]
        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] != 0:
            ppy = ny
            ppx = nx
            break
    if ppy < 0:
        return n  # isolated pixel
    py = sy
    px = sx
    qy = ppy  # previous boundary pixel
    qx = ppx
    while True:
        back = dir_index[qy - py + 1, qx - px + 1]
        cy = -1
        cx = -1
        for k in range(1, 9):
            d = (back + k) % 8
            ny = py + dys[d]
            nx = px + dxs[d]
            if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] != 0:
                cy = ny
                cx = nx
                break
        if cy == sy and cx == sx and py == ppy and px == ppx:
            return n
        if n >= out.shape[0]:
            return -1
        out[n, 0] = cx
        out[n, 1] = cy
        n += 1
        qy = py
        qx = px
        py = cy
        px = cx


_trace_numba = backend.compile_kernel(_trace_loops)


def _trace_with(fn, mask):
    cap = 8 * int(np.count_nonzero(mask)) + 8
    out = np.empty((cap, 2), dtype=np.int64)
    n = fn(mask, _DX, _DY, _DIR_INDEX, out)
    if n < 0:  # pragma: no cover - cap is generous
        raise RuntimeError("contour trace exceeded safety cap")
    return out[:n].copy()


def trace_numba(mask):
    return _trace_with(_trace_numba, mask)


def trace_numpy(mask):
    return _trace_with(_trace_loops, mask)


label = backend.pick(label_numba if _label_numba is not None else None, label_numpy)
trace = backend.pick(trace_numba if _trace_numba is not None else None, trace_numpy)
