"""Binary-mask geometry: components, boundary contours, shape statistics.

A binary mask is a 2D uint8 array with values 0/1 indexed ``[y, x]``.
Contours are ``(n, 2)`` int arrays of (x, y) boundary pixel coordinates,
traced clockwise in image coordinates (y down) from the topmost-then-leftmost
pixel. Area is the shoelace polygon area over the contour vertices and the
perimeter is the arc length of the closed vertex loop, so a filled w x h
rectangle measures (w-1)(h-1) and 2(w-1)+2(h-1).

Masks are exchanged on disk as binary PGM (P5): 0 background, 255 foreground;
any value >= 128 reads back as foreground.
"""

from dataclasses import dataclass

import numpy as np

from foodcal import _mask_kernels
from foodcal.errors import DataError, EmptyComponent


@dataclass(frozen=True)
class ShapeStats:
    """Geometry of one traced contour: bbox (x, y, w, h) in pixels,
    shoelace area in px^2, arc-length perimeter in px."""

    bbox: tuple[int, int, int, int]
    area_px: float
    perimeter_px: float


def as_mask(arr) -> np.ndarray:
    """Validate and convert to a uint8 0/1 mask."""
    m = np.asarray(arr)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"mask must be 2D and non-empty, got shape {m.shape}")
    m = m.astype(np.uint8, copy=False)
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("mask values must be exactly 0 or 1")
    return m


def connected_components(mask) -> list[np.ndarray]:
    """Split a mask into its 8-connected foreground components.

    Returns one full-size mask per component, ordered by (min-y, min-x) of
    the component's pixels (ties broken by first pixel in row-major order).
    Components are disjoint and their union is the input foreground.
    """
    m = as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        return []
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    sub = m[y0 : y1 + 1, x0 : x1 + 1]
    labels = _mask_kernels.label(sub)

    ids = np.unique(labels)
    ids = ids[ids > 0]
    order = []
    for cid in ids:
        cy, cx = np.nonzero(labels == cid)
        first = int(np.argmin(cy * sub.shape[1] + cx))
        order.append(
            (int(cy.min()) + y0, int(cx.min()) + x0, int(cy[first]) * m.shape[1] + int(cx[first]), cid)
        )
    order.sort()

    out = []
    for *_key, cid in order:
        comp = np.zeros_like(m)
        comp[y0 : y1 + 1, x0 : x1 + 1] = (labels == cid).astype(np.uint8)
        out.append(comp)
    return out


def trace_contour(component) -> np.ndarray:
    """Trace the outer boundary of a single-component mask.

    Moore-neighbor tracing: starts at the topmost-then-leftmost foreground
    pixel and walks clockwise (image coordinates, y down); the walk stops
    when the start pixel is re-entered from its original backtrack position.
    Returns an (n, 2) int64 array of (x, y) points. Raises EmptyComponent
    if the mask has no foreground.
    """
    m = as_mask(component)
    pts = _mask_kernels.trace(m)
    if pts.shape[0] == 0:
        raise EmptyComponent("cannot trace a mask with no foreground pixels")
    return pts


def shape_stats(contour) -> ShapeStats:
    """Shoelace area, arc-length perimeter, and tight bbox of a contour.

    A single-point contour yields area 0, perimeter 0 and a 1x1 bbox.
    """
    pts = np.asarray(contour, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError(f"contour must be a non-empty (n, 2) array, got shape {pts.shape}")
    x = pts[:, 0].astype(np.float64)
    y = pts[:, 1].astype(np.float64)
    x2 = np.roll(x, -1)
    y2 = np.roll(y, -1)
    area = abs(float(np.sum(x * y2 - x2 * y))) / 2.0
    perimeter = float(np.sum(np.hypot(x2 - x, y2 - y)))
    bx0 = int(pts[:, 0].min())
    by0 = int(pts[:, 1].min())
    bbox = (bx0, by0, int(pts[:, 0].max()) - bx0 + 1, int(pts[:, 1].max()) - by0 + 1)
    return ShapeStats(bbox=bbox, area_px=area, perimeter_px=perimeter)


def mask_bbox(mask) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounding box of the foreground pixels."""
    m = as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise EmptyComponent("mask has no foreground pixels")
    x0, y0 = int(xs.min()), int(ys.min())
    return (x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)


def write_pgm(path, mask) -> None:
    """Write a mask as binary PGM (P5), foreground as 255."""
    m = as_mask(mask)
    h, w = m.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write((m * np.uint8(255)).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) as a 0/1 mask (pixel >= 128 is foreground)."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise DataError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(v) for v in fields)
    except ValueError as exc:
        raise DataError(f"{path}: malformed PGM header") from exc
    if maxval > 255 or w < 1 or h < 1:
        raise DataError(f"{path}: unsupported PGM header (w={w} h={h} maxval={maxval})")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    if raster.size != w * h:
        raise DataError(f"{path}: truncated PGM raster")
    return (raster.reshape(h, w) >= 128).astype(np.uint8)
