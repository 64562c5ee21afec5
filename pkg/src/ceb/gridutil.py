"""Small helpers for pixel sets on a 2D grid.

Pixels are (x, y) tuples with x the column and y the row; arrays are indexed
arr[y, x].  Scan order means sorting by (y, x), i.e. row-major with the
top-left pixel first.
"""

from __future__ import annotations

import heapq
import math

# E, W, S, N, SE, SW, NE, NW -- the fixed neighbor iteration order.
NEIGHBORS_8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1))
NEIGHBORS_4 = NEIGHBORS_8[:4]

Pixel = tuple[int, int]


def neighbor_offsets(connectivity: int):
    if connectivity == 8:
        return NEIGHBORS_8
    if connectivity == 4:
        return NEIGHBORS_4
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def scan_sorted(pixels) -> list[Pixel]:
    return sorted(pixels, key=lambda p: (p[1], p[0]))


def top_left(pixels) -> Pixel:
    return min(pixels, key=lambda p: (p[1], p[0]))


def connected_pieces(pixels, connectivity: int = 8) -> list[set[Pixel]]:
    """Split a pixel set into connected pieces, ordered by their top-left pixel."""
    remaining = set(pixels)
    offs = neighbor_offsets(connectivity)
    pieces = []
    while remaining:
        start = top_left(remaining)
        stack = [start]
        remaining.discard(start)
        piece = {start}
        while stack:
            x, y = stack.pop()
            for dx, dy in offs:
                n = (x + dx, y + dy)
                if n in remaining:
                    remaining.discard(n)
                    piece.add(n)
                    stack.append(n)
        pieces.append(piece)
    return pieces


def geodesic_map(pixels, start: Pixel) -> dict[Pixel, float]:
    """Dijkstra distances within a pixel set: axis steps cost 1, diagonal sqrt(2)."""
    pixset = set(pixels)
    if start not in pixset:
        raise ValueError(f"start pixel {start} not in the pixel set")
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if d > dist[(x, y)]:
            continue
        for dx, dy in NEIGHBORS_8:
            n = (x + dx, y + dy)
            if n not in pixset:
                continue
            nd = d + (1.0 if dx == 0 or dy == 0 else math.sqrt(2.0))
            if nd < dist.get(n, math.inf):
                dist[n] = nd
                heapq.heappush(heap, (nd, n))
    return dist


def euclid(a: Pixel, b: Pixel) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def set_iou(a, b) -> float:
    """Intersection over union of two pixel sets (0.0 when both are empty)."""
    if not a or not b:
        return 0.0
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)
