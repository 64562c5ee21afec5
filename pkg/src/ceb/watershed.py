"""Seeded flooding that produces labeled regions and candidate boundary pixels.

The flood visits non-seed foreground pixels bucketed by exact probability
value, highest bucket first.  Within a bucket, pixels adjacent to an already
labeled region are queued in row-major order and grown breadth-first; a pixel
touching a second distinct region becomes a watershed pixel and is appended to
that region pair's boundary, and a queued pixel whose only labeled contact is
an existing watershed pixel joins that pixel's boundary.  Pixels waiting in a
bucket (masked) are promoted into the queue when the growth reaches them, even
if that happens while a later bucket is being drained.

Status codes: unvisited -1, queued -2, masked -3, watershed 0, region ids > 0.
"""

from __future__ import annotations

import logging
from collections import deque

import numpy as np

from .gridutil import neighbor_offsets, scan_sorted
from .raster_io import LabelMap, ProbMap
from .seeds import SeedSet

log = logging.getLogger(__name__)

Pixel = tuple[int, int]
RegionSet = dict[int, set[Pixel]]
BoundarySet = dict[tuple[int, int], set[Pixel]]

_OUTSIDE = -9
_UNVISITED = -1
_INQE = -2
_MASK = -3
_WSHD = 0


def flood(prob: ProbMap, foreground, seed_set: SeedSet,
          connectivity: int = 8) -> tuple[RegionSet, BoundarySet]:
    """Flood the foreground from the seeds; returns (regions, boundaries).

    Boundary keys are unordered region-id pairs stored as (min, max).  Region
    and boundary pixel sets are pairwise disjoint; a region pixel that later
    turns out to lie between two regions is moved into the boundary set.
    Foreground pixels the flood never reaches are left out of both and
    reported via a log warning (see unassigned_foreground).
    """
    if not seed_set.seeds:
        raise ValueError("no seeds")
    arr = prob.values
    height, width = arr.shape
    offsets = neighbor_offsets(connectivity)

    status = np.full((height, width), _OUTSIDE, dtype=np.int32)
    for x, y in foreground:
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"foreground pixel {(x, y)} outside the {width}x{height} grid")
        status[y, x] = _UNVISITED

    regions: RegionSet = {}
    boundaries: BoundarySet = {}
    wshd_key: dict[Pixel, tuple[int, int]] = {}

    for sid in sorted(seed_set.seeds):
        pixels = seed_set.seeds[sid]
        regions[sid] = set(pixels)
        for x, y in pixels:
            if status[y, x] == _OUTSIDE:
                raise ValueError(f"seed {sid} pixel {(x, y)} lies outside the foreground")
            if status[y, x] > 0:
                raise ValueError(f"seed pixel {(x, y)} belongs to two seeds")
            status[y, x] = sid

    buckets: dict[float, list[Pixel]] = {}
    for x, y in scan_sorted(foreground):
        if status[y, x] > 0:
            continue
        buckets.setdefault(float(arr[y, x]), []).append((x, y))

    queue: deque[Pixel] = deque()
    for value in sorted(buckets, reverse=True):
        for x, y in buckets[value]:
            status[y, x] = _MASK
            for dx, dy in offsets:
                nx, ny = x + dx, y + dy
                if 0 <= nx < width and 0 <= ny < height and status[ny, nx] > 0:
                    queue.append((x, y))
                    status[y, x] = _INQE
                    break
        while queue:
            x, y = queue.popleft()
            for dx, dy in offsets:
                nx, ny = x + dx, y + dy
                if not (0 <= nx < width and 0 <= ny < height):
                    continue
                neigh = int(status[ny, nx])
                me = int(status[y, x])
                if neigh > 0:
                    if me == _INQE:
                        status[y, x] = neigh
                        regions[neigh].add((x, y))
                    elif me > 0 and me != neigh:
                        key = (me, neigh) if me < neigh else (neigh, me)
                        boundaries.setdefault(key, set()).add((x, y))
                        wshd_key[(x, y)] = key
                        # keep regions and boundaries disjoint
                        regions[me].discard((x, y))
                        status[y, x] = _WSHD
                elif neigh == _WSHD:
                    if me == _INQE:
                        key = wshd_key[(nx, ny)]
                        boundaries[key].add((x, y))
                        wshd_key[(x, y)] = key
                        status[y, x] = _WSHD
                elif neigh == _MASK:
                    status[ny, nx] = _INQE
                    queue.append((nx, ny))

    leftovers = int(np.count_nonzero((status == _MASK) | (status == _UNVISITED)))
    if leftovers:
        log.warning("flood left %d foreground pixels unassigned (no seed reachable)", leftovers)
    return regions, boundaries


def unassigned_foreground(foreground, regions: RegionSet, boundaries: BoundarySet) -> set[Pixel]:
    """Foreground pixels that ended in neither a region nor a boundary."""
    taken: set[Pixel] = set()
    for pix in regions.values():
        taken |= pix
    for pix in boundaries.values():
        taken |= pix
    return set(foreground) - taken


def status_labelmap(shape: tuple[int, int], regions: RegionSet,
                    boundaries: BoundarySet) -> LabelMap:
    """Debug rendering: region ids as labels, watershed pixels as 65535."""
    grid = np.zeros(shape, dtype=np.int32)
    for rid, pixels in regions.items():
        for x, y in pixels:
            grid[y, x] = rid
    for pixels in boundaries.values():
        for x, y in pixels:
            grid[y, x] = 65535
    return LabelMap(grid)
