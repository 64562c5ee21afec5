"""Boundary signatures: codebook, endpoints, fork roads, and rasterization.

For each region-region boundary we locate its two endpoints (the pixel pair at
maximal geodesic distance within the boundary), look up the two nearest other
codebook entries at each endpoint (the fork roads), sample a fixed number of
pixels geodesically along the boundary and each fork road, and draw the
collected points centered on a small square binary canvas.

Codebook entries are the region-region boundaries plus the foreground-
background contour split into segments keyed by (background component,
region).  Contour pixels are foreground pixels 4-adjacent to a background
component; the grid border counts as the outer background.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .gridutil import connected_pieces, euclid, geodesic_map, scan_sorted
from .raster_io import BinaryRaster, read_signature_pgm, write_signature_pgm

log = logging.getLogger(__name__)

Pixel = tuple[int, int]
# ("rr", i, j) for region-region entries, ("fb", bg_id, region_id) for
# foreground-background segments; "fb" sorts before "rr", which fixes ties.
EntryKey = tuple

_BG_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class CodebookEntry:
    key: EntryKey
    pixels: tuple[Pixel, ...]  # deterministic scan order


@dataclass(frozen=True)
class BoundaryCodebook:
    entries: dict[EntryKey, CodebookEntry]

    def keys_sorted(self) -> list[EntryKey]:
        return sorted(self.entries)


@dataclass(frozen=True)
class SignatureRecord:
    signature_id: str
    frame: int
    boundary_key: tuple[int, int]
    raster: BinaryRaster
    label: bool | None = None
    degenerate_fork: bool = False

    def with_label(self, label: bool) -> "SignatureRecord":
        return SignatureRecord(self.signature_id, self.frame, self.boundary_key,
                               self.raster, label, self.degenerate_fork)


def build_codebook(regions, boundaries, foreground, shape) -> BoundaryCodebook:
    """Region-region boundaries plus per-region foreground-background segments."""
    entries: dict[EntryKey, CodebookEntry] = {}
    for (a, b), pixels in boundaries.items():
        key = ("rr", int(a), int(b))
        entries[key] = CodebookEntry(key, tuple(scan_sorted(pixels)))

    height, width = shape
    fg = np.zeros((height, width), dtype=bool)
    for x, y in foreground:
        fg[y, x] = True
    # Pad so the outside of the grid joins the outer background component.
    padded = np.ones((height + 2, width + 2), dtype=bool)
    padded[1:-1, 1:-1] = ~fg
    bg_labels, _ = ndimage.label(padded, structure=_BG_STRUCTURE)

    region_of: dict[Pixel, int] = {}
    for rid, pixels in regions.items():
        for p in pixels:
            region_of[p] = int(rid)

    segments: dict[tuple[int, int], set[Pixel]] = {}
    for x, y in foreground:
        rid = region_of.get((x, y))
        if rid is None:
            continue  # watershed or unreachable pixels carry no region id
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            bg_id = int(bg_labels[ny + 1, nx + 1])
            if bg_id > 0:
                segments.setdefault((bg_id, rid), set()).add((x, y))
    for (bg_id, rid), pixels in segments.items():
        key = ("fb", bg_id, rid)
        entries[key] = CodebookEntry(key, tuple(scan_sorted(pixels)))
    return BoundaryCodebook(entries)


def find_endpoints(boundary_pixels) -> tuple[Pixel, Pixel]:
    """The pixel pair at maximal geodesic distance within the boundary.

    Ties resolve to the lexicographically smallest pair of (x, y) tuples.  A
    disconnected boundary is reduced to its largest piece (with a warning); a
    single pixel pairs with itself.
    """
    pixels = set(boundary_pixels)
    if not pixels:
        raise ValueError("boundary pixel set is empty")
    pieces = connected_pieces(pixels, connectivity=8)
    if len(pieces) > 1:
        log.warning("boundary pixel set has %d pieces; using the largest", len(pieces))
        pieces.sort(key=lambda p: (-len(p), min(p)))
        pixels = pieces[0]
    if len(pixels) == 1:
        p = next(iter(pixels))
        return (p, p)
    best = (-1.0, None)
    for src in sorted(pixels):
        dist = geodesic_map(pixels, src)
        for dst in sorted(pixels):
            d = dist[dst]
            a, b = (src, dst) if src <= dst else (dst, src)
            if d > best[0] + 1e-12 or (abs(d - best[0]) <= 1e-12 and (a, b) < best[1]):
                best = (d, (a, b))
    return best[1]


def nearest_boundaries(endpoint: Pixel, codebook: BoundaryCodebook,
                       exclude: EntryKey) -> tuple[list[EntryKey], bool]:
    """The two codebook entries closest to the endpoint, excluding one key.

    Distance is the Euclidean distance from the endpoint to the entry's
    nearest pixel; ties resolve by key order.  Returns (keys, degenerate) with
    degenerate set when fewer than two other entries exist.
    """
    ranked = []
    for key in codebook.keys_sorted():
        if key == exclude:
            continue
        entry = codebook.entries[key]
        d = min(euclid(endpoint, p) for p in entry.pixels)
        ranked.append((d, key))
    ranked.sort(key=lambda t: (t[0], t[1]))
    picks = [key for _d, key in ranked[:2]]
    return picks, len(picks) < 2


def _branch(entry_pixels, start: Pixel, length: int) -> set[Pixel]:
    """The `length` pixels of an entry nearest to start along its pixel graph."""
    dist = geodesic_map(entry_pixels, start)
    ordered = sorted(dist.items(), key=lambda kv: (kv[1], kv[0]))
    return {p for p, _d in ordered[:length]}


def _nearest_pixel(entry: CodebookEntry, point: Pixel) -> Pixel:
    return min(entry.pixels, key=lambda p: (euclid(point, p), p))


def _rasterize(points, side: int) -> BinaryRaster:
    """Center the point set's bounding box on a side x side canvas.

    Oversized point sets are scaled down uniformly with nearest-neighbor
    rounding.  The mapping depends only on coordinates relative to the
    bounding box, so translated inputs produce identical rasters.
    """
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    extent = max(xmax - xmin, ymax - ymin)
    scale = 1.0 if extent < side else (side - 1) / extent
    mapped = {(int(math.floor((x - xmin) * scale + 0.5)),
               int(math.floor((y - ymin) * scale + 0.5))) for x, y in points}
    mx = max(p[0] for p in mapped)
    my = max(p[1] for p in mapped)
    shift_x = (side - 1 - mx) // 2
    shift_y = (side - 1 - my) // 2
    bits = np.zeros((side, side), dtype=np.uint8)
    for x, y in mapped:
        bits[y + shift_y, x + shift_x] = 1
    return BinaryRaster(bits)


def extract_signature(boundary_key, boundary_pixels, codebook: BoundaryCodebook,
                      canvas_side: int = 64, branch_length: int = 20,
                      frame: int = 0, signature_id: str | None = None) -> SignatureRecord:
    """Sample the boundary and its fork roads around both endpoints into a raster."""
    a, b = boundary_key
    own_key = ("rr", int(a), int(b))
    end1, end2 = find_endpoints(boundary_pixels)
    collected: set[Pixel] = set()
    degenerate = False
    for endpoint in (end1, end2):
        collected |= _branch(boundary_pixels, endpoint, branch_length)
        forks, degen = nearest_boundaries(endpoint, codebook, own_key)
        for fork_key in forks:
            entry = codebook.entries[fork_key]
            start = _nearest_pixel(entry, endpoint)
            collected |= _branch(entry.pixels, start, branch_length)
        if degen:
            # fewer than two neighbors: pad the fork with the boundary itself
            degenerate = True
            collected |= _branch(boundary_pixels, endpoint, branch_length)
    raster = _rasterize(collected, canvas_side)
    sid = signature_id if signature_id is not None else f"f{frame:03d}_b{a:03d}_{b:03d}"
    return SignatureRecord(sid, frame, (int(a), int(b)), raster,
                           degenerate_fork=degenerate)


def extract_all(regions, boundaries, foreground, shape, canvas_side: int = 64,
                branch_length: int = 20, frame: int = 0) -> list[SignatureRecord]:
    """One SignatureRecord per region-region boundary, in boundary-key order."""
    codebook = build_codebook(regions, boundaries, foreground, shape)
    records = []
    for key in sorted(boundaries):
        records.append(extract_signature(key, boundaries[key], codebook,
                                         canvas_side=canvas_side,
                                         branch_length=branch_length, frame=frame))
    return records


# ---------------------------------------------------------------------------
# Signature export: one 8-bit PGM per record plus a manifest CSV.

MANIFEST_COLUMNS = ["signature_id", "frame", "region_a", "region_b", "label", "path"]


def write_signature_set(records, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            name = f"{rec.signature_id}.pgm"
            write_signature_pgm(rec.raster, out_dir / name)
            label = "" if rec.label is None else ("true" if rec.label else "false")
            writer.writerow([rec.signature_id, rec.frame, rec.boundary_key[0],
                             rec.boundary_key[1], label, name])
    return manifest


def load_signature_set(manifest_path) -> list[SignatureRecord]:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    records = []
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{manifest_path}: manifest lacks columns {sorted(missing)}")
        for row in reader:
            raster = read_signature_pgm(base / row["path"])
            label_txt = row["label"].strip().lower()
            label = None if label_txt == "" else label_txt == "true"
            records.append(SignatureRecord(row["signature_id"], int(row["frame"]),
                                           (int(row["region_a"]), int(row["region_b"])),
                                           raster, label))
    return records
