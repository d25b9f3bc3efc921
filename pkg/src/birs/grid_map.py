"""Occupancy grids: rasterization, map-file round-trip, grid diffs.

Cells are ternary and sampled at cell centers: a center inside any
non-door landmark footprint or site obstacle is OCCUPIED, inside a space
polygon or a door leaf (and not occupied) is FREE, anything else UNKNOWN.
The scanline rasterizer evaluates exactly the crossing expression of
Polygon2D.contains, row by row, so the two agree bit for bit.

Map files are a binary PGM image plus a YAML sidecar, byte-deterministic
so goldens can be checked in. Grid diffs require co-registered lattices
(equal resolution, origins an integer number of cells apart) and classify
cells as EXTRA (built but not planned) or MISSING (planned but not built).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from decimal import Decimal

import numpy as np
import yaml

from .building_model import BuildingModel
from .geometry import Polygon2D, Pose2D
from .gis_ingest import SiteModel, merge_obstacles

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_PGM_VALUES = np.array([254, 0, 205], dtype=np.uint8)  # indexed by cell state

DIFF_NONE = 0
DIFF_EXTRA = 1
DIFF_MISSING = 2

EXTRA = "EXTRA"
MISSING = "MISSING"

DEFAULT_RESOLUTION = 0.05
DEFAULT_MAX_CELLS = 100_000_000
DEFAULT_PADDING = 1.0

_OCCUPIED_THRESH = 0.65
_FREE_THRESH = 0.196

Bounds = tuple[float, float, float, float]


class GridError(Exception):
    pass


class GridTooLargeError(GridError):
    def __init__(self, width: int, height: int, limit: int):
        super().__init__(f"{width}x{height} cells exceed limit {limit}")
        self.width = width
        self.height = height
        self.limit = limit


class BadMagicError(GridError):
    pass


class DimensionMismatchError(GridError):
    pass


class MissingMetaKeyError(GridError):
    def __init__(self, key: str):
        super().__init__(f"map metadata missing key {key!r}")
        self.key = key


class ResolutionMismatchError(GridError):
    pass


class RegistrationError(GridError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(eq=False)
class OccupancyGrid:
    """Row-major from the bottom-left; cells[r, c] covers
    [origin.x + c*res, +res) x [origin.y + r*res, +res)."""

    width: int
    height: int
    resolution: float
    origin: Pose2D
    cells: np.ndarray  # shape (height, width), uint8 states

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.cells.shape != (self.height, self.width):
            raise ValueError("cell array shape disagrees with width/height")

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    def state(self, c: int, r: int) -> int:
        return int(self.cells[r, c])

    def cell_center(self, c: int, r: int) -> tuple[float, float]:
        return (
            self.origin.x + (c + 0.5) * self.resolution,
            self.origin.y + (r + 0.5) * self.resolution,
        )

    def counts(self) -> dict[str, int]:
        return {
            "free": int(np.count_nonzero(self.cells == FREE)),
            "occupied": int(np.count_nonzero(self.cells == OCCUPIED)),
            "unknown": int(np.count_nonzero(self.cells == UNKNOWN)),
        }


def polygon_mask(polygon: Polygon2D, origin: Pose2D, resolution: float,
                 width: int, height: int) -> np.ndarray:
    """Boolean (height, width) mask of cells whose center the polygon
    contains, by the same crossing expression as Polygon2D.contains."""
    mask = np.zeros((height, width), dtype=bool)
    if width == 0 or height == 0:
        return mask
    centers_x = origin.x + (np.arange(width) + 0.5) * resolution
    verts = polygon.vertices
    n = len(verts)
    _, ymin, _, ymax = polygon.bounds
    r_lo = max(0, int(math.floor((ymin - origin.y) / resolution)) - 1)
    r_hi = min(height, int(math.ceil((ymax - origin.y) / resolution)) + 1)
    for r in range(r_lo, r_hi):
        y = origin.y + (r + 0.5) * resolution
        crossings = []
        for i in range(n):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % n]
            if (y1 > y) != (y2 > y):
                crossings.append(x1 + (y - y1) * (x2 - x1) / (y2 - y1))
        if not crossings:
            continue
        xs = np.sort(np.asarray(crossings))
        # strict "center < crossing" count, odd parity means inside
        above = len(xs) - np.searchsorted(xs, centers_x, side="right")
        mask[r] = (above % 2) == 1
    return mask


def _site_bounds(site: SiteModel, padding: float) -> Bounds | None:
    polygons = [s.polygon for s in site.building.spaces]
    polygons += [lm.footprint for lm in site.building.landmarks]
    polygons += [o.polygon for o in site.obstacles]
    if not polygons:
        return None
    x0 = min(p.bounds[0] for p in polygons) - padding
    y0 = min(p.bounds[1] for p in polygons) - padding
    x1 = max(p.bounds[2] for p in polygons) + padding
    y1 = max(p.bounds[3] for p in polygons) + padding
    return (x0, y0, x1, y1)


def _cell_count(span: float, resolution: float) -> int:
    # tolerate float noise when the span is an exact multiple of resolution
    return max(1, int(math.ceil(span / resolution - 1e-9)))


def rasterize(site: SiteModel, resolution: float = DEFAULT_RESOLUTION,
              bounds: Bounds | None = None,
              max_cells: int = DEFAULT_MAX_CELLS,
              padding: float = DEFAULT_PADDING) -> OccupancyGrid:
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    if bounds is None:
        bounds = _site_bounds(site, padding)
        if bounds is None:
            raise ValueError("an empty site needs explicit bounds")
    x0, y0, x1, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bounds must span a positive area")
    width = _cell_count(x1 - x0, resolution)
    height = _cell_count(y1 - y0, resolution)
    if width * height > max_cells:
        raise GridTooLargeError(width, height, max_cells)
    origin = Pose2D(x0, y0, 0.0)

    building = site.building
    occupied_polys = [lm.footprint for lm in building.landmarks
                      if lm.ifc_class != "IfcDoor"]
    occupied_polys += [o.polygon for o in site.obstacles]
    # door leaves are traversable: carved free together with the rooms
    free_polys = [s.polygon for s in building.spaces]
    free_polys += [lm.footprint for lm in building.landmarks
                   if lm.ifc_class == "IfcDoor"]

    occupied = np.zeros((height, width), dtype=bool)
    for poly in occupied_polys:
        occupied |= polygon_mask(poly, origin, resolution, width, height)
    free = np.zeros((height, width), dtype=bool)
    for poly in free_polys:
        free |= polygon_mask(poly, origin, resolution, width, height)

    cells = np.full((height, width), UNKNOWN, dtype=np.uint8)
    cells[free] = FREE
    cells[occupied] = OCCUPIED
    return OccupancyGrid(width, height, resolution, origin, cells)


def rasterize_model(model: BuildingModel, resolution: float = DEFAULT_RESOLUTION,
                    bounds: Bounds | None = None,
                    max_cells: int = DEFAULT_MAX_CELLS,
                    padding: float = DEFAULT_PADDING) -> OccupancyGrid:
    return rasterize(merge_obstacles(model, []), resolution, bounds, max_cells,
                     padding)


# ----------------------------------------------------------- map files


def _decimal_text(value: float, keep_point: bool = False) -> str:
    """Plain decimal rendering of a float: no exponent, trailing zeros
    trimmed; keep_point retains a '.0' on integral values."""
    text = format(Decimal(repr(float(value))), "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".") or "0"
    if keep_point and "." not in text:
        text += ".0"
    return text


def render_meta(grid: OccupancyGrid, image_name: str) -> str:
    origin = ", ".join(
        _decimal_text(v, keep_point=True)
        for v in (grid.origin.x, grid.origin.y, grid.origin.theta)
    )
    return (
        f"image: {image_name}\n"
        f"resolution: {_decimal_text(grid.resolution)}\n"
        f"origin: [{origin}]\n"
        "negate: 0\n"
        "occupied_thresh: 0.65\n"
        "free_thresh: 0.196\n"
    )


def render_pgm(grid: OccupancyGrid) -> bytes:
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    # top image row is the highest grid row
    payload = _PGM_VALUES[np.flipud(grid.cells)].tobytes()
    return header + payload


def export_map(grid: OccupancyGrid, image_path, meta_path) -> None:
    with open(image_path, "wb") as handle:
        handle.write(render_pgm(grid))
    with open(meta_path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(render_meta(grid, os.path.basename(str(image_path))))


def parse_pgm(data: bytes) -> tuple[int, int, bytes]:
    if not data.startswith(b"P5"):
        raise BadMagicError("not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise BadMagicError(f"bad header token {token!r}")
        fields.append(int(token))
    pos += 1  # single whitespace byte separates header from payload
    width, height, maxval = fields
    if maxval != 255:
        raise BadMagicError(f"unsupported maxval {maxval}")
    payload = data[pos:]
    if len(payload) != width * height:
        raise DimensionMismatchError(
            f"payload holds {len(payload)} bytes for {width}x{height} cells"
        )
    return width, height, payload


_META_KEYS = ("image", "resolution", "origin", "negate",
              "occupied_thresh", "free_thresh")


def import_map(image_path, meta_path) -> OccupancyGrid:
    with open(meta_path, "r", encoding="utf-8") as handle:
        meta = yaml.safe_load(handle.read())
    if not isinstance(meta, dict):
        raise MissingMetaKeyError("image")
    for key in _META_KEYS:
        if key not in meta:
            raise MissingMetaKeyError(key)
    origin_list = meta["origin"]
    if not (isinstance(origin_list, (list, tuple)) and len(origin_list) == 3):
        raise GridError("origin must be a 3-list [x, y, yaw]")

    with open(image_path, "rb") as handle:
        width, height, payload = parse_pgm(handle.read())

    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    pixels = np.flipud(pixels)  # back to row 0 = bottom
    occupancy = (255.0 - pixels) / 255.0
    if meta["negate"]:
        occupancy = pixels / 255.0
    cells = np.full(pixels.shape, UNKNOWN, dtype=np.uint8)
    cells[occupancy > float(meta["occupied_thresh"])] = OCCUPIED
    cells[occupancy < float(meta["free_thresh"])] = FREE
    return OccupancyGrid(
        width=width,
        height=height,
        resolution=float(meta["resolution"]),
        origin=Pose2D(float(origin_list[0]), float(origin_list[1]),
                      float(origin_list[2])),
        cells=cells,
    )


# ---------------------------------------------------------------- diffs


@dataclass(eq=False)
class DiffGrid:
    """Per-cell comparison over the intersection of two registered grids."""

    width: int
    height: int
    resolution: float
    origin: Pose2D
    cells: np.ndarray  # DIFF_NONE / DIFF_EXTRA / DIFF_MISSING

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffGrid):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    def marked(self, kind: str) -> int:
        code = DIFF_EXTRA if kind == EXTRA else DIFF_MISSING
        return int(np.count_nonzero(self.cells == code))


def _integer_cells(delta: float, resolution: float, axis: str) -> int:
    ratio = delta / resolution
    nearest = round(ratio)
    if abs(ratio - nearest) > 1e-6:
        raise RegistrationError(
            f"origin {axis} offset of {ratio:.9f} cells is not an integer"
        )
    return int(nearest)


def diff_grids(planned: OccupancyGrid, built: OccupancyGrid) -> DiffGrid:
    if planned.resolution != built.resolution:
        raise ResolutionMismatchError(
            f"{planned.resolution} vs {built.resolution}"
        )
    if planned.origin.theta != built.origin.theta:
        raise RegistrationError("grids have different yaw")
    resolution = planned.resolution
    dc = _integer_cells(built.origin.x - planned.origin.x, resolution, "x")
    dr = _integer_cells(built.origin.y - planned.origin.y, resolution, "y")

    # intersection, in planned cell coordinates
    c0 = max(0, dc)
    c1 = min(planned.width, dc + built.width)
    r0 = max(0, dr)
    r1 = min(planned.height, dr + built.height)
    width = max(0, c1 - c0)
    height = max(0, r1 - r0)
    origin = Pose2D(planned.origin.x + c0 * resolution,
                    planned.origin.y + r0 * resolution,
                    planned.origin.theta)
    cells = np.full((height, width), DIFF_NONE, dtype=np.uint8)
    if width and height:
        planned_view = planned.cells[r0:r1, c0:c1]
        built_view = built.cells[r0 - dr:r1 - dr, c0 - dc:c1 - dc]
        cells[(built_view == OCCUPIED) & (planned_view == FREE)] = DIFF_EXTRA
        cells[(planned_view == OCCUPIED) & (built_view == FREE)] = DIFF_MISSING
    return DiffGrid(width, height, resolution, origin, cells)


@dataclass(frozen=True)
class DiffCluster:
    cluster_id: int
    kind: str  # EXTRA | MISSING
    cells: frozenset[tuple[int, int]]  # (c, r) in diff-grid coordinates
    area: float
    centroid: tuple[float, float]
    bbox: tuple[float, float, float, float]  # world meters
    cell_bbox: tuple[int, int, int, int]  # (cmin, rmin, cmax, rmax)


def cluster_diff(diff: DiffGrid, min_area: float = 0.05) -> list[DiffCluster]:
    """4-connected components per kind, small ones dropped, ordered by
    area descending then (min r, min c), then kind."""
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    resolution = diff.resolution
    cell_area = resolution * resolution
    raw: list[tuple[str, set[tuple[int, int]]]] = []
    for kind, code in ((EXTRA, DIFF_EXTRA), (MISSING, DIFF_MISSING)):
        todo = {(int(c), int(r)) for r, c in zip(*np.nonzero(diff.cells == code))}
        while todo:
            seed = todo.pop()
            component = {seed}
            stack = [seed]
            while stack:
                c, r = stack.pop()
                for nc, nr in ((c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)):
                    if (nc, nr) in todo:
                        todo.remove((nc, nr))
                        component.add((nc, nr))
                        stack.append((nc, nr))
            raw.append((kind, component))

    kept = [(kind, comp) for kind, comp in raw
            if len(comp) * cell_area >= min_area]

    def sort_key(item):
        kind, comp = item
        min_r = min(r for _, r in comp)
        min_c = min(c for c, _ in comp)
        return (-len(comp), min_r, min_c, kind)

    clusters = []
    for index, (kind, comp) in enumerate(sorted(kept, key=sort_key), start=1):
        cs = [c for c, _ in comp]
        rs = [r for _, r in comp]
        cmin, cmax = min(cs), max(cs)
        rmin, rmax = min(rs), max(rs)
        cx = diff.origin.x + (sum(cs) / len(cs) + 0.5) * resolution
        cy = diff.origin.y + (sum(rs) / len(rs) + 0.5) * resolution
        clusters.append(DiffCluster(
            cluster_id=index,
            kind=kind,
            cells=frozenset(comp),
            area=len(comp) * cell_area,
            centroid=(cx, cy),
            bbox=(diff.origin.x + cmin * resolution,
                  diff.origin.y + rmin * resolution,
                  diff.origin.x + (cmax + 1) * resolution,
                  diff.origin.y + (rmax + 1) * resolution),
            cell_bbox=(cmin, rmin, cmax, rmax),
        ))
    return clusters


def format_diff_report(clusters: list[DiffCluster]) -> str:
    lines = [f"clusters {len(clusters)}"]
    for cl in clusters:
        lines.append(
            "cluster {} {} area {!r} centroid {!r} {!r} "
            "bbox {!r} {!r} {!r} {!r} cells {}".format(
                cl.cluster_id, cl.kind, cl.area, cl.centroid[0], cl.centroid[1],
                cl.bbox[0], cl.bbox[1], cl.bbox[2], cl.bbox[3], len(cl.cells),
            )
        )
    return "\n".join(lines) + "\n"
