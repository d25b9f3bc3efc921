"""Progress findings from grid diffs.

EXTRA clusters (built but not planned) are matched against scheduled
element footprints rasterized on the diff lattice: a majority overlap
with an element dated after the inspection date means work is ahead of
schedule, a majority overlap with an already-due element is expected and
dropped, anything else is an anomaly routed to the nearest assistance
office. MISSING clusters (planned but not built) are matched against all
planned footprints and reported when the element was already due.
Findings are advisory; the model is never modified.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
from dataclasses import dataclass

import numpy as np

from .building_model import BuildingModel
from .grid_map import DiffCluster, DiffGrid, EXTRA, MISSING, polygon_mask
from .topo_map import NoRouteError, Route, TopoMap, plan_path, room_of_point

# verdicts
AHEAD_OF_SCHEDULE = "AheadOfSchedule"
ANOMALY = "Anomaly"
MISSING_PLANNED = "MissingPlanned"

DEFAULT_OFFICE_TAG = "contractor_office"
DEFAULT_OVERLAP_THRESHOLD = 0.5

Schedule = dict[str, datetime.date]


class ProgressError(Exception):
    pass


class BadDateError(ProgressError):
    def __init__(self, lineno: int, line: str):
        super().__init__(f"line {lineno}: cannot parse {line!r}")
        self.lineno = lineno
        self.line = line


class DuplicateElementError(ProgressError):
    def __init__(self, global_id: str):
        super().__init__(f"duplicate schedule entry for {global_id!r}")
        self.global_id = global_id


class NoTaggedSpaceError(ProgressError):
    def __init__(self, tag: str):
        super().__init__(f"no space carries function tag {tag!r}")
        self.tag = tag


class PointOutsideBuildingError(ProgressError):
    def __init__(self, point: tuple[float, float]):
        super().__init__(f"point {point} lies outside every space")
        self.point = point


@dataclass(frozen=True)
class Finding:
    cluster: DiffCluster
    verdict: str  # AHEAD_OF_SCHEDULE | ANOMALY | MISSING_PLANNED
    element: str | None
    matched_overlap: float
    storey: str
    nearest_office: tuple[str, Route] | None = None


def parse_schedule(text: str) -> Schedule:
    """CSV lines `global_id,YYYY-MM-DD`; comments and blanks ignored."""
    schedule: Schedule = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        global_id, sep, date_text = line.partition(",")
        global_id = global_id.strip()
        if not sep or not global_id:
            raise BadDateError(lineno, raw)
        try:
            date = datetime.date.fromisoformat(date_text.strip())
        except ValueError:
            raise BadDateError(lineno, raw) from None
        if global_id in schedule:
            raise DuplicateElementError(global_id)
        schedule[global_id] = date
    return schedule


def load_schedule(path) -> Schedule:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_schedule(handle.read())


def as_planned_model(model: BuildingModel, schedule: Schedule,
                     as_of: datetime.date) -> BuildingModel:
    """Design state expected on as_of: scheduled elements dated later are
    not yet supposed to exist and are dropped; unscheduled elements stay."""
    kept = [lm for lm in model.landmarks
            if schedule.get(lm.global_id, as_of) <= as_of]
    return dataclasses.replace(model, landmarks=kept)


def _footprint_cells(model: BuildingModel, diff: DiffGrid,
                     element_ids) -> dict[str, frozenset[tuple[int, int]]]:
    cells: dict[str, frozenset[tuple[int, int]]] = {}
    landmarks = {lm.global_id: lm for lm in model.landmarks}
    for element_id in element_ids:
        landmark = landmarks.get(element_id)
        if landmark is None:
            continue
        mask = polygon_mask(landmark.footprint, diff.origin, diff.resolution,
                            diff.width, diff.height)
        cells[element_id] = frozenset(
            (int(c), int(r)) for r, c in zip(*np.nonzero(mask))
        )
    return cells


def _best_match(cluster: DiffCluster,
                candidates: dict[str, frozenset[tuple[int, int]]]
                ) -> tuple[str | None, float]:
    """Highest cluster-side overlap fraction; ties pick the smallest id."""
    best_id: str | None = None
    best_frac = 0.0
    for element_id in sorted(candidates):
        frac = len(cluster.cells & candidates[element_id]) / len(cluster.cells)
        if frac > best_frac:
            best_id, best_frac = element_id, frac
    return best_id, best_frac


def _storey_name(model: BuildingModel, cluster: DiffCluster,
                 element: str | None) -> str:
    room_id = room_of_point(model, cluster.centroid)
    if room_id is not None:
        space = model.space_by_id(room_id)
        storey = model.storey_by_id(space.storey)
        if storey is not None:
            return storey.name
    if element is not None:
        landmark = model.landmark_by_id(element)
        if landmark is not None:
            storey = model.storey_by_id(landmark.storey)
            if storey is not None:
                return storey.name
    return model.storeys[0].name if model.storeys else ""


def nearest_office(model: BuildingModel, topo: TopoMap,
                   from_point: tuple[float, float],
                   tag: str = DEFAULT_OFFICE_TAG) -> tuple[str, Route]:
    """Tagged space with the cheapest route from the point's room.

    Returns (space id, Route); ties pick the smallest space id."""
    tagged = sorted(s.global_id for s in model.spaces if tag in s.function_tags)
    if not tagged:
        raise NoTaggedSpaceError(tag)
    start = room_of_point(model, from_point)
    if start is None:
        raise PointOutsideBuildingError(from_point)

    best: tuple[str, Route] | None = None
    last_error: NoRouteError | None = None
    for office in tagged:
        try:
            route = plan_path(topo, start, office)
        except NoRouteError as err:
            last_error = err
            continue
        if best is None or route.total_cost < best[1].total_cost - 1e-12:
            best = (office, route)
    if best is None:
        raise last_error if last_error is not None else NoTaggedSpaceError(tag)
    return best


def classify_clusters(diff: DiffGrid, clusters: list[DiffCluster],
                      model: BuildingModel, schedule: Schedule,
                      as_of: datetime.date, *, topo: TopoMap | None = None,
                      threshold: float = DEFAULT_OVERLAP_THRESHOLD,
                      office_tag: str = DEFAULT_OFFICE_TAG) -> list[Finding]:
    scheduled_cells = _footprint_cells(model, diff, sorted(schedule))
    planned_cells = _footprint_cells(
        model, diff, sorted(lm.global_id for lm in model.landmarks)
    )

    findings: list[Finding] = []
    for cluster in clusters:
        if cluster.kind == EXTRA:
            element, frac = _best_match(cluster, scheduled_cells)
            if element is not None and frac >= threshold:
                if schedule[element] > as_of:
                    findings.append(Finding(
                        cluster, AHEAD_OF_SCHEDULE, element, frac,
                        _storey_name(model, cluster, element),
                    ))
                # already due: the element is simply installed, not a finding
                continue
            office = None
            if topo is not None:
                try:
                    office = nearest_office(model, topo, cluster.centroid,
                                            office_tag)
                except (ProgressError, NoRouteError):
                    office = None
            findings.append(Finding(
                cluster, ANOMALY, None, frac,
                _storey_name(model, cluster, None), office,
            ))
        elif cluster.kind == MISSING:
            element, frac = _best_match(cluster, planned_cells)
            if element is None or frac < threshold:
                continue
            date = schedule.get(element)
            if date is not None and date <= as_of:
                findings.append(Finding(
                    cluster, MISSING_PLANNED, element, frac,
                    _storey_name(model, cluster, element),
                ))
    return findings


def format_findings(findings: list[Finding]) -> str:
    lines = [f"findings {len(findings)}"]
    for f in findings:
        parts = [
            f"finding {f.cluster.cluster_id} {f.verdict}",
            f"element {f.element or '-'}",
            f"overlap {f.matched_overlap!r}",
            f"storey {json.dumps(f.storey)}",
        ]
        if f.nearest_office is not None:
            office_id, route = f.nearest_office
            parts.append(f"office {office_id} cost {route.total_cost!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
