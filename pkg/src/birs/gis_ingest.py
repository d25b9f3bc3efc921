"""Site-context ingestion: outdoor obstacle polygons around the building.

Features (existing buildings, water surfaces, vegetation) arrive in a
line-oriented text format in some source CRS, get mapped into the
building's local plan frame by a user-supplied 2D similarity transform,
and ride along with the building model as obstacles for the grid
rasterizer and the ontology.

Format, one feature per block::

    feature <id> <category> <crs-label>
    v <x> <y>
    ...
    end

Blank lines and ``#`` comments are ignored. Categories form a closed set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .building_model import BuildingModel
from .geometry import DegeneratePolygon, Polygon2D, signed_area

CATEGORIES = frozenset({"ExistingBuilding", "WaterSurface", "Vegetation"})

_DEGENERATE_AREA = 1e-12


class GisError(ValueError):
    """Base class for site ingestion failures."""


class SiteFormatError(GisError):
    def __init__(self, lineno: int, detail: str):
        super().__init__(f"line {lineno}: {detail}")
        self.lineno = lineno
        self.detail = detail


class UnknownCategoryError(GisError):
    def __init__(self, category: str):
        super().__init__(f"unknown feature category {category!r}")
        self.category = category


class TooFewVerticesError(GisError):
    def __init__(self, feature_id: str, count: int):
        super().__init__(f"feature {feature_id!r} has {count} vertices, need >= 3")
        self.feature_id = feature_id
        self.count = count


class DegenerateAfterTransformError(GisError):
    def __init__(self, feature_id: str):
        super().__init__(f"feature {feature_id!r} degenerate after transform")
        self.feature_id = feature_id


@dataclass(frozen=True)
class GeoFeature:
    """A source-CRS obstacle polygon; vertex order as authored."""

    feature_id: str
    category: str
    vertices: tuple[tuple[float, float], ...]
    source_crs: str


@dataclass(frozen=True)
class SimilarityTransform2D:
    """v maps to scale * R(rotation) * v + translation."""

    scale: float
    rotation: float
    translation: tuple[float, float]

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be finite and > 0, got {self.scale!r}")

    def apply(self, point: tuple[float, float]) -> tuple[float, float]:
        cos_r = math.cos(self.rotation)
        sin_r = math.sin(self.rotation)
        x, y = point
        return (
            self.scale * (cos_r * x - sin_r * y) + self.translation[0],
            self.scale * (sin_r * x + cos_r * y) + self.translation[1],
        )

    def inverse(self) -> "SimilarityTransform2D":
        inv_scale = 1.0 / self.scale
        cos_r = math.cos(-self.rotation)
        sin_r = math.sin(-self.rotation)
        tx, ty = self.translation
        return SimilarityTransform2D(
            scale=inv_scale,
            rotation=-self.rotation,
            translation=(
                -inv_scale * (cos_r * tx - sin_r * ty),
                -inv_scale * (sin_r * tx + cos_r * ty),
            ),
        )


IDENTITY_TRANSFORM = SimilarityTransform2D(1.0, 0.0, (0.0, 0.0))


@dataclass(frozen=True)
class Obstacle:
    """A site feature in the building's local frame."""

    feature_id: str
    category: str
    polygon: Polygon2D


@dataclass(frozen=True)
class SiteModel:
    building: BuildingModel
    obstacles: tuple[Obstacle, ...]


def parse_site_features(text: str) -> list[GeoFeature]:
    features: list[GeoFeature] = []
    current: tuple[int, str, str, str] | None = None  # (lineno, id, category, crs)
    vertices: list[tuple[float, float]] = []
    seen_ids: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        keyword = fields[0]
        if keyword == "feature":
            if current is not None:
                raise SiteFormatError(lineno, "feature block not closed by 'end'")
            if len(fields) != 4:
                raise SiteFormatError(lineno, "expected: feature <id> <category> <crs>")
            _, feature_id, category, crs = fields
            if category not in CATEGORIES:
                raise UnknownCategoryError(category)
            if feature_id in seen_ids:
                raise SiteFormatError(lineno, f"duplicate feature id {feature_id!r}")
            current = (lineno, feature_id, category, crs)
            vertices = []
        elif keyword == "v":
            if current is None:
                raise SiteFormatError(lineno, "vertex outside a feature block")
            if len(fields) != 3:
                raise SiteFormatError(lineno, "expected: v <x> <y>")
            try:
                vertices.append((float(fields[1]), float(fields[2])))
            except ValueError:
                raise SiteFormatError(lineno, f"bad coordinate in {line!r}") from None
        elif keyword == "end":
            if current is None:
                raise SiteFormatError(lineno, "'end' without open feature block")
            _, feature_id, category, crs = current
            if len(vertices) < 3:
                raise TooFewVerticesError(feature_id, len(vertices))
            features.append(GeoFeature(feature_id, category, tuple(vertices), crs))
            seen_ids.add(feature_id)
            current = None
        else:
            raise SiteFormatError(lineno, f"unknown directive {keyword!r}")

    if current is not None:
        raise SiteFormatError(current[0], "feature block not closed by 'end'")
    return features


def to_local(feature: GeoFeature, transform: SimilarityTransform2D) -> Polygon2D:
    """Map a feature's vertices into the local frame, normalized to CCW."""
    mapped = [transform.apply(v) for v in feature.vertices]
    if abs(signed_area(mapped)) <= _DEGENERATE_AREA:
        raise DegenerateAfterTransformError(feature.feature_id)
    try:
        return Polygon2D.make(mapped)
    except DegeneratePolygon:
        raise DegenerateAfterTransformError(feature.feature_id) from None


def merge_obstacles(model: BuildingModel, obstacles: Iterable[Obstacle]) -> SiteModel:
    return SiteModel(building=model, obstacles=tuple(obstacles))


def build_site(model: BuildingModel, features: Iterable[GeoFeature],
               transform: SimilarityTransform2D = IDENTITY_TRANSFORM) -> SiteModel:
    """Parse-level features to a SiteModel in one step."""
    obstacles = [
        Obstacle(f.feature_id, f.category, to_local(f, transform))
        for f in features
    ]
    return merge_obstacles(model, obstacles)


def load_site_features(path) -> list[GeoFeature]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_site_features(handle.read())
