"""Configuration document and the shared build pipeline.

One YAML document names every input file; the batch CLI and the TCP
service both build their artifact set through build_artifacts, so a
batch run and a served session answer queries identically. Paths inside
the document resolve relative to the document itself; command-line
overrides are applied by the caller before the pipeline runs.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .building_model import (
    BuildingModel,
    Issue,
    VisibilityTable,
    extract_model,
    load_function_tags,
    load_visibility_table,
)
from .gis_ingest import (
    IDENTITY_TRANSFORM,
    SimilarityTransform2D,
    SiteModel,
    build_site,
    load_site_features,
    merge_obstacles,
)
from .grid_map import (
    DEFAULT_PADDING,
    DEFAULT_RESOLUTION,
    OccupancyGrid,
    cluster_diff,
    diff_grids,
    import_map,
    rasterize,
)
from .ontology import TripleStore, classify_site
from .progress import (
    Finding,
    Schedule,
    as_planned_model,
    classify_clusters,
    load_schedule,
)
from .step_parser import parse_spf
from .topo_map import TopoMap, build_topological_map

DEFAULT_ADDR = "127.0.0.1:4831"

Bounds = tuple[float, float, float, float]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    """Resolved pipeline inputs; every path is absolute or None."""

    model: Path | None = None
    site_features: Path | None = None
    visibility: Path | None = None
    function_tags: Path | None = None
    schedule: Path | None = None
    planned_map: Path | None = None
    asbuilt_map: Path | None = None
    as_of: datetime.date | None = None
    cut_offset: float = 1.0
    transform: SimilarityTransform2D = IDENTITY_TRANSFORM
    resolution: float = DEFAULT_RESOLUTION
    padding: float = DEFAULT_PADDING
    bounds: Bounds | None = None
    min_cluster_area: float = 0.05
    addr: str = DEFAULT_ADDR
    map_out: Path | None = None


_PATH_KEYS = ("model", "site_features", "visibility", "function_tags",
              "schedule", "planned_map", "asbuilt_map")
_KNOWN_KEYS = set(_PATH_KEYS) | {"as_of", "cut_offset", "transform", "grid",
                                 "min_cluster_area", "addr", "map_out"}
_GRID_KEYS = {"resolution", "padding", "bounds"}
_TRANSFORM_KEYS = {"scale", "rotation", "translation"}


def _float(document: dict, key: str, default: float) -> float:
    value = document.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def parse_config(document: object, base_dir: Path) -> Config:
    """Build a Config from a parsed YAML document; relative paths are
    resolved against base_dir and must point at existing files."""
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(document) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

    paths: dict[str, Path | None] = {}
    for key in _PATH_KEYS:
        raw = document.get(key)
        if raw is None:
            paths[key] = None
            continue
        path = (base_dir / str(raw)).resolve()
        if not path.is_file():
            raise ConfigError(f"{key}: no such file: {path}")
        paths[key] = path

    as_of: datetime.date | None = None
    if document.get("as_of") is not None:
        raw = document["as_of"]
        if isinstance(raw, datetime.date):
            as_of = raw
        else:
            try:
                as_of = datetime.date.fromisoformat(str(raw))
            except ValueError as err:
                raise ConfigError(f"as_of: {err}") from err

    transform = IDENTITY_TRANSFORM
    if document.get("transform") is not None:
        section = document["transform"]
        if not isinstance(section, dict) or set(section) - _TRANSFORM_KEYS:
            raise ConfigError("transform: expected scale/rotation/translation")
        translation = section.get("translation", (0.0, 0.0))
        if not isinstance(translation, (list, tuple)) or len(translation) != 2:
            raise ConfigError("transform.translation: expected [x, y]")
        try:
            transform = SimilarityTransform2D(
                scale=_float(section, "scale", 1.0),
                rotation=_float(section, "rotation", 0.0),
                translation=(float(translation[0]), float(translation[1])),
            )
        except ValueError as err:
            raise ConfigError(f"transform: {err}") from err

    resolution = DEFAULT_RESOLUTION
    padding = DEFAULT_PADDING
    bounds: Bounds | None = None
    if document.get("grid") is not None:
        section = document["grid"]
        if not isinstance(section, dict) or set(section) - _GRID_KEYS:
            raise ConfigError("grid: expected resolution/padding/bounds")
        resolution = _float(section, "resolution", DEFAULT_RESOLUTION)
        padding = _float(section, "padding", DEFAULT_PADDING)
        if section.get("bounds") is not None:
            raw_bounds = section["bounds"]
            if not isinstance(raw_bounds, (list, tuple)) or len(raw_bounds) != 4:
                raise ConfigError("grid.bounds: expected [x0, y0, x1, y1]")
            bounds = tuple(float(v) for v in raw_bounds)

    addr = document.get("addr", DEFAULT_ADDR)
    if not isinstance(addr, str):
        raise ConfigError(f"addr: expected 'host:port', got {addr!r}")

    # Output location, so unlike the input paths it need not exist yet.
    map_out: Path | None = None
    raw_out = document.get("map_out")
    if raw_out is not None:
        if not isinstance(raw_out, str) or not raw_out:
            raise ConfigError(f"map_out: expected a path, got {raw_out!r}")
        map_out = (base_dir / raw_out).resolve()

    return Config(
        model=paths["model"],
        site_features=paths["site_features"],
        visibility=paths["visibility"],
        function_tags=paths["function_tags"],
        schedule=paths["schedule"],
        planned_map=paths["planned_map"],
        asbuilt_map=paths["asbuilt_map"],
        as_of=as_of,
        cut_offset=_float(document, "cut_offset", 1.0),
        transform=transform,
        resolution=resolution,
        padding=padding,
        bounds=bounds,
        min_cluster_area=_float(document, "min_cluster_area", 0.05),
        addr=addr,
        map_out=map_out,
    )


def load_config(path) -> Config:
    path = Path(path).resolve()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read configuration: {err}") from err
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed configuration: {err}") from err
    return parse_config(document, path.parent)


# ------------------------------------------------------------ artifacts


@dataclass
class Artifacts:
    """Read-only snapshot every query mode works from."""

    config: Config
    model: BuildingModel
    issues: list[Issue]
    site: SiteModel
    store: TripleStore
    topo: TopoMap
    grid: OccupancyGrid | None
    schedule: Schedule | None


def build_artifacts(config: Config) -> Artifacts:
    """Run the extract/classify/map stages once; later queries only read."""
    visibility = (load_visibility_table(config.visibility)
                  if config.visibility else VisibilityTable())
    tag_overrides = (load_function_tags(config.function_tags)
                     if config.function_tags else None)

    if config.model is not None:
        graph = parse_spf(config.model.read_text(encoding="utf-8"))
        model, issues = extract_model(
            graph,
            cut_offset=config.cut_offset,
            visibility=visibility,
            tag_overrides=tag_overrides,
        )
    else:
        model, issues = BuildingModel(project_name=""), []

    features = (load_site_features(config.site_features)
                if config.site_features else [])
    site = build_site(model, features, config.transform)

    store = classify_site(site)
    topo = build_topological_map(model)

    grid: OccupancyGrid | None
    try:
        grid = rasterize(site, config.resolution, config.bounds,
                         padding=config.padding)
    except ValueError:
        grid = None  # empty site and no explicit bounds

    schedule = load_schedule(config.schedule) if config.schedule else None
    return Artifacts(config=config, model=model, issues=issues, site=site,
                     store=store, topo=topo, grid=grid, schedule=schedule)


def load_map_file(meta_path) -> OccupancyGrid:
    """Import a grid from its metadata document; the image path inside the
    document is taken relative to the document's directory."""
    meta_path = Path(meta_path)
    document = yaml.safe_load(meta_path.read_text(encoding="utf-8"))
    image = document.get("image") if isinstance(document, dict) else None
    if not image:
        raise ConfigError(f"{meta_path}: metadata names no image")
    return import_map(meta_path.parent / str(image), meta_path)


def grid_bounds(grid: OccupancyGrid) -> Bounds:
    return (grid.origin.x, grid.origin.y,
            grid.origin.x + grid.width * grid.resolution,
            grid.origin.y + grid.height * grid.resolution)


class NoAsBuiltError(ValueError):
    pass


def progress_findings(artifacts: Artifacts,
                      as_of: datetime.date | None = None,
                      planned_path=None,
                      built_path=None,
                      min_area: float | None = None) -> list[Finding]:
    """Diff the as-built map against the as-planned state and classify.

    The as-built map must be supplied (argument or configuration). The
    as-planned map may be supplied the same way; otherwise it is derived
    by rasterizing, on the as-built lattice, the model without elements
    scheduled after as_of.
    """
    config = artifacts.config
    if as_of is None:
        as_of = config.as_of
    if as_of is None:
        raise ValueError("no inspection date: pass as_of or configure it")

    built_source = built_path or config.asbuilt_map
    if built_source is None:
        raise NoAsBuiltError("no as-built map loaded")
    built = load_map_file(built_source)

    planned_source = planned_path or config.planned_map
    if planned_source is not None:
        planned = load_map_file(planned_source)
    else:
        schedule = artifacts.schedule or {}
        planned_model = as_planned_model(artifacts.model, schedule, as_of)
        planned_site = merge_obstacles(planned_model, artifacts.site.obstacles)
        planned = rasterize(planned_site, built.resolution, grid_bounds(built))

    diff = diff_grids(planned, built)
    clusters = cluster_diff(
        diff,
        config.min_cluster_area if min_area is None else min_area,
    )
    return classify_clusters(diff, clusters, artifacts.model,
                             artifacts.schedule or {}, as_of,
                             topo=artifacts.topo)
