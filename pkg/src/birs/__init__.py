"""Building-information robotic semantics.

Parses IFC building models in STEP physical-file form, reduces them to
plan-view maps (topological graph + occupancy grid), classifies contents
into a SUMO/CORA-aligned taxonomy queryable as triples, ingests GIS site
features, diffs as-planned against as-built grids into progress findings,
and serves the results over a small line-delimited JSON protocol.
"""

__version__ = "0.1.0"
