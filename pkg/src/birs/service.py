"""Freestanding TCP broker answering semantic building queries.

The broker speaks newline-delimited UTF-8 JSON "envelopes" over plain TCP
and combines a request/response service with latched publish/subscribe
topics, so one listener serves both interactive queries (room info, route
planning, progress reports) and map distribution to robots.

Envelope shape (field order on the wire is canonical: keys sorted,
compact separators, one envelope per LF-terminated line):

    {"v": 1, "type": "req",   "id": "<client id>", "op": "...", "payload": {}}
    {"v": 1, "type": "res",   "id": "<echoed>",    "op": "...", "payload": {}}
    {"v": 1, "type": "err",   "id": "<echoed>",    "payload": {"code", "detail"}}
    {"v": 1, "type": "sub",   "topic": "/..."}
    {"v": 1, "type": "pub",   "topic": "/...",     "payload": <any JSON>}
    {"v": 1, "type": "event", "topic": "/...",     "seq": n, "payload": <any>}
    {"v": 1, "type": "ack",   "topic": "/...",     "payload": {}}

Unknown envelope fields are ignored so the schema can grow. ``v`` is
mandatory; anything other than 1 is refused. Topics are latched: the
broker remembers the latest payload per topic and hands it to every new
subscriber exactly once, immediately after the subscription ack.
"""

from __future__ import annotations

import json
import logging
import os
import socketserver
import threading
import datetime
from pathlib import Path

from . import pipeline
from .grid_map import OccupancyGrid, export_map
from .topo_map import (NoRouteError, Route, TopoMap, UnknownSpaceError,
                       Waypoint, plan_path, resolve_space, room_of_point)

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 16 * 1024 * 1024  # hard framing cap; longer lines are fatal

TOPIC_TOPO_MAP = "/birs/topo_map"
TOPIC_GRID_META = "/birs/grid_meta"

# Error codes carried in err payloads.
BAD_ENVELOPE = "bad_envelope"
UNSUPPORTED_VERSION = "unsupported_version"
BAD_REQUEST = "bad_request"
UNKNOWN_OP = "unknown_op"
UNKNOWN_ROOM = "unknown_room"
NO_ROUTE = "no_route"
UNKNOWN_ELEMENT = "unknown_element"
NO_GRID = "no_grid"
NO_ASBUILT = "no_asbuilt_loaded"
INTERNAL_ERROR = "internal_error"


class BindFailureError(OSError):
    """The listening socket could not be bound to the requested address."""


class OpError(Exception):
    """A request failed in a way the protocol can name."""

    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


def canonical_bytes(envelope: dict) -> bytes:
    """One envelope as its unique wire form: sorted keys, no whitespace."""
    return (json.dumps(envelope, sort_keys=True, separators=(",", ":"),
                       ensure_ascii=True) + "\n").encode("utf-8")


def parse_addr(text: str) -> tuple[str, int]:
    """Split 'host:port' into a bind tuple."""
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"listen address must be 'host:port', got {text!r}")
    return host, int(port)


def _point(p) -> list[float]:
    return [float(p[0]), float(p[1])]


def topo_map_payload(topo: TopoMap) -> dict:
    """Topological map as a JSON document for the latched map topic."""
    nodes = []
    for space_id in sorted(topo.nodes):
        node = topo.nodes[space_id]
        nodes.append({
            "id": node.space_id,
            "name": node.long_name,
            "centroid": _point(node.centroid),
            "storey": node.storey,
            "function_tags": list(node.function_tags),
            "sensor_unreliable": bool(node.sensor_unreliable),
        })
    edges = []
    for edge in sorted(topo.edges,
                       key=lambda e: (e.node_a, e.node_b, e.via or "")):
        edges.append({
            "a": edge.node_a,
            "b": edge.node_b,
            "via": edge.via,
            "cost": edge.length_cost,
            "door_center": (None if edge.door_center is None
                            else _point(edge.door_center)),
            "width": edge.width,
            "height": edge.height,
        })
    return {"nodes": nodes, "edges": edges, "warnings": list(topo.warnings)}


def grid_meta_payload(grid: OccupancyGrid, image: str | None) -> dict:
    origin = grid.origin
    return {
        "resolution": grid.resolution,
        "origin": [origin.x, origin.y, origin.theta],
        "width": grid.width,
        "height": grid.height,
        "image": image,
    }


def _waypoint_doc(w: Waypoint) -> dict:
    return {
        "kind": w.kind,
        "point": _point(w.point),
        "room": w.room,
        "via": w.via,
        "width": w.width,
        "height": w.height,
        "grid_trust": w.grid_trust,
    }


def _route_doc(route: Route) -> dict:
    return {
        "nodes": list(route.nodes),
        "waypoints": [_waypoint_doc(w) for w in route.waypoints],
        "total_cost": route.total_cost,
    }


def _finding_doc(finding) -> dict:
    office = None
    if finding.nearest_office is not None:
        space_id, route = finding.nearest_office
        office = {"space": space_id, "cost": route.total_cost,
                  "nodes": list(route.nodes)}
    cluster = finding.cluster
    return {
        "id": cluster.cluster_id,
        "kind": cluster.kind,
        "verdict": finding.verdict,
        "element": finding.element,
        "overlap": finding.matched_overlap,
        "storey": finding.storey,
        "area": cluster.area,
        "centroid": _point(cluster.centroid),
        "bbox": [float(v) for v in cluster.bbox],
        "office": office,
    }


def _require(payload: dict, key: str, kinds, label: str):
    value = payload.get(key)
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise OpError(BAD_REQUEST, f"payload field {key!r} must be {label}")
    return value


def _require_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value:
        raise OpError(BAD_REQUEST,
                      f"payload field {key!r} must be a non-empty string")
    return value


def _require_num(payload: dict, key: str) -> float:
    return float(_require(payload, key, (int, float), "a number"))


class _ClientConn:
    """One connected client: a write stream plus the lock serializing it."""

    def __init__(self, wfile):
        self._wfile = wfile
        self._lock = threading.Lock()

    def send(self, envelope: dict) -> None:
        self.send_bytes(canonical_bytes(envelope))

    def send_bytes(self, data: bytes) -> None:
        with self._lock:
            self._wfile.write(data)
            self._wfile.flush()


class Broker:
    """Shared state behind every connection: artifacts plus the topic cache.

    Artifacts are treated as immutable after construction; the only mutable
    state is the latched topic cache and the subscriber registry, and every
    mutation of those happens under one lock. Latched delivery runs under
    the same lock, which is what makes "new subscriber sees the latest
    payload exactly once, then every later publish" an actual guarantee
    rather than a race.
    """

    def __init__(self, artifacts: pipeline.Artifacts, *,
                 map_out: Path | None = None):
        self.artifacts = artifacts
        self._lock = threading.Lock()
        self._latched: dict[str, tuple[int, object]] = {}
        self._seqs: dict[str, int] = {}
        self._subs: dict[str, list[_ClientConn]] = {}
        self._grid_meta = self._prepare_grid_meta(
            map_out if map_out is not None else artifacts.config.map_out)
        self._ops = {
            "room_info": self._op_room_info,
            "path": self._op_path,
            "locate": self._op_locate,
            "material": self._op_material,
            "grid_meta": self._op_grid_meta,
            "progress_report": self._op_progress_report,
        }

    def _prepare_grid_meta(self, map_out: Path | None) -> dict | None:
        grid = self.artifacts.grid
        if grid is None:
            return None
        image = None
        if map_out is not None:
            # advertise an absolute path: subscribers share the host, not
            # necessarily the server's working directory
            base = Path(map_out).resolve()
            image_path = base.with_suffix(".pgm")
            meta_path = base.with_suffix(".yaml")
            image_path.parent.mkdir(parents=True, exist_ok=True)
            export_map(grid, image_path, meta_path)
            image = str(image_path)
        return grid_meta_payload(grid, image)

    def publish_startup(self) -> None:
        """Latch the map topics before the first client can connect."""
        self.publish(TOPIC_TOPO_MAP, topo_map_payload(self.artifacts.topo))
        if self._grid_meta is not None:
            self.publish(TOPIC_GRID_META, self._grid_meta)

    # -- topic cache -------------------------------------------------

    def publish(self, topic: str, payload, *,
                ack_to: _ClientConn | None = None) -> int:
        """Latch payload on topic and fan one event out per subscriber.

        The publisher's ack (seq assignment) goes out before the fan-out,
        so a self-subscribed publisher reads ack then event.
        """
        with self._lock:
            seq = self._seqs.get(topic, 0) + 1
            self._seqs[topic] = seq
            self._latched[topic] = (seq, payload)
            if ack_to is not None:
                ack_to.send({"v": PROTOCOL_VERSION, "type": "ack",
                             "topic": topic, "payload": {"seq": seq}})
            data = canonical_bytes({"v": PROTOCOL_VERSION, "type": "event",
                                    "topic": topic, "seq": seq,
                                    "payload": payload})
            for conn in list(self._subs.get(topic, ())):
                try:
                    conn.send_bytes(data)
                except OSError:
                    self._subs[topic].remove(conn)
            return seq

    def subscribe(self, topic: str, conn: _ClientConn) -> None:
        """Register conn, ack, and replay the latched payload exactly once."""
        with self._lock:
            subscribers = self._subs.setdefault(topic, [])
            if conn not in subscribers:
                subscribers.append(conn)
            latched = self._latched.get(topic)
            conn.send({"v": PROTOCOL_VERSION, "type": "ack", "topic": topic,
                       "payload": {"latched": latched is not None}})
            if latched is not None:
                seq, payload = latched
                conn.send({"v": PROTOCOL_VERSION, "type": "event",
                           "topic": topic, "seq": seq, "payload": payload})

    def unregister(self, conn: _ClientConn) -> None:
        with self._lock:
            for subscribers in self._subs.values():
                if conn in subscribers:
                    subscribers.remove(conn)

    # -- request ops -------------------------------------------------

    def dispatch(self, op: str, payload: dict) -> dict:
        handler = self._ops.get(op)
        if handler is None:
            raise OpError(UNKNOWN_OP, f"unsupported op {op!r}")
        return handler(payload)

    def _op_room_info(self, payload: dict) -> dict:
        model = self.artifacts.model
        name = _require_str(payload, "name")
        try:
            space_id = resolve_space(model, name)
        except UnknownSpaceError as exc:
            raise OpError(UNKNOWN_ROOM, str(exc)) from exc
        space = model.space_by_id(space_id)
        storey = model.storey_by_id(space.storey)
        node = self.artifacts.topo.nodes.get(space_id)
        boundary = {}
        for rel in model.boundaries:
            if rel.space != space_id or rel.element is None:
                continue
            landmark = model.landmark_by_id(rel.element)
            if landmark is None or landmark.global_id in boundary:
                continue
            boundary[landmark.global_id] = {
                "global_id": landmark.global_id,
                "class": landmark.ifc_class,
                "material": landmark.material.name,
                "sensor_visible": bool(landmark.material.sensor_visible),
            }
        return {
            "global_id": space.global_id,
            "name": space.long_name,
            "centroid": _point(space.centroid),
            "storey": None if storey is None else storey.name,
            "function_tags": list(space.function_tags),
            "sensor_unreliable": (False if node is None
                                  else bool(node.sensor_unreliable)),
            "boundary": [boundary[gid] for gid in sorted(boundary)],
        }

    def _op_path(self, payload: dict) -> dict:
        model = self.artifacts.model
        try:
            start = resolve_space(model, _require_str(payload, "from"))
            goal = resolve_space(model, _require_str(payload, "to"))
        except UnknownSpaceError as exc:
            raise OpError(UNKNOWN_ROOM, str(exc)) from exc
        try:
            route = plan_path(self.artifacts.topo, start, goal)
        except NoRouteError as exc:
            raise OpError(NO_ROUTE, str(exc)) from exc
        return _route_doc(route)

    def _op_locate(self, payload: dict) -> dict:
        x = _require_num(payload, "x")
        y = _require_num(payload, "y")
        return {"space": room_of_point(self.artifacts.model, (x, y))}

    def _op_material(self, payload: dict) -> dict:
        global_id = _require_str(payload, "element_global_id")
        landmark = self.artifacts.model.landmark_by_id(global_id)
        if landmark is None:
            raise OpError(UNKNOWN_ELEMENT, f"no element {global_id!r}")
        return {
            "name": landmark.material.name,
            "sensor_visible": bool(landmark.material.sensor_visible),
        }

    def _op_grid_meta(self, payload: dict) -> dict:
        if self._grid_meta is None:
            raise OpError(NO_GRID, "no occupancy grid loaded")
        return dict(self._grid_meta)

    def _op_progress_report(self, payload: dict) -> dict:
        raw = payload.get("as_of")
        if raw is None:
            as_of = self.artifacts.config.as_of
            if as_of is None:
                raise OpError(BAD_REQUEST,
                              "no inspection date: pass as_of or configure one")
        elif isinstance(raw, str):
            try:
                as_of = datetime.date.fromisoformat(raw)
            except ValueError as exc:
                raise OpError(BAD_REQUEST, f"as_of: {exc}") from exc
        else:
            raise OpError(BAD_REQUEST, "as_of must be an ISO date string")
        try:
            findings = pipeline.progress_findings(self.artifacts, as_of=as_of)
        except pipeline.NoAsBuiltError as exc:
            raise OpError(NO_ASBUILT, str(exc)) from exc
        return {"as_of": as_of.isoformat(),
                "findings": [_finding_doc(f) for f in findings]}


def _err_envelope(request_id: str | None, code: str, detail: str) -> dict:
    return {"v": PROTOCOL_VERSION, "type": "err", "id": request_id,
            "payload": {"code": code, "detail": detail}}


class _Handler(socketserver.StreamRequestHandler):
    """Per-connection loop: one request line in, one or more envelopes out.

    Every recoverable problem is answered with an err envelope and the
    connection stays open; only framing violations (oversized line) and
    socket failures end the session. Nothing a client sends can disturb
    another connection.
    """

    def handle(self) -> None:
        conn = _ClientConn(self.wfile)
        broker: Broker = self.server.broker
        try:
            while True:
                line = self.rfile.readline(MAX_LINE_BYTES + 1)
                if not line:
                    break
                if len(line) > MAX_LINE_BYTES:
                    conn.send(_err_envelope(
                        None, BAD_ENVELOPE,
                        f"line exceeds {MAX_LINE_BYTES} bytes"))
                    break
                self._handle_line(line, conn, broker)
        except OSError:
            pass  # client went away mid-write; nothing to clean up but the registry
        finally:
            broker.unregister(conn)

    def _handle_line(self, line: bytes, conn: _ClientConn,
                     broker: Broker) -> None:
        try:
            text = line.decode("utf-8").strip()
        except UnicodeDecodeError as exc:
            conn.send(_err_envelope(None, BAD_ENVELOPE, f"not UTF-8: {exc}"))
            return
        if not text:
            return
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            conn.send(_err_envelope(None, BAD_ENVELOPE,
                                    f"invalid JSON: {exc.msg}"))
            return
        if not isinstance(doc, dict):
            conn.send(_err_envelope(None, BAD_ENVELOPE,
                                    "envelope must be a JSON object"))
            return
        raw_id = doc.get("id")
        request_id = raw_id if isinstance(raw_id, str) else None
        if doc.get("v") != PROTOCOL_VERSION:
            code = BAD_ENVELOPE if "v" not in doc else UNSUPPORTED_VERSION
            conn.send(_err_envelope(request_id, code,
                                    f"protocol version must be "
                                    f"{PROTOCOL_VERSION}"))
            return
        etype = doc.get("type")
        if etype == "req":
            self._handle_req(doc, request_id, conn, broker)
        elif etype == "sub":
            self._handle_sub(doc, request_id, conn, broker)
        elif etype == "pub":
            self._handle_pub(doc, request_id, conn, broker)
        elif etype in ("res", "err", "event", "ack"):
            conn.send(_err_envelope(request_id, BAD_ENVELOPE,
                                    f"clients may not send type {etype!r}"))
        else:
            conn.send(_err_envelope(request_id, BAD_ENVELOPE,
                                    "type must be one of req, sub, pub"))

    def _handle_req(self, doc: dict, request_id: str | None,
                    conn: _ClientConn, broker: Broker) -> None:
        if request_id is None:
            conn.send(_err_envelope(None, BAD_ENVELOPE,
                                    "req requires a string id"))
            return
        op = doc.get("op")
        if not isinstance(op, str) or not op:
            conn.send(_err_envelope(request_id, BAD_ENVELOPE,
                                    "req requires a string op"))
            return
        payload = doc.get("payload", {})
        if not isinstance(payload, dict):
            conn.send(_err_envelope(request_id, BAD_ENVELOPE,
                                    "payload must be a JSON object"))
            return
        try:
            result = broker.dispatch(op, payload)
        except OpError as exc:
            conn.send(_err_envelope(request_id, exc.code, exc.detail))
        except Exception as exc:  # a handler bug must not take the broker down
            log.exception("op %s failed", op)
            conn.send(_err_envelope(request_id, INTERNAL_ERROR,
                                    f"{type(exc).__name__}: {exc}"))
        else:
            conn.send({"v": PROTOCOL_VERSION, "type": "res",
                       "id": request_id, "op": op, "payload": result})

    def _topic_of(self, doc: dict, request_id: str | None,
                  conn: _ClientConn) -> str | None:
        topic = doc.get("topic")
        if not isinstance(topic, str) or not topic:
            conn.send(_err_envelope(request_id, BAD_ENVELOPE,
                                    "sub/pub require a string topic"))
            return None
        return topic

    def _handle_sub(self, doc: dict, request_id: str | None,
                    conn: _ClientConn, broker: Broker) -> None:
        topic = self._topic_of(doc, request_id, conn)
        if topic is not None:
            broker.subscribe(topic, conn)

    def _handle_pub(self, doc: dict, request_id: str | None,
                    conn: _ClientConn, broker: Broker) -> None:
        topic = self._topic_of(doc, request_id, conn)
        if topic is not None:
            broker.publish(topic, doc.get("payload"), ack_to=conn)


class BirsServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    broker: Broker

    def handle_error(self, request, client_address):
        log.warning("connection %s aborted", client_address, exc_info=True)


def serve(artifacts: pipeline.Artifacts, addr: str | None = None, *,
          map_out: Path | None = None) -> BirsServer:
    """Bind the broker and latch the map topics; caller runs serve_forever.

    Address precedence: explicit argument, then the BIRS_ADDR environment
    variable, then the configured listen address.
    """
    if addr is None:
        addr = os.environ.get("BIRS_ADDR") or artifacts.config.addr
    host, port = parse_addr(addr)
    broker = Broker(artifacts, map_out=map_out)
    try:
        server = BirsServer((host, port), _Handler)
    except OSError as exc:
        raise BindFailureError(f"cannot bind {addr}: {exc}") from exc
    server.broker = broker
    broker.publish_startup()
    return server
