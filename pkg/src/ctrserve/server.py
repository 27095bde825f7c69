"""Contextual ad selection: candidate pool filtering, bid/CTR ranking and
the low-latency HTTP front end with atomic snapshot reload."""

from __future__ import annotations

import csv
import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Sequence
from urllib.parse import parse_qs, urlparse

from .catalog import (EVENT_LOG_HEADER, AdCreative, ImpressionEvent, Placement,
                      RequestContext, normalize_token, parse_ad_catalog,
                      write_event_row)
from .errors import EncodingError, NoFillError, ValidationError
from .features import encode_placement, encode_size
from .keywords import KeywordMap, load_keyword_map, resolve_page_value
from .regression import RegressionModel, load_model, predict

MODE_BID = "bid"
MODE_CTR = "ctr"

NO_FILL = "no_fill"
FILLED = "filled"


@dataclass(frozen=True)
class CandidatePool:
    request: RequestContext
    candidates: tuple[tuple[AdCreative, int], ...]  # (ad, keyword overlap)


@dataclass(frozen=True)
class AdResponse:
    status: str
    mode: str
    latency_micros: int = 0
    ad_id: str = ""
    campaign_id: str = ""
    landing_page: str = ""
    size: str = ""
    score: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "status": self.status, "mode": self.mode,
            "latency_micros": self.latency_micros, "ad_id": self.ad_id,
            "campaign_id": self.campaign_id, "landing_page": self.landing_page,
            "size": self.size, "score": self.score,
        })


def keyword_overlap(ad: AdCreative, request: RequestContext) -> int:
    return len(ad.keywords & request.page_keywords)


def _eligible(ad: AdCreative, request: RequestContext) -> bool:
    if ad.size != request.size or ad.category != request.category:
        return False
    if ad.locations and request.country not in ad.locations:
        return False
    return True


def build_pool(catalog: Sequence[AdCreative], request: RequestContext) -> CandidatePool:
    """Eligibility filter: exact size and category match, country-level
    location targeting (empty set means untargeted) and overlap >= 1."""
    candidates = []
    for ad in catalog:
        if not _eligible(ad, request):
            continue
        overlap = keyword_overlap(ad, request)
        if overlap >= 1:
            candidates.append((ad, overlap))
    return CandidatePool(request=request, candidates=tuple(candidates))


def select_by_bid(pool: CandidatePool) -> AdCreative:
    """Maximal keyword overlap first, then maximal bid, then smallest ad_id."""
    if not pool.candidates:
        raise NoFillError("empty candidate pool")
    best_ad, _ = min(pool.candidates, key=lambda c: (-c[1], -c[0].bid, c[0].ad_id))
    return best_ad


def select_by_ctr(pool: CandidatePool, model: RegressionModel,
                  keyword_map: KeywordMap) -> tuple[AdCreative, float]:
    """Argmax of predicted CTR over the pool; ties break by higher bid then
    smallest ad_id. Candidates that fail to encode are skipped."""
    if not pool.candidates:
        raise NoFillError("empty candidate pool")
    request = pool.request
    placement_code = encode_placement(request.placement)
    kw_value = resolve_page_value(keyword_map, request.page_keywords, mode="fallback")
    best: Optional[tuple[float, float, str, AdCreative]] = None
    skipped = 0
    for ad, _overlap in pool.candidates:
        try:
            size_code = encode_size(ad.size, model.schema.size_registry)
        except EncodingError:
            skipped += 1
            continue
        score = predict(model, (placement_code, size_code, ad.bid, kw_value))
        key = (score, ad.bid, ad.ad_id)
        if best is None or (key[0], key[1]) > (best[0], best[1]) or \
                (key[0] == best[0] and key[1] == best[1] and key[2] < best[2]):
            best = (score, ad.bid, ad.ad_id, ad)
    if best is None:
        raise NoFillError(f"all {skipped} candidates failed feature encoding")
    return best[3], best[0]


@dataclass
class ServingState:
    """Immutable snapshot of the state one request reads: the catalog (with
    a (size, category) index), the model and the keyword map."""

    catalog: tuple[AdCreative, ...]
    model: Optional[RegressionModel] = None
    keyword_map: Optional[KeywordMap] = None
    index: dict = field(init=False)
    ad_ids: frozenset = field(init=False)

    def __post_init__(self):
        index: dict[tuple[str, str], list[AdCreative]] = {}
        for ad in self.catalog:
            index.setdefault((ad.size, ad.category), []).append(ad)
        self.index = index
        self.ad_ids = frozenset(ad.ad_id for ad in self.catalog)

    def bucket(self, request: RequestContext) -> list[AdCreative]:
        return self.index.get((request.size, request.category), [])


def serve(request: RequestContext, mode: str, state: ServingState) -> AdResponse:
    """Build the contextual pool and rank it; a no-fill is a status, not an
    error. Only ads sharing the request's (size, category) bucket can pass
    the filter, so the pool is built from that bucket."""
    start = time.perf_counter_ns()
    pool = build_pool(state.bucket(request), request)
    try:
        if mode == MODE_CTR:
            ad, score = select_by_ctr(pool, state.model, state.keyword_map)
        else:
            ad = select_by_bid(pool)
            score = ad.bid
    except NoFillError:
        latency = (time.perf_counter_ns() - start) // 1000
        return AdResponse(status=NO_FILL, mode=mode, latency_micros=int(latency))
    latency = (time.perf_counter_ns() - start) // 1000
    return AdResponse(status=FILLED, mode=mode, latency_micros=int(latency),
                      ad_id=ad.ad_id, campaign_id=ad.campaign_id,
                      landing_page=ad.landing_page, size=ad.size, score=score)


class EventLogWriter:
    """Durable append-only event log in the event-log CSV format; appends
    are serialized per writer."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh).writerow(EVENT_LOG_HEADER)

    def record_event(self, state: ServingState, ad_id: str,
                     request: RequestContext, clicked: bool,
                     timestamp: Optional[int] = None) -> ImpressionEvent:
        if ad_id not in state.ad_ids:
            raise ValidationError(f"unknown ad_id {ad_id!r}")
        event = ImpressionEvent(
            timestamp=timestamp if timestamp is not None else time.time_ns() // 1_000_000,
            ad_id=ad_id, context=request, clicked=clicked)
        with self._lock:
            with open(self.path, "a", newline="") as fh:
                write_event_row(csv.writer(fh), event)
                fh.flush()
        return event


@dataclass
class ServerConfig:
    catalog_path: str
    model_path: Optional[str] = None
    map_path: Optional[str] = None
    event_log_path: Optional[str] = None
    port: int = 8080
    default_mode: str = MODE_BID


def load_state(config: ServerConfig) -> ServingState:
    with open(config.catalog_path) as fh:
        catalog = tuple(parse_ad_catalog(fh))
    model = keyword_map = None
    if config.model_path:
        with open(config.model_path) as fh:
            model = load_model(fh)
    if config.map_path:
        with open(config.map_path) as fh:
            keyword_map = load_keyword_map(fh)
    return ServingState(catalog=catalog, model=model, keyword_map=keyword_map)


def _parse_request_qs(query: str) -> tuple[RequestContext, Optional[str]]:
    params = {k: v[0] for k, v in parse_qs(query).items()}
    placement = Placement(params.get("placement", Placement.ABOVE_FOLD.value))
    keywords = frozenset(normalize_token(t)
                         for t in params.get("keywords", "").split(",") if t.strip())
    context = RequestContext(
        placement=placement,
        size=params.get("size", ""),
        category=params.get("category", ""),
        page_keywords=keywords,
        location=(params.get("area", ""), params.get("city", ""), params.get("country", "")),
        ip=params.get("ip", ""),
        browser=params.get("browser", ""),
    )
    return context, params.get("mode")


class AdRequestHandler(BaseHTTPRequestHandler):
    server_version = "ctrserve/0.1"

    def log_message(self, fmt, *args):  # keep request serving quiet
        pass

    def _send(self, code: int, body: str = "", content_type: str = "application/json"):
        payload = body.encode("utf-8")
        self.send_response(code)
        if payload:
            self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        if payload:
            self.wfile.write(payload)

    def do_GET(self):
        url = urlparse(self.path)
        app: "AdServer" = self.server.app
        if url.path == "/healthz":
            self._send(200, json.dumps({"status": "ok"}))
        elif url.path == "/ad":
            try:
                context, mode = _parse_request_qs(url.query)
            except ValueError as exc:
                self._send(400, json.dumps({"error": str(exc)}))
                return
            mode = mode or app.default_mode
            state = app.state
            if mode == MODE_CTR and (state.model is None or state.keyword_map is None):
                self._send(400, json.dumps({"error": "ctr mode requires a model and keyword map"}))
                return
            response = serve(context, mode, state)
            if response.status == NO_FILL:
                self._send(204)
            else:
                self._send(200, response.to_json())
        else:
            self._send(404, json.dumps({"error": "not found"}))

    def do_POST(self):
        url = urlparse(self.path)
        app: "AdServer" = self.server.app
        if url.path == "/reload":
            try:
                app.reload()
            except Exception as exc:
                self._send(500, json.dumps({"error": str(exc)}))
                return
            self._send(200, json.dumps({"status": "reloaded"}))
        elif url.path == "/event":
            length = int(self.headers.get("Content-Length", "0"))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
                context = RequestContext(
                    placement=Placement(payload.get("placement", Placement.ABOVE_FOLD.value)),
                    size=payload.get("size", ""),
                    category=payload.get("category", ""),
                    page_keywords=frozenset(normalize_token(t) for t in payload.get("keywords", [])),
                    location=(payload.get("area", ""), payload.get("city", ""), payload.get("country", "")),
                    ip=payload.get("ip", ""), browser=payload.get("browser", ""),
                )
                app.event_log.record_event(app.state, payload["ad_id"], context,
                                           bool(payload.get("clicked", False)))
            except (KeyError, ValueError, ValidationError, json.JSONDecodeError) as exc:
                self._send(400, json.dumps({"error": str(exc)}))
                return
            self._send(202, json.dumps({"status": "accepted"}))
        else:
            self._send(404, json.dumps({"error": "not found"}))


class AdServer:
    """HTTP front end around a ServingState snapshot. `state` is replaced
    atomically on reload; in-flight requests keep the snapshot they grabbed."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.default_mode = config.default_mode
        self.state = load_state(config)
        log_path = config.event_log_path or "events.csv"
        self.event_log = EventLogWriter(log_path)
        self._httpd: Optional[ThreadingHTTPServer] = None

    def reload(self) -> None:
        self.state = load_state(self.config)

    def start(self) -> int:
        """Bind and start serving on a background thread; returns the port."""
        self._httpd = ThreadingHTTPServer(("127.0.0.1", self.config.port), AdRequestHandler)
        self._httpd.app = self
        thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        thread.start()
        return self._httpd.server_address[1]

    def serve_forever(self) -> None:
        self._httpd = ThreadingHTTPServer(("127.0.0.1", self.config.port), AdRequestHandler)
        self._httpd.app = self
        try:
            self._httpd.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            self._httpd.server_close()

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
