"""Domain entities plus catalog / event-log ingestion and aggregation.

The three parties are the advertiser (AdCreative), the publisher page
(RequestContext) and the viewer (fields carried on the context). Raw
impression events are grouped into regression-ready TrainingRows.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ParseError, ValidationError


class Placement(str, Enum):
    ABOVE_FOLD = "above_fold"
    BELOW_FOLD = "below_fold"


@dataclass(frozen=True)
class AdCreative:
    """An advertiser's creative: category, size, floor-price bid, keywords."""

    ad_id: str
    campaign_id: str
    category: str
    size: str
    bid: float
    landing_page: str
    keywords: frozenset[str]
    locations: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.bid <= 0:
            raise ValidationError(f"ad {self.ad_id!r}: bid must be > 0, got {self.bid}")
        if not self.keywords:
            raise ValidationError(f"ad {self.ad_id!r}: keywords must be nonempty")


@dataclass(frozen=True)
class RequestContext:
    """One page-view request: publisher features plus raw viewer features.

    Viewer fields (location/ip/browser/cookies) are carried through logging
    but never enter the regression features.
    """

    placement: Placement
    size: str
    category: str
    page_keywords: frozenset[str]
    location: tuple[str, str, str] = ("", "", "")  # (area, city, country)
    ip: str = ""
    browser: str = ""
    cookies: str = ""

    @property
    def country(self) -> str:
        return self.location[2]


@dataclass(frozen=True)
class ImpressionEvent:
    timestamp: int  # milliseconds since epoch
    ad_id: str
    context: RequestContext
    clicked: bool
    served_bid: Optional[float] = None  # joined from the catalog; CSV has no bid column

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValidationError(f"event for {self.ad_id!r}: timestamp must be > 0")


@dataclass(frozen=True)
class TrainingRow:
    """One aggregated group in the numeric form the regression consumes."""

    placement_code: int
    size_code: int
    bid: float
    keyword_value: float
    ctr: float

    def __post_init__(self):
        if self.placement_code not in (0, 1):
            raise ValidationError(f"placement_code must be 0 or 1, got {self.placement_code}")
        if not 0.0 <= self.ctr <= 1.0:
            raise ValidationError(f"ctr must lie in [0,1], got {self.ctr}")


def normalize_token(token: str) -> str:
    return token.strip().lower()


def _as_text(stream) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_ad_catalog(stream) -> list[AdCreative]:
    """Parse a JSON-array ad catalog; enforces per-record invariants and
    ad_id uniqueness, preserving file order."""
    text = _as_text(stream)
    if not text.strip():
        return []
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"catalog is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ParseError("catalog must be a JSON array of objects")
    ads: list[AdCreative] = []
    seen: set[str] = set()
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise ParseError(f"catalog record {i}: expected an object")
        try:
            ad = AdCreative(
                ad_id=str(rec["ad_id"]),
                campaign_id=str(rec.get("campaign_id", "")),
                category=str(rec["category"]),
                size=str(rec["size"]),
                bid=float(rec["bid"]),
                landing_page=str(rec.get("landing_page", "")),
                keywords=frozenset(normalize_token(k) for k in rec["keywords"]),
                locations=frozenset(rec.get("locations", []) or []),
            )
        except KeyError as exc:
            raise ParseError(f"catalog record {i}: missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(f"catalog record {i}: {exc}") from exc
        if ad.ad_id in seen:
            raise ValidationError(f"duplicate ad_id {ad.ad_id!r} at record {i}")
        seen.add(ad.ad_id)
        ads.append(ad)
    return ads


def serialize_ad_catalog(ads: Sequence[AdCreative]) -> str:
    records = [
        {
            "ad_id": ad.ad_id,
            "campaign_id": ad.campaign_id,
            "category": ad.category,
            "size": ad.size,
            "bid": ad.bid,
            "landing_page": ad.landing_page,
            "keywords": sorted(ad.keywords),
            "locations": sorted(ad.locations),
        }
        for ad in ads
    ]
    return json.dumps(records, indent=2, sort_keys=True) + "\n"


EVENT_LOG_HEADER = [
    "timestamp", "ad_id", "placement", "size", "category", "keywords",
    "country", "city", "area", "ip", "browser", "clicked",
]


def parse_event_log(stream, bids: Optional[Mapping[str, float]] = None) -> list[ImpressionEvent]:
    """Parse the event-log CSV. `bids` (ad_id -> bid) joins the served bid
    onto each event; without it served_bid stays None and events are only
    usable as keyword transactions."""
    text = _as_text(stream)
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != EVENT_LOG_HEADER:
        raise ParseError(f"unexpected event-log header: {header}")
    events: list[ImpressionEvent] = []
    for i, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(EVENT_LOG_HEADER):
            raise ParseError(f"event row {i}: expected {len(EVENT_LOG_HEADER)} fields, got {len(row)}")
        (ts, ad_id, placement, size, category, keywords,
         country, city, area, ip, browser, clicked) = row
        try:
            timestamp = int(ts)
        except ValueError as exc:
            raise ValidationError(f"event row {i}: unparseable timestamp {ts!r}") from exc
        if clicked not in ("0", "1"):
            raise ValidationError(f"event row {i}: clicked must be 0 or 1, got {clicked!r}")
        try:
            placement_val = Placement(placement)
        except ValueError as exc:
            raise ValidationError(f"event row {i}: unknown placement {placement!r}") from exc
        tokens = frozenset(normalize_token(t) for t in keywords.split(";") if t.strip())
        context = RequestContext(
            placement=placement_val,
            size=size,
            category=category,
            page_keywords=tokens,
            location=(area, city, country),
            ip=ip,
            browser=browser,
        )
        served_bid = None
        if bids is not None:
            if ad_id not in bids:
                raise ValidationError(f"event row {i}: ad_id {ad_id!r} not in catalog")
            served_bid = float(bids[ad_id])
        events.append(ImpressionEvent(timestamp=timestamp, ad_id=ad_id,
                                      context=context, clicked=clicked == "1",
                                      served_bid=served_bid))
    return events


def write_event_row(writer, event: ImpressionEvent) -> None:
    ctx = event.context
    writer.writerow([
        event.timestamp, event.ad_id, ctx.placement.value, ctx.size, ctx.category,
        ";".join(sorted(ctx.page_keywords)),
        ctx.location[2], ctx.location[1], ctx.location[0],
        ctx.ip, ctx.browser, "1" if event.clicked else "0",
    ])


TRAINING_TABLE_HEADER = ["placement", "size", "bid", "keyword_value", "ctr"]


def parse_training_table(stream) -> list[TrainingRow]:
    """Parse a pre-aggregated training CSV (already in numeric-code form)."""
    text = _as_text(stream)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != TRAINING_TABLE_HEADER:
        raise ParseError(f"unexpected training-table header: {header}")
    rows = []
    for i, row in enumerate(reader, start=1):
        if not row:
            continue
        try:
            rows.append(TrainingRow(
                placement_code=int(row[0]),
                size_code=int(row[1]),
                bid=float(row[2]),
                keyword_value=float(row[3]),
                ctr=float(row[4]),
            ))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"training row {i}: {exc}") from exc
    return rows


def compute_ctr(clicks: int, impressions: int) -> float:
    """Click-through rate of a group: clicks / impressions."""
    if impressions <= 0:
        raise ValidationError(f"impressions must be >= 1, got {impressions}")
    if clicks < 0 or clicks > impressions:
        raise ValidationError(f"clicks must lie in [0, impressions], got {clicks}/{impressions}")
    return clicks / impressions


def aggregate_events(events: Iterable[ImpressionEvent], keyword_map,
                     size_registry: Sequence[str] | None = None,
                     mode: str = "strict") -> list[TrainingRow]:
    """Group events by (placement, size, bid, keyword value) and emit one
    TrainingRow per group with its observed CTR.

    Viewer fields are never grouped on. Group order follows first
    appearance in the event stream.
    """
    from .features import DEFAULT_SIZE_REGISTRY, encode_placement, encode_size
    from .keywords import resolve_page_value

    registry = list(size_registry) if size_registry is not None else list(DEFAULT_SIZE_REGISTRY)
    groups: dict[tuple, list[int]] = {}  # key -> [impressions, clicks]
    for event in events:
        if event.served_bid is None:
            raise ValidationError(f"event for ad {event.ad_id!r} has no served bid; "
                                  "parse the log with a catalog to join bids")
        ctx = event.context
        key = (
            encode_placement(ctx.placement),
            encode_size(ctx.size, registry),
            event.served_bid,
            resolve_page_value(keyword_map, ctx.page_keywords, mode=mode),
        )
        counts = groups.setdefault(key, [0, 0])
        counts[0] += 1
        counts[1] += int(event.clicked)
    return [
        TrainingRow(placement_code=p, size_code=s, bid=b, keyword_value=kv,
                    ctr=compute_ctr(clicks, impressions))
        for (p, s, b, kv), (impressions, clicks) in groups.items()
    ]
