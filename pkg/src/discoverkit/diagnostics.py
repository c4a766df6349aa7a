"""Endpoint health probes and the status taxonomy they feed.

``diagnose`` runs six probes in a fixed order and ``classify`` turns their
outcomes into one :class:`EndpointStatus`. The classification depends only on
what is stored in the report, so a serialized report can be re-checked later.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Optional, Sequence
from urllib.parse import urlsplit

import requests

from discoverkit import oai
from discoverkit.oai.protocol import OaiProtocolError, TokenLoop, TransportFault
from discoverkit.oai.records import DublinCoreRecord, OaiEndpoint
from discoverkit.timeutil import format_instant, parse_instant, utcnow

logger = logging.getLogger(__name__)

SCHEMA = "diagnosis-report/1"
PROBES = (
    "reachability",
    "identify",
    "list_formats",
    "sample_records",
    "resolver_consistency",
    "fulltext_links",
)
# probe -> the probe whose failure makes it skip
PREREQUISITES = {
    "identify": "reachability",
    "list_formats": "reachability",
    "sample_records": "reachability",
    "resolver_consistency": "identify",
    "fulltext_links": "sample_records",
}
FULLTEXT_SUFFIXES = (".pdf", ".epub", ".docx")
DEFAULT_FULLTEXT_THRESHOLD = 0.25
DEFAULT_SAMPLE_SIZE = 50
MAX_VERIFIED_LINKS = 10


class EndpointStatus(str, enum.Enum):
    FUNCTIONAL = "Functional"
    NON_OPERATING_OAI_PMH = "NonOperatingOaiPmh"
    NO_OAI_PMH = "NoOaiPmh"
    WRONG_OAI_RESOLVER = "WrongOaiResolver"
    NO_FULLTEXT_HARVESTING = "NoFullTextHarvesting"
    LITTLE_FULLTEXT_INDEXING = "LittleFullTextIndexing"

    def __str__(self) -> str:
        return self.value


# Status wording used in the pilot fleet table, including its spelling variants.
STATUS_LABELS = {
    "functional": EndpointStatus.FUNCTIONAL,
    "functioning": EndpointStatus.FUNCTIONAL,
    "functionarl": EndpointStatus.FUNCTIONAL,
    "non-operating oai-pmh": EndpointStatus.NON_OPERATING_OAI_PMH,
    "did not have oai-pmh": EndpointStatus.NO_OAI_PMH,
    "no oai-pmh": EndpointStatus.NO_OAI_PMH,
    "wrong oai resolver": EndpointStatus.WRONG_OAI_RESOLVER,
    "no full-text harvesting": EndpointStatus.NO_FULLTEXT_HARVESTING,
    "little full-text indexing": EndpointStatus.LITTLE_FULLTEXT_INDEXING,
}


def status_from_label(label: str) -> EndpointStatus:
    try:
        return STATUS_LABELS[" ".join(label.lower().split())]
    except KeyError:
        raise ValueError(f"unrecognised endpoint status label {label!r}") from None


RECOMMENDATIONS = {
    EndpointStatus.NO_OAI_PMH: (
        "No OAI-PMH endpoint answers at this address. Enable the OAI-PMH module of the "
        "repository platform and register its base URL with aggregators."
    ),
    EndpointStatus.NON_OPERATING_OAI_PMH: (
        "The OAI-PMH endpoint exists but does not return valid, complete responses. Check "
        "the platform's OAI-PMH configuration, oai_dc support and resumption-token handling."
    ),
    EndpointStatus.WRONG_OAI_RESOLVER: (
        "Identify advertises a different baseURL from the one harvested (or the request is "
        "redirected). Update the baseURL setting after platform migrations."
    ),
    EndpointStatus.NO_FULLTEXT_HARVESTING: (
        "No sampled record links to a full-text file. Expose direct links to PDFs (or set "
        "dc:format) in dc:identifier or dc:relation so aggregators can index full text."
    ),
    EndpointStatus.LITTLE_FULLTEXT_INDEXING: (
        "Only a small share of sampled records link to full text. Add full-text file links "
        "to the oai_dc records of deposited works."
    ),
}


@dataclass
class ProbeResult:
    probe_name: str
    outcome: str  # pass | fail | skip
    detail: str = ""
    latency: float = 0.0
    fault: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "probe_name": self.probe_name,
            "outcome": self.outcome,
            "detail": self.detail,
            "latency": round(self.latency, 6),
            "fault": self.fault,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProbeResult":
        return cls(
            probe_name=data["probe_name"],
            outcome=data["outcome"],
            detail=data.get("detail", ""),
            latency=float(data.get("latency", 0.0)),
            fault=data.get("fault"),
        )


@dataclass
class DiagnosisReport:
    endpoint: OaiEndpoint
    probes: list[ProbeResult]
    status: EndpointStatus
    fulltext_link_fraction: float
    recommendations: list[str] = field(default_factory=list)
    timestamp: datetime = field(default_factory=utcnow)
    fulltext_threshold: float = DEFAULT_FULLTEXT_THRESHOLD

    def probe(self, name: str) -> ProbeResult:
        for p in self.probes:
            if p.probe_name == name:
                return p
        raise KeyError(name)

    def rederived_status(self) -> EndpointStatus:
        return classify(self.probes, self.fulltext_link_fraction, self.fulltext_threshold)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "endpoint": self.endpoint.to_dict(),
            "probes": [p.to_dict() for p in self.probes],
            "status": self.status.value,
            "fulltext_link_fraction": self.fulltext_link_fraction,
            "fulltext_threshold": self.fulltext_threshold,
            "recommendations": list(self.recommendations),
            "timestamp": format_instant(self.timestamp),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosisReport":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"expected schema {SCHEMA}, got {data.get('schema')!r}")
        return cls(
            endpoint=OaiEndpoint.from_dict(data["endpoint"]),
            probes=[ProbeResult.from_dict(p) for p in data["probes"]],
            status=EndpointStatus(data["status"]),
            fulltext_link_fraction=float(data["fulltext_link_fraction"]),
            recommendations=list(data.get("recommendations", [])),
            timestamp=parse_instant(data["timestamp"]),
            fulltext_threshold=float(data.get("fulltext_threshold", DEFAULT_FULLTEXT_THRESHOLD)),
        )


def classify(
    probes: Sequence[ProbeResult],
    fulltext_fraction: float,
    threshold: float = DEFAULT_FULLTEXT_THRESHOLD,
) -> EndpointStatus:
    """Map probe outcomes to a status; earlier failures take precedence."""
    by_name = {p.probe_name: p for p in probes}

    def failed(name: str) -> bool:
        p = by_name.get(name)
        return p is not None and p.outcome == "fail"

    ident = by_name.get("identify")
    if failed("reachability") or (failed("identify") and ident.fault in ("http-404", "not-xml")):
        return EndpointStatus.NO_OAI_PMH
    if failed("identify") or failed("list_formats") or failed("sample_records"):
        return EndpointStatus.NON_OPERATING_OAI_PMH
    if failed("resolver_consistency"):
        return EndpointStatus.WRONG_OAI_RESOLVER
    if fulltext_fraction <= 0:
        return EndpointStatus.NO_FULLTEXT_HARVESTING
    if fulltext_fraction < threshold:
        return EndpointStatus.LITTLE_FULLTEXT_INDEXING
    return EndpointStatus.FUNCTIONAL


def _is_http_url(value: str) -> bool:
    try:
        parts = urlsplit(value.strip())
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc) and " " not in value.strip()


def extract_fulltext_candidates(record: DublinCoreRecord) -> list[str]:
    """URLs in dc:identifier/relation/source that look like full-text files.

    A URL qualifies when its path ends in a document suffix, or when the record
    declares ``application/pdf`` in dc:format.
    """
    if record.deleted:
        return []
    pdf_format = any("application/pdf" in f.lower() for f in record.values("format"))
    found = []
    for element in ("identifier", "relation", "source"):
        for value in record.values(element):
            url = value.strip()
            if not _is_http_url(url):
                continue
            if pdf_format or urlsplit(url).path.lower().endswith(FULLTEXT_SUFFIXES):
                if url not in found:
                    found.append(url)
    return found


class _Probe:
    def __init__(self, name: str):
        self.name = name
        self.started = time.perf_counter()

    def result(self, outcome: str, detail: str = "", fault: Optional[str] = None) -> ProbeResult:
        return ProbeResult(self.name, outcome, detail, time.perf_counter() - self.started, fault)


def _fault_code(exc: Exception) -> str:
    if isinstance(exc, TransportFault):
        return exc.code
    if isinstance(exc, OaiProtocolError):
        return exc.code
    if isinstance(exc, TokenLoop):
        return "token-loop"
    return type(exc).__name__


def diagnose(
    endpoint: OaiEndpoint,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    *,
    fulltext_threshold: float = DEFAULT_FULLTEXT_THRESHOLD,
    verify_links: bool = False,
    sleep: Callable[[float], None] = time.sleep,
) -> DiagnosisReport:
    """Probe ``endpoint`` and classify it. Never raises for endpoint faults."""
    if sample_size < 1:
        raise ValueError("sample_size must be at least 1")
    results: dict[str, ProbeResult] = {}
    notes: list[str] = []

    def skip(name: str) -> bool:
        pre = PREREQUISITES.get(name)
        if pre and results[pre].outcome != "pass":
            results[name] = ProbeResult(name, "skip", f"skipped: {pre} did not pass")
            return True
        return False

    # 1. reachability
    p = _Probe("reachability")
    try:
        oai.fetch(endpoint, endpoint.base_url, sleep=sleep)
        results["reachability"] = p.result("pass", "base URL answered")
    except TransportFault as exc:
        # any HTTP answer other than "not found" means a server is there
        if exc.category == "http-status" and exc.status not in (404, 410):
            results["reachability"] = p.result("pass", f"base URL answered with HTTP {exc.status}")
        else:
            results["reachability"] = p.result("fail", str(exc), exc.code)

    # 2. Identify
    info = None
    if not skip("identify"):
        p = _Probe("identify")
        try:
            info = oai.identify(endpoint, sleep=sleep)
            results["identify"] = p.result(
                "pass", f"{info.repository_name or 'unnamed repository'}, protocol {info.protocol_version}"
            )
            if info.protocol_version != "2.0":
                results["identify"] = p.result("fail", f"protocolVersion {info.protocol_version!r}", "protocol-version")
        except (TransportFault, OaiProtocolError) as exc:
            results["identify"] = p.result("fail", str(exc), _fault_code(exc))

    # 3. ListMetadataFormats
    if not skip("list_formats"):
        p = _Probe("list_formats")
        try:
            prefixes = [f.prefix for f in oai.list_metadata_formats(endpoint, sleep=sleep)]
            if "oai_dc" in prefixes:
                results["list_formats"] = p.result("pass", f"formats: {', '.join(prefixes)}")
            else:
                results["list_formats"] = p.result("fail", f"oai_dc not advertised ({prefixes})", "no-oai-dc")
        except (TransportFault, OaiProtocolError) as exc:
            results["list_formats"] = p.result("fail", str(exc), _fault_code(exc))

    # 4. ListRecords sample
    sample: list[DublinCoreRecord] = []
    if not skip("sample_records"):
        p = _Probe("sample_records")
        stream = oai.list_records(endpoint, "oai_dc", sleep=sleep)
        try:
            for record in stream:
                sample.append(record)
                if len(sample) >= sample_size:
                    break
        except (TransportFault, OaiProtocolError, TokenLoop) as exc:
            results["sample_records"] = p.result(
                "fail", f"after {len(sample)} records: {exc}", _fault_code(exc)
            )
        else:
            if sample:
                results["sample_records"] = p.result(
                    "pass", f"{len(sample)} records parsed from {stream.pages_fetched} page(s)"
                )
            else:
                results["sample_records"] = p.result("fail", "ListRecords exposed no records", "no-records")

    # 5. resolver consistency (reuses the Identify response)
    if not skip("resolver_consistency"):
        p = _Probe("resolver_consistency")
        if info.base_url_mismatch:
            results["resolver_consistency"] = p.result(
                "fail", f"Identify baseURL {info.base_url!r} != {endpoint.base_url!r}", "baseurl-mismatch"
            )
        else:
            results["resolver_consistency"] = p.result("pass", "baseURL matches")

    # 6. full-text links
    fraction = 0.0
    if not skip("fulltext_links"):
        p = _Probe("fulltext_links")
        live = [r for r in sample if not r.deleted]
        candidates = [extract_fulltext_candidates(r) for r in live]
        linked = sum(1 for c in candidates if c)
        fraction = linked / len(live) if live else 0.0
        detail = f"{linked}/{len(live)} sampled records link full text"
        if verify_links and linked:
            urls = [c[0] for c in candidates if c][:MAX_VERIFIED_LINKS]
            ok = sum(1 for u in urls if _head_ok(endpoint, u))
            fraction *= ok / len(urls)
            detail += f"; {ok}/{len(urls)} verified by HEAD"
        outcome = "pass" if fraction >= fulltext_threshold else "fail"
        results["fulltext_links"] = p.result(outcome, detail, None if outcome == "pass" else "low-fulltext")

    probes = [results[name] for name in PROBES]
    status = classify(probes, fraction, fulltext_threshold)
    if status in RECOMMENDATIONS:
        notes.append(RECOMMENDATIONS[status])
    return DiagnosisReport(
        endpoint=endpoint,
        probes=probes,
        status=status,
        fulltext_link_fraction=fraction,
        recommendations=notes,
        fulltext_threshold=fulltext_threshold,
    )


def _head_ok(endpoint: OaiEndpoint, url: str) -> bool:
    try:
        resp = requests.head(
            url, headers={"User-Agent": endpoint.user_agent}, timeout=endpoint.timeout, allow_redirects=True
        )
    except requests.RequestException:
        return False
    return resp.status_code < 400


def diagnose_many(
    endpoints: Iterable[OaiEndpoint], sample_size: int = DEFAULT_SAMPLE_SIZE, workers: int = 4, **kw
) -> list[DiagnosisReport]:
    """Diagnose several endpoints concurrently; results keep input order."""
    endpoints = list(endpoints)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda e: diagnose(e, sample_size, **kw), endpoints))
