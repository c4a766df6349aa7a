"""HTTP side of the OAI-PMH client: polite fetching, retries and paging.

Every function takes an :class:`OaiEndpoint`; nothing here keeps state between
calls, so endpoints and these functions are safe to share across threads. A
single ``list_records`` stream is sequential.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterator, Optional
from urllib.parse import urlsplit

import requests

from discoverkit.oai.protocol import (
    IdentifyInfo,
    MetadataFormat,
    OaiProtocolError,
    ParsedResponse,
    TokenLoop,
    TransportFault,
    VerbRequest,
    build_request,
    parse_response,
)
from discoverkit.oai.records import DublinCoreRecord, OaiEndpoint

logger = logging.getLogger(__name__)

_RETRY_AFTER_CAP = 60.0


@dataclass
class Fetched:
    url: str
    final_url: str
    status: int
    body: bytes
    redirects: tuple[str, ...] = ()


def fetch(
    endpoint: OaiEndpoint,
    url: str,
    *,
    session: Optional[requests.Session] = None,
    sleep: Callable[[float], None] = time.sleep,
    method: str = "GET",
) -> Fetched:
    """GET ``url`` with the endpoint's retry policy.

    5xx responses, timeouts and connection errors are retried up to
    ``max_retries`` times with exponential backoff. Any other non-200 status
    raises ``TransportFault('http-status')`` straight away.
    """
    http = session or requests
    headers = {"User-Agent": endpoint.user_agent}
    attempt = 0
    while True:
        fault: TransportFault
        retry_after = None
        try:
            resp = http.request(method, url, headers=headers, timeout=endpoint.timeout)
        except requests.Timeout as exc:
            fault = TransportFault("timeout", str(exc))
        except requests.RequestException as exc:
            fault = TransportFault("connection", str(exc))
        else:
            if resp.status_code < 500:
                if resp.status_code != 200:
                    raise TransportFault("http-status", status=resp.status_code)
                return Fetched(
                    url=url,
                    final_url=resp.url,
                    status=resp.status_code,
                    body=resp.content,
                    redirects=tuple(r.headers.get("Location", "") for r in resp.history),
                )
            fault = TransportFault("http-status", status=resp.status_code)
            retry_after = _retry_after(resp.headers.get("Retry-After"))
        if attempt >= endpoint.max_retries:
            raise fault
        delay = endpoint.backoff * (2**attempt)
        if retry_after is not None:
            delay = max(delay, retry_after)
        logger.info("retrying %s after %s (attempt %d)", url, fault, attempt + 1)
        sleep(delay)
        attempt += 1


def _retry_after(value: Optional[str]) -> Optional[float]:
    if not value:
        return None
    try:
        return min(float(value), _RETRY_AFTER_CAP)
    except ValueError:
        return None


def request_verb(
    endpoint: OaiEndpoint,
    req: VerbRequest,
    *,
    session: Optional[requests.Session] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[ParsedResponse, Fetched]:
    fetched = fetch(endpoint, build_request(endpoint, req), session=session, sleep=sleep)
    return parse_response(fetched.body, req.verb), fetched


def normalize_base_url(url: str) -> str:
    """Canonical form for comparing base URLs: lowercase scheme/host, no
    default port, no trailing slash, no query."""
    parts = urlsplit(url.strip())
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    port = parts.port
    if port and not ((scheme == "http" and port == 80) or (scheme == "https" and port == 443)):
        host = f"{host}:{port}"
    return f"{scheme}://{host}{parts.path.rstrip('/')}"


def identify(endpoint: OaiEndpoint, **kw) -> IdentifyInfo:
    """Issue Identify. ``base_url_mismatch`` is set when the advertised
    baseURL or the redirect target differs from the requested base URL."""
    parsed, fetched = request_verb(endpoint, VerbRequest("Identify"), **kw)
    info: IdentifyInfo = parsed.payload
    wanted = normalize_base_url(endpoint.base_url)
    landed = normalize_base_url(fetched.final_url.split("?", 1)[0])
    info.base_url_mismatch = normalize_base_url(info.base_url) != wanted or landed != wanted
    return info


def list_metadata_formats(endpoint: OaiEndpoint, **kw) -> list[MetadataFormat]:
    parsed, _ = request_verb(endpoint, VerbRequest("ListMetadataFormats"), **kw)
    return parsed.payload


def get_record(endpoint: OaiEndpoint, identifier: str, metadata_prefix: str = "oai_dc", **kw) -> DublinCoreRecord:
    req = VerbRequest("GetRecord", {"identifier": identifier, "metadataPrefix": metadata_prefix})
    parsed, _ = request_verb(endpoint, req, **kw)
    return parsed.payload


class RecordStream:
    """Iterable over a ListRecords harvest, following resumption tokens.

    Counters (``pages_fetched``, ``records_seen``, ``last_datestamp``) update
    as the stream is consumed; pages are only requested on demand.
    """

    def __init__(
        self,
        endpoint: OaiEndpoint,
        metadata_prefix: str,
        from_: Optional[str] = None,
        until: Optional[str] = None,
        set_spec: Optional[str] = None,
        *,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not metadata_prefix:
            raise ValueError("metadata_prefix must be non-empty")
        args = {"metadataPrefix": metadata_prefix}
        if from_:
            args["from"] = from_
        if until:
            args["until"] = until
        if set_spec:
            args["set"] = set_spec
        self.endpoint = endpoint
        self.initial = VerbRequest("ListRecords", args)
        self.initial.validate()
        self._sleep = sleep
        self.pages_fetched = 0
        self.records_seen = 0
        self.records_deleted = 0
        self.complete_list_size: Optional[int] = None
        self.last_datestamp: Optional[datetime] = None

    def __iter__(self) -> Iterator[DublinCoreRecord]:
        req = self.initial
        previous_token: Optional[str] = None
        with requests.Session() as session:
            while True:
                if self.pages_fetched:
                    self._sleep(self.endpoint.politeness_delay / 1000.0)
                try:
                    parsed, _ = request_verb(self.endpoint, req, session=session, sleep=self._sleep)
                except OaiProtocolError as exc:
                    if exc.code == "noRecordsMatch" and self.pages_fetched == 0:
                        return
                    exc.resume_from = self.last_datestamp
                    raise
                except TransportFault as exc:
                    exc.resume_from = self.last_datestamp
                    raise
                self.pages_fetched += 1
                token = parsed.resumption_token
                if token is not None and token.complete_list_size is not None:
                    self.complete_list_size = token.complete_list_size
                next_token = token.token if token is not None else ""
                if next_token and next_token == previous_token:
                    raise TokenLoop(next_token)
                for record in parsed.payload:
                    self.records_seen += 1
                    if record.deleted:
                        self.records_deleted += 1
                    stamp = record.header.datestamp
                    if stamp is not None and (self.last_datestamp is None or stamp > self.last_datestamp):
                        self.last_datestamp = stamp
                    yield record
                if not next_token:
                    return
                previous_token = next_token
                req = VerbRequest("ListRecords", {"resumptionToken": next_token})


def list_records(
    endpoint: OaiEndpoint,
    metadata_prefix: str = "oai_dc",
    from_: Optional[str] = None,
    until: Optional[str] = None,
    set_spec: Optional[str] = None,
    **kw,
) -> RecordStream:
    """Harvest with ListRecords. ``noRecordsMatch`` on the first page yields
    an empty stream; a repeated resumption token raises :class:`TokenLoop`."""
    return RecordStream(endpoint, metadata_prefix, from_, until, set_spec, **kw)
