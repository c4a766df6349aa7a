"""A local OAI-PMH repository with switchable fault modes.

Each fault mode reproduces one endpoint pathology seen in the wild. The fault
profile can be swapped while the server runs, which is how tests model a
repository being fixed.
"""

from __future__ import annotations

import errno
import json
import logging
import math
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlsplit
from xml.sax.saxutils import escape, quoteattr

from discoverkit.diagnostics import FULLTEXT_SUFFIXES
from discoverkit.mock.corpus import MockCorpus
from discoverkit.oai.protocol import InvalidRequest, VerbRequest
from discoverkit.oai.records import (
    DC_NS,
    OAI_DC_NS,
    OAI_NS,
    DublinCoreRecord,
    parse_datestamp,
)

logger = logging.getLogger(__name__)

FAULT_MODES = (
    "healthy",
    "http-404-everywhere",
    "html-instead-of-xml",
    "malformed-xml-on-listrecords",
    "broken-resumption-token",
    "wrong-resolver-baseurl",
    "empty-list-records",
    "no-fulltext-links",
    "sparse-fulltext-links",
)

WRONG_RESOLVER_BASE_URL = "http://legacy-resolver.mock.example/oai/request"
OAI_PATH = "/oai"
MANIFEST_PATH = "/__manifest"
_LOOP_TOKEN = "loop/0"

_LOGIN_PAGE = (
    b"<!DOCTYPE html>\n<html><head><title>Sign in</title></head>"
    b"<body><form action='/login'><input name='user'></form></body></html>"
)


class PortInUse(OSError):
    pass


@dataclass(frozen=True)
class FaultProfile:
    mode: str = "healthy"
    latency_ms: int = 0
    fraction: Optional[float] = None

    def __post_init__(self):
        if self.mode not in FAULT_MODES:
            raise ValueError(f"unknown fault mode {self.mode!r}")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        if self.mode == "sparse-fulltext-links":
            if self.fraction is None or not 0 < self.fraction < 0.25:
                raise ValueError("sparse-fulltext-links needs a fraction in (0, 0.25)")
        elif self.fraction is not None:
            raise ValueError(f"{self.mode} takes no fraction")

    @classmethod
    def parse(cls, text: str, latency_ms: int = 0) -> "FaultProfile":
        """Parse ``mode`` or ``sparse-fulltext-links(0.1)``."""
        text = text.strip()
        if text.endswith(")") and "(" in text:
            mode, _, arg = text[:-1].partition("(")
            return cls(mode.strip(), latency_ms, float(arg))
        return cls(text, latency_ms)

    def __str__(self) -> str:
        if self.fraction is not None:
            return f"{self.mode}({self.fraction:g})"
        return self.mode


def _strip_fulltext(record: DublinCoreRecord) -> DublinCoreRecord:
    if record.deleted:
        return record
    elements = {}
    for element, values in record.elements.items():
        if element in ("identifier", "relation", "source"):
            values = [v for v in values if not urlsplit(v).path.lower().endswith(FULLTEXT_SUFFIXES)]
        elif element == "format":
            values = ["text/html" if "application/pdf" in v.lower() else v for v in values]
        if values:
            elements[element] = values
    return DublinCoreRecord(header=record.header, elements=elements, extensions=record.extensions)


def _keeps_fulltext(index: int, fraction: float) -> bool:
    # evenly spaced, so every prefix holds close to `fraction` linked records
    return math.floor((index + 1) * fraction) > math.floor(index * fraction)


class MockRepository:
    """Request-independent OAI-PMH logic; the HTTP handler is a thin shell."""

    def __init__(self, corpus: MockCorpus, fault: FaultProfile):
        self.corpus = corpus
        self._fault = fault
        self._lock = threading.Lock()
        self.base_url = ""
        self.requests: list[str] = []

    @property
    def fault(self) -> FaultProfile:
        return self._fault

    def set_fault(self, fault: FaultProfile) -> None:
        with self._lock:
            self._fault = fault

    def _served_records(self, fault: FaultProfile) -> list[DublinCoreRecord]:
        records = self.corpus.records
        if fault.mode == "no-fulltext-links":
            return [_strip_fulltext(r) for r in records]
        if fault.mode == "sparse-fulltext-links":
            return [
                r if _keeps_fulltext(i, fault.fraction) else _strip_fulltext(r)
                for i, r in enumerate(records)
            ]
        return records

    def manifest(self) -> dict:
        return {
            "base_url": self.base_url,
            "size": len(self.corpus.records),
            "page_size": self.corpus.page_size,
            "fault": str(self.fault),
            "identifiers": self.corpus.identifiers,
        }

    def handle(self, path: str, query: str) -> tuple[int, str, bytes]:
        """Return ``(status, content_type, body)`` for one GET."""
        fault = self.fault  # one consistent profile per request
        if fault.latency_ms:
            time.sleep(fault.latency_ms / 1000.0)
        if path == MANIFEST_PATH:
            return 200, "application/json", json.dumps(self.manifest()).encode()
        with self._lock:
            self.requests.append(f"{path}?{query}")
        if fault.mode == "http-404-everywhere" or path.rstrip("/") != OAI_PATH:
            return 404, "text/html", b"<html><body><h1>404 Not Found</h1></body></html>"
        if fault.mode == "html-instead-of-xml":
            return 200, "text/html; charset=utf-8", _LOGIN_PAGE

        params = parse_qs(query, keep_blank_values=True)
        request_attrs = {k: v[0] for k, v in params.items() if len(v) == 1}
        verb = request_attrs.get("verb", "")
        if any(len(v) > 1 for v in params.values()):
            return self._error(request_attrs, "badArgument", "repeated argument")
        if verb not in _VERB_HANDLERS:
            return self._error({}, "badVerb", "illegal or missing verb")
        args = {k: v for k, v in request_attrs.items() if k != "verb"}
        try:
            VerbRequest(verb, args).validate()
        except InvalidRequest as exc:
            return self._error(request_attrs, "badArgument", str(exc))
        return _VERB_HANDLERS[verb](self, fault, request_attrs, args)

    # -- rendering ---------------------------------------------------------

    def _envelope(self, request_attrs: dict, inner: str) -> bytes:
        attrs = "".join(f" {k}={quoteattr(v)}" for k, v in sorted(request_attrs.items()))
        now = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        doc = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<OAI-PMH xmlns="{OAI_NS}" '
            'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
            'xsi:schemaLocation="http://www.openarchives.org/OAI/2.0/ '
            'http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd">'
            f"<responseDate>{now}</responseDate>"
            f"<request{attrs}>{escape(self.base_url)}</request>"
            f"{inner}</OAI-PMH>"
        )
        return doc.encode("utf-8")

    def _ok(self, request_attrs: dict, inner: str) -> tuple[int, str, bytes]:
        return 200, "text/xml; charset=utf-8", self._envelope(request_attrs, inner)

    def _error(self, request_attrs: dict, code: str, message: str) -> tuple[int, str, bytes]:
        inner = f'<error code="{code}">{escape(message)}</error>'
        return 200, "text/xml; charset=utf-8", self._envelope(request_attrs, inner)

    @staticmethod
    def _header_xml(record: DublinCoreRecord) -> str:
        h = record.header
        status = ' status="deleted"' if h.deleted else ""
        stamp = h.datestamp.strftime("%Y-%m-%d") if h.datestamp else ""
        sets = "".join(f"<setSpec>{escape(s)}</setSpec>" for s in h.set_specs)
        return (
            f"<header{status}><identifier>{escape(h.identifier)}</identifier>"
            f"<datestamp>{stamp}</datestamp>{sets}</header>"
        )

    def _record_xml(self, record: DublinCoreRecord) -> str:
        if record.deleted:
            return f"<record>{self._header_xml(record)}</record>"
        values = "".join(
            f"<dc:{element}>{escape(value)}</dc:{element}>"
            for element, vals in record.elements.items()
            for value in vals
        )
        return (
            f"<record>{self._header_xml(record)}<metadata>"
            f'<oai_dc:dc xmlns:oai_dc="{OAI_DC_NS}" xmlns:dc="{DC_NS}">{values}</oai_dc:dc>'
            "</metadata></record>"
        )

    # -- verbs -------------------------------------------------------------

    def _identify(self, fault, request_attrs, args):
        base = WRONG_RESOLVER_BASE_URL if fault.mode == "wrong-resolver-baseurl" else self.base_url
        stamps = [r.header.datestamp for r in self.corpus.records if r.header.datestamp]
        earliest = min(stamps).strftime("%Y-%m-%d") if stamps else "1970-01-01"
        inner = (
            "<Identify><repositoryName>Mock Repository</repositoryName>"
            f"<baseURL>{escape(base)}</baseURL><protocolVersion>2.0</protocolVersion>"
            "<adminEmail>admin@repo.mock.example</adminEmail>"
            f"<earliestDatestamp>{earliest}</earliestDatestamp>"
            "<deletedRecord>persistent</deletedRecord>"
            "<granularity>YYYY-MM-DD</granularity></Identify>"
        )
        return self._ok(request_attrs, inner)

    def _list_formats(self, fault, request_attrs, args):
        ident = args.get("identifier")
        if ident is not None and ident not in set(self.corpus.identifiers):
            return self._error(request_attrs, "idDoesNotExist", ident)
        inner = (
            "<ListMetadataFormats><metadataFormat><metadataPrefix>oai_dc</metadataPrefix>"
            "<schema>http://www.openarchives.org/OAI/2.0/oai_dc.xsd</schema>"
            f"<metadataNamespace>{OAI_DC_NS}</metadataNamespace>"
            "</metadataFormat></ListMetadataFormats>"
        )
        return self._ok(request_attrs, inner)

    def _list_sets(self, fault, request_attrs, args):
        if "resumptionToken" in args:
            return self._error(request_attrs, "badResumptionToken", "sets are not paged")
        specs = sorted({s for r in self.corpus.records for s in r.header.set_specs})
        if not specs:
            return self._error(request_attrs, "noSetHierarchy", "no sets")
        inner = "".join(
            f"<set><setSpec>{escape(s)}</setSpec><setName>{escape(s)}</setName></set>" for s in specs
        )
        return self._ok(request_attrs, f"<ListSets>{inner}</ListSets>")

    def _get_record(self, fault, request_attrs, args):
        if args["metadataPrefix"] != "oai_dc":
            return self._error(request_attrs, "cannotDisseminateFormat", args["metadataPrefix"])
        for rec in self._served_records(fault):
            if rec.identifier == args["identifier"]:
                return self._ok(request_attrs, f"<GetRecord>{self._record_xml(rec)}</GetRecord>")
        return self._error(request_attrs, "idDoesNotExist", args["identifier"])

    def _list(self, fault, request_attrs, args, verb):
        if "resumptionToken" in args:
            token = args["resumptionToken"]
            if fault.mode == "broken-resumption-token":
                prefix, from_, until, set_spec, offset = "oai_dc", "", "", "", 0
            else:
                try:
                    prefix, from_, until, set_spec, raw_offset = token.split("/")
                    offset = int(raw_offset)
                except ValueError:
                    return self._error(request_attrs, "badResumptionToken", token)
                if offset <= 0:
                    return self._error(request_attrs, "badResumptionToken", token)
        else:
            prefix = args["metadataPrefix"]
            from_, until, set_spec = args.get("from", ""), args.get("until", ""), args.get("set", "")
            offset = 0
        if prefix != "oai_dc":
            return self._error(request_attrs, "cannotDisseminateFormat", prefix)
        for stamp in (from_, until):
            if stamp and len(stamp) != 10:
                return self._error(request_attrs, "badArgument", "repository granularity is YYYY-MM-DD")
        if fault.mode == "empty-list-records":
            return self._ok(request_attrs, f"<{verb}></{verb}>")

        lo = parse_datestamp(from_) if from_ else None
        hi = parse_datestamp(until) if until else None
        matching = [
            r
            for r in self._served_records(fault)
            if (lo is None or r.header.datestamp >= lo)
            and (hi is None or r.header.datestamp <= hi)
            and (not set_spec or set_spec in r.header.set_specs)
        ]
        if not matching:
            return self._error(request_attrs, "noRecordsMatch", "no records match")
        if offset >= len(matching):
            return self._error(request_attrs, "badResumptionToken", args.get("resumptionToken", ""))
        size = self.corpus.page_size
        page = matching[offset : offset + size]
        render = self._record_xml if verb == "ListRecords" else self._header_xml
        items = "".join(render(r) for r in page)

        complete = len(matching)
        if fault.mode == "broken-resumption-token":
            token_xml = f'<resumptionToken completeListSize="{complete}" cursor="0">{escape(_LOOP_TOKEN)}</resumptionToken>'
        elif offset + size < complete:
            next_token = f"{prefix}/{from_}/{until}/{set_spec}/{offset + size}"
            token_xml = (
                f'<resumptionToken completeListSize="{complete}" cursor="{offset}">'
                f"{escape(next_token)}</resumptionToken>"
            )
        elif offset > 0:
            token_xml = f'<resumptionToken completeListSize="{complete}" cursor="{offset}"/>'
        else:
            token_xml = ""
        status, ctype, body = self._ok(request_attrs, f"<{verb}>{items}{token_xml}</{verb}>")
        if fault.mode == "malformed-xml-on-listrecords":
            body = body[: int(len(body) * 0.6)]
        return status, ctype, body


_VERB_HANDLERS = {
    "Identify": MockRepository._identify,
    "ListMetadataFormats": MockRepository._list_formats,
    "ListSets": MockRepository._list_sets,
    "GetRecord": MockRepository._get_record,
    "ListRecords": lambda self, f, r, a: self._list(f, r, a, "ListRecords"),
    "ListIdentifiers": lambda self, f, r, a: self._list(f, r, a, "ListIdentifiers"),
}


class _Handler(BaseHTTPRequestHandler):
    repository: MockRepository  # set on the per-server subclass

    def do_GET(self):
        parts = urlsplit(self.path)
        status, ctype, body = self.repository.handle(parts.path, parts.query)
        self._send(status, ctype, body)

    def do_HEAD(self):
        parts = urlsplit(self.path)
        status = 200 if parts.path.lower().endswith(FULLTEXT_SUFFIXES) else 404
        self._send(status, "application/octet-stream", b"", head=True)

    def _send(self, status, ctype, body, head=False):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if not head:
            self.wfile.write(body)

    def log_message(self, format, *args):
        logger.debug("mock %s - %s", self.address_string(), format % args)


class MockServer:
    """Handle on a running mock repository (also a context manager)."""

    def __init__(self, repository: MockRepository, httpd: ThreadingHTTPServer):
        self.repository = repository
        self._httpd = httpd
        # a short poll interval keeps shutdown() quick
        self._thread = threading.Thread(target=httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return self.repository.base_url

    @property
    def manifest_url(self) -> str:
        return f"http://127.0.0.1:{self.port}{MANIFEST_PATH}"

    @property
    def requests(self) -> list[str]:
        return self.repository.requests

    def set_fault(self, fault: FaultProfile) -> None:
        self.repository.set_fault(fault)

    def start(self) -> "MockServer":
        self._thread.start()
        return self

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockServer":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def serve(corpus: MockCorpus, fault: FaultProfile | None = None, port: int = 0, host: str = "127.0.0.1") -> MockServer:
    """Start a mock repository on ``host:port`` (0 picks a free port).

    The OAI-PMH base URL is ``http://host:port/oai``.
    """
    repository = MockRepository(corpus, fault or FaultProfile())
    handler = type("MockHandler", (_Handler,), {"repository": repository})
    try:
        httpd = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUse(exc.errno, f"port {port} is already in use") from None
        raise
    httpd.daemon_threads = True
    repository.base_url = f"http://{host}:{httpd.server_address[1]}{OAI_PATH}"
    return MockServer(repository, httpd).start()
