"""OAI-PMH 2.0 request grammar and response parsing.

``parse_response`` accepts arbitrary bytes. It either returns a
:class:`ParsedResponse`, raises :class:`OaiProtocolError` for a well-formed
``<error>`` reply, or raises :class:`TransportFault` for anything that is not
an OAI-PMH document. No other exception escapes it.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Union
from urllib.parse import quote

from discoverkit.oai.records import (
    DC_ELEMENTS,
    DC_NS,
    OAI_DC_NS,
    OAI_NS,
    DublinCoreRecord,
    InvalidDatestamp,
    OaiEndpoint,
    RecordHeader,
    parse_datestamp,
)

VERBS = (
    "Identify",
    "ListMetadataFormats",
    "ListSets",
    "ListRecords",
    "ListIdentifiers",
    "GetRecord",
)

ARGUMENT_ORDER = ("metadataPrefix", "from", "until", "set", "identifier", "resumptionToken")

ERROR_CODES = frozenset(
    {
        "badArgument",
        "badResumptionToken",
        "badVerb",
        "cannotDisseminateFormat",
        "idDoesNotExist",
        "noRecordsMatch",
        "noMetadataFormats",
        "noSetHierarchy",
    }
)

# verb -> (required, optional); resumptionToken handled separately
_VERB_ARGUMENTS = {
    "Identify": (set(), set()),
    "ListMetadataFormats": (set(), {"identifier"}),
    "ListSets": (set(), set()),
    "ListRecords": ({"metadataPrefix"}, {"from", "until", "set"}),
    "ListIdentifiers": ({"metadataPrefix"}, {"from", "until", "set"}),
    "GetRecord": ({"identifier", "metadataPrefix"}, set()),
}
_RESUMABLE = {"ListSets", "ListRecords", "ListIdentifiers"}


class InvalidRequest(ValueError):
    pass


class OaiProtocolError(Exception):
    """An ``<error code=...>`` reply from the repository."""

    def __init__(self, code: str, message: str = "", resume_from=None):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message
        self.resume_from = resume_from


class TransportFault(Exception):
    """The endpoint answered with something other than an OAI-PMH document.

    ``category`` is one of ``not-xml``, ``wrong-namespace``, ``verb-mismatch``,
    ``truncated`` (body defects) or ``http-status``, ``timeout``,
    ``connection`` (transport defects).
    """

    def __init__(self, category: str, detail: str = "", status: Optional[int] = None, resume_from=None):
        text = category if not detail else f"{category}: {detail}"
        if status is not None:
            text = f"{category} {status}" + (f": {detail}" if detail else "")
        super().__init__(text)
        self.category = category
        self.detail = detail
        self.status = status
        self.resume_from = resume_from

    @property
    def code(self) -> str:
        if self.category == "http-status" and self.status is not None:
            return f"http-{self.status}"
        return self.category


class TokenLoop(Exception):
    def __init__(self, token: str):
        super().__init__(f"server returned resumption token {token!r} twice in a row")
        self.token = token


@dataclass(frozen=True)
class VerbRequest:
    verb: str
    arguments: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.verb not in VERBS:
            raise InvalidRequest(f"unknown verb {self.verb!r}")
        args = dict(self.arguments)
        unknown = set(args) - set(ARGUMENT_ORDER)
        if unknown:
            raise InvalidRequest(f"unknown arguments: {sorted(unknown)}")
        if "resumptionToken" in args:
            if len(args) > 1:
                raise InvalidRequest("resumptionToken is an exclusive argument")
            if self.verb not in _RESUMABLE:
                raise InvalidRequest(f"{self.verb} does not take a resumptionToken")
            if not args["resumptionToken"]:
                raise InvalidRequest("resumptionToken must be non-empty")
            return
        required, optional = _VERB_ARGUMENTS[self.verb]
        missing = required - set(args)
        if missing:
            raise InvalidRequest(f"{self.verb} requires {sorted(missing)}")
        illegal = set(args) - required - optional
        if illegal:
            raise InvalidRequest(f"{self.verb} does not accept {sorted(illegal)}")
        stamps = {}
        for key in ("from", "until"):
            if key in args:
                try:
                    stamps[key] = parse_datestamp(args[key])
                except InvalidDatestamp as exc:
                    raise InvalidRequest(str(exc)) from None
        if len(stamps) == 2:
            if len(args["from"].strip()) != len(args["until"].strip()):
                raise InvalidRequest("from and until must share a granularity")
            if stamps["from"] > stamps["until"]:
                raise InvalidRequest("from must not be later than until")


def build_request(endpoint: OaiEndpoint, req: VerbRequest) -> str:
    req.validate()
    parts = ["verb=" + quote(req.verb, safe="")]
    for key in ARGUMENT_ORDER:
        if key in req.arguments:
            parts.append(f"{key}={quote(req.arguments[key], safe='')}")
    sep = "&" if "?" in endpoint.base_url else "?"
    return endpoint.base_url + sep + "&".join(parts)


@dataclass
class IdentifyInfo:
    repository_name: str
    base_url: str
    protocol_version: str
    earliest_datestamp: str
    granularity: str
    admin_emails: list[str] = field(default_factory=list)
    deleted_record: str = ""
    base_url_mismatch: bool = False


@dataclass(frozen=True)
class MetadataFormat:
    prefix: str
    schema: str = ""
    namespace: str = ""


@dataclass(frozen=True)
class OaiSet:
    spec: str
    name: str = ""


@dataclass(frozen=True)
class ResumptionToken:
    token: str
    complete_list_size: Optional[int] = None
    cursor: Optional[int] = None
    expiration_date: str = ""


Payload = Union[
    IdentifyInfo,
    list[MetadataFormat],
    list[OaiSet],
    list[RecordHeader],
    list[DublinCoreRecord],
    DublinCoreRecord,
]


@dataclass
class ParsedResponse:
    verb: str
    response_date: str
    request_url: str
    request_args: dict[str, str]
    payload: Payload
    resumption_token: Optional[ResumptionToken] = None


def _q(local: str, ns: str = OAI_NS) -> str:
    return f"{{{ns}}}{local}"


def _split_tag(tag) -> tuple[str, str]:
    if not isinstance(tag, str):
        return "", ""
    if tag.startswith("{"):
        ns, _, local = tag[1:].partition("}")
        return ns, local
    return "", tag


def _text(el: Optional[ET.Element]) -> str:
    if el is None:
        return ""
    return "".join(el.itertext()).strip()


# expat codes meaning "document ended too early"
_TRUNCATION_CODES = {3, 5, 6}
_ENTITY_DECL = re.compile(rb"<!ENTITY", re.IGNORECASE)


def _parse_document(body: bytes) -> ET.Element:
    if not isinstance(body, (bytes, bytearray)):
        raise TransportFault("not-xml", "body is not a byte sequence")
    stripped = bytes(body).lstrip(b"\xef\xbb\xbf \t\r\n")
    if not stripped:
        raise TransportFault("not-xml", "empty body")
    if _ENTITY_DECL.search(body):
        raise TransportFault("not-xml", "entity declarations are refused")
    try:
        return ET.fromstring(bytes(body))
    except ET.ParseError as exc:
        if stripped.startswith(b"<") and getattr(exc, "code", None) in _TRUNCATION_CODES:
            raise TransportFault("truncated", str(exc)) from None
        raise TransportFault("not-xml", str(exc)) from None
    except Exception as exc:  # expat surfaces encoding problems as assorted types
        raise TransportFault("not-xml", f"{type(exc).__name__}: {exc}") from None


def parse_response(body: bytes, expected_verb: str) -> ParsedResponse:
    root = _parse_document(body)
    ns, local = _split_tag(root.tag)
    if local.lower() == "html":
        raise TransportFault("not-xml", "HTML page instead of an OAI-PMH response")
    if ns != OAI_NS or local != "OAI-PMH":
        raise TransportFault("wrong-namespace", f"root element is {root.tag!r}")

    errors = root.findall(_q("error"))
    if errors:
        code = errors[0].get("code", "")
        if code not in ERROR_CODES:
            raise TransportFault("verb-mismatch", f"unrecognised error code {code!r}")
        raise OaiProtocolError(code, _text(errors[0]))

    payload_el = root.find(_q(expected_verb))
    if payload_el is None:
        present = [
            _split_tag(child.tag)[1] for child in root if _split_tag(child.tag)[1] in VERBS
        ]
        raise TransportFault(
            "verb-mismatch", f"expected {expected_verb} payload, found {present or 'none'}"
        )

    request_el = root.find(_q("request"))
    request_args = dict(request_el.attrib) if request_el is not None else {}
    try:
        payload, token = _PAYLOAD_PARSERS[expected_verb](payload_el)
    except _PayloadError as exc:
        raise TransportFault("verb-mismatch", str(exc)) from None
    return ParsedResponse(
        verb=expected_verb,
        response_date=_text(root.find(_q("responseDate"))),
        request_url=_text(request_el),
        request_args=request_args,
        payload=payload,
        resumption_token=token,
    )


class _PayloadError(Exception):
    pass


def _resumption(el: ET.Element) -> Optional[ResumptionToken]:
    tok = el.find(_q("resumptionToken"))
    if tok is None:
        return None

    def _int(name):
        raw = tok.get(name)
        if raw is None:
            return None
        try:
            return int(raw)
        except ValueError:
            return None

    return ResumptionToken(
        token=_text(tok),
        complete_list_size=_int("completeListSize"),
        cursor=_int("cursor"),
        expiration_date=tok.get("expirationDate", ""),
    )


def _header(el: Optional[ET.Element]) -> RecordHeader:
    if el is None:
        raise _PayloadError("record without header")
    identifier = _text(el.find(_q("identifier")))
    if not identifier:
        raise _PayloadError("header without identifier")
    try:
        datestamp = parse_datestamp(_text(el.find(_q("datestamp"))))
    except InvalidDatestamp:
        datestamp = None
    return RecordHeader(
        identifier=identifier,
        datestamp=datestamp,
        set_specs=tuple(_text(s) for s in el.findall(_q("setSpec"))),
        deleted=el.get("status") == "deleted",
    )


def _record(el: ET.Element) -> DublinCoreRecord:
    header = _header(el.find(_q("header")))
    if header.deleted:
        return DublinCoreRecord(header=header)
    elements: dict[str, list[str]] = {}
    extensions: dict[str, list[str]] = {}
    metadata = el.find(_q("metadata"))
    dc = metadata.find(f"{{{OAI_DC_NS}}}dc") if metadata is not None else None
    if dc is not None:
        for child in dc:
            ns, local = _split_tag(child.tag)
            if not local:
                continue  # comments / processing instructions
            value = "".join(child.itertext())
            if ns == DC_NS and local in DC_ELEMENTS:
                elements.setdefault(local, []).append(value.strip())
            else:
                extensions.setdefault(child.tag, []).append(value.strip())
    return DublinCoreRecord(header=header, elements=elements, extensions=extensions)


def _parse_identify(el):
    return (
        IdentifyInfo(
            repository_name=_text(el.find(_q("repositoryName"))),
            base_url=_text(el.find(_q("baseURL"))),
            protocol_version=_text(el.find(_q("protocolVersion"))),
            earliest_datestamp=_text(el.find(_q("earliestDatestamp"))),
            granularity=_text(el.find(_q("granularity"))),
            admin_emails=[_text(a) for a in el.findall(_q("adminEmail"))],
            deleted_record=_text(el.find(_q("deletedRecord"))),
        ),
        None,
    )


def _parse_formats(el):
    formats = [
        MetadataFormat(
            prefix=_text(f.find(_q("metadataPrefix"))),
            schema=_text(f.find(_q("schema"))),
            namespace=_text(f.find(_q("metadataNamespace"))),
        )
        for f in el.findall(_q("metadataFormat"))
    ]
    return formats, None


def _parse_sets(el):
    sets = [
        OaiSet(spec=_text(s.find(_q("setSpec"))), name=_text(s.find(_q("setName"))))
        for s in el.findall(_q("set"))
    ]
    return sets, _resumption(el)


def _parse_identifiers(el):
    return [_header(h) for h in el.findall(_q("header"))], _resumption(el)


def _parse_records(el):
    return [_record(r) for r in el.findall(_q("record"))], _resumption(el)


def _parse_get_record(el):
    rec = el.find(_q("record"))
    if rec is None:
        raise _PayloadError("GetRecord without record")
    return _record(rec), None


_PAYLOAD_PARSERS = {
    "Identify": _parse_identify,
    "ListMetadataFormats": _parse_formats,
    "ListSets": _parse_sets,
    "ListIdentifiers": _parse_identifiers,
    "ListRecords": _parse_records,
    "GetRecord": _parse_get_record,
}
