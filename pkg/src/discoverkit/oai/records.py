"""Record-level types for OAI-PMH: endpoints, headers and Dublin Core payloads."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional
from urllib.parse import urlsplit

from discoverkit import USER_AGENT

OAI_NS = "http://www.openarchives.org/OAI/2.0/"
OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
DC_NS = "http://purl.org/dc/elements/1.1/"

DC_ELEMENTS = (
    "title",
    "creator",
    "subject",
    "description",
    "publisher",
    "contributor",
    "date",
    "type",
    "format",
    "identifier",
    "source",
    "language",
    "relation",
    "coverage",
    "rights",
)

DAY_GRANULARITY = "YYYY-MM-DD"
SECONDS_GRANULARITY = "YYYY-MM-DDThh:mm:ssZ"

_DAY_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_SECONDS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


class InvalidDatestamp(ValueError):
    pass


def parse_datestamp(text: str) -> datetime:
    """Parse either protocol granularity into an aware UTC datetime.

    Day-granularity values map to midnight UTC.
    """
    text = text.strip()
    try:
        if _DAY_RE.match(text):
            return datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        if _SECONDS_RE.match(text):
            return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise InvalidDatestamp(f"not a valid UTC datestamp: {text!r}") from exc
    raise InvalidDatestamp(f"not a valid UTC datestamp: {text!r}")


def format_datestamp(dt: datetime, granularity: str = SECONDS_GRANULARITY) -> str:
    dt = dt.astimezone(timezone.utc)
    if granularity == DAY_GRANULARITY:
        return dt.strftime("%Y-%m-%d")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def is_datestamp(text: str) -> bool:
    try:
        parse_datestamp(text)
    except InvalidDatestamp:
        return False
    return True


@dataclass(frozen=True)
class OaiEndpoint:
    """Connection settings for one repository's OAI-PMH base URL.

    ``politeness_delay`` is in milliseconds; ``backoff`` is the first retry
    delay in seconds, doubled on each further attempt.
    """

    base_url: str
    timeout: float = 30.0
    max_retries: int = 3
    politeness_delay: int = 1000
    backoff: float = 1.0
    user_agent: str = USER_AGENT

    def __post_init__(self):
        parts = urlsplit(self.base_url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ValueError(f"base_url must be an absolute http(s) URL: {self.base_url!r}")
        object.__setattr__(self, "timeout", float(self.timeout))
        object.__setattr__(self, "backoff", float(self.backoff))
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.politeness_delay < 0:
            raise ValueError("politeness_delay must be non-negative")
        if self.backoff < 0:
            raise ValueError("backoff must be non-negative")

    def to_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "politeness_delay": self.politeness_delay,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OaiEndpoint":
        return cls(
            base_url=data["base_url"],
            timeout=float(data.get("timeout", 30.0)),
            max_retries=int(data.get("max_retries", 3)),
            politeness_delay=int(data.get("politeness_delay", 1000)),
        )


@dataclass(frozen=True)
class RecordHeader:
    identifier: str
    datestamp: Optional[datetime]
    set_specs: tuple[str, ...] = ()
    deleted: bool = False

    def __post_init__(self):
        if not self.identifier or not self.identifier.strip():
            raise ValueError("record identifier must be non-empty")

    def to_dict(self) -> dict:
        return {
            "identifier": self.identifier,
            "datestamp": format_datestamp(self.datestamp) if self.datestamp else None,
            "set_specs": list(self.set_specs),
            "deleted": self.deleted,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RecordHeader":
        stamp = data.get("datestamp")
        return cls(
            identifier=data["identifier"],
            datestamp=parse_datestamp(stamp) if stamp else None,
            set_specs=tuple(data.get("set_specs", ())),
            deleted=bool(data.get("deleted", False)),
        )


@dataclass
class DublinCoreRecord:
    """A harvested record: OAI header plus the oai_dc element multimap.

    Elements outside the fifteen-element vocabulary go to ``extensions`` keyed
    by their qualified ``{namespace}name``.
    """

    header: RecordHeader
    elements: dict[str, list[str]] = field(default_factory=dict)
    extensions: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.elements) - set(DC_ELEMENTS)
        if unknown:
            raise ValueError(f"not Dublin Core elements: {sorted(unknown)}")
        if self.header.deleted and (self.elements or self.extensions):
            raise ValueError("deleted records carry no metadata")

    @property
    def identifier(self) -> str:
        return self.header.identifier

    @property
    def deleted(self) -> bool:
        return self.header.deleted

    def values(self, element: str) -> list[str]:
        return self.elements.get(element, [])

    def to_dict(self) -> dict:
        return {
            "header": self.header.to_dict(),
            "elements": {k: list(v) for k, v in self.elements.items()},
            "extensions": {k: list(v) for k, v in self.extensions.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DublinCoreRecord":
        return cls(
            header=RecordHeader.from_dict(data["header"]),
            elements={k: list(v) for k, v in data.get("elements", {}).items()},
            extensions={k: list(v) for k, v in data.get("extensions", {}).items()},
        )
