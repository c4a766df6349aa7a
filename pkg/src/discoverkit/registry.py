"""Durable fleet registry: profiles, harvest runs, reharvest requests, events.

Layout of a registry directory::

    journal.ndjson   one canonical-JSON envelope per write, fsync'd on append
    snapshot.json    compacted state plus the last journal sequence it covers
    LOCK             held (flock) by the single writer

Readers take no lock. They read the journal before the snapshot, so a
concurrent compaction can only make them replay entries the snapshot already
covers, never skip any.
"""

from __future__ import annotations

import enum
import fcntl
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional

from discoverkit.diagnostics import EndpointStatus, status_from_label
from discoverkit.oai.records import OaiEndpoint
from discoverkit.timeutil import format_instant, parse_instant, utcnow

logger = logging.getLogger(__name__)

JOURNAL = "journal.ndjson"
SNAPSHOT = "snapshot.json"
LOCK = "LOCK"
EXPORT_SCHEMA = "registry-export/1"

VISIBILITIES = ("public", "private", "n/a")
CARNEGIE = ("R1", "R2", "n/a")
RUN_OUTCOMES = ("complete", "partial", "failed")
EVENT_KINDS = ("reharvest-scheduled", "reharvest-done", "reharvest-failed", "status-changed")


class RegistryError(Exception):
    pass


class UnknownRepository(RegistryError):
    pass


class UnknownRequest(RegistryError):
    pass


class IllegalTransition(RegistryError):
    pass


class AlreadyPending(RegistryError):
    pass


class StorageFault(RegistryError):
    pass


class RegistryLocked(StorageFault):
    pass


class RequestState(str, enum.Enum):
    PENDING = "pending"
    SCHEDULED = "scheduled"
    DONE = "done"
    FAILED = "failed"


TRANSITIONS = {
    RequestState.PENDING: {RequestState.SCHEDULED},
    RequestState.SCHEDULED: {RequestState.DONE, RequestState.FAILED},
    RequestState.DONE: set(),
    RequestState.FAILED: set(),
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class RepositoryProfile:
    id: str
    institution: str
    visibility: str = "n/a"
    carnegie: str = "n/a"
    software: str = ""
    endpoint: Optional[OaiEndpoint] = None
    status_history: list[tuple[datetime, EndpointStatus]] = field(default_factory=list)
    exposed_count_history: list[tuple[datetime, int]] = field(default_factory=list)
    notes: str = ""

    def __post_init__(self):
        if not self.id or not self.id.strip():
            raise ValueError("profile id must be non-empty")
        if self.visibility not in VISIBILITIES:
            raise ValueError(f"visibility must be one of {VISIBILITIES}")
        if self.carnegie not in CARNEGIE:
            raise ValueError(f"carnegie must be one of {CARNEGIE}")
        for name, history in (("status_history", self.status_history), ("exposed_count_history", self.exposed_count_history)):
            stamps = [t for t, _ in history]
            if any(b <= a for a, b in zip(stamps, stamps[1:])):
                raise ValueError(f"{name} must be strictly time-ordered")
        if any(c < 0 for _, c in self.exposed_count_history):
            raise ValueError("exposed counts must be non-negative")

    @property
    def current_status(self) -> Optional[EndpointStatus]:
        return self.status_history[-1][1] if self.status_history else None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "institution": self.institution,
            "visibility": self.visibility,
            "carnegie": self.carnegie,
            "software": self.software,
            "endpoint": self.endpoint.to_dict() if self.endpoint else None,
            "status_history": [[format_instant(t), s.value] for t, s in self.status_history],
            "exposed_count_history": [[format_instant(t), c] for t, c in self.exposed_count_history],
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepositoryProfile":
        ep = data.get("endpoint")
        return cls(
            id=data["id"],
            institution=data["institution"],
            visibility=data.get("visibility", "n/a"),
            carnegie=data.get("carnegie", "n/a"),
            software=data.get("software", ""),
            endpoint=OaiEndpoint.from_dict(ep) if ep else None,
            status_history=[(parse_instant(t), EndpointStatus(s)) for t, s in data.get("status_history", [])],
            exposed_count_history=[(parse_instant(t), int(c)) for t, c in data.get("exposed_count_history", [])],
            notes=data.get("notes", ""),
        )


@dataclass
class HarvestRun:
    repository_id: str
    started: datetime
    finished: datetime
    records_seen: int = 0
    records_deleted: int = 0
    pages_fetched: int = 0
    outcome: str = "complete"
    resume_from: Optional[str] = None

    def __post_init__(self):
        if self.finished < self.started:
            raise ValueError("finished must not precede started")
        if self.outcome not in RUN_OUTCOMES:
            raise ValueError(f"outcome must be one of {RUN_OUTCOMES}")
        if self.outcome == "partial" and not self.resume_from:
            raise ValueError("a partial run needs resume_from")

    def to_dict(self) -> dict:
        return {
            "repository_id": self.repository_id,
            "started": format_instant(self.started),
            "finished": format_instant(self.finished),
            "records_seen": self.records_seen,
            "records_deleted": self.records_deleted,
            "pages_fetched": self.pages_fetched,
            "outcome": self.outcome,
            "resume_from": self.resume_from,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HarvestRun":
        return cls(
            repository_id=data["repository_id"],
            started=parse_instant(data["started"]),
            finished=parse_instant(data["finished"]),
            records_seen=int(data.get("records_seen", 0)),
            records_deleted=int(data.get("records_deleted", 0)),
            pages_fetched=int(data.get("pages_fetched", 0)),
            outcome=data.get("outcome", "complete"),
            resume_from=data.get("resume_from"),
        )


@dataclass
class ReharvestRequest:
    id: str
    repository_id: str
    requested_at: datetime
    requested_by: str
    state: RequestState = RequestState.PENDING

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "repository_id": self.repository_id,
            "requested_at": format_instant(self.requested_at),
            "requested_by": self.requested_by,
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReharvestRequest":
        return cls(
            id=data["id"],
            repository_id=data["repository_id"],
            requested_at=parse_instant(data["requested_at"]),
            requested_by=data["requested_by"],
            state=RequestState(data["state"]),
        )


@dataclass
class NotificationEvent:
    id: str
    repository_id: str
    kind: str
    payload: str
    emitted_at: datetime
    delivered: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "repository_id": self.repository_id,
            "kind": self.kind,
            "payload": self.payload,
            "emitted_at": format_instant(self.emitted_at),
            "delivered": self.delivered,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NotificationEvent":
        return cls(
            id=data["id"],
            repository_id=data["repository_id"],
            kind=data["kind"],
            payload=data["payload"],
            emitted_at=parse_instant(data["emitted_at"]),
            delivered=bool(data.get("delivered", False)),
        )


@dataclass
class RegistryState:
    profiles: dict[str, RepositoryProfile] = field(default_factory=dict)
    runs: list[HarvestRun] = field(default_factory=list)
    requests: dict[str, ReharvestRequest] = field(default_factory=dict)
    events: list[NotificationEvent] = field(default_factory=list)
    seq: int = 0

    def to_dict(self) -> dict:
        return {
            "profiles": [self.profiles[k].to_dict() for k in sorted(self.profiles)],
            "runs": [r.to_dict() for r in self.runs],
            "requests": [self.requests[k].to_dict() for k in sorted(self.requests)],
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, data: dict, seq: int = 0) -> "RegistryState":
        state = cls(seq=seq)
        for p in data.get("profiles", []):
            prof = RepositoryProfile.from_dict(p)
            state.profiles[prof.id] = prof
        state.runs = [HarvestRun.from_dict(r) for r in data.get("runs", [])]
        for r in data.get("requests", []):
            req = ReharvestRequest.from_dict(r)
            state.requests[req.id] = req
        state.events = [NotificationEvent.from_dict(e) for e in data.get("events", [])]
        return state

    def apply(self, op: str, data: dict) -> None:
        """Apply one journal operation. Journal ops are already validated."""
        if op == "profile":
            prof = RepositoryProfile.from_dict(data)
            self.profiles[prof.id] = prof
        elif op == "run":
            self.runs.append(HarvestRun.from_dict(data))
        elif op == "request":
            req = ReharvestRequest.from_dict(data)
            self.requests[req.id] = req
        elif op == "event":
            self.events.append(NotificationEvent.from_dict(data))
        elif op == "delivered":
            wanted = set(data["ids"])
            for e in self.events:
                if e.id in wanted:
                    e.delivered = True
        else:
            raise StorageFault(f"unknown journal operation {op!r}")


class Registry:
    """A registry directory opened for reading, or for writing with the lock.

    Every mutating method appends its journal entries and fsyncs before
    returning. ``readonly`` registries never touch the directory.
    """

    def __init__(
        self,
        path: str | os.PathLike,
        readonly: bool = False,
        clock: Callable[[], datetime] = utcnow,
        compact_every: int = 1000,
    ):
        self.path = Path(path)
        self.readonly = readonly
        self.clock = clock
        self.compact_every = compact_every
        self._lock_fd: Optional[int] = None
        self._journal = None
        self._since_compact = 0
        if not readonly:
            self.path.mkdir(parents=True, exist_ok=True)
            self._acquire_lock()
        try:
            self.state = self._load()
            if not readonly:
                self._journal = open(self.path / JOURNAL, "a", encoding="utf-8")
        except BaseException:
            self.close()
            raise

    # -- lifecycle ---------------------------------------------------------

    def _acquire_lock(self) -> None:
        fd = os.open(self.path / LOCK, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            os.close(fd)
            raise RegistryLocked(f"registry {self.path} is locked by another writer") from None
        os.ftruncate(fd, 0)
        os.write(fd, f"{os.getpid()}\n".encode())
        self._lock_fd = fd

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self) -> "Registry":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _load(self) -> RegistryState:
        journal_path = self.path / JOURNAL
        lines: list[str] = []
        if journal_path.exists():
            lines = journal_path.read_text(encoding="utf-8").split("\n")
        state = RegistryState()
        snap_path = self.path / SNAPSHOT
        if snap_path.exists():
            try:
                snap = json.loads(snap_path.read_text(encoding="utf-8"))
                state = RegistryState.from_dict(snap["state"], seq=int(snap["seq"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise StorageFault(f"corrupt snapshot {snap_path}: {exc}") from None

        # a torn final line is an unacknowledged write; anything else is corruption
        complete = lines[:-1]
        tail = lines[-1] if lines else ""
        good_bytes = sum(len(line.encode("utf-8")) + 1 for line in complete)
        for lineno, line in enumerate(complete, 1):
            if not line.strip():
                continue
            try:
                env = json.loads(line)
                seq, op, data = int(env["seq"]), env["op"], env["data"]
            except (ValueError, KeyError, TypeError) as exc:
                raise StorageFault(f"{journal_path}:{lineno}: corrupt journal entry ({exc})") from None
            if seq <= state.seq:
                continue
            if seq != state.seq + 1:
                raise StorageFault(f"{journal_path}:{lineno}: sequence gap ({state.seq} -> {seq})")
            try:
                state.apply(op, data)
            except (ValueError, KeyError, TypeError) as exc:
                raise StorageFault(f"{journal_path}:{lineno}: cannot apply {op}: {exc}") from None
            state.seq = seq
        if tail.strip():
            logger.warning("discarding torn journal tail in %s", journal_path)
            if not self.readonly:
                with open(journal_path, "r+b") as fh:
                    fh.truncate(good_bytes)
                    fh.flush()
                    os.fsync(fh.fileno())
        return state

    # -- writing -----------------------------------------------------------

    def _require_writable(self) -> None:
        if self.readonly or self._journal is None:
            raise StorageFault("registry opened read-only")

    def _commit(self, entries: list[tuple[str, dict]]) -> None:
        """Append entries atomically-enough: one write, one fsync, then apply."""
        self._require_writable()
        lines = []
        seq = self.state.seq
        for op, data in entries:
            seq += 1
            lines.append(canonical_json({"seq": seq, "op": op, "data": data}))
        try:
            self._journal.write("\n".join(lines) + "\n")
            self._journal.flush()
            os.fsync(self._journal.fileno())
        except OSError as exc:
            raise StorageFault(f"journal write failed: {exc}") from exc
        for op, data in entries:
            self.state.apply(op, data)
            self.state.seq += 1
        self._since_compact += len(entries)
        if self.compact_every and self._since_compact >= self.compact_every:
            self.compact()

    def compact(self) -> None:
        """Write a snapshot covering the whole journal, then start a new journal."""
        self._require_writable()
        snap = canonical_json({"seq": self.state.seq, "state": self.state.to_dict()})
        _atomic_write(self.path / SNAPSHOT, snap + "\n")
        self._journal.close()
        _atomic_write(self.path / JOURNAL, "")
        self._journal = open(self.path / JOURNAL, "a", encoding="utf-8")
        self._since_compact = 0

    def _event(self, repository_id: str, kind: str, payload: str) -> dict:
        return NotificationEvent(
            id=f"ev-{self.state.seq + 1:08d}",  # provisional, fixed below
            repository_id=repository_id,
            kind=kind,
            payload=payload,
            emitted_at=self.clock(),
        ).to_dict()

    def upsert_profile(self, profile: RepositoryProfile) -> RepositoryProfile:
        """Insert or replace a profile; a changed latest status emits an event."""
        entries: list[tuple[str, dict]] = [("profile", profile.to_dict())]
        old = self.state.profiles.get(profile.id)
        old_status = old.current_status if old else None
        new_status = profile.current_status
        if old is not None and new_status is not None and new_status != old_status:
            entries.append(("event", self._status_event(profile.id, old_status, new_status)))
        self._commit(self._number_events(entries))
        return self.state.profiles[profile.id]

    def record_status(self, repository_id: str, status: EndpointStatus, at: Optional[datetime] = None) -> Optional[NotificationEvent]:
        """Append a status observation; emits ``status-changed`` when it differs."""
        prof = self._profile(repository_id)
        at = at or self.clock()
        if prof.status_history and at <= prof.status_history[-1][0]:
            raise ValueError("status observations must move forward in time")
        updated = RepositoryProfile.from_dict(prof.to_dict())
        updated.status_history.append((at, status))
        entries: list[tuple[str, dict]] = [("profile", updated.to_dict())]
        if status != prof.current_status:
            entries.append(("event", self._status_event(repository_id, prof.current_status, status)))
        self._commit(self._number_events(entries))
        return self.state.events[-1] if len(entries) == 2 else None

    def record_count(self, repository_id: str, count: int, at: Optional[datetime] = None) -> None:
        prof = self._profile(repository_id)
        at = at or self.clock()
        if prof.exposed_count_history and at <= prof.exposed_count_history[-1][0]:
            raise ValueError("count observations must move forward in time")
        updated = RepositoryProfile.from_dict(prof.to_dict())
        updated.exposed_count_history.append((at, count))
        RepositoryProfile.from_dict(updated.to_dict())  # validate
        self._commit([("profile", updated.to_dict())])

    def _status_event(self, repository_id, old, new) -> dict:
        before = old.value if old else "unknown"
        return self._event(repository_id, "status-changed", f"{before} -> {new.value}")

    def _number_events(self, entries: list[tuple[str, dict]]) -> list[tuple[str, dict]]:
        seq = self.state.seq
        out = []
        for op, data in entries:
            seq += 1
            if op == "event":
                data = dict(data, id=f"ev-{seq:08d}")
            out.append((op, data))
        return out

    def record_run(self, run: HarvestRun) -> None:
        self._profile(run.repository_id)
        self._commit([("run", run.to_dict())])

    def request_reharvest(self, repository_id: str, requested_by: str) -> ReharvestRequest:
        self._profile(repository_id)
        for req in self.state.requests.values():
            if req.repository_id == repository_id and req.state is RequestState.PENDING:
                raise AlreadyPending(f"{repository_id} already has pending request {req.id}")
        req = ReharvestRequest(
            id=f"rr-{self.state.seq + 1:08d}",
            repository_id=repository_id,
            requested_at=self.clock(),
            requested_by=requested_by,
        )
        self._commit([("request", req.to_dict())])
        return self.state.requests[req.id]

    def advance_request(self, request_id: str, new_state: RequestState | str) -> NotificationEvent:
        """Move a request along pending -> scheduled -> done|failed.

        The state change and its notification event land in one journal write.
        """
        new_state = RequestState(new_state)
        try:
            req = self.state.requests[request_id]
        except KeyError:
            raise UnknownRequest(request_id) from None
        if new_state not in TRANSITIONS[req.state]:
            raise IllegalTransition(f"{request_id}: {req.state.value} -> {new_state.value}")
        updated = ReharvestRequest.from_dict(dict(req.to_dict(), state=new_state.value))
        event = self._event(
            req.repository_id,
            f"reharvest-{new_state.value}",
            f"reharvest request {request_id} {new_state.value}",
        )
        self._commit(self._number_events([("request", updated.to_dict()), ("event", event)]))
        return self.state.events[-1]

    def mark_delivered(self, event_ids: Iterable[str]) -> None:
        ids = sorted(set(event_ids))
        if ids:
            self._commit([("delivered", {"ids": ids})])

    # -- reading -----------------------------------------------------------

    def _profile(self, repository_id: str) -> RepositoryProfile:
        try:
            return self.state.profiles[repository_id]
        except KeyError:
            raise UnknownRepository(repository_id) from None

    def get_profile(self, repository_id: str) -> RepositoryProfile:
        return self._profile(repository_id)

    def profiles(self) -> list[RepositoryProfile]:
        return [self.state.profiles[k] for k in sorted(self.state.profiles)]

    def runs(self, repository_id: Optional[str] = None) -> list[HarvestRun]:
        return [r for r in self.state.runs if repository_id is None or r.repository_id == repository_id]

    def last_complete_run(self, repository_id: str) -> Optional[HarvestRun]:
        done = [r for r in self.runs(repository_id) if r.outcome == "complete"]
        return max(done, key=lambda r: r.finished) if done else None

    def pending_requests(self) -> list[ReharvestRequest]:
        return [r for r in self.state.requests.values() if r.state is RequestState.PENDING]

    def requests(self) -> list[ReharvestRequest]:
        return list(self.state.requests.values())

    def events_since(self, instant: datetime) -> list[NotificationEvent]:
        return [e for e in self.state.events if e.emitted_at >= instant]

    def events(self) -> list[NotificationEvent]:
        return list(self.state.events)

    # -- export / import ---------------------------------------------------

    def export(self) -> bytes:
        """Canonical, byte-stable serialization of the whole registry."""
        return (canonical_json({"schema": EXPORT_SCHEMA, "state": self.state.to_dict()}) + "\n").encode("utf-8")

    def import_(self, blob: bytes) -> None:
        """Load an export into this (empty) registry."""
        if self.state.seq:
            raise StorageFault("import needs an empty registry")
        data = json.loads(blob.decode("utf-8"))
        if data.get("schema") != EXPORT_SCHEMA:
            raise StorageFault(f"expected {EXPORT_SCHEMA}")
        incoming = RegistryState.from_dict(data["state"])
        entries: list[tuple[str, dict]] = []
        entries += [("profile", p.to_dict()) for p in incoming.profiles.values()]
        entries += [("run", r.to_dict()) for r in incoming.runs]
        entries += [("request", r.to_dict()) for r in incoming.requests.values()]
        entries += [("event", e.to_dict()) for e in incoming.events]
        if entries:
            self._commit(entries)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    dir_fd = os.open(path.parent, os.O_RDONLY)
    try:
        os.fsync(dir_fd)
    finally:
        os.close(dir_fd)


# -- Table 1 seed ------------------------------------------------------------

PILOT_START = "2023-11-01T00:00:00Z"
PILOT_END = "2024-10-31T00:00:00Z"


def load_table1_rows() -> list[dict]:
    text = resources.files("discoverkit.data").joinpath("usrn_table1.json").read_text("utf-8")
    return json.loads(text)["rows"]


def table1_profiles() -> list[RepositoryProfile]:
    """Pilot fleet profiles with start/end statuses and exposed counts."""
    start, end = parse_instant(PILOT_START), parse_instant(PILOT_END)
    profiles = []
    for row in load_table1_rows():
        visibility = row["visibility"].lower()
        profiles.append(
            RepositoryProfile(
                id=row["id"],
                institution=row["institution"],
                visibility=visibility,
                carnegie=row["carnegie"],
                software=row["software"],
                status_history=[
                    (start, status_from_label(row["status_start"])),
                    (end, status_from_label(row["status_end"])),
                ],
                exposed_count_history=[(start, row["count_start"]), (end, row["count_end"])],
                notes=row.get("notes", ""),
            )
        )
    return profiles


def seed_table1(registry: Registry) -> list[RepositoryProfile]:
    return [registry.upsert_profile(p) for p in table1_profiles()]
