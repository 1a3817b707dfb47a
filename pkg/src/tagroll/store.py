"""Durable registry: students, sessions, attendance records, audit log.

All state lives in memory and is reconstructed by replaying an append-only
audit log (``audit.log`` in the store directory). Every mutation appends one
checksummed line and then applies the same payload to memory through one
code path, so replay equivalence holds by construction.

Log line format (after a plain ``tagroll-audit v1`` header line):

    <crc32 of the JSON, 8 hex chars> <canonical JSON of the entry>\\n

A torn final line (crash mid-append) is discarded on recovery with a
warning; a bad checksum anywhere earlier means real corruption and recovery
refuses to proceed. See docs/store-format.md for the field-by-field layout.

Mutations are serialized by an in-process lock plus an inter-process file
lock on the store directory; readers see consistent snapshots.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from filelock import FileLock, Timeout

from .protocol import TagId

log = logging.getLogger(__name__)

AUDIT_FILE = "audit.log"
LOCK_FILE = "store.lock"
HEADER = "tagroll-audit v1"


class StoreError(Exception):
    """Base class for registry errors."""


class ValidationError(StoreError):
    """A field failed validation (empty name, unknown change key, ...)."""


class TagAlreadyBound(StoreError):
    """The tag id is already bound to a different student."""


class Forbidden(StoreError):
    """Actor's role does not permit this mutation."""


class NotFound(StoreError):
    """No such student / session / record."""


class CorruptStore(StoreError):
    """Audit log failed integrity checks on a non-final line."""


class StoreLocked(StoreError):
    """Another process holds the store's write lock."""


class Role(enum.Enum):
    ADMIN = "admin"
    OPERATOR = "operator"


@dataclass(frozen=True)
class Actor:
    id: str
    role: Role


# The reader bridge records scans on behalf of this built-in operator.
SCANNER = Actor(id="scanner", role=Role.OPERATOR)


class SessionState(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


class RecordStatus(enum.Enum):
    PRESENT = "present"
    PENDING_REGISTRATION = "pending_registration"


@dataclass
class Student:
    id: str
    name: str
    course: str
    stream: str
    trimester: str
    tag_id: TagId
    registered_s: float
    photo_ref: Optional[str] = None
    active: bool = True


@dataclass
class AttendanceSession:
    id: str
    course: str
    stream: str
    trimester: str
    opened_s: float
    closed_s: Optional[float] = None

    @property
    def state(self) -> SessionState:
        return SessionState.CLOSED if self.closed_s is not None else SessionState.OPEN


@dataclass
class AttendanceRecord:
    session_ref: str
    tag_id: TagId
    student_ref: Optional[str]
    first_seen_s: float
    last_seen_s: float

    def __post_init__(self) -> None:
        if self.last_seen_s < self.first_seen_s:
            raise ValidationError("last_seen_s before first_seen_s")

    @property
    def status(self) -> RecordStatus:
        return (
            RecordStatus.PRESENT
            if self.student_ref is not None
            else RecordStatus.PENDING_REGISTRATION
        )


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    actor: str
    action: str
    payload: dict[str, Any]
    at_s: float


# -- serialization helpers ----------------------------------------------------


def _student_to_json(s: Student) -> dict[str, Any]:
    d = asdict(s)
    d["tag_id"] = s.tag_id.canonical
    return d


def _student_from_json(d: dict[str, Any]) -> Student:
    return Student(
        id=d["id"],
        name=d["name"],
        course=d["course"],
        stream=d["stream"],
        trimester=d["trimester"],
        tag_id=TagId.parse(d["tag_id"]),
        registered_s=d["registered_s"],
        photo_ref=d.get("photo_ref"),
        active=d.get("active", True),
    )


def _session_to_json(s: AttendanceSession) -> dict[str, Any]:
    return asdict(s)


def _session_from_json(d: dict[str, Any]) -> AttendanceSession:
    return AttendanceSession(
        id=d["id"],
        course=d["course"],
        stream=d["stream"],
        trimester=d["trimester"],
        opened_s=d["opened_s"],
        closed_s=d.get("closed_s"),
    )


def _record_to_json(r: AttendanceRecord) -> dict[str, Any]:
    return {
        "session_ref": r.session_ref,
        "tag_id": r.tag_id.canonical,
        "student_ref": r.student_ref,
        "first_seen_s": r.first_seen_s,
        "last_seen_s": r.last_seen_s,
        "status": r.status.value,
    }


def _record_from_json(d: dict[str, Any]) -> AttendanceRecord:
    return AttendanceRecord(
        session_ref=d["session_ref"],
        tag_id=TagId.parse(d["tag_id"]),
        student_ref=d.get("student_ref"),
        first_seen_s=d["first_seen_s"],
        last_seen_s=d["last_seen_s"],
    )


def _canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _format_line(entry_json: dict[str, Any]) -> bytes:
    body = _canonical_json(entry_json)
    return f"{zlib.crc32(body):08x} ".encode("ascii") + body + b"\n"


_UPDATABLE_FIELDS = frozenset(
    {"name", "course", "stream", "trimester", "tag_id", "photo_ref", "active"}
)


class RegistryStore:
    """Event-sourced registry. ``directory=None`` keeps everything in memory.

    Single logical writer: every mutator appends an audit entry, then applies
    it. ``recover`` folds the log back into memory, so audit replay and live
    state can never diverge.
    """

    def __init__(
        self,
        directory: Optional[str | os.PathLike] = None,
        read_only: bool = False,
    ) -> None:
        self.directory = Path(directory) if directory is not None else None
        self.read_only = read_only
        self.recovered_torn_tail = False
        self._lock = threading.Lock()
        self._file_lock: Optional[FileLock] = None
        self._fh = None
        self._reset_state()
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            if not read_only:
                self._file_lock = FileLock(str(self.directory / LOCK_FILE))
                try:
                    self._file_lock.acquire(timeout=0)
                except Timeout:
                    raise StoreLocked(
                        f"{self.directory} is in use by another process"
                    ) from None
            self.recover()

    def _reset_state(self) -> None:
        self.students: dict[str, Student] = {}
        self.sessions: dict[str, AttendanceSession] = {}
        self.records: dict[tuple[str, str], AttendanceRecord] = {}
        self._tag_index: dict[str, str] = {}  # canonical tag -> student id
        self._audit: list[AuditEntry] = []
        self._next_seq = 1
        self._student_counter = 0
        self._session_counter = 0

    # -- log plumbing --------------------------------------------------------

    @property
    def audit_path(self) -> Optional[Path]:
        return self.directory / AUDIT_FILE if self.directory is not None else None

    def recover(self) -> None:
        """Rebuild memory from the audit log; idempotent.

        Discards a torn final line (with a warning). Raises CorruptStore for
        integrity failure anywhere else.
        """
        with self._lock:
            self._close_handle()
            self._reset_state()
            self.recovered_torn_tail = False
            path = self.audit_path
            if path is None:
                return
            raw = path.read_bytes() if path.exists() else b""
            keep_bytes = 0
            if raw:
                keep_bytes = self._replay(raw)
            if not self.read_only:
                if not raw or keep_bytes == 0:
                    with open(path, "wb") as fh:
                        fh.write((HEADER + "\n").encode("ascii"))
                        fh.flush()
                        os.fsync(fh.fileno())
                elif keep_bytes < len(raw):
                    with open(path, "r+b") as fh:
                        fh.truncate(keep_bytes)
                        fh.flush()
                        os.fsync(fh.fileno())
                self._fh = open(path, "ab")

    def _replay(self, raw: bytes) -> int:
        """Fold log bytes into memory; returns how many bytes are intact."""
        lines = raw.split(b"\n")
        tail_complete = lines[-1] == b""
        if tail_complete:
            lines.pop()
        header = lines[0] if lines else b""
        if tail_complete or len(lines) > 1:
            # header is a complete line and must match exactly
            if header.decode("ascii", "replace") != HEADER:
                raise CorruptStore(f"bad header line: {header[:40]!r}")
        else:
            # torn header: the file never finished initializing
            log.warning("discarding torn audit header in %s", self.audit_path)
            self.recovered_torn_tail = True
            return 0
        keep = len(header) + 1
        for i, line in enumerate(lines[1:], start=1):
            final = i == len(lines) - 1
            try:
                entry = self._parse_line(line)
            except CorruptStore:
                if final:
                    # crash mid-append: drop the tail, keep everything before
                    log.warning(
                        "discarding torn final audit line in %s", self.audit_path
                    )
                    self.recovered_torn_tail = True
                    return keep
                raise
            if entry.seq != self._next_seq:
                raise CorruptStore(
                    f"audit seq gap: expected {self._next_seq}, got {entry.seq}"
                )
            self._apply(entry.action, entry.payload)
            self._audit.append(entry)
            self._next_seq += 1
            keep += len(line) + 1
        if not tail_complete:
            # last line parsed fine but has no newline: still a torn write
            log.warning("discarding unterminated audit line in %s", self.audit_path)
            self.recovered_torn_tail = True
            keep -= len(lines[-1]) + 1
            self._rollback_last()
        return keep

    def _rollback_last(self) -> None:
        entries = self._audit[:-1]
        self._reset_state()
        for entry in entries:
            self._apply(entry.action, entry.payload)
            self._audit.append(entry)
            self._next_seq += 1

    def _parse_line(self, line: bytes) -> AuditEntry:
        if len(line) < 10 or line[8:9] != b" ":
            raise CorruptStore(f"malformed audit line: {line[:40]!r}")
        crc_hex, body = line[:8], line[9:]
        try:
            declared = int(crc_hex, 16)
        except ValueError:
            raise CorruptStore(f"bad checksum field: {crc_hex!r}") from None
        if zlib.crc32(body) != declared:
            raise CorruptStore("audit line checksum mismatch")
        try:
            d = json.loads(body)
        except json.JSONDecodeError as exc:
            raise CorruptStore(f"unparseable audit line: {exc}") from None
        return AuditEntry(
            seq=d["seq"],
            actor=d["actor"],
            action=d["action"],
            payload=d["payload"],
            at_s=d["at_s"],
        )

    def _append(self, actor: Actor, action: str, payload: dict[str, Any], at_s: float) -> None:
        """Append an audit entry, fsync it, then apply it to memory."""
        if self.read_only:
            raise StoreError("store opened read-only")
        entry = AuditEntry(
            seq=self._next_seq, actor=actor.id, action=action, payload=payload, at_s=at_s
        )
        if self._fh is not None:
            line = _format_line(
                {
                    "seq": entry.seq,
                    "actor": entry.actor,
                    "action": entry.action,
                    "payload": entry.payload,
                    "at_s": entry.at_s,
                }
            )
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self._apply(action, payload)
        self._audit.append(entry)
        self._next_seq += 1

    def _apply(self, action: str, payload: dict[str, Any]) -> None:
        """The single mutation path shared by live writes and replay."""
        if action == "student.put":
            student = _student_from_json(payload)
            self.students[student.id] = student
            self._tag_index[student.tag_id.canonical] = student.id
            self._student_counter += 1
        elif action == "student.update":
            student = _student_from_json(payload)
            old = self.students[student.id]
            if old.tag_id != student.tag_id:
                self._tag_index.pop(old.tag_id.canonical, None)
            self.students[student.id] = student
            self._tag_index[student.tag_id.canonical] = student.id
        elif action == "session.open":
            session = _session_from_json(payload)
            self.sessions[session.id] = session
            self._session_counter += 1
        elif action == "session.close":
            session = self.sessions[payload["id"]]
            session.closed_s = payload["closed_s"]
        elif action == "record.upsert":
            record = _record_from_json(payload)
            self.records[(record.session_ref, record.tag_id.canonical)] = record
        else:
            raise CorruptStore(f"unknown audit action: {action}")

    def close(self) -> None:
        with self._lock:
            self._close_handle()
            if self._file_lock is not None:
                self._file_lock.release()
                self._file_lock = None

    def _close_handle(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "RegistryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- students -------------------------------------------------------------

    def put_student(
        self,
        actor: Actor,
        *,
        name: str,
        course: str,
        stream: str,
        trimester: str,
        tag_id: TagId,
        now: float,
        photo_ref: Optional[str] = None,
    ) -> Student:
        """Register a new student bound to a fresh tag. Operators may create."""
        with self._lock:
            if not name.strip():
                raise ValidationError("student name must be non-empty")
            bound = self._tag_index.get(tag_id.canonical)
            if bound is not None:
                raise TagAlreadyBound(f"tag {tag_id} already bound to {bound}")
            student = Student(
                id=f"S{self._student_counter + 1:06d}",
                name=name,
                course=course,
                stream=stream,
                trimester=trimester,
                tag_id=tag_id,
                registered_s=now,
                photo_ref=photo_ref,
            )
            self._append(actor, "student.put", _student_to_json(student), now)
            return student

    def update_student(
        self, actor: Actor, student_id: str, changes: dict[str, Any], now: float
    ) -> Student:
        """Apply field changes to a stored student. Admin only."""
        with self._lock:
            if actor.role is not Role.ADMIN:
                raise Forbidden(f"{actor.id} ({actor.role.value}) may not modify records")
            current = self.students.get(student_id)
            if current is None:
                raise NotFound(f"no student {student_id}")
            unknown = set(changes) - _UPDATABLE_FIELDS
            if unknown:
                raise ValidationError(f"unknown fields: {sorted(unknown)}")
            if "name" in changes and not str(changes["name"]).strip():
                raise ValidationError("student name must be non-empty")
            if "tag_id" in changes:
                new_tag = changes["tag_id"]
                if not isinstance(new_tag, TagId):
                    new_tag = TagId.parse(str(new_tag))
                bound = self._tag_index.get(new_tag.canonical)
                if bound is not None and bound != student_id:
                    raise TagAlreadyBound(f"tag {new_tag} already bound to {bound}")
                changes = {**changes, "tag_id": new_tag}
            updated = replace(current, **changes)
            self._append(actor, "student.update", _student_to_json(updated), now)
            return updated

    def lookup_by_tag(self, tag_id: TagId) -> Optional[Student]:
        with self._lock:
            student_id = self._tag_index.get(tag_id.canonical)
            return self.students.get(student_id) if student_id else None

    def get_student(self, student_id: str) -> Student:
        with self._lock:
            student = self.students.get(student_id)
            if student is None:
                raise NotFound(f"no student {student_id}")
            return student

    def list_students(self) -> list[Student]:
        with self._lock:
            return sorted(self.students.values(), key=lambda s: s.id)

    # -- sessions ---------------------------------------------------------------

    def add_session(
        self, actor: Actor, *, course: str, stream: str, trimester: str, opened_s: float
    ) -> AttendanceSession:
        with self._lock:
            session = AttendanceSession(
                id=f"SES{self._session_counter + 1:04d}",
                course=course,
                stream=stream,
                trimester=trimester,
                opened_s=opened_s,
            )
            self._append(actor, "session.open", _session_to_json(session), opened_s)
            return session

    def set_session_closed(
        self, actor: Actor, session_id: str, closed_s: float
    ) -> AttendanceSession:
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise NotFound(f"no session {session_id}")
            if closed_s < session.opened_s:
                raise ValidationError("closed_s before opened_s")
            self._append(
                actor, "session.close", {"id": session_id, "closed_s": closed_s}, closed_s
            )
            return session

    def get_session(self, session_id: str) -> AttendanceSession:
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise NotFound(f"no session {session_id}")
            return session

    def list_sessions(self) -> list[AttendanceSession]:
        with self._lock:
            return sorted(self.sessions.values(), key=lambda s: s.id)

    def open_sessions(self) -> list[AttendanceSession]:
        with self._lock:
            return sorted(
                (s for s in self.sessions.values() if s.state is SessionState.OPEN),
                key=lambda s: s.id,
            )

    # -- attendance records -------------------------------------------------------

    def upsert_record(self, actor: Actor, record: AttendanceRecord, now: float) -> AttendanceRecord:
        with self._lock:
            if record.session_ref not in self.sessions:
                raise NotFound(f"no session {record.session_ref}")
            self._append(actor, "record.upsert", _record_to_json(record), now)
            return record

    def get_record(self, session_id: str, tag_id: TagId) -> Optional[AttendanceRecord]:
        with self._lock:
            return self.records.get((session_id, tag_id.canonical))

    def records_for_session(self, session_id: str) -> list[AttendanceRecord]:
        with self._lock:
            return sorted(
                (r for (sid, _), r in self.records.items() if sid == session_id),
                key=lambda r: (r.first_seen_s, r.tag_id),
            )

    # -- audit ---------------------------------------------------------------------

    def audit_entries(self) -> list[AuditEntry]:
        with self._lock:
            return list(self._audit)
