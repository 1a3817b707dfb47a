"""Scan-to-attendance middleware.

Sits between the decoded reader stream and the registry: resolves tag ids
against registered students, debounces repeat reads while a tag sits in the
field, and maintains one attendance record per (session, tag). Unknown tags
get a pending record immediately; registration later back-fills the identity
without touching the original first-seen timestamp.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

from .protocol import TagId
from .store import (
    SCANNER,
    Actor,
    AttendanceRecord,
    AttendanceSession,
    NotFound,
    RegistryStore,
    SessionState,
    StoreError,
)

DEFAULT_DEBOUNCE_S = 2.0  # commodity readers repeat reads at ~1-5 Hz


class AttendanceError(StoreError):
    pass


class SessionAlreadyOpen(AttendanceError):
    """The course already has an open roll call."""


class SessionClosed(AttendanceError):
    """Operation requires an open session."""


class NoPendingRecord(AttendanceError):
    """Registration attempted for a tag with no pending attendance record."""


class ScanKind(enum.Enum):
    RESOLVED = "resolved"
    UNKNOWN = "unknown"
    CORRUPT = "corrupt"


@dataclass(frozen=True)
class ScanEvent:
    kind: ScanKind
    session_ref: str
    timestamp_s: float
    tag_id: Optional[TagId] = None  # absent for corrupt frames
    student_ref: Optional[str] = None  # present iff kind is RESOLVED


@dataclass(frozen=True)
class StudentFields:
    """Details collected from a new student at the registration prompt."""

    name: str
    course: str
    stream: str
    trimester: str
    photo_ref: Optional[str] = None


class AttendanceService:
    """Session lifecycle and scan ingestion over a RegistryStore.

    All mutation happens on the caller's thread and is serialized by the
    store's writer lock; subscribers are invoked synchronously in ingestion
    order, giving each a per-session total order of events.
    """

    def __init__(self, store: RegistryStore, debounce_s: float = DEFAULT_DEBOUNCE_S) -> None:
        if debounce_s < 0:
            raise ValueError("debounce must be non-negative")
        self.store = store
        self.debounce_s = debounce_s
        self._corrupt_counts: dict[str, int] = {}
        self._subscribers: list[Callable[[ScanEvent], None]] = []

    def subscribe(self, callback: Callable[[ScanEvent], None]) -> None:
        """Register a callback for every emitted ScanEvent."""
        self._subscribers.append(callback)

    def _emit(self, event: ScanEvent) -> ScanEvent:
        for callback in self._subscribers:
            callback(event)
        return event

    # -- session lifecycle ----------------------------------------------------

    def open_session(
        self,
        course: str,
        stream: str,
        trimester: str,
        now: float,
        actor: Actor = SCANNER,
    ) -> AttendanceSession:
        """Start a roll call; one open session per course at a time."""
        for sess in self.store.open_sessions():
            if sess.course == course:
                raise SessionAlreadyOpen(f"course {course!r} already has {sess.id} open")
        return self.store.add_session(
            actor, course=course, stream=stream, trimester=trimester, opened_s=now
        )

    def close_session(self, session_id: str, now: float, actor: Actor = SCANNER) -> AttendanceSession:
        session = self.store.get_session(session_id)
        if session.state is SessionState.CLOSED:
            raise SessionClosed(f"session {session_id} already closed")
        return self.store.set_session_closed(actor, session_id, now)

    # -- scan ingestion ---------------------------------------------------------

    def ingest_scan(
        self, session_id: str, tag_id: TagId, now: float
    ) -> tuple[Optional[ScanEvent], AttendanceRecord]:
        """Process one decoded tag read.

        Returns (event, record); event is None when the read was debounced
        (same tag re-read within the debounce window only refreshes
        last_seen). The record's student_ref always reflects the registry
        binding at this instant.
        """
        session = self.store.get_session(session_id)
        if session.state is SessionState.CLOSED:
            raise SessionClosed(f"session {session_id} is closed")
        student = self.store.lookup_by_tag(tag_id)
        previous = self.store.get_record(session_id, tag_id)

        if previous is not None and now - previous.last_seen_s < self.debounce_s:
            record = AttendanceRecord(
                session_ref=session_id,
                tag_id=tag_id,
                student_ref=previous.student_ref,
                first_seen_s=previous.first_seen_s,
                last_seen_s=now,
            )
            self.store.upsert_record(SCANNER, record, now)
            return None, record

        record = AttendanceRecord(
            session_ref=session_id,
            tag_id=tag_id,
            student_ref=student.id if student is not None else None,
            first_seen_s=previous.first_seen_s if previous is not None else now,
            last_seen_s=now,
        )
        self.store.upsert_record(SCANNER, record, now)
        event = ScanEvent(
            kind=ScanKind.RESOLVED if student is not None else ScanKind.UNKNOWN,
            session_ref=session_id,
            timestamp_s=now,
            tag_id=tag_id,
            student_ref=student.id if student is not None else None,
        )
        return self._emit(event), record

    def note_corrupt_frame(self, session_id: str, now: float) -> ScanEvent:
        """Record a garbled read: counted and surfaced, never a record."""
        self.store.get_session(session_id)  # NotFound guard
        self._corrupt_counts[session_id] = self._corrupt_counts.get(session_id, 0) + 1
        return self._emit(
            ScanEvent(kind=ScanKind.CORRUPT, session_ref=session_id, timestamp_s=now)
        )

    def corrupt_count(self, session_id: str) -> int:
        return self._corrupt_counts.get(session_id, 0)

    # -- registration -------------------------------------------------------------

    def complete_registration(
        self,
        session_id: str,
        tag_id: TagId,
        fields: StudentFields,
        now: float,
        actor: Actor = SCANNER,
    ) -> AttendanceRecord:
        """Bind an unknown tag to a newly registered student.

        The pending record flips to present, keeping its original
        first_seen_s. Allowed even after the session closed (operators may
        finish paperwork after the roll call ends).
        """
        record = self.store.get_record(session_id, tag_id)
        if record is None or record.student_ref is not None:
            raise NoPendingRecord(
                f"no pending registration for tag {tag_id} in {session_id}"
            )
        student = self.store.put_student(
            actor,
            name=fields.name,
            course=fields.course,
            stream=fields.stream,
            trimester=fields.trimester,
            tag_id=tag_id,
            now=now,
            photo_ref=fields.photo_ref,
        )
        updated = AttendanceRecord(
            session_ref=session_id,
            tag_id=tag_id,
            student_ref=student.id,
            first_seen_s=record.first_seen_s,
            last_seen_s=record.last_seen_s,
        )
        self.store.upsert_record(actor, updated, now)
        return updated

    def records(self, session_id: str) -> list[AttendanceRecord]:
        self.store.get_session(session_id)  # NotFound guard
        return self.store.records_for_session(session_id)
