"""JSON shapes shared by the HTTP API and the event stream."""

from __future__ import annotations

from typing import Any, Optional

from ..store import AttendanceRecord, AttendanceSession, RegistryStore, Student


def student_json(student: Student) -> dict[str, Any]:
    return {
        "id": student.id,
        "name": student.name,
        "course": student.course,
        "stream": student.stream,
        "trimester": student.trimester,
        "tag_id": student.tag_id.canonical,
        "photo_ref": student.photo_ref,
        "registered_s": student.registered_s,
        "active": student.active,
    }


def session_json(session: AttendanceSession) -> dict[str, Any]:
    return {
        "id": session.id,
        "course": session.course,
        "stream": session.stream,
        "trimester": session.trimester,
        "opened_s": session.opened_s,
        "closed_s": session.closed_s,
        "state": session.state.value,
    }


def record_json(record: AttendanceRecord, store: Optional[RegistryStore] = None) -> dict[str, Any]:
    student = None
    if store is not None and record.student_ref is not None:
        student = store.students.get(record.student_ref)
    return {
        "session_ref": record.session_ref,
        "tag_id": record.tag_id.canonical,
        "student_ref": record.student_ref,
        "student_name": student.name if student else None,
        "first_seen_s": record.first_seen_s,
        "last_seen_s": record.last_seen_s,
        "status": record.status.value,
    }
