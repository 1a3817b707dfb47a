"""Per-session event journal and fan-out for the live stream.

Every published event gets a per-session sequence number starting at 1 and
is kept for the session's lifetime, so a client can connect at any moment,
receive a state snapshot, then the tail of events after its last-seen
sequence number, with no gap and no duplicate.

Envelope (schema version 1):

    {"v": 1, "seq": 7, "session": "SES0001", "kind": "resolved", "at_s": ...,
     ...kind-specific fields...}

Kinds: resolved, unknown, corrupt, registered, session_open, session_closed,
reader_status.
"""

from __future__ import annotations

import asyncio
from typing import Any

SCHEMA_VERSION = 1


class EventHub:
    """In-memory journal plus live subscriber queues. Single event loop only."""

    def __init__(self) -> None:
        self._journals: dict[str, list[dict[str, Any]]] = {}
        self._subscribers: dict[str, set[asyncio.Queue]] = {}

    def publish(self, session_id: str, kind: str, at_s: float, **body: Any) -> dict[str, Any]:
        reserved = {"v", "seq", "session", "kind", "at_s"} & set(body)
        if reserved:
            raise ValueError(f"body would clobber envelope fields: {sorted(reserved)}")
        journal = self._journals.setdefault(session_id, [])
        event = {
            "v": SCHEMA_VERSION,
            "seq": len(journal) + 1,
            "session": session_id,
            "kind": kind,
            "at_s": at_s,
            **body,
        }
        journal.append(event)
        for queue in self._subscribers.get(session_id, set()):
            queue.put_nowait(event)
        return event

    def journal(self, session_id: str) -> list[dict[str, Any]]:
        return list(self._journals.get(session_id, []))

    def last_seq(self, session_id: str) -> int:
        return len(self._journals.get(session_id, []))

    def subscribe(self, session_id: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self._subscribers.setdefault(session_id, set()).add(queue)
        return queue

    def unsubscribe(self, session_id: str, queue: asyncio.Queue) -> None:
        self._subscribers.get(session_id, set()).discard(queue)


def sse_format(data: str, *, event: str | None = None, event_id: int | None = None) -> str:
    """Render one server-sent-events message."""
    out = []
    if event_id is not None:
        out.append(f"id: {event_id}")
    if event is not None:
        out.append(f"event: {event}")
    out.append(f"data: {data}")
    return "\n".join(out) + "\n\n"
