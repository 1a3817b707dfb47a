"""Reader byte stream -> decoder -> attendance ingestion.

Sources:

- ``scenario:<path>``  replay a scenario file through the virtual reader
- ``tcp:<host>:<port>`` connect to a socket that emits raw frames
- ``device:<path>``    read raw frames from a character device / FIFO

Scans land in the most recently opened session that is still open; with no
session open, frames are counted and dropped. Socket sources reconnect with
exponential backoff and surface status events; the decoder's buffer carries
across reconnects, so no well-formed frame is ever lost to a disconnect.
"""

from __future__ import annotations

import asyncio
import logging
import os
import time
from pathlib import Path
from typing import Callable, Optional

from ..attendance import AttendanceService, ScanKind
from ..protocol import FrameDecoder
from ..simulator import ReaderConfig, ReaderField, parse_scenario, scenario_events
from .events import EventHub
from .wire import record_json, student_json

log = logging.getLogger(__name__)

BACKOFF_INITIAL_S = 0.25
BACKOFF_MAX_S = 5.0


class ReaderBridge:
    """Single consumer of the reader stream; one instance per gateway."""

    def __init__(
        self,
        service: AttendanceService,
        hub: EventHub,
        reader: str,
        reader_cfg: Optional[ReaderConfig] = None,
        clock: Callable[[], float] = time.time,
        sim_speed: float = 0.0,
    ) -> None:
        self.service = service
        self.hub = hub
        self.reader = reader
        self.reader_cfg = reader_cfg or ReaderConfig()
        self.clock = clock
        self.sim_speed = sim_speed
        self.decoder = FrameDecoder()
        self.unsessioned_frames = 0
        self._counted_mismatches = 0

    # -- ingestion ------------------------------------------------------------

    def active_session_id(self) -> Optional[str]:
        """Scans route to the most recently opened session still open."""
        open_sessions = self.service.store.open_sessions()
        return open_sessions[-1].id if open_sessions else None

    def handle_bytes(self, data: bytes) -> None:
        tag_ids = self.decoder.feed(data)
        now = self.clock()
        session_id = self.active_session_id()
        if session_id is None:
            self.unsessioned_frames += len(tag_ids)
            self._counted_mismatches = self.decoder.checksum_mismatches
            return
        for tag_id in tag_ids:
            event, record = self.service.ingest_scan(session_id, tag_id, now)
            if event is None:
                continue  # debounced repeat read
            student = None
            if event.student_ref is not None:
                student = self.service.store.get_student(event.student_ref)
            self.hub.publish(
                session_id,
                event.kind.value,
                at_s=event.timestamp_s,
                tag_id=tag_id.canonical,
                student=student_json(student) if student else None,
                record=record_json(record, self.service.store),
            )
        fresh_mismatches = self.decoder.checksum_mismatches - self._counted_mismatches
        for _ in range(fresh_mismatches):
            corrupt = self.service.note_corrupt_frame(session_id, now)
            self.hub.publish(
                session_id,
                ScanKind.CORRUPT.value,
                at_s=corrupt.timestamp_s,
                corrupt_count=self.service.corrupt_count(session_id),
            )
        self._counted_mismatches = self.decoder.checksum_mismatches

    def _status(self, status: str, detail: str = "") -> None:
        log.info("reader %s: %s %s", self.reader, status, detail)
        session_id = self.active_session_id()
        if session_id is not None:
            self.hub.publish(
                session_id, "reader_status", at_s=self.clock(), status=status, detail=detail
            )

    # -- source loops ------------------------------------------------------------

    async def run(self) -> None:
        kind, _, rest = self.reader.partition(":")
        if kind == "scenario":
            await self._run_scenario(rest)
        elif kind == "tcp":
            await self._run_tcp(rest)
        elif kind == "device":
            await self._run_device(rest)
        else:
            raise ValueError(f"unknown reader source: {self.reader!r}")

    async def _run_scenario(self, path: str) -> None:
        script = Path(path).read_text("utf-8")
        reader_field = ReaderField(self.reader_cfg)
        # the roll call starts when an operator opens a session
        while self.active_session_id() is None:
            await asyncio.sleep(0.05)
        self._status("connected", f"scenario {path}")
        last_sim_s = 0.0
        for frame, sim_s in scenario_events(parse_scenario(script), reader_field):
            if self.sim_speed > 0:
                await asyncio.sleep((sim_s - last_sim_s) / self.sim_speed)
            else:
                await asyncio.sleep(0)  # yield to API handlers
            last_sim_s = sim_s
            self.handle_bytes(frame)
        self._status("ended", f"scenario finished at t={last_sim_s:g}s")

    async def _run_tcp(self, address: str) -> None:
        host, _, port_text = address.rpartition(":")
        port = int(port_text)
        backoff = BACKOFF_INITIAL_S
        while True:
            try:
                reader, writer = await asyncio.open_connection(host, port)
            except OSError as exc:
                self._status("retrying", f"connect failed: {exc}")
                await asyncio.sleep(backoff)
                backoff = min(backoff * 2, BACKOFF_MAX_S)
                continue
            self._status("connected", f"tcp {host}:{port}")
            backoff = BACKOFF_INITIAL_S
            try:
                while True:
                    data = await reader.read(4096)
                    if not data:
                        break
                    self.handle_bytes(data)
            except OSError as exc:
                self._status("disconnected", str(exc))
            else:
                self._status("disconnected", "stream closed")
            finally:
                writer.close()
            await asyncio.sleep(backoff)

    async def _run_device(self, path: str) -> None:
        loop = asyncio.get_running_loop()
        while True:
            try:
                fd = await loop.run_in_executor(None, lambda: os.open(path, os.O_RDONLY))
            except OSError as exc:
                self._status("retrying", f"open failed: {exc}")
                await asyncio.sleep(BACKOFF_INITIAL_S)
                continue
            self._status("connected", f"device {path}")
            try:
                while True:
                    data = await loop.run_in_executor(None, os.read, fd, 4096)
                    if not data:
                        break
                    self.handle_bytes(data)
            except OSError as exc:
                self._status("disconnected", str(exc))
            finally:
                os.close(fd)
            await asyncio.sleep(BACKOFF_INITIAL_S)
