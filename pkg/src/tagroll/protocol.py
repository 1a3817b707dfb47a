"""Serial wire protocol for a 125 kHz tag reader.

Frame format (14 bytes total):

    [0x02][10 ASCII hex chars: tag id][2 ASCII hex chars: checksum][0x03]

- STX 0x02 / ETX 0x03 delimiters.
- Tag id: 40-bit identifier, uppercase hex, most-significant nibble first.
- Checksum: XOR of the five id bytes, encoded as 2 uppercase hex chars.

Hex is strict uppercase; lowercase payload bytes are treated as corruption,
not normalized. A checksum mismatch drops the frame and bumps a counter so
upper layers can report corrupt reads without ever seeing a wrong id.
"""

from __future__ import annotations

from dataclasses import dataclass

STX = 0x02
ETX = 0x03
FRAME_LEN = 14

ID_BITS = 40
ID_HEX_LEN = 10

_HEX_UPPER = frozenset(b"0123456789ABCDEF")


class FrameError(ValueError):
    """Base class for frame decode failures."""


class FrameTooShort(FrameError):
    """Fewer bytes than a complete frame; keep buffering."""


class BadDelimiter(FrameError):
    """Missing or misplaced STX/ETX byte."""


class NonHexPayload(FrameError):
    """Payload contains a byte outside 0-9A-F."""


class ChecksumMismatch(FrameError):
    """Frame is well-formed but its checksum does not match the payload."""


@dataclass(frozen=True, order=True)
class TagId:
    """A 40-bit tag identifier; canonical form is exactly 10 uppercase hex chars."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < (1 << ID_BITS):
            raise ValueError(f"tag id out of 40-bit range: {self.value:#x}")

    @classmethod
    def parse(cls, text: str) -> "TagId":
        """Parse the canonical form. Strict: exactly 10 chars, uppercase hex only."""
        if len(text) != ID_HEX_LEN or any(ord(c) not in _HEX_UPPER for c in text):
            raise ValueError(f"not a canonical tag id: {text!r}")
        return cls(int(text, 16))

    @property
    def canonical(self) -> str:
        return f"{self.value:010X}"

    @property
    def id_bytes(self) -> bytes:
        """The five payload bytes, most-significant first."""
        return self.value.to_bytes(5, "big")

    def __str__(self) -> str:
        return self.canonical


def checksum(tag_id: TagId) -> int:
    """XOR of the five id bytes (MSB first)."""
    c = 0
    for b in tag_id.id_bytes:
        c ^= b
    return c


def encode_frame(tag_id: TagId) -> bytes:
    """Encode one 14-byte frame for a tag id."""
    return bytes([STX]) + tag_id.canonical.encode("ascii") + f"{checksum(tag_id):02X}".encode("ascii") + bytes([ETX])


def decode_frame(data: bytes) -> TagId:
    """Decode exactly one frame from ``data``.

    Raises FrameTooShort / BadDelimiter / NonHexPayload / ChecksumMismatch.
    Trailing bytes beyond the 14-byte frame are rejected as BadDelimiter
    (use FrameDecoder for streams).
    """
    if len(data) < 1:
        raise FrameTooShort("empty input")
    if data[0] != STX:
        raise BadDelimiter(f"expected STX 0x02, got {data[0]:#04x}")
    if len(data) < FRAME_LEN:
        raise FrameTooShort(f"need {FRAME_LEN} bytes, have {len(data)}")
    if len(data) > FRAME_LEN:
        raise BadDelimiter(f"trailing bytes after frame: {len(data) - FRAME_LEN}")
    if data[FRAME_LEN - 1] != ETX:
        raise BadDelimiter(f"expected ETX 0x03, got {data[FRAME_LEN - 1]:#04x}")
    payload = data[1:13]
    if any(b not in _HEX_UPPER for b in payload):
        raise NonHexPayload(f"non-hex byte in payload: {payload!r}")
    tag_id = TagId(int(payload[:ID_HEX_LEN], 16))
    declared = int(payload[ID_HEX_LEN:], 16)
    if declared != checksum(tag_id):
        raise ChecksumMismatch(
            f"declared {declared:#04x}, computed {checksum(tag_id):#04x}"
        )
    return tag_id


class FrameDecoder:
    """Incremental decoder for a reader byte stream.

    Feed arbitrary chunks; complete valid frames come back as TagIds in
    stream order. Garbage is skipped by scanning for the next STX. Frames
    that fail checksum are dropped and counted (``checksum_mismatches``);
    other malformed frames resynchronize and count into ``framing_errors``.

    Single-owner: one instance per stream, not shared across threads.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self.frames_decoded = 0
        self.checksum_mismatches = 0
        self.framing_errors = 0
        self.bytes_discarded = 0

    @property
    def corrupt_frames(self) -> int:
        """Frames that looked like reads but failed validation."""
        return self.checksum_mismatches + self.framing_errors

    def feed(self, data: bytes) -> list[TagId]:
        """Consume ``data``, return every tag id completed by it, in order."""
        self._buf.extend(data)
        out: list[TagId] = []
        while True:
            start = self._buf.find(STX)
            if start < 0:
                self.bytes_discarded += len(self._buf)
                self._buf.clear()
                break
            if start > 0:
                self.bytes_discarded += start
                del self._buf[:start]
            if len(self._buf) < FRAME_LEN:
                break  # incomplete frame: retain buffered bytes
            try:
                out.append(decode_frame(bytes(self._buf[:FRAME_LEN])))
                self.frames_decoded += 1
                del self._buf[:FRAME_LEN]
            except ChecksumMismatch:
                self.checksum_mismatches += 1
                del self._buf[:FRAME_LEN]
            except FrameError:
                # Bad delimiter or non-hex byte: drop this STX and rescan so
                # a real frame starting inside the garbage is still found.
                self.framing_errors += 1
                self.bytes_discarded += 1
                del self._buf[:1]
        return out

    def pending(self) -> int:
        """Bytes buffered awaiting completion of a frame."""
        return len(self._buf)
