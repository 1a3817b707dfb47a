"""Virtual 125 kHz reader and tag field.

Replaces reader/antenna/tag hardware with a deterministic discrete-event
model. Tags sit at scalar distances from the reader; a tag is readable when
its distance is within both the reader's effective range and the tag class's
own range limit. Polling reads every responding tag in ascending id order
(idealized slotted anti-collision); with anti-collision disabled, two or
more responders garble into a single checksum-corrupted frame.

The simulated clock is integer microseconds internally so that repeated
0.2 s read costs accumulate exactly (60 reads == 12.0 s, no float drift).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Iterator, Optional, Union

from .protocol import ETX, STX, TagId, checksum, encode_frame

# Reader operating limits: low-frequency badge readers up to microwave.
MIN_FREQUENCY_HZ = 125_000
MAX_FREQUENCY_HZ = 2_400_000_000


class SimError(Exception):
    """Base class for simulator errors."""


class ReadOnlyTag(SimError):
    """Write attempted on a tag with permanent memory."""


class CapacityExceeded(SimError):
    """Write larger than the tag's memory capacity."""


class OutOfField(SimError):
    """Operation requires the tag to be within reader range."""


class ScenarioParseError(SimError):
    """Scenario script is malformed; carries the offending line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TagClass(enum.Enum):
    PASSIVE = "passive"
    ACTIVE = "active"
    SEMI_PASSIVE = "semi_passive"


class Availability(enum.Enum):
    FIELD_ONLY = "field_only"  # responds only while energized by the reader
    CONTINUOUS = "continuous"  # battery-powered, beacons unsolicited


class CostTier(enum.Enum):
    CHEAP = "cheap"
    EXPENSIVE = "expensive"
    VERY_EXPENSIVE = "very_expensive"


class MemoryMode(enum.Enum):
    PERMANENT = "permanent"
    REWRITABLE = "rewritable"


@dataclass(frozen=True)
class TagTypeProfile:
    """Per-class tag characteristics (range, power, memory)."""

    tag_class: TagClass
    max_range_m: float
    has_battery: bool
    lifespan_years: float  # informational only
    cost_tier: CostTier  # informational only
    availability: Availability
    memory_capacity_bytes: int
    memory_mode: MemoryMode = MemoryMode.REWRITABLE

    @classmethod
    def for_class(
        cls, tag_class: TagClass, memory_mode: MemoryMode = MemoryMode.REWRITABLE
    ) -> "TagTypeProfile":
        """Build the standard profile for a tag class."""
        if tag_class is TagClass.PASSIVE:
            return cls(
                tag_class=tag_class,
                max_range_m=10.0,
                has_battery=False,
                lifespan_years=20.0,
                cost_tier=CostTier.CHEAP,
                availability=Availability.FIELD_ONLY,
                memory_capacity_bytes=128,
                memory_mode=memory_mode,
            )
        if tag_class is TagClass.ACTIVE:
            return cls(
                tag_class=tag_class,
                max_range_m=100.0,
                has_battery=True,
                lifespan_years=10.0,
                cost_tier=CostTier.VERY_EXPENSIVE,
                availability=Availability.CONTINUOUS,
                memory_capacity_bytes=128 * 1024,
                memory_mode=memory_mode,
            )
        if tag_class is TagClass.SEMI_PASSIVE:
            return cls(
                tag_class=tag_class,
                max_range_m=100.0,
                has_battery=True,
                lifespan_years=10.0,
                cost_tier=CostTier.EXPENSIVE,
                availability=Availability.FIELD_ONLY,
                memory_capacity_bytes=128 * 1024,
                memory_mode=memory_mode,
            )
        raise ValueError(f"unknown tag class: {tag_class!r}")


@dataclass
class VirtualTag:
    """One simulated tag: identity, class profile, position, user memory."""

    id: TagId
    profile: TagTypeProfile
    distance_m: float
    user_memory: bytes = b""

    def __post_init__(self) -> None:
        if self.distance_m < 0:
            raise ValueError("distance must be non-negative")
        if len(self.user_memory) > self.profile.memory_capacity_bytes:
            raise ValueError("user_memory exceeds tag capacity")


@dataclass(frozen=True)
class ReaderConfig:
    frequency_hz: int = 125_000
    effective_range_m: float = 0.10
    per_read_seconds: float = 0.2
    anti_collision: bool = True
    beacon_interval_s: float = 1.0

    def __post_init__(self) -> None:
        if not MIN_FREQUENCY_HZ <= self.frequency_hz <= MAX_FREQUENCY_HZ:
            raise ValueError(
                f"frequency {self.frequency_hz} Hz outside 125 kHz - 2.4 GHz"
            )
        if self.effective_range_m <= 0:
            raise ValueError("effective_range_m must be positive")
        if self.per_read_seconds <= 0:
            raise ValueError("per_read_seconds must be positive")
        if self.beacon_interval_s <= 0:
            raise ValueError("beacon_interval_s must be positive")

    @property
    def per_read_us(self) -> int:
        return _to_us(self.per_read_seconds)

    @property
    def beacon_interval_us(self) -> int:
        return _to_us(self.beacon_interval_s)


def _to_us(seconds: float) -> int:
    return round(seconds * 1_000_000)


@dataclass
class SimClock:
    """Simulated time in integer microseconds; only ever moves forward."""

    us: int = 0

    @property
    def now_s(self) -> float:
        return self.us / 1e6

    def advance_us(self, delta_us: int) -> None:
        if delta_us < 0:
            raise ValueError("clock cannot move backwards")
        self.us += delta_us

    def advance_s(self, seconds: float) -> None:
        self.advance_us(_to_us(seconds))


def in_field(tag: VirtualTag, cfg: ReaderConfig) -> bool:
    """A read can succeed iff the tag is within both range limits."""
    return tag.distance_m <= min(cfg.effective_range_m, tag.profile.max_range_m)


def collision_frame(responders: Iterable[VirtualTag]) -> bytes:
    """The garbled frame two or more simultaneous responders produce.

    Deterministic model: payload of the lowest id, checksum bits inverted,
    so the decoder always sees a ChecksumMismatch and never a wrong id.
    """
    first = min(t.id for t in responders)
    bad = checksum(first) ^ 0xFF
    return bytes([STX]) + first.canonical.encode("ascii") + f"{bad:02X}".encode("ascii") + bytes([ETX])


class ReaderField:
    """The reader and the set of tags currently near it."""

    def __init__(self, cfg: Optional[ReaderConfig] = None, clock: Optional[SimClock] = None) -> None:
        self.cfg = cfg or ReaderConfig()
        self.clock = clock or SimClock()
        self.tags: dict[TagId, VirtualTag] = {}
        self._next_beacon_us: dict[TagId, int] = {}

    # -- field population ---------------------------------------------------

    def place(self, tag: VirtualTag) -> None:
        if tag.id in self.tags:
            raise SimError(f"tag {tag.id} already placed")
        self.tags[tag.id] = tag
        if tag.profile.availability is Availability.CONTINUOUS:
            # First unsolicited transmission one interval after placement.
            self._next_beacon_us[tag.id] = self.clock.us + self.cfg.beacon_interval_us

    def move(self, tag_id: TagId, distance_m: float) -> None:
        if distance_m < 0:
            raise ValueError("distance must be non-negative")
        self._get(tag_id).distance_m = distance_m

    def remove(self, tag_id: TagId) -> VirtualTag:
        tag = self._get(tag_id)
        del self.tags[tag_id]
        self._next_beacon_us.pop(tag_id, None)
        return tag

    def _get(self, tag_id: TagId) -> VirtualTag:
        try:
            return self.tags[tag_id]
        except KeyError:
            raise SimError(f"no such tag in field: {tag_id}") from None

    def in_field(self, tag: VirtualTag) -> bool:
        return in_field(tag, self.cfg)

    # -- reading ------------------------------------------------------------

    def poll_cycle(self) -> list[tuple[bytes, float]]:
        """Interrogate the field once.

        Returns (frame, emitted_at_seconds) pairs. Responders are in-field
        tags that answer only when energized; continuously-transmitting tags
        are heard via beacons instead. Each read costs per_read_seconds.
        """
        responders = sorted(
            (
                t
                for t in self.tags.values()
                if self.in_field(t) and t.profile.availability is Availability.FIELD_ONLY
            ),
            key=lambda t: t.id,
        )
        out: list[tuple[bytes, float]] = []
        if not responders:
            return out
        if self.cfg.anti_collision or len(responders) == 1:
            for tag in responders:
                self.clock.advance_us(self.cfg.per_read_us)
                out.append((encode_frame(tag.id), self.clock.now_s))
        else:
            # Simultaneous replies garble into one corrupted frame.
            self.clock.advance_us(self.cfg.per_read_us)
            out.append((collision_frame(responders), self.clock.now_s))
        return out

    def beacon_due(self, tag: VirtualTag) -> Optional[bytes]:
        """One beacon check at the current clock; None if not due or unheard."""
        if tag.profile.availability is not Availability.CONTINUOUS:
            return None
        due_us = self._next_beacon_us.get(tag.id)
        if due_us is None or self.clock.us < due_us:
            return None
        self._next_beacon_us[tag.id] = due_us + self.cfg.beacon_interval_us
        if not self.in_field(tag):
            return None  # transmitted, but out of the reader's hearing range
        return encode_frame(tag.id)

    def wait(self, seconds: float) -> list[tuple[bytes, float]]:
        """Let simulated time pass, collecting any beacons heard meanwhile.

        Beacon transmissions whose instant fell inside an earlier poll cycle
        are missed (the reader is busy interrogating, not listening); their
        schedule catches up here without emitting.
        """
        for tag_id, due in list(self._next_beacon_us.items()):
            while due < self.clock.us:
                due += self.cfg.beacon_interval_us
            self._next_beacon_us[tag_id] = due
        target_us = self.clock.us + _to_us(seconds)
        out: list[tuple[bytes, float]] = []
        while True:
            upcoming = [
                (due, tag_id)
                for tag_id, due in self._next_beacon_us.items()
                if due <= target_us
            ]
            if not upcoming:
                break
            due_us = min(due for due, _ in upcoming)
            self.clock.advance_us(due_us - self.clock.us)
            for _, tag_id in sorted(u for u in upcoming if u[0] == due_us):
                frame = self.beacon_due(self.tags[tag_id])
                if frame is not None:
                    out.append((frame, self.clock.now_s))
        self.clock.advance_us(target_us - self.clock.us)
        return out

    # -- tag memory ---------------------------------------------------------

    def write_tag_memory(self, tag: VirtualTag, data: bytes) -> VirtualTag:
        """Reprogram a rewritable tag's user memory over the air."""
        if not self.in_field(tag):
            raise OutOfField(f"tag {tag.id} at {tag.distance_m} m is out of range")
        if tag.profile.memory_mode is MemoryMode.PERMANENT:
            raise ReadOnlyTag(f"tag {tag.id} memory is permanent")
        if len(data) > tag.profile.memory_capacity_bytes:
            raise CapacityExceeded(
                f"{len(data)} bytes > capacity {tag.profile.memory_capacity_bytes}"
            )
        tag.user_memory = bytes(data)
        return tag


# -- scenario scripts -------------------------------------------------------
#
# Line-oriented text, one command per line, '#' starts a comment:
#
#   PLACE <tagid> <P|A|S> <distance_m>
#   MOVE <tagid> <distance_m>
#   REMOVE <tagid>
#   POLL
#   WAIT <seconds>

_CLASS_LETTER = {
    "P": TagClass.PASSIVE,
    "A": TagClass.ACTIVE,
    "S": TagClass.SEMI_PASSIVE,
}


@dataclass(frozen=True)
class PlaceCmd:
    line_no: int
    tag_id: TagId
    tag_class: TagClass
    distance_m: float


@dataclass(frozen=True)
class MoveCmd:
    line_no: int
    tag_id: TagId
    distance_m: float


@dataclass(frozen=True)
class RemoveCmd:
    line_no: int
    tag_id: TagId


@dataclass(frozen=True)
class PollCmd:
    line_no: int


@dataclass(frozen=True)
class WaitCmd:
    line_no: int
    seconds: float


Command = Union[PlaceCmd, MoveCmd, RemoveCmd, PollCmd, WaitCmd]


def parse_scenario(text: str) -> list[Command]:
    """Parse a scenario script; raises ScenarioParseError with line number."""
    commands: list[Command] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        verb = parts[0].upper()
        try:
            if verb == "PLACE":
                if len(parts) != 4:
                    raise ValueError("PLACE takes <tagid> <P|A|S> <distance_m>")
                tag_class = _CLASS_LETTER.get(parts[2].upper())
                if tag_class is None:
                    raise ValueError(f"unknown tag class {parts[2]!r}")
                distance = float(parts[3])
                if distance < 0:
                    raise ValueError("distance must be non-negative")
                commands.append(
                    PlaceCmd(line_no, TagId.parse(parts[1]), tag_class, distance)
                )
            elif verb == "MOVE":
                if len(parts) != 3:
                    raise ValueError("MOVE takes <tagid> <distance_m>")
                distance = float(parts[2])
                if distance < 0:
                    raise ValueError("distance must be non-negative")
                commands.append(MoveCmd(line_no, TagId.parse(parts[1]), distance))
            elif verb == "REMOVE":
                if len(parts) != 2:
                    raise ValueError("REMOVE takes <tagid>")
                commands.append(RemoveCmd(line_no, TagId.parse(parts[1])))
            elif verb == "POLL":
                if len(parts) != 1:
                    raise ValueError("POLL takes no arguments")
                commands.append(PollCmd(line_no))
            elif verb == "WAIT":
                if len(parts) != 2:
                    raise ValueError("WAIT takes <seconds>")
                seconds = float(parts[1])
                if seconds < 0:
                    raise ValueError("wait must be non-negative")
                commands.append(WaitCmd(line_no, seconds))
            else:
                raise ValueError(f"unknown command {parts[0]!r}")
        except ScenarioParseError:
            raise
        except ValueError as exc:
            raise ScenarioParseError(line_no, str(exc)) from None
    return commands


def scenario_events(
    commands: Iterable[Command], reader: ReaderField
) -> Iterator[tuple[bytes, float]]:
    """Execute commands against a reader, yielding (frame, sim_seconds) pairs."""
    for cmd in commands:
        try:
            if isinstance(cmd, PlaceCmd):
                profile = TagTypeProfile.for_class(cmd.tag_class)
                reader.place(VirtualTag(cmd.tag_id, profile, cmd.distance_m))
            elif isinstance(cmd, MoveCmd):
                reader.move(cmd.tag_id, cmd.distance_m)
            elif isinstance(cmd, RemoveCmd):
                reader.remove(cmd.tag_id)
            elif isinstance(cmd, PollCmd):
                yield from reader.poll_cycle()
            elif isinstance(cmd, WaitCmd):
                yield from reader.wait(cmd.seconds)
        except ScenarioParseError:
            raise
        except SimError as exc:
            raise ScenarioParseError(cmd.line_no, str(exc)) from None


def run_scenario(
    script: str, cfg: Optional[ReaderConfig] = None
) -> tuple[bytes, SimClock]:
    """Run a whole script, returning the emitted byte stream and final clock."""
    reader = ReaderField(cfg)
    stream = b"".join(
        frame for frame, _ in scenario_events(parse_scenario(script), reader)
    )
    return stream, reader.clock
