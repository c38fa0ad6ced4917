"""Serial servo bus: frame codec, a simulated four-servo bus and script replay.

Wire format (half-duplex, daisy-chained)::

    0xFF 0xFF id length instruction params... checksum

with ``length = len(params) + 2`` and ``checksum = ~(id + length + instruction
+ sum(params)) & 0xFF``. Status replies carry the servo's error byte in the
instruction slot. Positions are two bytes, little-endian. The layout and
register addresses follow the servo vendor's published bus documentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .transmission import ROLES, TICK_MAX, TICK_MIN, wrist_command

HEADER = b"\xff\xff"
BROADCAST_ID = 254
MAX_ID = 253
MAX_PARAMS = 250

PING = 0x01
READ = 0x02
WRITE = 0x03
SYNC_WRITE = 0x83
INSTRUCTIONS = {PING: "ping", READ: "read", WRITE: "write", SYNC_WRITE: "sync_write"}

REG_GOAL_POSITION = 0x2A
REG_PRESENT_POSITION = 0x38

# status error bits
ERR_NONE = 0x00
ERR_RANGE = 0x08
ERR_INSTRUCTION = 0x40

DEFAULT_SPEED_TICKS_S = 500.0


class ProtocolError(ValueError):
    """Base class for frame decoding failures."""

    kind = "protocol_error"


class HeaderError(ProtocolError):
    kind = "header_error"


class FrameLengthError(ProtocolError):
    kind = "length_error"


class IncompleteFrame(ProtocolError):
    """Not enough bytes yet; the caller may retry after reading more."""

    kind = "incomplete"
    retryable = True


class ChecksumError(ProtocolError):
    kind = "checksum_error"

    def __init__(self, expected: int, actual: int):
        super().__init__(f"checksum_error: expected 0x{expected:02X}, got 0x{actual:02X}")
        self.expected = expected
        self.actual = actual


def _byte(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 0xFF:
        raise ValueError(f"{name} must be a byte (0-255), got {v!r}")
    return v


def checksum(servo_id: int, instruction: int, params: Iterable[int] = ()) -> int:
    params = list(params)
    return ~(servo_id + len(params) + 2 + instruction + sum(params)) & 0xFF


@dataclass(frozen=True)
class ServoFrame:
    id: int
    instruction: int
    params: tuple = ()

    @property
    def length(self) -> int:
        return len(self.params) + 2

    @property
    def checksum(self) -> int:
        return checksum(self.id, self.instruction, self.params)

    def to_bytes(self) -> bytes:
        return bytes([*HEADER, self.id, self.length, self.instruction, *self.params, self.checksum])


def _frame(servo_id: int, instruction: int, params) -> ServoFrame:
    servo_id = _byte(servo_id, "id")
    if servo_id > BROADCAST_ID:
        raise ValueError(f"id must be 0-{MAX_ID} or {BROADCAST_ID} (broadcast), got {servo_id}")
    params = tuple(_byte(p, "param") for p in params)
    if len(params) > MAX_PARAMS:
        raise ValueError(f"at most {MAX_PARAMS} params per frame, got {len(params)}")
    return ServoFrame(servo_id, _byte(instruction, "instruction"), params)


def encode_frame(servo_id: int, instruction: int, params=()) -> bytes:
    """Instruction packet bytes. ``instruction`` must be ping, read, write or sync_write."""
    if instruction not in INSTRUCTIONS:
        raise ValueError(f"unknown instruction 0x{instruction:02X}" if isinstance(instruction, int) else
                         f"unknown instruction {instruction!r}")
    return _frame(servo_id, instruction, params).to_bytes()


def encode_status(servo_id: int, error: int = ERR_NONE, params=()) -> bytes:
    return _frame(servo_id, error, params).to_bytes()


def decode_frame(data: bytes) -> ServoFrame:
    """Parse exactly one frame. Trailing bytes are a length error."""
    data = bytes(data)
    if len(data) < 2:
        if data and data[0] != 0xFF:
            raise HeaderError(f"header_error: bad header byte 0x{data[0]:02X}")
        raise IncompleteFrame("incomplete: missing header")
    if data[:2] != HEADER:
        raise HeaderError(f"header_error: expected FF FF, got {data[:2].hex(' ').upper()}")
    if len(data) < 4:
        raise IncompleteFrame("incomplete: missing id/length")
    length = data[3]
    if length < 2 or length > MAX_PARAMS + 2:
        raise FrameLengthError(f"length_error: length byte {length} outside [2, {MAX_PARAMS + 2}]")
    total = 4 + length
    if len(data) < total:
        raise IncompleteFrame(f"incomplete: need {total} bytes, have {len(data)}")
    if len(data) > total:
        raise FrameLengthError(f"length_error: {len(data) - total} trailing bytes after a {total}-byte frame")
    servo_id, instruction = data[2], data[4]
    params = tuple(data[5 : total - 1])
    expected = checksum(servo_id, instruction, params)
    if data[-1] != expected:
        raise ChecksumError(expected, data[-1])
    if servo_id > BROADCAST_ID:
        raise ProtocolError(f"invalid id {servo_id}")
    return ServoFrame(servo_id, instruction, params)


def split_frames(stream: bytes) -> tuple[list[ServoFrame], bytes]:
    """Decode back-to-back frames; returns (frames, unconsumed tail)."""
    frames = []
    i = 0
    while len(stream) - i >= 4:
        total = 4 + stream[i + 3]
        if len(stream) - i < total:
            break
        frames.append(decode_frame(stream[i : i + total]))
        i += total
    return frames, bytes(stream[i:])


def u16_le(v: int) -> tuple[int, int]:
    return v & 0xFF, (v >> 8) & 0xFF


def from_u16_le(lo: int, hi: int) -> int:
    return lo | (hi << 8)


# --- simulated bus ---------------------------------------------------------


@dataclass
class SimServo:
    id: int
    role: str = ""
    position: int = 2048
    goal: int = 2048
    speed: float = DEFAULT_SPEED_TICKS_S  # ticks/s
    _exact: float = field(default=math.nan, repr=False)

    def __post_init__(self):
        for name in ("position", "goal"):
            v = getattr(self, name)
            if not TICK_MIN <= v <= TICK_MAX:
                raise ValueError(f"servo {self.id}: {name} {v} outside [{TICK_MIN}, {TICK_MAX}]")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")
        self._exact = float(self.position)

    def step(self, dt: float) -> None:
        # fractional progress is kept internally; the register reads whole ticks
        gap = self.goal - self._exact
        move = min(abs(gap), self.speed * dt)
        self._exact += math.copysign(move, gap)
        self.position = int(round(self._exact))


class SimBus:
    """Simulated bus of position servos; one transaction at a time."""

    def __init__(self, servos: Iterable[SimServo] | None = None, speed: float = DEFAULT_SPEED_TICKS_S):
        if servos is None:
            servos = [SimServo(i + 1, role, speed=speed) for i, role in enumerate(ROLES)]
        self.servos: dict[int, SimServo] = {}
        for s in servos:
            if s.id in self.servos:
                raise ValueError(f"duplicate servo id {s.id}")
            if not 0 <= s.id <= MAX_ID:
                raise ValueError(f"servo id must be 0-{MAX_ID}")
            self.servos[s.id] = s
        self.time_s = 0.0

    def step(self, dt: float) -> "SimBus":
        if not dt > 0:
            raise ValueError("dt must be > 0")
        for s in self.servos.values():
            s.step(dt)
        self.time_s += dt
        return self

    def positions(self) -> dict[int, int]:
        return {i: s.position for i, s in sorted(self.servos.items())}

    def _set_goal(self, servo: SimServo, data) -> int:
        if len(data) != 2:
            return ERR_RANGE
        tick = from_u16_le(*data)
        if not TICK_MIN <= tick <= TICK_MAX:
            return ERR_RANGE
        servo.goal = tick
        return ERR_NONE

    def _write(self, servo: SimServo, params) -> int:
        if len(params) < 1 or params[0] != REG_GOAL_POSITION:
            return ERR_INSTRUCTION
        return self._set_goal(servo, params[1:])

    def _read(self, servo: SimServo, params) -> tuple[int, tuple]:
        if len(params) != 2 or params[1] != 2:
            return ERR_INSTRUCTION, ()
        if params[0] == REG_PRESENT_POSITION:
            return ERR_NONE, u16_le(servo.position)
        if params[0] == REG_GOAL_POSITION:
            return ERR_NONE, u16_le(servo.goal)
        return ERR_INSTRUCTION, ()

    def _sync_write(self, params) -> None:
        if len(params) < 2:
            return
        addr, n = params[0], params[1]
        body = params[2:]
        if addr != REG_GOAL_POSITION or n != 2 or len(body) % (n + 1):
            return
        for k in range(0, len(body), n + 1):
            servo = self.servos.get(body[k])
            if servo is not None:
                self._set_goal(servo, body[k + 1 : k + 1 + n])

    def transaction(self, frame: ServoFrame) -> ServoFrame | None:
        """Apply one instruction frame; returns the status reply or None (no response)."""
        ins, params = frame.instruction, frame.params
        if frame.id == BROADCAST_ID:
            if ins == SYNC_WRITE:
                self._sync_write(params)
            elif ins == WRITE:
                for servo in self.servos.values():
                    self._write(servo, params)
            return None
        servo = self.servos.get(frame.id)
        if servo is None:
            return None
        if ins == PING:
            return ServoFrame(servo.id, ERR_NONE, ())
        if ins == READ:
            err, data = self._read(servo, params)
            return ServoFrame(servo.id, err, data)
        if ins == WRITE:
            return ServoFrame(servo.id, self._write(servo, params), ())
        return ServoFrame(servo.id, ERR_INSTRUCTION, ())


def sim_bus_step(bus: SimBus, dt: float) -> SimBus:
    return bus.step(dt)


def bus_transaction(bus: SimBus, frame) -> ServoFrame | None:
    """Send a frame (bytes or ServoFrame) on the bus; None means no reply."""
    if not isinstance(frame, ServoFrame):
        frame = decode_frame(frame)
    return bus.transaction(frame)


# --- high-level helpers ----------------------------------------------------


def ping_frame(servo_id: int) -> bytes:
    return encode_frame(servo_id, PING)


def read_position_frame(servo_id: int) -> bytes:
    return encode_frame(servo_id, READ, (REG_PRESENT_POSITION, 2))


def write_goal_frame(servo_id: int, tick: int) -> bytes:
    if not TICK_MIN <= tick <= TICK_MAX:
        raise ValueError(f"goal tick {tick} outside [{TICK_MIN}, {TICK_MAX}]")
    return encode_frame(servo_id, WRITE, (REG_GOAL_POSITION, *u16_le(tick)))


def sync_goal_frame(goals: dict[int, int]) -> bytes:
    params = [REG_GOAL_POSITION, 2]
    for sid, tick in sorted(goals.items()):
        if not TICK_MIN <= tick <= TICK_MAX:
            raise ValueError(f"goal tick {tick} outside [{TICK_MIN}, {TICK_MAX}]")
        params += [sid, *u16_le(tick)]
    return encode_frame(BROADCAST_ID, SYNC_WRITE, params)


def to_hex(data: bytes) -> str:
    return bytes(data).hex(" ").upper()


def from_hex(text: str) -> bytes:
    return bytes.fromhex(text.replace(",", " "))


class ScriptError(ValueError):
    """A bus script line could not be parsed or decoded."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _command_frames(words: list[str], calibrations) -> list[bytes]:
    cmd, args = words[0].lower(), words[1:]
    if cmd == "ping" and len(args) == 1:
        return [ping_frame(int(args[0]))]
    if cmd == "read" and len(args) == 1:
        return [read_position_frame(int(args[0]))]
    if cmd == "write" and len(args) == 2:
        return [write_goal_frame(int(args[0]), int(args[1]))]
    if cmd == "wrist" and len(args) == 2:
        goals = wrist_command(math.radians(float(args[0])), math.radians(float(args[1])), calibrations)
        return [sync_goal_frame(goals)]
    raise ValueError(f"unrecognised command {' '.join(words)!r}")


def run_script(lines: Iterable[str], bus: SimBus | None = None, calibrations=None) -> list[str]:
    """Replay a bus script and return the transcript lines.

    Script lines are hex frames (``FF FF 01 02 01 FB``) or commands:
    ``ping ID``, ``read ID``, ``write ID TICK``, ``wrist DEV_DEG FLEX_DEG``
    and ``wait SECONDS``. Blank lines and ``#`` comments are skipped.
    Transcript: ``> frame`` for each request, ``< frame`` for each reply and
    ``= wait`` for elapsed time.
    """
    from .transmission import default_calibrations

    bus = bus if bus is not None else SimBus()
    calibrations = calibrations if calibrations is not None else default_calibrations()
    out: list[str] = []
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0].lower() == "wait":
                if len(words) != 2:
                    raise ValueError("wait needs one duration in seconds")
                dt = float(words[1])
                if not dt > 0:
                    raise ValueError("wait duration must be > 0")
                bus.step(dt)
                out.append(f"= wait {dt:.6f}")
                continue
            if words[0].lower() in ("ping", "read", "write", "wrist"):
                frames = _command_frames(words, calibrations)
            else:
                try:
                    data = from_hex(line)
                except ValueError:
                    raise ValueError(f"not a hex frame or command: {line!r}") from None
                decode_frame(data)
                frames = [data]
        except ProtocolError as exc:
            raise ScriptError(no, str(exc)) from exc
        except ValueError as exc:
            raise ScriptError(no, str(exc)) from exc
        for data in frames:
            out.append("> " + to_hex(data))
            reply = bus_transaction(bus, data)
            if reply is not None:
                out.append("< " + to_hex(reply.to_bytes()))
    return out


def check_transcript(lines: Iterable[str], bus: SimBus | None = None) -> list[str]:
    """Re-run the requests of a transcript on a fresh bus; returns mismatch messages."""
    bus = bus if bus is not None else SimBus()
    expected: list[str] = []
    script: list[str] = []
    for raw in lines:
        line = raw.strip()
        if line.startswith("> "):
            script.append(line[2:])
        elif line.startswith("= wait "):
            script.append("wait " + line[7:])
        if line:
            expected.append(line)
    actual = run_script(script, bus)
    problems = [f"line {i + 1}: expected {e!r}, got {a!r}" for i, (e, a) in enumerate(zip(expected, actual)) if e != a]
    if len(expected) != len(actual):
        problems.append(f"transcript has {len(expected)} lines, replay produced {len(actual)}")
    return problems
