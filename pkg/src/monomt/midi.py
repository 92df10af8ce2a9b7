"""Standard MIDI File (format 0) encoding and decoding.

Only the subset this tool emits is understood on read: one track, one
channel, note on/off, program change, set-tempo and time-signature meta
events.  Other meta events and sysex messages are skipped.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoFailure, MalformedSmf, UnsupportedFeature
from .rhythm import QuantizedNote, QuantizedScore, TimeSignature

DEFAULT_PPQ = 480
DEFAULT_VELOCITY = 90
DEFAULT_PROGRAM = 0  # acoustic grand piano
DEFAULT_TEMPO_US = 500_000
VLQ_MAX = (1 << 28) - 1


class MidiWarning(UserWarning):
    """A file decoded, but something in it was irregular."""


# --------------------------------------------------------------------------
# Variable-length quantities
# --------------------------------------------------------------------------


def encode_vlq(value: int) -> bytes:
    if not 0 <= value <= VLQ_MAX:
        raise ValueError(f"VLQ value {value} outside 0..{VLQ_MAX}")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def decode_vlq(data: bytes, pos: int = 0) -> tuple[int, int]:
    """Read a VLQ at ``pos``; returns ``(value, next_pos)``."""
    value = 0
    for i in range(4):
        if pos + i >= len(data):
            raise MalformedSmf("truncated variable-length quantity")
        byte = data[pos + i]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos + i + 1
    raise MalformedSmf("variable-length quantity longer than 4 bytes")


# --------------------------------------------------------------------------
# Events
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoteOn:
    note: int
    velocity: int = DEFAULT_VELOCITY
    channel: int = 0


@dataclass(frozen=True)
class NoteOff:
    note: int
    velocity: int = 0
    channel: int = 0


@dataclass(frozen=True)
class ProgramChange:
    program: int
    channel: int = 0


@dataclass(frozen=True)
class SetTempo:
    us_per_quarter: int


@dataclass(frozen=True)
class TimeSignatureMeta:
    numerator: int
    denominator_power: int = 2
    clocks_per_click: int = 24
    thirty_seconds_per_quarter: int = 8


@dataclass(frozen=True)
class EndOfTrack:
    pass


@dataclass(frozen=True)
class OtherEvent:
    """A meta or sysex event carried through without interpretation."""

    status: int
    meta_type: int | None
    payload: bytes


@dataclass
class MidiFile:
    format: int = 0
    ppq: int = DEFAULT_PPQ
    events: list = field(default_factory=list)  # (delta_ticks, event) pairs


def _encode_event(event) -> bytes:
    if isinstance(event, NoteOn):
        return bytes((0x90 | event.channel, event.note, event.velocity))
    if isinstance(event, NoteOff):
        return bytes((0x80 | event.channel, event.note, event.velocity))
    if isinstance(event, ProgramChange):
        return bytes((0xC0 | event.channel, event.program))
    if isinstance(event, SetTempo):
        return b"\xff\x51\x03" + event.us_per_quarter.to_bytes(3, "big")
    if isinstance(event, TimeSignatureMeta):
        return b"\xff\x58\x04" + bytes((event.numerator, event.denominator_power,
                                         event.clocks_per_click, event.thirty_seconds_per_quarter))
    if isinstance(event, EndOfTrack):
        return b"\xff\x2f\x00"
    if isinstance(event, OtherEvent):
        if event.status == 0xFF:
            return bytes((0xFF, event.meta_type)) + encode_vlq(len(event.payload)) + event.payload
        return bytes((event.status,)) + encode_vlq(len(event.payload)) + event.payload
    raise TypeError(f"cannot encode {event!r}")


def encode_smf(mf: MidiFile) -> bytes:
    if mf.format != 0:
        raise UnsupportedFeature("only format-0 files are written")
    if not 0 < mf.ppq < 0x8000:
        raise ValueError(f"ppq must be in 1..32767, got {mf.ppq}")
    track = bytearray()
    for delta, event in mf.events:
        track += encode_vlq(delta)
        track += _encode_event(event)
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, mf.ppq)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def _decode_track(data: bytes) -> list:
    events = []
    pos = 0
    running = None
    while pos < len(data):
        delta, pos = decode_vlq(data, pos)
        if pos >= len(data):
            raise MalformedSmf("event missing after delta time")
        status = data[pos]
        if status == 0xFF:
            if pos + 2 > len(data):
                raise MalformedSmf("truncated meta event")
            meta_type = data[pos + 1]
            length, pos = decode_vlq(data, pos + 2)
            payload = data[pos:pos + length]
            if len(payload) != length:
                raise MalformedSmf("truncated meta event payload")
            pos += length
            running = None
            if meta_type == 0x51 and length == 3:
                event = SetTempo(int.from_bytes(payload, "big"))
            elif meta_type == 0x58 and length == 4:
                event = TimeSignatureMeta(*payload)
            elif meta_type == 0x2F:
                events.append((delta, EndOfTrack()))
                if pos != len(data):
                    warnings.warn(f"{len(data) - pos} bytes after end-of-track ignored", MidiWarning)
                return events
            else:
                event = OtherEvent(0xFF, meta_type, bytes(payload))
        elif status in (0xF0, 0xF7):
            length, pos = decode_vlq(data, pos + 1)
            payload = data[pos:pos + length]
            if len(payload) != length:
                raise MalformedSmf("truncated sysex event")
            pos += length
            running = None
            event = OtherEvent(status, None, bytes(payload))
        else:
            if status & 0x80:
                running = status
                pos += 1
            elif running is None:
                raise MalformedSmf(f"data byte {status:#04x} with no running status")
            kind, channel = running & 0xF0, running & 0x0F
            width = 1 if kind in (0xC0, 0xD0) else 2
            params = data[pos:pos + width]
            if len(params) != width:
                raise MalformedSmf("truncated channel message")
            pos += width
            if kind == 0x90 and params[1] > 0:
                event = NoteOn(params[0], params[1], channel)
            elif kind in (0x80, 0x90):
                event = NoteOff(params[0], params[1] if kind == 0x80 else 0, channel)
            elif kind == 0xC0:
                event = ProgramChange(params[0], channel)
            else:
                event = OtherEvent(running, None, bytes(params))
        events.append((delta, event))
    warnings.warn("track has no end-of-track event", MidiWarning)
    return events


def decode_smf(data: bytes) -> MidiFile:
    if len(data) < 14 or data[:4] != b"MThd":
        raise MalformedSmf("missing MThd header")
    (length,) = struct.unpack_from(">I", data, 4)
    if length < 6 or 8 + length > len(data):
        raise MalformedSmf(f"bad header length {length}")
    fmt, ntrks, division = struct.unpack_from(">HHH", data, 8)
    if fmt != 0:
        raise UnsupportedFeature(f"format {fmt} files are not supported")
    if ntrks != 1:
        raise MalformedSmf(f"format-0 file declares {ntrks} tracks")
    if division & 0x8000:
        raise UnsupportedFeature("SMPTE time division is not supported")
    if division == 0:
        raise MalformedSmf("division of zero ticks per quarter")

    pos = 8 + length
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from(">I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) != size:
            raise MalformedSmf(f"chunk {chunk_id!r} length {size} exceeds file")
        if chunk_id == b"MTrk":
            return MidiFile(fmt, division, _decode_track(body))
        pos += 8 + size
    raise MalformedSmf("no MTrk chunk")


# --------------------------------------------------------------------------
# Score <-> MIDI
# --------------------------------------------------------------------------


def score_to_midi(score: QuantizedScore, ppq: int = DEFAULT_PPQ, program: int = DEFAULT_PROGRAM,
                  velocity: int = DEFAULT_VELOCITY) -> MidiFile:
    """Lay a quantized score out as a single-channel format-0 track.

    The track ends at the close of the last bar.
    """
    us = round(60_000_000 / score.tempo_bpm)
    timed = []
    for n in score.notes:
        start = round(n.onset_beats * ppq)
        stop = round(n.end_beats * ppq)
        # note-offs sort ahead of note-ons on the same tick
        timed.append((start, 1, NoteOn(n.midi, velocity)))
        timed.append((stop, 0, NoteOff(n.midi)))
    timed.sort(key=lambda item: (item[0], item[1]))

    bar_end = score.bar_count * score.time_signature.numerator * ppq
    events = [(0, SetTempo(us)),
              (0, TimeSignatureMeta(score.time_signature.numerator)),
              (0, ProgramChange(program))]
    now = 0
    for tick, _, event in timed:
        events.append((tick - now, event))
        now = tick
    events.append((max(0, bar_end - now), EndOfTrack()))
    return MidiFile(0, ppq, events)


def midi_to_score(mf: MidiFile) -> QuantizedScore:
    tempo_us = None
    numerator = None
    channels = set()
    pending: dict[int, list[int]] = {}
    notes = []
    now = 0
    for delta, event in mf.events:
        now += delta
        if isinstance(event, SetTempo):
            if tempo_us is None:
                tempo_us = event.us_per_quarter
            elif event.us_per_quarter != tempo_us:
                raise UnsupportedFeature("tempo changes are not supported")
        elif isinstance(event, TimeSignatureMeta):
            if event.denominator_power != 2:
                raise UnsupportedFeature(f"time-signature denominator 2^{event.denominator_power}")
            if numerator is None:
                numerator = event.numerator
            elif event.numerator != numerator:
                raise UnsupportedFeature("time-signature changes are not supported")
        elif isinstance(event, (NoteOn, NoteOff, ProgramChange)):
            channels.add(event.channel)
            if len(channels) > 1:
                raise UnsupportedFeature("events on more than one channel")
            if isinstance(event, NoteOn):
                pending.setdefault(event.note, []).append(now)
            elif isinstance(event, NoteOff):
                starts = pending.get(event.note)
                if not starts:
                    warnings.warn(f"note-off for {event.note} without note-on", MidiWarning)
                    continue
                start = starts.pop(0)
                notes.append(QuantizedNote(event.note, start / mf.ppq, (now - start) / mf.ppq))
    for note, starts in pending.items():
        if starts:
            warnings.warn(f"{len(starts)} note-on(s) for {note} never released", MidiWarning)
    if tempo_us is None:
        tempo_us = DEFAULT_TEMPO_US
    try:
        ts = TimeSignature(4 if numerator is None else numerator)
    except ValueError as exc:
        raise UnsupportedFeature(str(exc)) from exc
    notes.sort(key=lambda n: (n.onset_beats, n.midi))
    return QuantizedScore(60_000_000 / tempo_us, ts, tuple(notes))


def write_midi(score: QuantizedScore, path, ppq: int = DEFAULT_PPQ,
               program: int = DEFAULT_PROGRAM, velocity: int = DEFAULT_VELOCITY) -> None:
    data = encode_smf(score_to_midi(score, ppq, program, velocity))
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_midi(path) -> QuantizedScore:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return midi_to_score(decode_smf(data))
