import struct
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_quantized_score
from monomt.errors import MalformedSmf, UnsupportedFeature
from monomt.midi import (VLQ_MAX, EndOfTrack, MidiFile, MidiWarning, NoteOff, NoteOn, SetTempo,
                         decode_smf, decode_vlq, encode_smf, encode_vlq, midi_to_score, read_midi,
                         score_to_midi, write_midi)
from monomt.rhythm import QuantizedNote, QuantizedScore, TimeSignature


def single_note_score(tempo=120.0):
    return QuantizedScore(tempo, TimeSignature(4), (QuantizedNote(60, 0.0, 1.0),))


# --- variable-length quantities ---------------------------------------------

@pytest.mark.parametrize("value, encoded", [
    (0, b"\x00"), (0x40, b"\x40"), (0x7F, b"\x7f"), (0x80, b"\x81\x00"), (0x2000, b"\xc0\x00"),
    (0x3FFF, b"\xff\x7f"), (0x4000, b"\x81\x80\x00"), (0x0FFFFFFF, b"\xff\xff\xff\x7f"),
])
def test_vlq_known_encodings(value, encoded):
    assert encode_vlq(value) == encoded
    assert decode_vlq(encoded) == (value, len(encoded))


@settings(max_examples=500)
@given(st.integers(0, VLQ_MAX))
def test_vlq_inverse(value):
    data = encode_vlq(value)
    assert 1 <= len(data) <= 4
    assert decode_vlq(b"\x00" + data, 1) == (value, len(data) + 1)


def test_vlq_range_and_malformed():
    with pytest.raises(ValueError):
        encode_vlq(VLQ_MAX + 1)
    with pytest.raises(ValueError):
        encode_vlq(-1)
    with pytest.raises(MalformedSmf):
        decode_vlq(b"\x81")
    with pytest.raises(MalformedSmf):
        decode_vlq(b"\x81\x81\x81\x81\x00")


# --- writing ------------------------------------------------------------------

def test_header_bytes(tmp_path):
    path = tmp_path / "a.mid"
    write_midi(single_note_score(), path)
    data = path.read_bytes()
    assert data[:14] == bytes.fromhex("4D546864 00000006 0000 0001 01E0")
    assert data[14:18] == b"MTrk"
    assert struct.unpack(">I", data[18:22])[0] == len(data) - 22


def test_tempo_payload_120_bpm():
    data = encode_smf(score_to_midi(single_note_score(120.0)))
    assert b"\xff\x51\x03\x07\xa1\x20" in data
    events = decode_smf(data).events
    assert events[0] == (0, SetTempo(500_000))


def test_single_note_deltas():
    events = decode_smf(encode_smf(score_to_midi(single_note_score()))).events
    notes = [(d, e) for d, e in events if isinstance(e, (NoteOn, NoteOff))]
    assert notes == [(0, NoteOn(60, 90)), (480, NoteOff(60))]
    # the track runs to the end of the bar
    assert events[-1] == (3 * 480, EndOfTrack())


def test_emitted_file_reads_back(tmp_path):
    path = tmp_path / "a.mid"
    score = single_note_score()
    write_midi(score, path)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MidiWarning)
        assert read_midi(path) == score


def test_round_trip_random_scores():
    rng = np.random.default_rng(11)
    for _ in range(100):
        score = random_quantized_score(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("error", MidiWarning)
            back = midi_to_score(decode_smf(encode_smf(score_to_midi(score))))
        assert back == score


def test_abutting_same_pitch_notes_stay_separate():
    score = QuantizedScore(120.0, TimeSignature(4), (QuantizedNote(64, 0.0, 1.0), QuantizedNote(64, 1.0, 1.0)))
    assert midi_to_score(decode_smf(encode_smf(score_to_midi(score)))) == score


# --- reading ------------------------------------------------------------------

def track_file(body: bytes, fmt=0, ntrks=1, division=480) -> bytes:
    return (b"MThd" + struct.pack(">IHHH", 6, fmt, ntrks, division)
            + b"MTrk" + struct.pack(">I", len(body)) + body)


def test_bad_magic():
    data = bytearray(encode_smf(score_to_midi(single_note_score())))
    data[:4] = b"MThx"
    with pytest.raises(MalformedSmf):
        decode_smf(bytes(data))


def test_format_1_rejected():
    with pytest.raises(UnsupportedFeature):
        decode_smf(track_file(b"\x00\xff\x2f\x00", fmt=1))


def test_smpte_division_rejected():
    with pytest.raises(UnsupportedFeature):
        decode_smf(track_file(b"\x00\xff\x2f\x00", division=0xE250))


def test_truncated_track():
    data = track_file(b"\x00\x90\x3c\x40\x83\x60\x80\x3c\x00\x00\xff\x2f\x00")
    with pytest.raises(MalformedSmf):
        decode_smf(data[:-8])


def test_multiple_channels_rejected():
    body = b"\x00\x90\x3c\x40\x00\x91\x40\x40\x83\x60\x80\x3c\x00\x00\x81\x40\x00\x00\xff\x2f\x00"
    with pytest.raises(UnsupportedFeature):
        midi_to_score(decode_smf(track_file(body)))


def test_running_status_and_zero_velocity_note_off():
    # note-on 60, then running-status note-on 60 velocity 0 (an off), then 62
    body = (b"\x00\x90\x3c\x40" b"\x83\x60\x3c\x00" b"\x00\x3e\x40" b"\x83\x60\x3e\x00"
            b"\x00\xff\x2f\x00")
    score = midi_to_score(decode_smf(track_file(body)))
    assert score.notes == (QuantizedNote(60, 0.0, 1.0), QuantizedNote(62, 1.0, 1.0))
    assert score.tempo_bpm == 120.0
    assert score.time_signature == TimeSignature(4)


def test_unknown_meta_skipped():
    body = b"\x00\xff\x03\x04name" b"\x00\x90\x3c\x40\x83\x60\x80\x3c\x00\x00\xff\x2f\x00"
    assert midi_to_score(decode_smf(track_file(body))).notes == (QuantizedNote(60, 0.0, 1.0),)


def test_missing_end_of_track_warns():
    with pytest.warns(MidiWarning):
        decode_smf(track_file(b"\x00\x90\x3c\x40\x83\x60\x80\x3c\x00"))


def test_unreleased_note_warns():
    with pytest.warns(MidiWarning):
        midi_to_score(decode_smf(track_file(b"\x00\x90\x3c\x40\x00\xff\x2f\x00")))


def test_only_format_0_written():
    with pytest.raises(UnsupportedFeature):
        encode_smf(MidiFile(format=1))
