"""Monophonic music transcription: WAV recording in, quantized score and MIDI out."""

from .audio_io import AudioBuffer, ScoreNote, ScoreSpec, Timbre, read_wav, synth_melody, write_wav
from .errors import PipelineError, TranscriptionError
from .evaluation import EvalReport, match_notes
from .midi import read_midi, write_midi
from .pipeline import PipelineConfig, Transcription, transcribe
from .rhythm import QuantizedNote, QuantizedScore, TimeSignature

__all__ = [
    "AudioBuffer", "ScoreNote", "ScoreSpec", "Timbre", "read_wav", "synth_melody", "write_wav",
    "PipelineError", "TranscriptionError", "EvalReport", "match_notes", "read_midi", "write_midi",
    "PipelineConfig", "Transcription", "transcribe", "QuantizedNote", "QuantizedScore",
    "TimeSignature",
]
__version__ = "0.1.0"
