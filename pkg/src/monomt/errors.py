"""Exception hierarchy shared by every transcription stage."""


class TranscriptionError(Exception):
    """Base class for domain errors raised by monomt."""


# audio_io
class MalformedRiff(TranscriptionError):
    pass


class UnsupportedEncoding(TranscriptionError):
    pass


class EmptyAudio(TranscriptionError):
    pass


class IoFailure(TranscriptionError):
    pass


class InvalidScore(TranscriptionError):
    pass


# preprocess
class AllSilent(TranscriptionError):
    pass


class AllZero(TranscriptionError):
    pass


# spectral / pitch
class NonPowerOfTwo(TranscriptionError):
    pass


class OutOfRange(TranscriptionError):
    pass


class InvalidInterval(TranscriptionError):
    pass


class NonPositiveFrequency(TranscriptionError):
    pass


class BufferTooShort(TranscriptionError):
    pass


# segmentation / rhythm
class EmptyTrack(TranscriptionError):
    pass


class NoOnsets(TranscriptionError):
    pass


class InsufficientOnsets(TranscriptionError):
    pass


class TooShort(TranscriptionError):
    pass


# midi
class MalformedSmf(TranscriptionError):
    pass


class UnsupportedFeature(TranscriptionError):
    pass


class PipelineError(TranscriptionError):
    """A stage of :func:`monomt.pipeline.transcribe` failed.

    ``stage`` names the failing step and ``cause`` holds the original error.
    """

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
