"""Note-level precision / recall / F-measure against a reference score."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .audio_io import ScoreSpec
from .rhythm import QuantizedScore

DEFAULT_ONSET_TOL_BEATS = 0.25
# how far past the onset tolerance a same-pitch note still counts as a timing error
TIMING_SLACK_BEATS = 1.0


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    matched: int
    reference_notes: int
    estimated_notes: int
    octave_errors: int = 0
    pitch_errors: int = 0
    timing_errors: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [("precision", f"{self.precision:.4f}"), ("recall", f"{self.recall:.4f}"),
                ("f_measure", f"{self.f_measure:.4f}"),
                ("matched", f"{self.matched} / ref {self.reference_notes}, est {self.estimated_notes}"),
                ("octave_errors", str(self.octave_errors)), ("pitch_errors", str(self.pitch_errors)),
                ("timing_errors", str(self.timing_errors))]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def f_measure(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def _greedy(ref, hyp, used, accept, tol):
    """Match each reference note, in onset order, to the closest free
    hypothesis note within ``tol`` that ``accept`` allows."""
    pairs = []
    for i, (r_on, r_pitch) in enumerate(ref):
        best = None
        for j, (h_on, h_pitch) in enumerate(hyp):
            if j in used or abs(h_on - r_on) > tol or not accept(r_pitch, h_pitch):
                continue
            key = (h_pitch != r_pitch, abs(h_on - r_on), j)
            if best is None or key < best[0]:
                best = (key, j)
        if best is not None:
            used.add(best[1])
            pairs.append((i, best[1]))
    return pairs


def match_notes(ref: ScoreSpec, hyp: QuantizedScore,
                onset_tol_beats: float = DEFAULT_ONSET_TOL_BEATS,
                octave_invariant: bool = False) -> EvalReport:
    """Greedy one-to-one note matching on onset (in beats) and pitch.

    With ``octave_invariant`` pitches only need to agree modulo 12.  The
    unmatched reference notes are then classified: an octave error has a
    free estimate within tolerance with the same pitch class, a pitch error
    has one with another pitch, and a timing error has a free same-pitch
    estimate just outside tolerance.  Octave-equal matches made in
    octave-invariant mode also count as octave errors.
    """
    if not onset_tol_beats > 0:
        raise ValueError("onset tolerance must be positive")
    ref_notes = sorted(((n.onset, n.midi) for n in ref.notes))
    hyp_notes = sorted(((n.onset_beats, n.midi) for n in hyp.notes))
    if not ref_notes and not hyp_notes:
        return EvalReport(1.0, 1.0, 1.0, 0, 0, 0)

    used: set[int] = set()
    if octave_invariant:
        accept = lambda r, h: (r - h) % 12 == 0  # noqa: E731
    else:
        accept = lambda r, h: r == h  # noqa: E731
    pairs = _greedy(ref_notes, hyp_notes, used, accept, onset_tol_beats)
    matched = len(pairs)
    octave_errors = sum(1 for i, j in pairs if ref_notes[i][1] != hyp_notes[j][1])

    matched_ref = {i for i, _ in pairs}
    leftover = [r for k, r in enumerate(ref_notes) if k not in matched_ref]
    octave = _greedy(leftover, hyp_notes, used, lambda r, h: (r - h) % 12 == 0, onset_tol_beats)
    octave_errors += len(octave)
    done = {i for i, _ in octave}
    leftover2 = [r for i, r in enumerate(leftover) if i not in done]
    pitch = _greedy(leftover2, hyp_notes, used, lambda r, h: True, onset_tol_beats)
    done2 = {i for i, _ in pitch}
    leftover3 = [r for i, r in enumerate(leftover2) if i not in done2]
    timing = _greedy(leftover3, hyp_notes, used, lambda r, h: r == h,
                     onset_tol_beats + TIMING_SLACK_BEATS)

    precision = matched / len(hyp_notes) if hyp_notes else 0.0
    recall = matched / len(ref_notes) if ref_notes else 0.0
    return EvalReport(precision, recall, f_measure(precision, recall), matched,
                      len(ref_notes), len(hyp_notes), octave_errors, len(pitch), len(timing))
