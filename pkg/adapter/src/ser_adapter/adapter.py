"""Manifest handling and the score-audio pipeline.

The output CSV is the contract consumed downstream: UTF-8, LF endings,
header "id,arousal,dominance,valence", values in [0, 1] with "." as the
decimal point. The adapter never bins or thresholds — raw scores cross
the boundary.
"""

from __future__ import annotations

import logging
import os
import tempfile
import wave
from dataclasses import dataclass

import numpy as np

from .audio import load_wav, resample
from .errors import AudioDecodeError, ManifestError
from .models import DEFAULT_MODEL_REF, get_scorer

log = logging.getLogger(__name__)

CSV_HEADER = "id,arousal,dominance,valence"


@dataclass(frozen=True)
class ManifestRow:
    id: str
    path: str
    sample_rate: int | None  # None when the header could not be read


@dataclass(frozen=True)
class AudioManifest:
    rows: tuple[ManifestRow, ...]

    def __len__(self):
        return len(self.rows)


def _peek_rate(path: str) -> int | None:
    try:
        with wave.open(path, "rb") as w:
            return w.getframerate()
    except (wave.Error, EOFError, OSError):
        return None


def load_manifest(path: str) -> AudioManifest:
    """Parse a TSV manifest of ``id<TAB>path`` lines."""
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ManifestError(f"{path}:{line_no}: expected 'id<TAB>path', got {line!r}")
            uid, audio_path = parts
            if uid in seen:
                raise ManifestError(f"{path}:{line_no}: duplicate id {uid!r}")
            seen.add(uid)
            if not os.path.exists(audio_path):
                raise ManifestError(f"{path}:{line_no}: no such file {audio_path!r}")
            rows.append(ManifestRow(uid, audio_path, _peek_rate(audio_path)))
    return AudioManifest(rows=tuple(rows))


@dataclass(frozen=True)
class ScoreRun:
    rows: tuple[tuple[str, float, float, float], ...]  # manifest order
    skipped: tuple[tuple[str, str], ...]  # (id, reason)
    clamped: int  # raw values pushed back into [0, 1]


def score_audio(
    manifest: AudioManifest,
    model_ref: str = DEFAULT_MODEL_REF,
    batch_size: int = 8,
) -> ScoreRun:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    scorer = get_scorer(model_ref)

    waveforms: list[np.ndarray] = []
    ids: list[str] = []
    skipped: list[tuple[str, str]] = []
    for row in manifest.rows:
        try:
            samples, rate = load_wav(row.path)
        except AudioDecodeError as e:
            log.warning("skipping %s: %s", row.id, e)
            skipped.append((row.id, str(e)))
            continue
        waveforms.append(resample(samples, rate, scorer.sample_rate))
        ids.append(row.id)

    scores = np.empty((0, 3))
    if waveforms:
        chunks = [
            scorer.score_batch(waveforms[i : i + batch_size])
            for i in range(0, len(waveforms), batch_size)
        ]
        scores = np.concatenate(chunks, axis=0)

    clamped = int(np.count_nonzero((scores < 0.0) | (scores > 1.0)))
    if clamped:
        log.warning("clamped %d score(s) into [0, 1]", clamped)
    scores = np.clip(scores, 0.0, 1.0)
    rows = tuple(
        (uid, float(a), float(d), float(v))
        for uid, (a, d, v) in zip(ids, scores)
    )
    return ScoreRun(rows=rows, skipped=tuple(skipped), clamped=clamped)


def write_scores(run: ScoreRun, out_path: str) -> None:
    """Write the score CSV atomically (temp file + rename)."""
    out_dir = os.path.dirname(os.path.abspath(out_path))
    fd, tmp_path = tempfile.mkstemp(dir=out_dir, prefix=".scores-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(CSV_HEADER + "\n")
            for uid, a, d, v in run.rows:
                f.write(f"{uid},{a:.6f},{d:.6f},{v:.6f}\n")
        os.replace(tmp_path, out_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
