"""WAV decoding and resampling."""

from __future__ import annotations

import wave

import numpy as np

from .errors import AudioDecodeError

_WIDTH_DTYPES = {1: np.uint8, 2: np.dtype("<i2"), 4: np.dtype("<i4")}


def load_wav(path: str) -> tuple[np.ndarray, int]:
    """Decode a mono PCM WAV file to float32 samples in [-1, 1].

    Returns (samples, sample_rate). Raises AudioDecodeError for anything
    that prevents producing a usable waveform, including non-mono audio.
    """
    try:
        with wave.open(path, "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError, OSError) as e:
        raise AudioDecodeError(f"{path}: {e}") from e
    if channels != 1:
        raise AudioDecodeError(f"{path}: expected mono audio, got {channels} channels")
    if width not in _WIDTH_DTYPES:
        raise AudioDecodeError(f"{path}: unsupported sample width {width}")
    raw = np.frombuffer(frames, dtype=_WIDTH_DTYPES[width])
    if width == 1:  # 8-bit WAV is unsigned
        samples = (raw.astype(np.float32) - 128.0) / 128.0
    else:
        samples = raw.astype(np.float32) / float(2 ** (8 * width - 1))
    return samples, rate


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; adequate for feature extraction."""
    if rate == target_rate or samples.size == 0:
        return samples
    duration = samples.size / rate
    n_out = max(1, int(round(duration * target_rate)))
    src_t = np.arange(samples.size) / rate
    out_t = np.arange(n_out) / target_rate
    return np.interp(out_t, src_t, samples).astype(np.float32)
