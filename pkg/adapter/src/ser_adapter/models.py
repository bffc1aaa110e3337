"""Scoring backends.

A scorer maps a batch of waveforms (float32, mono, at ``sample_rate``) to an
(n, 3) array of arousal/dominance/valence values. ``builtin:energy`` is a
dependency-free signal-statistics scorer used for offline runs and tests;
any other model reference is treated as a Hugging Face model id for a
wav2vec2 dimensional emotion model with a 3-way regression head.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelLoadError

DEFAULT_MODEL_REF = "builtin:energy"


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


class EnergyScorer:
    """Deterministic scorer from frame-level signal statistics.

    Loud, busy signals score high on arousal/dominance; spectrally dark
    signals score low on valence. The mapping is a fixed squashing of
    three classic features (RMS energy, zero-crossing rate, normalized
    spectral centroid) and carries no learned weights.
    """

    sample_rate = 16000

    def score_batch(self, batch: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(batch), 3), dtype=np.float64)
        for i, samples in enumerate(batch):
            rms, zcr, centroid = self._features(samples)
            out[i, 0] = _sigmoid(8.0 * rms + 4.0 * zcr - 1.0)
            out[i, 1] = _sigmoid(6.0 * rms + 2.0 * centroid - 1.5)
            out[i, 2] = _sigmoid(5.0 * centroid - 3.0 * zcr - 0.5)
        return out

    @staticmethod
    def _features(x: np.ndarray) -> tuple[float, float, float]:
        if x.size == 0:
            return 0.0, 0.0, 0.0
        rms = float(np.sqrt(np.mean(x.astype(np.float64) ** 2)))
        if x.size > 1:
            zcr = float(np.mean(np.signbit(x[:-1]) != np.signbit(x[1:])))
        else:
            zcr = 0.0
        spectrum = np.abs(np.fft.rfft(x))
        total = float(spectrum.sum())
        if total > 0.0:
            centroid = float((np.arange(spectrum.size) * spectrum).sum() / total) / spectrum.size
        else:
            centroid = 0.0
        return rms, zcr, centroid


class Wav2Vec2Scorer:
    """Pretrained wav2vec2 dimensional scorer loaded from a model id."""

    sample_rate = 16000

    def __init__(self, model_ref: str):
        try:
            import torch
            from transformers import AutoFeatureExtractor, AutoModelForAudioClassification
        except ImportError as e:
            raise ModelLoadError(
                f"model {model_ref!r} needs the wav2vec2 extra (torch + transformers): {e}"
            ) from e
        try:
            self._extractor = AutoFeatureExtractor.from_pretrained(model_ref)
            self._model = AutoModelForAudioClassification.from_pretrained(model_ref)
        except Exception as e:
            raise ModelLoadError(f"could not load model {model_ref!r}: {e}") from e
        self._torch = torch
        self._model.eval()
        self.sample_rate = getattr(self._extractor, "sampling_rate", 16000)

    def score_batch(self, batch: list[np.ndarray]) -> np.ndarray:
        inputs = self._extractor(
            [np.asarray(b, dtype=np.float32) for b in batch],
            sampling_rate=self.sample_rate,
            return_tensors="pt",
            padding=True,
        )
        with self._torch.no_grad():
            logits = self._model(**inputs).logits
        if logits.shape[-1] != 3:
            raise ModelLoadError(
                f"model produced {logits.shape[-1]} outputs, expected 3 (arousal/dominance/valence)"
            )
        return logits.double().numpy()


def get_scorer(model_ref: str):
    if model_ref == DEFAULT_MODEL_REF:
        return EnergyScorer()
    return Wav2Vec2Scorer(model_ref)
