"""Dimensional emotion scores, polarity tokens, distribution stats, and CCC.

Scores live in [0, 1] per dimension. Binning maps a score to the negative
token below 0.5 and to the positive token at or above 0.5 (the tie at
exactly 0.5 goes to the positive side; pinned by test).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import ParallelPair
from .errors import (
    AlreadyTagged,
    Degenerate,
    DuplicateId,
    EmptyInput,
    LengthMismatch,
    MissingColumn,
    OutOfRange,
)

SCORE_COLUMNS = ("id", "arousal", "dominance", "valence")


class Dimension(Enum):
    AROUSAL = "arousal"
    DOMINANCE = "dominance"
    VALENCE = "valence"


class EmotionToken(Enum):
    ARO_NEG = "<AroNeg>"
    ARO_POS = "<AroPos>"
    DOM_NEG = "<DomNeg>"
    DOM_POS = "<DomPos>"
    VAL_NEG = "<ValNeg>"
    VAL_POS = "<ValPos>"

    @property
    def surface(self) -> str:
        return self.value

    @property
    def dimension(self) -> Dimension:
        return _TOKEN_DIMENSION[self]

    @property
    def positive(self) -> bool:
        return self.value.endswith("Pos>")


_TOKEN_DIMENSION = {
    EmotionToken.ARO_NEG: Dimension.AROUSAL,
    EmotionToken.ARO_POS: Dimension.AROUSAL,
    EmotionToken.DOM_NEG: Dimension.DOMINANCE,
    EmotionToken.DOM_POS: Dimension.DOMINANCE,
    EmotionToken.VAL_NEG: Dimension.VALENCE,
    EmotionToken.VAL_POS: Dimension.VALENCE,
}

_DIMENSION_TOKENS = {
    Dimension.AROUSAL: (EmotionToken.ARO_NEG, EmotionToken.ARO_POS),
    Dimension.DOMINANCE: (EmotionToken.DOM_NEG, EmotionToken.DOM_POS),
    Dimension.VALENCE: (EmotionToken.VAL_NEG, EmotionToken.VAL_POS),
}

EMOTION_TOKEN_SURFACES = tuple(t.value for t in EmotionToken)


@dataclass(frozen=True)
class EmotionScores:
    id: str
    arousal: float
    dominance: float
    valence: float

    def __post_init__(self):
        for dim in Dimension:
            v = getattr(self, dim.value)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                raise OutOfRange(f"{self.id}: {dim.value}={v!r} outside [0, 1]")

    def value(self, dim: Dimension) -> float:
        return getattr(self, dim.value)


@dataclass(frozen=True)
class DistributionStats:
    dimension: Dimension
    split: str
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def load_scores(path) -> dict[str, EmotionScores]:
    """Load a score CSV with header ``id,arousal,dominance,valence``."""
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, expected header {','.join(SCORE_COLUMNS)}")
        if tuple(h.strip() for h in header) != SCORE_COLUMNS:
            raise MissingColumn(
                f"{path}: header {','.join(header)!r} != {','.join(SCORE_COLUMNS)!r}"
            )
        out: dict[str, EmotionScores] = {}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MissingColumn(f"{path}:{row_no}: expected 4 fields, got {len(row)}")
            uid = row[0].strip()
            try:
                a, d, v = (float(x) for x in row[1:])
            except ValueError as e:
                raise OutOfRange(f"{path}:{row_no}: unparsable score value ({e})") from e
            if uid in out:
                raise DuplicateId(f"{path}:{row_no}: duplicate id {uid!r}")
            out[uid] = EmotionScores(id=uid, arousal=a, dominance=d, valence=v)
    return out


def save_scores(scores, path) -> None:
    """Write scores in the canonical CSV contract format (LF line endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(SCORE_COLUMNS) + "\n")
        for s in scores:
            f.write(f"{s.id},{s.arousal},{s.dominance},{s.valence}\n")


def bin_emotion(scores: EmotionScores, dim: Dimension) -> EmotionToken:
    """Map one dimension's score to its polarity token (>= 0.5 is positive)."""
    neg, pos = _DIMENSION_TOKENS[dim]
    return pos if scores.value(dim) >= 0.5 else neg


def inject_token(pair: ParallelPair, token: EmotionToken) -> ParallelPair:
    """Prepend an emotion token to the source side; the target is untouched."""
    for surface in EMOTION_TOKEN_SURFACES:
        if surface in pair.source:
            raise AlreadyTagged(f"{pair.id}: source already contains {surface}")
    return ParallelPair(id=pair.id, source=f"{token.surface} {pair.source}", target=pair.target)


def strip_leading_token(source: str) -> tuple[EmotionToken | None, str]:
    """Split off a leading emotion token, if any, returning (token, rest)."""
    for token in EmotionToken:
        prefix = token.surface + " "
        if source.startswith(prefix):
            return token, source[len(prefix):]
        if source == token.surface:
            return token, ""
    return None, source


def distribution_stats(scores, dim: Dimension, split: str = "all") -> DistributionStats:
    """Five-number summary plus mean; quartiles by linear interpolation."""
    values = np.asarray([s.value(dim) for s in scores], dtype=np.float64)
    if values.size == 0:
        raise EmptyInput(f"no scores for {dim.value}")
    q1, med, q3 = np.percentile(values, [25, 50, 75], method="linear")
    return DistributionStats(
        dimension=dim,
        split=split,
        count=int(values.size),
        min=float(values.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(values.max()),
        mean=float(values.mean()),
    )


def ccc(pred, gold) -> float:
    """Concordance correlation coefficient with population (1/N) moments.

    ccc = 2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2)
    """
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pred has shape {x.shape}, gold has shape {y.shape}")
    if x.size < 2:
        raise LengthMismatch(f"need at least 2 values, got {x.size}")
    mx, my = x.mean(), y.mean()
    vx = float(np.mean((x - mx) ** 2))
    vy = float(np.mean((y - my) ** 2))
    cov = float(np.mean((x - mx) * (y - my)))
    denom = vx + vy + (mx - my) ** 2
    if denom == 0.0:
        raise Degenerate("both inputs constant with equal means")
    return 2.0 * cov / denom
