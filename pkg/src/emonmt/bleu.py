"""Corpus BLEU with brevity penalty and mteval-13a style tokenization.

Scoring convention: case-sensitive, single reference, n-gram orders 1-4,
exponential smoothing of zero precisions by default (toggleable to strict
zeros). A signature line records the configuration so scores stay
comparable across runs.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyCorpus, LengthMismatch

NGRAM_ORDER = 4

_13A_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


@dataclass(frozen=True)
class BleuBreakdown:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def bleu_tokenize(text: str) -> list[str]:
    """mteval-13a tokenization: split punctuation, keep digit-adjacent . and , attached."""
    norm = text.rstrip()
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = f" {norm} "
    for pattern, repl in _13A_RULES:
        norm = pattern.sub(repl, norm)
    return norm.split()


def _ngram_counts(tokens: list[str]) -> Counter:
    counts: Counter = Counter()
    for n in range(1, NGRAM_ORDER + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return counts


def corpus_bleu(hypotheses, references, smooth: str = "exp") -> BleuBreakdown:
    """Corpus-level BLEU over single-reference pairs.

    smooth="exp" replaces zero-match precisions with 1/(2^k * total)
    (halving again for each further zero order); smooth="none" leaves them
    at zero, which annihilates the geometric mean.
    """
    hypotheses = list(hypotheses)
    references = list(references)
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("no sentences to score")
    if smooth not in ("exp", "none"):
        raise ValueError(f"unknown smoothing method {smooth!r}")

    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_toks = bleu_tokenize(hyp)
        ref_toks = bleu_tokenize(ref)
        hyp_len += len(hyp_toks)
        ref_len += len(ref_toks)
        ref_counts = _ngram_counts(ref_toks)
        for ngram, count in _ngram_counts(hyp_toks).items():
            n = len(ngram)
            total[n - 1] += count
            correct[n - 1] += min(count, ref_counts.get(ngram, 0))

    precisions = [0.0] * NGRAM_ORDER
    smooth_factor = 1.0
    for n in range(NGRAM_ORDER):
        if total[n] == 0:
            break
        if correct[n] == 0:
            if smooth == "exp":
                smooth_factor *= 2.0
                precisions[n] = 1.0 / (smooth_factor * total[n])
        else:
            precisions[n] = correct[n] / total[n]

    if hyp_len == 0:
        brevity_penalty = 0.0
    elif hyp_len < ref_len:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    else:
        brevity_penalty = 1.0

    if brevity_penalty == 0.0 or any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = 100.0 * brevity_penalty * math.exp(sum(math.log(p) for p in precisions) / NGRAM_ORDER)

    return BleuBreakdown(
        score=score,
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def signature(smooth: str = "exp") -> str:
    from . import __version__

    return f"BLEU+case.mixed+numrefs.1+smooth.{smooth}+tok.13a+version.{__version__}"
