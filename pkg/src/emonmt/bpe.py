"""Byte-pair-encoding subword tokenizer with atomic special tokens.

Word-final symbols carry an end-of-word marker so decoding can restore
spaces. Special tokens (control tokens plus the six emotion-token
surfaces) are reserved at the lowest IDs, excluded from merge learning,
and matched before subword segmentation so they always encode to exactly
one ID.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from .corpus import normalize_text
from .emotion import EMOTION_TOKEN_SURFACES
from .errors import DataError, TargetTooSmall, UnknownId

PAD, UNK, SOS, EOS = "<pad>", "<unk>", "<sos>", "<eos>"
PAD_ID, UNK_ID, SOS_ID, EOS_ID = 0, 1, 2, 3
DEFAULT_SPECIALS = (PAD, UNK, SOS, EOS) + EMOTION_TOKEN_SURFACES

EOW = "</w>"  # end-of-word marker appended to word-final symbols

_VOCAB_HEADER = "bpe-vocab v1"


@dataclass(frozen=True)
class BpeVocab:
    merges: tuple[tuple[str, str], ...]
    token_to_id: dict[str, int]
    specials: tuple[str, ...]
    alphabet: tuple[str, ...]
    target_size: int
    id_to_token: dict[int, str] = field(default_factory=dict, compare=False)
    merge_rank: dict[tuple[str, str], int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.id_to_token.update({i: t for t, i in self.token_to_id.items()})
        self.merge_rank.update({pair: i for i, pair in enumerate(self.merges)})

    def __len__(self) -> int:
        return len(self.token_to_id)


def _word_symbols(word: str) -> list[str]:
    return list(word[:-1]) + [word[-1] + EOW]


def _pair_counts(word_freqs: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in word_freqs.items():
        for a, b in zip(symbols, symbols[1:]):
            counts[(a, b)] += freq
    return counts


def _apply_merge(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    merged = pair[0] + pair[1]
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def _build_vocab(specials, alphabet, merges, target_size) -> BpeVocab:
    token_to_id: dict[str, int] = {}
    for tok in specials:
        token_to_id[tok] = len(token_to_id)
    for sym in alphabet:
        if sym not in token_to_id:
            token_to_id[sym] = len(token_to_id)
    for left, right in merges:
        merged = left + right
        if merged not in token_to_id:
            token_to_id[merged] = len(token_to_id)
    return BpeVocab(
        merges=tuple(merges),
        token_to_id=token_to_id,
        specials=tuple(specials),
        alphabet=tuple(alphabet),
        target_size=target_size,
    )


def bpe_train(corpus, target_size: int, specials=DEFAULT_SPECIALS) -> BpeVocab:
    """Learn merge rules greedily until the vocab reaches target_size.

    The most frequent adjacent symbol pair is merged each round; ties go to
    the lexicographically smallest pair. Learning stops early when no pair
    occurs at least twice. Special-token surfaces never enter the
    statistics.
    """
    special_set = set(specials)
    word_counts: Counter = Counter()
    for text in corpus:
        for word in normalize_text(text).split():
            if word in special_set:
                continue
            word_counts[word] += 1
    if not word_counts:
        raise DataError("empty training corpus")

    word_freqs = {tuple(_word_symbols(w)): c for w, c in word_counts.items()}
    alphabet = sorted({sym for symbols in word_freqs for sym in symbols})

    base = len(specials) + len(alphabet)
    if target_size <= base:
        raise TargetTooSmall(
            f"target_size {target_size} <= {len(specials)} specials + {len(alphabet)} base symbols"
        )

    merges: list[tuple[str, str]] = []
    vocab_tokens = set(specials) | set(alphabet)
    while len(vocab_tokens) < target_size:
        counts = _pair_counts(word_freqs)
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in counts.items() if c == best_count)
        merges.append(best)
        vocab_tokens.add(best[0] + best[1])
        word_freqs = {_apply_merge(s, best): c for s, c in word_freqs.items()}

    return _build_vocab(specials, alphabet, merges, target_size)


def _segment_word(vocab: BpeVocab, word: str) -> list[str]:
    symbols = _word_symbols(word)
    while len(symbols) > 1:
        ranked = [
            (vocab.merge_rank[p], p)
            for p in set(zip(symbols, symbols[1:]))
            if p in vocab.merge_rank
        ]
        if not ranked:
            break
        _, pair = min(ranked)
        symbols = list(_apply_merge(tuple(symbols), pair))
    return symbols


def _special_splitter(vocab: BpeVocab) -> re.Pattern:
    alts = sorted(vocab.specials, key=len, reverse=True)
    return re.compile("(" + "|".join(re.escape(t) for t in alts) + ")")


def encode(vocab: BpeVocab, text: str) -> list[int]:
    """Encode text to vocab IDs. Out-of-alphabet symbols map to <unk>."""
    text = normalize_text(text)
    if not text:
        return []
    ids: list[int] = []
    for segment in _special_splitter(vocab).split(text):
        if not segment.strip():
            continue
        if segment in vocab.token_to_id and segment in vocab.specials:
            ids.append(vocab.token_to_id[segment])
            continue
        for word in segment.split():
            for sym in _segment_word(vocab, word):
                ids.append(vocab.token_to_id.get(sym, UNK_ID))
    return ids


def decode(vocab: BpeVocab, ids) -> str:
    """Inverse of encode: restore spaces at word boundaries, drop controls."""
    pieces = []
    stripped = {PAD_ID, SOS_ID, EOS_ID}
    for i in ids:
        if i not in vocab.id_to_token:
            raise UnknownId(f"id {i} not in vocab of size {len(vocab)}")
        if i in stripped:
            continue
        tok = vocab.id_to_token[i]
        if tok in vocab.specials:
            # standalone word: specials never carry the boundary marker
            pieces.append(tok + EOW)
        else:
            pieces.append(tok)
    return "".join(pieces).replace(EOW, " ").strip()


def save_vocab(vocab: BpeVocab, path) -> None:
    """Serialize to the plain-text vocab format (byte-exact roundtrip)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{_VOCAB_HEADER} {vocab.target_size}\n")
        f.write("#specials\n")
        for tok in vocab.specials:
            f.write(tok + "\n")
        f.write("#alphabet\n")
        for sym in vocab.alphabet:
            f.write(sym + "\n")
        f.write("#merges\n")
        for left, right in vocab.merges:
            f.write(f"{left} {right}\n")


def load_vocab(path) -> BpeVocab:
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith(_VOCAB_HEADER + " "):
        raise DataError(f"{path}: not a {_VOCAB_HEADER} file")
    target_size = int(lines[0].rsplit(" ", 1)[1])
    sections: dict[str, list[str]] = {"#specials": [], "#alphabet": [], "#merges": []}
    current = None
    for line in lines[1:]:
        if line in sections:
            current = line
            continue
        if current is None:
            raise DataError(f"{path}: content before first section header")
        sections[current].append(line)
    merges = []
    for line in sections["#merges"]:
        left, sep, right = line.partition(" ")
        if not sep:
            raise DataError(f"{path}: malformed merge line {line!r}")
        merges.append((left, right))
    return _build_vocab(
        tuple(sections["#specials"]), tuple(sections["#alphabet"]), merges, target_size
    )
