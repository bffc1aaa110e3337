"""Aligned bilingual corpus loading, validation, and serialization.

A corpus is two plain-text UTF-8 files (source / target, one sentence per
line) plus an optional ID file with one utterance ID per line. Without an
ID file, IDs are zero-padded line indices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DuplicateId, EmptyLine, EncodingError, LineCountMismatch


def normalize_text(raw: str) -> str:
    """Strip the ends and collapse internal whitespace runs to single spaces."""
    return " ".join(raw.split())


@dataclass(frozen=True)
class ParallelPair:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[ParallelPair, ...]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def sources(self) -> list[str]:
        return [p.source for p in self.pairs]

    def targets(self) -> list[str]:
        return [p.target for p in self.pairs]


def _read_lines(path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except UnicodeDecodeError as e:
        raise EncodingError(f"{path}: not valid UTF-8 ({e})") from e
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_corpus(source_path, target_path, id_path=None, split: str = "train") -> ParallelCorpus:
    """Load a parallel corpus from aligned line-delimited files.

    Raises LineCountMismatch when the files disagree on line counts and
    EmptyLine when a line is empty after whitespace normalization (silent
    drops would desynchronize score files keyed by line index).
    """
    src_lines = _read_lines(source_path)
    tgt_lines = _read_lines(target_path)
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatch(
            f"{source_path} has {len(src_lines)} lines but {target_path} has {len(tgt_lines)}"
        )
    if id_path is not None:
        ids = _read_lines(id_path)
        if len(ids) != len(src_lines):
            raise LineCountMismatch(
                f"{id_path} has {len(ids)} lines but {source_path} has {len(src_lines)}"
            )
    else:
        ids = [f"{i:04d}" for i in range(len(src_lines))]

    pairs = []
    seen = set()
    for i, (uid, src, tgt) in enumerate(zip(ids, src_lines, tgt_lines)):
        uid = uid.strip()
        if not uid or any(c.isspace() for c in uid):
            raise EmptyLine(id_path, i + 1)
        if uid in seen:
            raise DuplicateId(f"duplicate utterance ID {uid!r} at line {i + 1}")
        seen.add(uid)
        src = normalize_text(src)
        tgt = normalize_text(tgt)
        if not src:
            raise EmptyLine(source_path, i + 1)
        if not tgt:
            raise EmptyLine(target_path, i + 1)
        pairs.append(ParallelPair(id=uid, source=src, target=tgt))
    return ParallelCorpus(pairs=tuple(pairs), split=split)


def save_corpus(corpus: ParallelCorpus, source_path, target_path, id_path=None) -> None:
    """Write a corpus back to disk; the final line always ends with LF."""
    _write_lines(source_path, corpus.sources())
    _write_lines(target_path, corpus.targets())
    if id_path is not None:
        _write_lines(id_path, corpus.ids())


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
