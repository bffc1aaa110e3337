"""Exception hierarchy.

Three base classes map onto CLI exit codes: UsageError -> 1,
DataError -> 2, TrainingError -> 3.
"""


class EmoNmtError(Exception):
    pass


class UsageError(EmoNmtError):
    pass


class DataError(EmoNmtError):
    pass


class TrainingError(EmoNmtError):
    pass


# corpus
class LineCountMismatch(DataError):
    pass


class EncodingError(DataError):
    pass


class EmptyLine(DataError):
    def __init__(self, path, line_no):
        super().__init__(f"{path}: empty line at line {line_no}")
        self.path = path
        self.line_no = line_no


# emotion / scores
class OutOfRange(DataError):
    pass


class MissingColumn(DataError):
    pass


class DuplicateId(DataError):
    pass


class AlreadyTagged(DataError):
    pass


class EmptyInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class Degenerate(DataError):
    pass


# tokenizer
class TargetTooSmall(DataError):
    pass


class UnknownId(DataError):
    pass


# model / decoding
class SequenceTooLong(DataError):
    pass


class SourceTooLong(DataError):
    pass


class NonFiniteGradient(TrainingError):
    pass


class ConfigMismatch(TrainingError):
    pass


class NotEnoughCheckpoints(TrainingError):
    pass


# metrics
class EmptyCorpus(DataError):
    pass


# harness
class MissingToken(DataError):
    pass


class MissingScore(DataError):
    def __init__(self, missing_ids):
        ids = sorted(missing_ids)
        shown = ", ".join(ids[:10])
        more = "" if len(ids) <= 10 else f" (+{len(ids) - 10} more)"
        super().__init__(f"score file does not cover {len(ids)} utterance(s): {shown}{more}")
        self.missing_ids = ids
