"""Exception hierarchy. CLI exit codes hang off the two base classes."""


class TagscopeError(Exception):
    exit_code = 3


class DataError(TagscopeError):
    """Malformed or unusable input data (CLI exit 3)."""

    exit_code = 3


class NumericFailure(TagscopeError):
    """Non-finite values during optimisation (CLI exit 4)."""

    exit_code = 4


# audio-io
class UnsupportedFormat(DataError):
    pass


class CorruptHeader(DataError):
    pass


class EmptyAudio(DataError):
    pass


# signal features
class TooShort(DataError):
    pass


# harmony
class ParseError(DataError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NoPitchedChords(DataError):
    pass


# midlevel
class DegenerateDesign(DataError):
    pass


# tabular
class EmptyGenreDir(DataError):
    pass


class DuplicateTrackId(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ClassTooSmall(DataError):
    pass


# gbdt / explain
class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class MissingCover(DataError):
    pass
