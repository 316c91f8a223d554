"""Exception types shared across the package."""


class LipreadError(Exception):
    """Base class for all package errors."""


class MissingFile(LipreadError, FileNotFoundError):
    pass


class MalformedLine(LipreadError, ValueError):
    def __init__(self, line_no, text="", reason="malformed line"):
        self.line_no = line_no
        self.text = text
        super().__init__(f"line {line_no}: {reason}: {text!r}")


class UnknownPhoneme(LipreadError, KeyError):
    def __init__(self, label, line_no=None):
        self.label = label
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"unknown phoneme {label!r}{where}")

    def __str__(self):
        return self.args[0]


class UnknownWord(LipreadError, KeyError):
    def __init__(self, word, video_id=None):
        self.word = word
        self.video_id = video_id
        where = f" in video {video_id!r}" if video_id is not None else ""
        super().__init__(f"word {word!r} not in pronunciation dictionary{where}")

    def __str__(self):
        return self.args[0]


class OverlappingIntervals(LipreadError, ValueError):
    pass


class IntervalOutOfRange(LipreadError, ValueError):
    pass


class DimensionMismatch(LipreadError, ValueError):
    pass


class RankTooLarge(LipreadError, ValueError):
    pass


class NumericalFailure(LipreadError, ArithmeticError):
    pass


class EmptyClass(LipreadError, ValueError):
    pass


class SymbolOutOfRange(LipreadError, ValueError):
    pass


class EmptyData(LipreadError, ValueError):
    pass


class AlphabetMismatch(LipreadError, ValueError):
    pass


class TooFewSequences(LipreadError, ValueError):
    def __init__(self, word, count, needed):
        self.word = word
        self.count = count
        self.needed = needed
        super().__init__(f"word {word!r} has {count} sequences, needs at least {needed}")


class MissingFrames(LipreadError, ValueError):
    def __init__(self, video_id, got, expected):
        self.video_id = video_id
        super().__init__(f"video {video_id!r} has {got} frames, expected {expected}")


class MissingTranscript(LipreadError, KeyError):
    def __init__(self, video_id):
        self.video_id = video_id
        super().__init__(f"no transcript for video {video_id!r}")

    def __str__(self):
        return self.args[0]


class ManifestError(LipreadError, ValueError):
    pass
