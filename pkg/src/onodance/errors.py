"""Exception hierarchy shared by all onodance modules."""


class OnodanceError(Exception):
    """Base class for all errors raised by this package."""


# --- phonology ---

class EmptyWord(OnodanceError):
    pass


class UnsupportedCharacter(OnodanceError):
    def __init__(self, char: str, position: int):
        super().__init__(f"unsupported character {char!r} at position {position}")
        self.char = char
        self.position = position


class UnparsableSequence(OnodanceError):
    def __init__(self, text: str, offset: int):
        super().__init__(f"no mora segmentation of {text!r} at offset {offset}")
        self.offset = offset


# --- symbolism ---

class VersionMismatch(OnodanceError):
    pass


# --- timeline / caption parsing ---

class MalformedTimestamp(OnodanceError):
    def __init__(self, line_no: int, text: str):
        super().__init__(f"malformed timestamp on line {line_no}: {text!r}")
        self.line_no = line_no


class DecodeError(OnodanceError):
    pass


class NegativeStart(OnodanceError):
    pass


# --- motion / model shapes ---

class DimensionMismatch(OnodanceError):
    pass


class SchemaError(OnodanceError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


class ShapeMismatch(OnodanceError):
    def __init__(self, expected, actual, what: str = "tensor"):
        super().__init__(f"{what}: expected shape {tuple(expected)}, got {tuple(actual)}")
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class HeadDivisibility(OnodanceError):
    pass


# --- checkpoints ---

class VersionUnsupported(OnodanceError):
    pass


class CorruptChecksum(OnodanceError):
    pass


# --- training ---

class TooShort(OnodanceError):
    pass


class EmptyDataset(OnodanceError):
    pass


class NonFiniteLoss(OnodanceError):
    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step


# --- evaluation ---

class KindMismatch(OnodanceError):
    pass


class TooFewSamples(OnodanceError):
    pass
