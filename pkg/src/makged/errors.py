"""Exception hierarchy. Every error carries a short ``category`` used by the CLI."""

from __future__ import annotations


class MakgedError(Exception):
    category = "Error"


class MalformedLine(MakgedError):
    category = "MalformedLine"

    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        msg = f"line {line_no}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EmptyInput(MakgedError):
    category = "EmptyInput"


class InvalidId(MakgedError):
    category = "InvalidId"


class DegenerateGraph(MakgedError):
    category = "DegenerateGraph"


class ExhaustedCandidates(MakgedError):
    category = "ExhaustedCandidates"

    def __init__(self, triple):
        self.triple = triple
        super().__init__(f"no valid corruption for triple {triple}")


class TooFewExamples(MakgedError):
    category = "TooFewExamples"


class UnknownEntity(MakgedError):
    category = "UnknownEntity"


class EmptyInstruction(MakgedError):
    category = "EmptyInstruction"


class ZeroProbabilityToken(MakgedError):
    category = "ZeroProbabilityToken"

    def __init__(self, position: int, token: int):
        self.position = position
        self.token = token
        super().__init__(f"token {token} at position {position} has probability 0")


class RoleMismatch(MakgedError):
    category = "RoleMismatch"


class EmptyTranscript(MakgedError):
    category = "EmptyTranscript"


class IncompleteTranscript(MakgedError):
    category = "IncompleteTranscript"


class TransportError(MakgedError):
    category = "Transport"


class SummarizerFailure(MakgedError):
    category = "SummarizerFailure"


class MisalignedInputs(MakgedError):
    category = "MisalignedInputs"


class EmptyMatrix(MakgedError):
    category = "EmptyMatrix"


class ConfigError(MakgedError):
    category = "ConfigError"

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"{field}: {detail}")
