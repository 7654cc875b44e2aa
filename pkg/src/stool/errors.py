"""Exception hierarchy shared across the package."""


class StoolError(Exception):
    """Base class for every error raised by stool."""


# codec
class DuplicateParamName(StoolError, ValueError):
    pass


class SchemaMismatch(StoolError, ValueError):
    pass


class MalformedStream(StoolError, ValueError):
    pass


class MissingFunctionName(MalformedStream):
    pass


# backends / scheduling
class EmptyPrompt(StoolError, ValueError):
    pass


class ForeignSession(StoolError, ValueError):
    pass


class BadOrder(StoolError, ValueError):
    pass


class DuplicateScriptKey(StoolError, ValueError):
    pass


class NoHeads(StoolError, ValueError):
    pass


class VocabMismatch(StoolError, ValueError):
    pass


# metrics
class EmptyHeads(StoolError, ValueError):
    pass


class ZeroBottleneck(StoolError, ValueError):
    pass


class MissingBaselineBatch(StoolError, ValueError):
    pass


class EmptySamples(StoolError, ValueError):
    pass


# decomposition / scoring
class InvalidCall(StoolError, ValueError):
    pass


class MissingGroupMember(StoolError, KeyError):
    pass


# harness
class DatasetError(StoolError, ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, line: int, msg: str = ""):
        self.line = line
        super().__init__(f"line {line}: {msg}" if msg else f"line {line}")


class MissingField(DatasetError):
    def __init__(self, name: str, where: str = ""):
        self.name = name
        super().__init__(f"missing field {name!r}" + (f" ({where})" if where else ""))


class ConfigError(StoolError, ValueError):
    pass
