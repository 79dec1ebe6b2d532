"""Exception hierarchy. Every error carries a stable machine-readable ``code``."""


class EngineError(Exception):
    code = "ENGINE_ERROR"

    def __init__(self, message: str = "", code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class ModelFormatError(EngineError):
    """Malformed or schema-violating model/decomposition file."""

    code = "PARSE_ERROR"


class ModelValidationError(EngineError):
    code = "VALIDATION_ERROR"

    def __init__(self, report):
        self.report = tuple(report)
        summary = ", ".join(f"{i.code}({i.subject})" for i in self.report[:5])
        if len(self.report) > 5:
            summary += f", ... {len(self.report) - 5} more"
        super().__init__(summary)


class StorageError(EngineError):
    code = "IO_ERROR"


class InputError(EngineError):
    """Bad arguments: empty inputs, unknown names, invalid weights."""

    code = "INVALID_INPUT"


class ZeroDenominator(EngineError):
    """Every contributing element carries zero weight; skip the combination."""

    code = "ZERO_DENOMINATOR"


class EmptyTrace(EngineError):
    code = "EMPTY_TRACE"


class StrategyInapplicable(EngineError):
    code = "STRATEGY_INAPPLICABLE"


class SingularDesign(EngineError):
    code = "SINGULAR_DESIGN"


class SampleTooSmall(EngineError):
    code = "SAMPLE_TOO_SMALL"
