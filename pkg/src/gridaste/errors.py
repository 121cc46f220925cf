"""Exception types shared across the package."""


class ParseError(ValueError):
    """A dataset line does not match the expected grammar."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(ValueError):
    """Structurally well-formed input violates a semantic constraint."""


class ShapeError(ValueError):
    """Tensor operands do not conform for the requested operation."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or incomplete."""


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, sentence_id, value):
        super().__init__(f"non-finite loss ({value}) on sentence {sentence_id!r}")
        self.sentence_id = sentence_id
