"""Exception hierarchy shared across the toolkit.

Anything rooted at InputError means the caller handed us bad data or a bad
config and maps to CLI exit code 2; other ToolkitErrors are runtime failures
and map to exit code 1.
"""


class ToolkitError(Exception):
    exit_code = 1


class InputError(ToolkitError):
    """Invalid user input: bad values, malformed files, bad config."""

    exit_code = 2


class InvalidInputError(InputError):
    pass


class ConfigError(InputError):
    pass


class SchemaError(InputError):
    """A structured file (JSON/JSONL) does not match the expected shape."""


class OrderingError(InputError):
    """Events or intervals violate the required ordering."""


class EmptyInputError(InputError):
    pass


class ParseFailureError(InputError):
    """No parsable clause in a grounded string. Carries the raw text."""

    def __init__(self, message, text=""):
        super().__init__(message)
        self.text = text


class DegenerateExampleError(InputError):
    """A training example with nothing to supervise."""


class DivergenceError(ToolkitError):
    """Training produced a non-finite loss."""


class GenerationFormatError(ToolkitError):
    """A generator response is missing one of the expected labeled lines."""

    def __init__(self, message, field=""):
        super().__init__(message)
        self.field = field


class InsufficientDistractorsError(ToolkitError):
    """Fewer in-band distractor candidates than requested."""


class ClientError(ToolkitError):
    """A chat or embedding backend failed after retries."""
