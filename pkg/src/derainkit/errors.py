"""Exception types shared across the package.

Both derive from ValueError so callers that only care about "bad input"
can catch one builtin type. The CLI maps them to distinct exit codes.
"""


class ConfigurationError(ValueError):
    """A parameter, config file, or manifest entry violates its contract."""


class DataFormatError(ValueError):
    """An input file (frame, mask, report) is malformed or inconsistent."""
