"""Exception types shared across the package.

Invalid arguments raise the builtin ``ValueError``; the classes here cover the
failure modes that need to be told apart at the CLI boundary (exit code 2 for
configuration problems, 3 for runtime/numerical ones).
"""


class ConfigurationError(Exception):
    """A config file or CLI argument is invalid. Message names the field."""


class StreamParseError(Exception):
    """A replay CSV row could not be parsed. Message names the line number."""


class NumericalDegeneracyError(ArithmeticError):
    """A quantity that must be nonnegative came out significantly negative."""


class ResourceLimitError(RuntimeError):
    """An operation exceeded a size guard (kernel query cap, brute-force guards)."""
