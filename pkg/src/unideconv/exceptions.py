"""Package-wide exception types.

Usage errors (bad arguments, malformed files) raise ValueError; numeric
failures that occur on valid inputs raise NumericError so callers can
distinguish the two (the CLI maps them to exit codes 2 and 3).
"""


class NumericError(RuntimeError):
    """A numerical routine failed on otherwise valid inputs."""
