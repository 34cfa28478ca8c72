"""Exception hierarchy shared by the library and the CLI.

Exit codes follow the CLI contract: 2 config/input, 3 resource,
4 out-of-regime, 5 window boundary.
"""


class ToomlabError(Exception):
    exit_code = 1


class InputError(ToomlabError):
    """Bad rule, configuration, or argument."""

    exit_code = 2


class UnsupportedDimensionError(InputError):
    pass


class ResourceCapError(ToomlabError):
    """A size or step budget was exceeded."""

    exit_code = 3

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class RegimeError(ToomlabError):
    """Parameters outside the regime where a formula or protocol is valid."""

    exit_code = 4

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class WindowBoundaryError(ToomlabError):
    """A graph construction touched the spatial boundary of its window."""

    exit_code = 5


class InternalConsistencyError(ToomlabError):
    """States that should be impossible (e.g. rule/certificate mismatch)."""

    exit_code = 1
