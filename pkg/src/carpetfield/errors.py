"""Error taxonomy shared by the library and the command line driver.

The command line maps these onto exit statuses: InputError and ConfigError
mean the request itself was bad (exit 2), ResourceCapError means the request
was legal but too large for the configured caps (exit 3), StructuralError and
NumericError mean a computation could not meet its contract (exit 4).
"""


class CarpetError(Exception):
    pass


class InputError(CarpetError):
    """Malformed user input: bad cell pattern, out-of-range request."""


class ConfigError(InputError):
    """Config document rejected; carries the full list of problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ResourceCapError(CarpetError):
    """The requested computation exceeds a configured size cap."""


class StructuralError(CarpetError):
    """A structural precondition failed, e.g. a keep set with no killing
    anywhere in one of its components (the operator would be singular)."""


class NumericError(CarpetError):
    """A solve or estimate failed to meet its accuracy contract."""
