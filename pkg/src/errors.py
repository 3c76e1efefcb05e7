"""
Exception hierarchy for the toolkit.

Each family carries the process exit code the CLI maps it to:
  - UsageError         -> 2
  - DataError          -> 3
  - NumericDivergence  -> 4

Concrete errors also derive from the closest builtin so callers can catch
them idiomatically (``except ValueError``).
"""


class TermiNerfError(Exception):
    exit_code: int = 3


class UsageError(TermiNerfError):
    exit_code = 2


class DataError(TermiNerfError):
    exit_code = 3


class NumericDivergence(TermiNerfError, ArithmeticError):
    exit_code = 4


# --------------------------------------------------------------------------- #
# ray-geometry
# --------------------------------------------------------------------------- #

class RayMissesScene(DataError, ValueError):
    """The ray does not pass through the scene's circumscribing sphere."""


class InvalidCount(UsageError, ValueError):
    pass


class InvalidGrid(DataError, ValueError):
    pass


class CameraManifestError(DataError, ValueError):
    pass


# --------------------------------------------------------------------------- #
# field
# --------------------------------------------------------------------------- #

class SceneParseError(DataError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownPreset(UsageError, ValueError):
    pass


# --------------------------------------------------------------------------- #
# nn
# --------------------------------------------------------------------------- #

class ShapeMismatch(DataError, ValueError):
    pass


class CheckpointFormatError(DataError, ValueError):
    pass


# --------------------------------------------------------------------------- #
# rendering
# --------------------------------------------------------------------------- #

class NegativeDensity(DataError, ValueError):
    pass


class DegenerateDistribution(DataError, ValueError):
    """All weights are zero; callers fall back to uniform sampling."""


class MissingRandomSource(UsageError, ValueError):
    """Stochastic sampling was requested without a random generator."""


# --------------------------------------------------------------------------- #
# supervision
# --------------------------------------------------------------------------- #

class EmptySource(DataError, ValueError):
    pass


class DepthOutOfRange(DataError, ValueError):
    pass


class DepthDatasetFormatError(DataError, ValueError):
    pass


# --------------------------------------------------------------------------- #
# cli
# --------------------------------------------------------------------------- #

class DimensionMismatch(DataError, ValueError):
    pass


class MissingReference(DataError, FileNotFoundError):
    pass


class IncompatibleLogs(UsageError, ValueError):
    pass


# --------------------------------------------------------------------------- #
# training
# --------------------------------------------------------------------------- #

class ConfigFileError(UsageError, ValueError):
    """Malformed line or unknown key in a key=value config file."""
