"""Exception hierarchy shared by every engine module.

All domain failures derive from ClustCubeError so the CLI can map them to
exit code 1 and the HTTP service to a 4xx response without inspecting
individual types.
"""


class ClustCubeError(Exception):
    """Base class for every domain error raised by the engine."""


class ManifestError(ClustCubeError):
    """Schema manifest is malformed or references unknown tables/columns."""


class IngestError(ClustCubeError):
    """CSV data does not conform to the declared schema."""


class CodqSyntaxError(ClustCubeError):
    """Object-definition query text failed to parse.

    Carries the byte offset of the failure and the set of tokens that
    would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        super().__init__(f"{message} at offset {offset}" + (f" (expected one of: {', '.join(sorted(expected))})" if expected else ""))
        self.offset = offset
        self.expected = frozenset(expected)


class ResolutionError(ClustCubeError):
    """A query or manifest reference did not resolve against the schema."""


class LatticeError(ClustCubeError):
    """Invalid lattice configuration or cuboid reference."""


class FeatureError(ClustCubeError):
    """Feature encoding could not be applied to an object set."""


class ClusteringError(ClustCubeError):
    """Invalid clustering request (e.g. k out of range)."""


class RegressionError(ClustCubeError):
    """Invalid regression input (dimension mismatch, empty stats)."""


class CubeError(ClustCubeError):
    """Cube assembly or navigation failure."""


class PlanError(ClustCubeError):
    """Processing plan is inconsistent (cycle, unknown element)."""
