"""ClustCube: OLAP cubes whose cells hold clustered complex objects.

A ClustCube is built from star-schema data in four stages: complex objects
are extracted by join queries over the star, a cuboid lattice fixes the
consolidation degrees, objects are grouped into cells by their coordinates,
and each cell is analysed with k-means clustering and least-squares
regression over mergeable sufficient statistics (so regressions roll up to
coarser cells without touching raw rows again).
"""

__version__ = "0.1.0"

from .errors import ClustCubeError

__all__ = ["ClustCubeError", "__version__"]
