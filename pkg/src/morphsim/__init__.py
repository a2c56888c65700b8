"""morphsim: learned surrogate simulation and design tools for 2x2 morphing grids."""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    BeamSpec,
    GridDesign,
    GridGraph,
    JointSpec,
    Trajectory,
    augment,
    build_graph,
    contiguity_pairs,
    grid_dimension,
    regular_grid,
)
