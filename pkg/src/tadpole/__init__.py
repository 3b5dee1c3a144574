"""Standing waves of the power NLS equation on the tadpole graph."""

from .errors import TadpoleError
from .graph import GraphFunction, TadpoleGrid, build_grid

__all__ = ["TadpoleError", "GraphFunction", "TadpoleGrid", "build_grid"]
__version__ = "0.1.0"
