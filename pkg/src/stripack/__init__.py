"""Strip packing toolkit: the 3-Partition hardness gadget, structural repacking, solvers."""
from .core import (
    Box,
    Instance,
    Item,
    Packing,
    Placement,
    Rect,
    ValidationReport,
    area_lower_bound,
    total_area,
    validate_packing,
)

__version__ = "0.1.0"
