"""Importing this module registers every pass with the pass manager."""

from . import dialects  # noqa: F401
from .stencil import analysis  # noqa: F401
from .dmp import decompose, elimination  # noqa: F401
from .mpi import dmp_to_mpi  # noqa: F401
from .mpi import mpi_to_func  # noqa: F401
from .stencil import lowering  # noqa: F401
