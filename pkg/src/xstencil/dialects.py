"""Importing this module registers every dialect with the IR core."""

from .std import dialects as std_dialects  # noqa: F401
from .stencil import dialect as stencil_dialect  # noqa: F401
from .dmp import dialect as dmp_dialect  # noqa: F401
from .mpi import dialect as mpi_dialect  # noqa: F401
