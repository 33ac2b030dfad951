"""xstencil: an SSA+Regions compiler stack for distributed finite-difference stencils."""

from .ir import ModuleIR, parse_module, print_module, run_pipeline, verify_module

__all__ = ["ModuleIR", "parse_module", "print_module", "run_pipeline", "verify_module"]
__version__ = "0.1.0"
