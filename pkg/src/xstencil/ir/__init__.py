"""Generic SSA+Regions IR: data model, text format, verifier, passes."""

from .attributes import (
    ArrayAttr,
    Attribute,
    FloatAttr,
    IntegerAttr,
    StringAttr,
    SymbolRefAttr,
    TypeAttr,
    UnitAttr,
    int_array,
    ints_of,
)
from .core import Builder, Location, ModuleIR, Operation, Region, Value
from .equality import first_difference, structurally_equal
from .lexer import ParseError
from .parser import parse_attribute, parse_module, parse_type
from .passes import PASSES, PassError, PassSpec, parse_pipeline, register_pass, run_pipeline
from .printer import print_module, print_op
from .types import (
    FloatType,
    FunctionType,
    IndexType,
    IntegerType,
    MemRefType,
    TypeDesc,
    f32,
    f64,
    i1,
    i32,
    i64,
    index,
)
from .verifier import Diagnostic, ModuleVerificationError, VerifyError, check_module, verify_module

__all__ = [name for name in dir() if not name.startswith("_")]
