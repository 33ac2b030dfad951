"""Lowering-target dialects: func, arith, loop, memref and llvm pointer stand-ins."""
