"""ABI table: integer values of MPI constants plus external call signatures."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..ir.types import TypeDesc, i32
from ..std.dialects import ptr

ENV_VAR = "XSTENCIL_ABI"
DATATYPES = ("MPI_INT", "MPI_LONG_LONG", "MPI_FLOAT", "MPI_DOUBLE")
REQUIRED = (
    "MPI_SUCCESS",
    "MPI_COMM_WORLD",
    "MPI_PROC_NULL",
    "MPI_REQUEST_NULL",
    "MPI_STATUS_IGNORE",
    "MPI_STATUSES_IGNORE",
    "MPI_MAX",
    "MPI_MIN",
    "MPI_SUM",
    "MPI_PROD",
) + DATATYPES

# mpi op -> (external symbol, flat C signature); every call returns an i32 error code
EXTERNALS: dict[str, tuple[str, tuple[TypeDesc, ...]]] = {
    "mpi.init": ("MPI_Init", (ptr, ptr)),
    "mpi.finalize": ("MPI_Finalize", ()),
    "mpi.comm_rank": ("MPI_Comm_rank", (i32, ptr)),
    "mpi.comm_size": ("MPI_Comm_size", (i32, ptr)),
    "mpi.send": ("MPI_Send", (ptr, i32, i32, i32, i32, i32)),
    "mpi.recv": ("MPI_Recv", (ptr, i32, i32, i32, i32, i32, ptr)),
    "mpi.isend": ("MPI_Isend", (ptr, i32, i32, i32, i32, i32, ptr)),
    "mpi.irecv": ("MPI_Irecv", (ptr, i32, i32, i32, i32, i32, ptr)),
    "mpi.wait": ("MPI_Wait", (ptr, ptr)),
    "mpi.waitall": ("MPI_Waitall", (i32, ptr, ptr)),
    "mpi.test": ("MPI_Test", (ptr, ptr, ptr)),
    "mpi.reduce": ("MPI_Reduce", (ptr, ptr, i32, i32, i32, i32, i32)),
    "mpi.allreduce": ("MPI_Allreduce", (ptr, ptr, i32, i32, i32, i32)),
    "mpi.bcast": ("MPI_Bcast", (ptr, i32, i32, i32, i32)),
    "mpi.gather": ("MPI_Gather", (ptr, i32, i32, ptr, i32, i32, i32, i32)),
}


class AbiError(ValueError):
    pass


@dataclass
class AbiTable:
    name: str
    constants: dict[str, int]
    externals: dict[str, tuple[str, tuple[TypeDesc, ...]]] = field(default_factory=lambda: dict(EXTERNALS))

    def __post_init__(self):
        missing = [k for k in REQUIRED if k not in self.constants]
        if missing:
            raise AbiError(f"ABI table {self.name} lacks {', '.join(missing)}")
        for k, v in self.constants.items():
            if not -(2**31) <= v < 2**31:
                raise AbiError(f"ABI constant {k} = {v} does not fit in i32")
        values = [self.constants[d] for d in DATATYPES]
        if len(set(values)) != len(values):
            raise AbiError(f"ABI table {self.name} maps two datatypes to the same value")

    def __getitem__(self, key: str) -> int:
        try:
            return self.constants[key]
        except KeyError:
            raise AbiError(f"ABI table {self.name} has no value for {key}") from None

    def datatype_name(self, value: int) -> str:
        for d in DATATYPES:
            if self.constants[d] == value:
                return d
        raise AbiError(f"unknown datatype handle {value}")

    def reduction_name(self, value: int) -> str:
        for k in ("sum", "prod", "max", "min"):
            if self.constants[f"MPI_{k.upper()}"] == value:
                return k
        raise AbiError(f"unknown reduction handle {value}")

    @classmethod
    def parse(cls, text: str, name: str = "<abi>") -> AbiTable:
        consts: dict[str, int] = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key.isidentifier():
                raise AbiError(f"{name}:{n}: expected 'NAME = integer'")
            try:
                consts[key] = int(val, 0)
            except ValueError:
                raise AbiError(f"{name}:{n}: {val!r} is not an integer") from None
        return cls(name, consts)

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> AbiTable:
        """Load ``path``, else ``$XSTENCIL_ABI``, else the bundled simulated-mpich profile."""
        path = path or os.environ.get(ENV_VAR)
        if path:
            p = Path(path)
            return cls.parse(p.read_text(encoding="utf-8"), str(p))
        text = resources.files(__package__).joinpath("simulated_mpich.abi").read_text(encoding="utf-8")
        return cls.parse(text, "simulated-mpich")
