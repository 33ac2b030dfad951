"""Run a decomposed program on simulated MPI ranks inside one process.

Ranks are generators advanced by a seeded random scheduler, so any
interleaving of communication is reproducible from the seed. Global
initial data is scattered to the ranks (each gets its core plus whatever
halo lies inside the global field), and afterwards every rank's core is
written back into a copy of the global initial state.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..dmp.decompose import plan_for
from ..dmp.dialect import GridAttr
from ..ir.core import ModuleIR
from ..ir.passes import run_pipeline
from ..mpi.abi import AbiTable
from ..stencil.dialect import Bounds, FieldType
from .fields import FieldData, buffer_args
from .machine import Machine, run_to_completion
from .runtime import Comm, Memory, Transport
from .serial import InterpreterError, entry_function, run_serial_stencil, takes_timesteps

LEVELS = ("dmp", "mpi", "func")


class DeadlockError(InterpreterError):
    """Every live rank is blocked and no message can make progress."""

    def __init__(self, report: list[str]):
        super().__init__("deadlock: all live ranks are blocked\n" + "\n".join(f"  {line}" for line in report))
        self.report = report


def lowering_pipeline(level: str, grid: str | None = None, eliminate: bool = True, abi: str | None = None) -> list:
    """Passes taking a global stencil module (or a decomposed one when
    ``grid`` is None) down to ``level``."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r} (expected one of {', '.join(LEVELS)})")
    passes: list = []
    if grid is not None:
        passes += ["propagate-bounds", ("decompose", {"grid": grid})]
        if eliminate:
            passes.append("eliminate-redundant-swaps")
    if level in ("mpi", "func"):
        passes.append("lower-dmp-to-mpi")
    if level == "func":
        opts = {"abi": abi} if abi else {}
        passes += [("lower-mpi-to-func", opts), "lower-stencil-to-loops"]
    return passes


def lower_to(m: ModuleIR, level: str, grid: str | None = None, eliminate: bool = True, abi: str | None = None) -> ModuleIR:
    already = any("dmp.grid" in f.attributes for f in m.functions())
    return run_pipeline(m, lowering_pipeline(level, None if already else grid or "1", eliminate, abi))


@dataclass
class SimulationResult:
    fields: list[FieldData]
    counts: list[Counter]
    grid: GridAttr
    steps: int = 0  # scheduler steps taken
    total_counts: Counter = field(default_factory=Counter)


def _local_block(plan, g: Bounds, coord) -> tuple[Bounds, Bounds]:
    """(local allocation bounds, the same box in global coordinates)."""
    lb = plan.field(g)
    off = plan.offset(coord)
    return lb, Bounds(tuple(l + o for l, o in zip(lb.lb, off)), tuple(u + o for u, o in zip(lb.ub, off)))


def simulate_distributed(
    m: ModuleIR,
    init: list[FieldData],
    timesteps: int,
    seed: int = 0,
    abi: AbiTable | None = None,
    max_steps: int | None = None,
) -> SimulationResult:
    """Execute a decomposed module (at any lowering level) on ``grid.size`` ranks.

    ``init`` holds the global buffers of the reference function, in argument order.
    """
    abi = abi or AbiTable.load()
    func = entry_function(m)
    grid = func.attributes.get("dmp.grid")
    if not isinstance(grid, GridAttr):
        raise InterpreterError(f"@{func.attributes['sym_name'].value} is not decomposed (no dmp.grid attribute)")
    ref = entry_function(m, reference=True)
    plan = plan_for(m, func)
    slots = buffer_args(ref)
    if len(slots) != len(init):
        raise InterpreterError(f"reference function takes {len(slots)} buffers, {len(init)} given")
    gtypes = [ref.body.args[k].type for k in slots]
    for t, f in zip(gtypes, init):
        if not isinstance(t, FieldType) or t.bounds != f.bounds:
            raise InterpreterError(f"initial data for {f.name} has bounds {f.bounds}, expected {t}")

    transport = Transport(grid.size)
    rng = random.Random(seed)
    machines, gens, locals_ = [], [], []
    np_err = np.seterr(all="ignore")
    for rank in range(grid.size):
        coord = grid.coord_of(rank)
        memory = Memory()
        comm = Comm(rank, transport, abi, memory)
        mach = Machine(m, comm)
        args: list = [None] * len(func.body.args)
        bufs = []
        for k, t, f in zip(buffer_args(func), gtypes, init):
            lb, gb = _local_block(plan, t.bounds, coord)
            data = np.ascontiguousarray(f.region(gb)).copy()
            if tuple(data.shape) != tuple(getattr(func.body.args[k].type, "shape", None) or lb.shape):
                raise InterpreterError(f"local buffer shape {data.shape} does not match argument {k} of the rank program")
            args[k] = data
            bufs.append(data)
        locals_.append(bufs)
        machines.append(mach)
        gens.append(_rank_main(mach, func, args, timesteps))

    try:
        steps = _schedule(gens, machines, transport, rng, grid, max_steps)
    finally:
        np.seterr(**np_err)
    out = [f.copy() for f in init]
    core = plan.local_core
    for rank in range(grid.size):
        coord = grid.coord_of(rank)
        off = plan.offset(coord)
        for t, o, data in zip(gtypes, out, locals_[rank]):
            lb, _ = _local_block(plan, t.bounds, coord)
            gcore = Bounds(tuple(l + d for l, d in zip(core.lb, off)), tuple(u + d for u, d in zip(core.ub, off)))
            o.region(gcore)[...] = data[core.slices(lb.lb)]
    counts = [mc.counts for mc in machines]
    total = Counter()
    for c in counts:
        total.update(c)
    return SimulationResult(out, counts, grid, steps, total)


def _schedule(gens, machines, transport, rng, grid, max_steps) -> int:
    """Advance rank generators in seeded random order until all finish."""
    live = set(range(grid.size))
    steps = 0
    blocked_on = {}
    while live:
        before = (transport.version, sum(mc.comm.completions for mc in machines), len(live))
        for r in rng.sample(sorted(live), len(live)):
            steps += 1
            try:
                blocked_on[r] = next(gens[r])
            except StopIteration:
                live.discard(r)
                blocked_on.pop(r, None)
        after = (transport.version, sum(mc.comm.completions for mc in machines), len(live))
        if live and before == after:
            # one more pass lets receives posted this round see messages sent this round
            stalled = True
            for r in sorted(live):
                machines[r].comm.progress()
            if sum(mc.comm.completions for mc in machines) != after[1]:
                stalled = False
            if stalled:
                report = [
                    f"rank {r} {grid.coord_of(r)}: blocked in {machines[r].where}: {blocked_on.get(r, 'blocked')}"
                    for r in sorted(live)
                ]
                report += [f"undelivered: {n} message(s) rank {s} -> rank {d} tag {t}" for s, d, t, n in transport.pending()]
                raise DeadlockError(report)
        if max_steps is not None and steps > max_steps:
            raise InterpreterError(f"simulation exceeded {max_steps} scheduler steps")

    return steps


def _rank_main(mach: Machine, func, args, timesteps: int):
    if takes_timesteps(func):
        args[-1] = int(timesteps)
        yield from mach.call(func, args)
    else:
        for _ in range(int(timesteps)):
            yield from mach.call(func, args)


@dataclass
class CheckReport:
    equal: bool
    max_abs_diff: float
    details: list[str]


def compare_fields(got: list[FieldData], want: list[FieldData], tol: float | None = None) -> CheckReport:
    """Bitwise comparison (``tol=None``) or max-abs-difference check."""
    worst, details, ok = 0.0, [], True
    for g, w in zip(got, want):
        if g.bounds != w.bounds:
            ok = False
            details.append(f"{g.name}: bounds {g.bounds} != {w.bounds}")
            continue
        with np.errstate(all="ignore"):
            diff = float(np.nanmax(np.abs(g.data.astype(np.float64) - w.data.astype(np.float64)), initial=0.0))
        worst = max(worst, diff)
        same = g.bitwise_equal(w) if tol is None else diff <= tol
        if not same:
            ok = False
            neq = np.argwhere(~((g.data == w.data) | (np.isnan(g.data) & np.isnan(w.data))))
            where = tuple(int(i) + l for i, l in zip(neq[0], g.bounds.lb)) if len(neq) else None
            details.append(f"{g.name}: max |diff| = {diff:.3e}, first mismatch at {where}")
    return CheckReport(ok, worst, details)


def check_against_serial(
    m: ModuleIR, init: list[FieldData], timesteps: int, seed: int = 0, abi: AbiTable | None = None, tol: float | None = None
) -> tuple[CheckReport, SimulationResult]:
    sim = simulate_distributed(m, init, timesteps, seed=seed, abi=abi)
    want = run_serial_stencil(m, init, timesteps, func=entry_function(m, reference=True))
    return compare_fields(sim.fields, want, tol), sim


def run_loops(m: ModuleIR, init: list[FieldData], timesteps: int = 1) -> list[FieldData]:
    """Interpret a single-rank program in loop/arith/memref form (or any mix
    with stencil ops); ``init`` supplies the entry function's buffers in order."""
    func = entry_function(m)
    slots = buffer_args(func)
    if len(slots) != len(init):
        raise InterpreterError(f"entry function takes {len(slots)} buffers, {len(init)} given")
    fields = [f.copy() for f in init]
    args: list = [None] * len(func.body.args)
    for k, f in zip(slots, fields):
        want = getattr(func.body.args[k].type, "shape", None)
        if want is not None and tuple(want) != f.data.shape:
            raise InterpreterError(f"buffer {f.name} has shape {f.data.shape}, argument {k} expects {tuple(want)}")
        args[k] = f.data
    mach = Machine(m, memory=Memory())
    with np.errstate(all="ignore"):
        run_to_completion(_rank_main(mach, func, args, timesteps))
    return fields


def run_ranks(m: ModuleIR, size: int, make_args, seed: int = 0, abi: AbiTable | None = None, func=None) -> list[Machine]:
    """Run a hand-written SPMD program (no decomposition metadata) on ``size``
    ranks; ``make_args(rank)`` returns the entry function's arguments."""
    abi = abi or AbiTable.load()
    func = func or entry_function(m)
    transport = Transport(size)
    machines, gens = [], []
    for rank in range(size):
        mach = Machine(m, Comm(rank, transport, abi, Memory()))
        machines.append(mach)
        gens.append(mach.call(func, list(make_args(rank))))
    with np.errstate(all="ignore"):
        _schedule(gens, machines, transport, random.Random(seed), GridAttr((size,)), None)
    return machines
