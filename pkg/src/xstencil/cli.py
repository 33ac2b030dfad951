"""Command-line driver.

Every subcommand reads textual IR from a file argument or stdin (``-``) and
writes IR or reports to stdout, so invocations compose with pipes::

    xstencil gen-kernel heat --dims 2 --sdo 4 --shape 64x64 \\
      | xstencil pipeline "propagate-bounds,decompose grid=2x2,lower-dmp-to-mpi" \\
      | xstencil simulate --check

Exit status: 0 success, 1 invalid input or failed run (diagnostics on
stderr), 2 bad command line, 3 ``simulate --check`` found a difference.
"""

from __future__ import annotations

import argparse
import hashlib
import sys

import numpy as np

from . import dialects  # noqa: F401
from .execution.bench import BenchConfig, report_throughput, run_benchmark, to_csv
from .execution.fields import init_fields
from .execution.kernels import KINDS, KernelPreset, generate_kernel
from .execution.serial import InterpreterError, entry_function, run_serial_stencil
from .execution.simulator import LEVELS, check_against_serial, lower_to, simulate_distributed
from .ir import ModuleIR, ParseError, PassError, parse_module, print_module, run_pipeline, verify_module
from .mpi.abi import AbiError, AbiTable

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3


class CliError(Exception):
    pass


def _read(path: str) -> tuple[str, str]:
    if path == "-":
        return sys.stdin.read(), "<stdin>"
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read(), path
    except OSError as exc:
        raise CliError(f"{path}: cannot read: {exc.strerror}") from None


def _load(path: str, verify: bool = True) -> ModuleIR:
    text, name = _read(path)
    try:
        m = parse_module(text)
    except ParseError as exc:
        where = f"{name}:{exc.loc.line}:{exc.loc.col}" if exc.loc else name
        raise CliError(f"{where}: error: {exc.message}") from None
    if verify:
        diags = verify_module(m)
        if diags:
            lines = []
            for d in diags:
                where = f"{name}:{d.loc.line}:{d.loc.col}" if d.loc else name
                lines.append(f"{where}: error: {d.path}: {d.message}")
            raise CliError("\n".join(lines))
    return m


def _shape(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed shape {text!r} (expected e.g. 64x64)") from None


def _summary(fields) -> str:
    out = []
    for f in fields:
        digest = hashlib.sha256(f.data.tobytes()).hexdigest()[:16]
        with np.errstate(all="ignore"):
            out.append(
                f"{f.name} {f.bounds} {f.data.dtype} sha256:{digest} "
                f"min={np.nanmin(f.data):.6g} max={np.nanmax(f.data):.6g} mean={np.nanmean(f.data):.6g}"
            )
    return "\n".join(out)


# -- subcommands -----------------------------------------------------------------------
def cmd_parse(a) -> int:
    m = _load(a.file, verify=False)
    print(f"parsed {sum(1 for _ in m.walk())} operations in {len(m.functions())} function(s)")
    return EXIT_OK


def cmd_verify(a) -> int:
    _load(a.file)
    print("ok")
    return EXIT_OK


def cmd_print(a) -> int:
    sys.stdout.write(print_module(_load(a.file)))
    return EXIT_OK


def cmd_pipeline(a) -> int:
    m = _load(a.file)
    sys.stdout.write(print_module(run_pipeline(m, a.passes)))
    return EXIT_OK


def _abi(a) -> AbiTable:
    try:
        return AbiTable.load(a.abi)
    except (OSError, AbiError) as exc:
        raise CliError(f"error: cannot load ABI table: {exc}") from None


def cmd_run_serial(a) -> int:
    m = run_pipeline(_load(a.file), "propagate-bounds")
    func = entry_function(m, reference=True)
    out = run_serial_stencil(m, init_fields(func, a.seed), a.timesteps, func=func)
    print(_summary(out))
    return EXIT_OK


def cmd_simulate(a) -> int:
    abi = _abi(a)
    m = _load(a.file)
    if not any("dmp.grid" in f.attributes for f in m.functions()):
        m = lower_to(m, a.level, a.grid, abi=a.abi)
    init = init_fields(entry_function(m, reference=True), a.seed)
    if not a.check:
        sim = simulate_distributed(m, init, a.timesteps, seed=a.sched_seed, abi=abi)
        print(_summary(sim.fields))
        return EXIT_OK
    status = EXIT_OK
    for s in range(a.sched_seed, a.sched_seed + a.seeds):
        rep, sim = check_against_serial(m, init, a.timesteps, seed=s, abi=abi, tol=a.tol)
        mode = "bitwise" if a.tol is None else f"tol={a.tol:g}"
        verdict = "equal" if rep.equal else "DIFFERENT"
        print(f"schedule seed {s}: {sim.grid.size} ranks, {mode} {verdict} (max |diff| {rep.max_abs_diff:.3e})")
        for d in rep.details:
            print(f"  {d}")
        if not rep.equal:
            status = EXIT_MISMATCH
    return status


def cmd_bench(a) -> int:
    stats = []
    for sdo in a.sdo:
        for topo in a.grid:
            preset = KernelPreset(a.kernel, len(a.shape), sdo, a.shape, a.timesteps, a.element)
            cfg = BenchConfig(preset, topo, a.level)
            for _ in range(a.repeat):
                stats.append(run_benchmark(cfg, seed=a.seed))
    sys.stdout.write(to_csv(report_throughput(stats)))
    return EXIT_OK


def cmd_gen_kernel(a) -> int:
    shape = a.shape or (64,) * a.dims
    try:
        preset = KernelPreset(a.kind, a.dims, a.sdo, shape, a.timesteps, a.element)
    except ValueError as exc:
        raise CliError(f"error: {exc}") from None
    sys.stdout.write(print_module(generate_kernel(preset)))
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xstencil", description="Stencil / dmp / mpi IR toolchain and rank simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_file(sp):
        sp.add_argument("file", nargs="?", default="-", help="input IR file (default: stdin)")
        return sp

    with_file(sub.add_parser("parse", help="check syntax only")).set_defaults(fn=cmd_parse)
    with_file(sub.add_parser("verify", help="parse and verify")).set_defaults(fn=cmd_verify)
    with_file(sub.add_parser("print", help="parse, verify and print canonically")).set_defaults(fn=cmd_print)

    sp = sub.add_parser("pipeline", help="run a comma-separated pass pipeline")
    sp.add_argument("passes", help='e.g. "propagate-bounds,decompose grid=2x2,lower-dmp-to-mpi"')
    with_file(sp).set_defaults(fn=cmd_pipeline)

    sp = with_file(sub.add_parser("run-serial", help="interpret the global stencil program"))
    sp.add_argument("--timesteps", "-T", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0, help="initial-data seed")
    sp.set_defaults(fn=cmd_run_serial)

    sp = with_file(sub.add_parser("simulate", help="run a decomposed program on simulated ranks"))
    sp.add_argument("--timesteps", "-T", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0, help="initial-data seed")
    sp.add_argument("--sched-seed", type=int, default=0, help="first rank-interleaving seed")
    sp.add_argument("--seeds", type=int, default=1, help="number of interleaving seeds to check")
    sp.add_argument("--check", action="store_true", help="compare against the serial interpreter")
    sp.add_argument("--tol", type=float, default=None, help="max |diff| allowed instead of bitwise equality")
    sp.add_argument("--abi", default=None, help="ABI table file (default: $XSTENCIL_ABI or the bundled profile)")
    sp.add_argument("--grid", default="1", help="decompose first if the input is not decomposed yet")
    sp.add_argument("--level", choices=LEVELS, default="dmp", help="lowering level when decomposing here")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bench", help="throughput of generated kernels (CSV on stdout)")
    sp.add_argument("--kernel", choices=KINDS, default="heat")
    sp.add_argument("--shape", type=_shape, default=(64, 64))
    sp.add_argument("--sdo", type=int, nargs="+", default=[2, 4, 8])
    sp.add_argument("--grid", nargs="+", default=["1"])
    sp.add_argument("--level", choices=LEVELS, default="dmp")
    sp.add_argument("--timesteps", "-T", type=int, default=16)
    sp.add_argument("--element", choices=("f32", "f64"), default="f64")
    sp.add_argument("--repeat", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("gen-kernel", help="emit a benchmark kernel as stencil IR")
    sp.add_argument("kind", choices=KINDS + ("acoustic-wave",))
    sp.add_argument("--dims", type=int, default=2)
    sp.add_argument("--sdo", type=int, default=2)
    sp.add_argument("--shape", type=_shape, default=None)
    sp.add_argument("--timesteps", "-T", type=int, default=16)
    sp.add_argument("--element", choices=("f32", "f64"), default="f64")
    sp.set_defaults(fn=cmd_gen_kernel)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "kind", None) == "acoustic-wave":
        args.kind = "wave"
    try:
        return args.fn(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
    except PassError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (InterpreterError, ValueError, AbiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except BrokenPipeError:
        return EXIT_OK
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
