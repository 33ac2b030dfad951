"""Benchmark kernel generator: heat diffusion and acoustic wave presets.

Each preset becomes a stencil-level function with an explicit time loop.
Time buffering is expressed by rotating the field buffers through the
loop's ``iter_args``: heat uses two slots (read one, write the other), the
second-order-in-time wave equation uses three (previous, current, next).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from ..ir.core import Builder, ModuleIR, Region
from ..ir.types import FloatType, f32, f64, index
from ..std.dialects import constant, make_for, make_func
from ..stencil.dialect import BoundsAttr, Bounds, FieldType, IndexAttr, TempType, make_apply

KINDS = ("heat", "wave", "copy")


def second_derivative_weights(radius: int) -> list[Fraction]:
    """Central-difference weights ``w_0..w_m`` of d²/dx² with accuracy order 2m.

    ``w_k = 2 (-1)^(k+1) (m!)^2 / (k^2 (m-k)! (m+k)!)`` for k ≥ 1 and
    ``w_0 = -2 Σ w_k`` (the stencil annihilates constants).
    """
    m = radius
    if m < 1:
        raise ValueError("radius must be at least 1")
    ws = [
        Fraction(2 * (-1) ** (k + 1) * factorial(m) ** 2, k * k * factorial(m - k) * factorial(m + k))
        for k in range(1, m + 1)
    ]
    return [-2 * sum(ws)] + ws


@dataclass(frozen=True)
class KernelPreset:
    kind: str = "heat"
    dims: int = 2
    sdo: int = 2
    shape: tuple[int, ...] = (64, 64)
    timesteps: int = 16
    element: str = "f64"
    coefficients: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r} (expected one of {', '.join(KINDS)})")
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")
        if self.sdo not in (2, 4, 8):
            raise ValueError("space discretization order must be 2, 4 or 8")
        if len(self.shape) != self.dims:
            raise ValueError(f"shape {self.shape} does not have {self.dims} dimension(s)")
        if any(n < 1 for n in self.shape):
            raise ValueError("shape entries must be positive")
        if self.element not in ("f32", "f64"):
            raise ValueError("element must be f32 or f64")
        if self.timesteps < 0:
            raise ValueError("timesteps must be non-negative")

    @property
    def radius(self) -> int:
        return 0 if self.kind == "copy" else self.sdo // 2

    @property
    def time_slots(self) -> int:
        return 3 if self.kind == "wave" else 2

    @property
    def points(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.dims}d_sdo{self.sdo}"

    def coefficient(self, key: str) -> float:
        defaults = {
            "alpha": 1.0,
            "h": 1.0,
            "dt": 0.2 / self.dims if self.kind == "heat" else 0.3 / self.dims**0.5,
            "c": 1.0,
        }
        return float(self.coefficients.get(key, defaults[key]))


def _laplacian(b: Builder, arg, ftype: FloatType, dims: int, radius: int):
    """Emit Σ_d (w0·u + Σ_k w_k (u[+k e_d] + u[-k e_d])); returns the value."""
    ws = second_derivative_weights(radius)

    def acc(off):
        return b.create("stencil.access", [arg], [ftype], {"offset": IndexAttr(tuple(off))}).result

    center = acc([0] * dims)
    total = None
    for d in range(dims):
        s = b.create("arith.mulf", [constant(b, float(ws[0]), ftype), center], [ftype]).result
        for k in range(1, radius + 1):
            plus = [0] * dims
            minus = [0] * dims
            plus[d], minus[d] = k, -k
            pair = b.create("arith.addf", [acc(plus), acc(minus)], [ftype]).result
            term = b.create("arith.mulf", [constant(b, float(ws[k]), ftype), pair], [ftype]).result
            s = b.create("arith.addf", [s, term], [ftype]).result
        total = s if total is None else b.create("arith.addf", [total, s], [ftype]).result
    return center, total


def generate_kernel(preset: KernelPreset) -> ModuleIR:
    """Stencil-level module for ``preset``; temp bounds are left as ``?``."""
    ftype = f32 if preset.element == "f32" else f64
    r = preset.radius
    core = Bounds((0,) * preset.dims, preset.shape)
    g = core.widen([(-r, r)] * preset.dims)
    field_t = FieldType(g, ftype)
    temp_t = TempType(None, preset.dims, ftype)
    slots = preset.time_slots

    func = make_func(preset.kind, [field_t] * slots + [index])
    fb = Builder(func.body)
    args = func.body.args
    c0 = constant(fb, 0, index)
    c1 = constant(fb, 1, index)
    loop = make_for(fb, c0, args[-1], c1, args[:slots])
    lb = Builder(loop.body)
    it = loop.body.args[1:]
    # heat/copy: (current, next); wave: (previous, current, next)
    cur, nxt = it[-2], it[-1]

    t_cur = lb.create("stencil.load", [cur], [temp_t]).result
    operands = [t_cur]
    if preset.kind == "wave":
        operands.append(lb.create("stencil.load", [it[0]], [temp_t]).result)
    apply = make_apply(lb, operands, [temp_t])
    ab = Builder(apply.body)
    u = apply.body.args[0]
    if preset.kind == "copy":
        out = ab.create("stencil.access", [u], [ftype], {"offset": IndexAttr((0,) * preset.dims)}).result
    elif preset.kind == "heat":
        center, lap = _laplacian(ab, u, ftype, preset.dims, r)
        h = preset.coefficient("h")
        coef = preset.coefficient("dt") * preset.coefficient("alpha") / (h * h)
        scaled = ab.create("arith.mulf", [constant(ab, coef, ftype), lap], [ftype]).result
        out = ab.create("arith.addf", [center, scaled], [ftype]).result
    else:
        center, lap = _laplacian(ab, u, ftype, preset.dims, r)
        prev = ab.create(
            "stencil.access", [apply.body.args[1]], [ftype], {"offset": IndexAttr((0,) * preset.dims)}
        ).result
        h = preset.coefficient("h")
        cdt = preset.coefficient("c") * preset.coefficient("dt")
        two_u = ab.create("arith.mulf", [constant(ab, 2.0, ftype), center], [ftype]).result
        diff = ab.create("arith.subf", [two_u, prev], [ftype]).result
        scaled = ab.create("arith.mulf", [constant(ab, cdt * cdt / (h * h), ftype), lap], [ftype]).result
        out = ab.create("arith.addf", [diff, scaled], [ftype]).result
    ab.create("stencil.return", [out])
    lb.create("stencil.store", [apply.result, nxt], [], {"bounds": BoundsAttr(core)})
    rotated = list(it[1:]) + [it[0]]
    lb.create("loop.yield", rotated)
    fb.create("func.return", [])
    return ModuleIR(Region([], [func]))


def footprint_points(preset: KernelPreset) -> int:
    """Distinct spatial offsets the generated stencil reads from the current field."""
    from ..stencil.analysis import footprint

    m = generate_kernel(preset)
    apply = next(op for op in m.walk() if op.name == "stencil.apply")
    return len(footprint(apply, 0))


__all__ = [
    "KINDS",
    "KernelPreset",
    "footprint_points",
    "generate_kernel",
    "second_derivative_weights",
]
