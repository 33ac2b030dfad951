"""Global stencil program -> rank-parametric local program plus dmp.swap ops.

Local types restart at 0: along each decomposed dimension a rank's core is
``[0, n_local)``, surrounded by the halo. Every rank runs the same module,
so decomposed extents must divide evenly over the grid. The original
function is kept (renamed ``<name>_global``) as the serial reference.
"""

from __future__ import annotations

from ..ir.attributes import ArrayAttr, StringAttr, SymbolRefAttr, TypeAttr, UnitAttr
from ..ir.core import ModuleIR, Operation, Region
from ..ir.passes import PassError, register_pass
from ..ir.types import FunctionType
from ..ir.verifier import Diagnostic
from ..std.dialects import func_name, func_type, is_declaration
from ..stencil.dialect import Bounds, BoundsAttr, FieldType, TempType, store_bounds
from .dialect import GridAttr
from .strategy import STRATEGIES, DecompositionError, DecompositionStrategy, SlicingStrategy


class _Plan:
    """Coordinate mapping shared by every rank of one decomposition."""

    def __init__(self, domain: Bounds, topo: GridAttr, halo: tuple[int, ...]):
        self.domain = domain
        self.topo = topo
        self.halo = halo
        self.local_shape = tuple(
            n // topo.dims[k] if k < topo.rank else n for k, n in enumerate(domain.shape)
        )

    @property
    def local_core(self) -> Bounds:
        return Bounds((0,) * self.domain.rank, self.local_shape)

    def temp(self, b: Bounds) -> Bounds:
        d, n = self.domain, self.local_shape
        return Bounds(
            tuple(l - dl for l, dl in zip(b.lb, d.lb)),
            tuple(u - du + nl for u, du, nl in zip(b.ub, d.ub, n)),
        )

    def field(self, g: Bounds) -> Bounds:
        lb, ub = [], []
        for k, (gl, gu, dl, du, n) in enumerate(zip(g.lb, g.ub, self.domain.lb, self.domain.ub, self.local_shape)):
            if k < self.topo.rank and self.topo.dims[k] > 1:
                h = self.halo[k]
                lb.append(max(gl - dl, -h))
                ub.append(min(gu - du, h) + n)
            else:
                lb.append(gl - dl)
                ub.append(gu - du + n)
        return Bounds(tuple(lb), tuple(ub))

    def offset(self, coord) -> tuple[int, ...]:
        """Global logical coordinate of local coordinate 0 on rank ``coord``."""
        return tuple(
            dl + (coord[k] * n if k < self.topo.rank else 0)
            for k, (dl, n) in enumerate(zip(self.domain.lb, self.local_shape))
        )


def _map_type(t, plan: _Plan):
    if isinstance(t, FieldType):
        return FieldType(plan.field(t.bounds), t.element)
    if isinstance(t, TempType) and t.bounds is not None:
        return TempType(plan.temp(t.bounds), t.rank, t.element)
    return t


def _retype_region(region: Region, plan: _Plan) -> None:
    for a in region.args:
        a.type = _map_type(a.type, plan)
    for op in region.ops:
        for r in op.results:
            r.type = _map_type(r.type, plan)
        if op.name == "stencil.store":
            op.attributes["bounds"] = BoundsAttr(plan.temp(store_bounds(op)))
        for sub in op.regions:
            _retype_region(sub, plan)


def _analyze(func: Operation, topo: GridAttr) -> tuple[Bounds, tuple[int, ...]]:
    stores = [op for op in func.walk() if op.name == "stencil.store"]
    loads = [op for op in func.walk() if op.name == "stencil.load"]
    if not stores:
        raise DecompositionError("nothing to decompose: the function has no stencil.store")
    for op in func.walk():
        if op.dialect == "stencil":
            for r in op.results:
                if isinstance(r.type, TempType) and r.type.bounds is None:
                    raise DecompositionError("temp bounds are unresolved; run propagate-bounds first")
    domain = store_bounds(stores[0])
    for s in stores[1:]:
        if store_bounds(s) != domain:
            raise DecompositionError(
                f"all stores must cover one domain to decompose it; found {store_bounds(s)} and {domain}"
            )
    if topo.rank > domain.rank:
        raise DecompositionError(f"grid {topo} has more dimensions than the {domain.rank}-d domain")
    halo = [0] * domain.rank
    for ld in loads:
        b = ld.result.type.bounds
        for k in range(domain.rank):
            halo[k] = max(halo[k], domain.lb[k] - b.lb[k], b.ub[k] - domain.ub[k])
    for k, d in enumerate(topo.dims):
        n = domain.shape[k]
        if n % d:
            raise DecompositionError(
                f"decomposition infeasible: {n} points along dimension {k} do not divide over {d} ranks"
            )
        if d > 1 and n // d < halo[k]:
            raise DecompositionError(
                f"decomposition infeasible: local extent {n // d} along dimension {k} is below the halo width {halo[k]}"
            )
    active = [k for k, d in enumerate(topo.dims) if d > 1]
    for op in func.walk():
        if op.name == "stencil.access":
            off = op.attributes["offset"].offset
            if sum(1 for k in active if off[k] != 0) > 1:
                raise DecompositionError(
                    f"access offset {list(off)} needs corner halo points; only face exchanges are supported"
                )
        if op.name == "stencil.apply" and len(active) > 1:
            for v in op.operands:
                if isinstance(v.owner, Operation) and v.owner.name == "stencil.apply":
                    raise DecompositionError(
                        "chained stencil.apply ops need corner halo points under a multi-dimensional grid"
                    )
    return domain, tuple(halo)


def _insert_swaps(region: Region, plan: _Plan, strategy: DecompositionStrategy) -> int:
    count = 0
    i = 0
    while i < len(region.ops):
        op = region.ops[i]
        for sub in op.regions:
            count += _insert_swaps(sub, plan, strategy)
        if op.name == "stencil.load":
            field = op.operands[0]
            fb = field.type.bounds
            core = plan.local_core
            widths = [max(0, min(-fb.lb[k], fb.ub[k] - core.ub[k])) for k in range(core.rank)]
            exchanges = strategy.exchanges([(-w, w) for w in widths], core, plan.topo, None, fb)
            swap = Operation(
                "dmp.swap",
                [field],
                [],
                {"grid": strategy.grid_attr(plan.topo), "swaps": ArrayAttr(tuple(exchanges))},
                loc=op.loc,
            )
            region.insert(i, swap)
            i += 1
            count += 1
        i += 1
    return count


def decompose_function(m: ModuleIR, func: Operation, topo: GridAttr, strategy: DecompositionStrategy) -> _Plan:
    domain, halo = _analyze(func, topo)
    plan = _Plan(domain, topo, halo)
    name = func_name(func)
    ref_name = f"{name}_global"
    if m.lookup(ref_name) is not None:
        raise DecompositionError(f"symbol @{ref_name} already exists")
    ref = func.clone()
    ref.attributes["sym_name"] = StringAttr(ref_name)
    ref.attributes["dmp.global"] = UnitAttr()
    _retype_region(func.body, plan)
    ft = func_type(func)
    func.attributes["function_type"] = TypeAttr(
        FunctionType(tuple(a.type for a in func.body.args), ft.outputs)
    )
    _insert_swaps(func.body, plan, strategy)
    func.attributes["dmp.grid"] = strategy.grid_attr(topo)
    func.attributes["dmp.reference"] = SymbolRefAttr(ref_name)
    m.body.append(ref)
    return plan


def plan_for(m: ModuleIR, func: Operation) -> _Plan:
    """Recompute the coordinate mapping of a decomposed function from its
    global reference (used to scatter and gather rank data)."""
    ref = m.lookup(func.attributes["dmp.reference"].name)
    topo = func.attributes["dmp.grid"]
    domain, halo = _analyze(ref, topo)
    return _Plan(domain, topo, halo)


@register_pass("decompose-stencil", "decompose")
def decompose_stencil(m: ModuleIR, grid="1", strategy="slicing", topo: GridAttr | None = None) -> ModuleIR:
    """Decompose every stencil function over ``grid`` (e.g. ``2x2``)."""
    if topo is None:
        try:
            topo = GridAttr.parse(str(grid))
        except ValueError as exc:
            raise PassError(str(exc)) from None
    if isinstance(strategy, str):
        if strategy not in STRATEGIES:
            raise PassError(f"unknown decomposition strategy {strategy!r}")
        strategy = STRATEGIES[strategy]()
    targets = [
        f
        for f in m.functions()
        if not is_declaration(f)
        and "dmp.grid" not in f.attributes
        and "dmp.global" not in f.attributes
        and any(op.name == "stencil.store" for op in f.walk())
    ]
    for f in targets:
        try:
            decompose_function(m, f, topo, strategy)
        except DecompositionError as exc:
            raise PassError("decomposition failed", [Diagnostic(str(exc), f"func.func@{func_name(f)}", f.loc)]) from None
    return m


__all__ = ["SlicingStrategy", "decompose_stencil", "decompose_function", "plan_for"]
