"""Consistency checks for generated halo-exchange declarations.

*Coverage*: on every rank, each halo point a star-shaped stencil of the
given extent reads and that lies inside the global domain but outside the
rank's core is received exactly once, and nothing else is received.

*Reciprocity*: every exchange of rank ``r`` towards ``to`` is matched by
an exchange of the neighbor towards ``-to``; what ``r`` receives is
exactly the box the neighbor sends, both taken from the senders' cores.
"""

from __future__ import annotations

import numpy as np

from ..stencil.dialect import Bounds
from .dialect import ExchangeAttr, GridAttr
from .strategy import DecompositionStrategy, SlicingStrategy, halo_widths


def _box(lb, ex: ExchangeAttr, send: bool) -> Bounds:
    start = ex.source if send else ex.at
    lo = tuple(b + a for b, a in zip(lb, start))
    return Bounds(lo, tuple(l + s for l, s in zip(lo, ex.size)))


def _needed(core: Bounds, domain: Bounds, h) -> list[Bounds]:
    """Face slabs of width ``h`` around ``core``, clipped to ``domain``."""
    out = []
    for k, w in enumerate(h):
        if w == 0:
            continue
        for lo, hi in ((core.lb[k] - w, core.lb[k]), (core.ub[k], core.ub[k] + w)):
            lo, hi = max(lo, domain.lb[k]), min(hi, domain.ub[k])
            if lo < hi:
                lb, ub = list(core.lb), list(core.ub)
                lb[k], ub[k] = lo, hi
                out.append(Bounds(tuple(lb), tuple(ub)))
    return out


def check_exchanges(
    domain: Bounds, topo: GridAttr, extent, strategy: DecompositionStrategy | None = None
) -> list[str]:
    """All coverage and reciprocity violations (empty when consistent)."""
    strategy = strategy or SlicingStrategy()
    h = halo_widths(extent)
    canvas = domain.widen([(-w, w) for w in h])
    per_rank = {}
    for coord in topo.coords():
        local = strategy.local_bounds(domain, topo, coord)
        buf_lb = tuple(l - w for l, w in zip(local.lb, h))
        per_rank[coord] = (local, buf_lb, strategy.exchanges(extent, local, topo, coord))

    problems: list[str] = []
    for coord, (local, buf_lb, exs) in per_rank.items():
        hits = np.zeros(canvas.shape, dtype=np.int64)
        for ex in exs:
            recv, send = _box(buf_lb, ex, False), _box(buf_lb, ex, True)
            if not local.contains(send):
                problems.append(f"{coord}: {ex} sends {send}, outside its core {local}")
            if not domain.contains(recv):
                problems.append(f"{coord}: {ex} receives {recv}, outside the domain {domain}")
                continue
            hits[recv.slices(canvas.lb)] += 1
            ncoord = tuple(c + t for c, t in zip(coord, ex.to[: topo.rank]))
            if topo.neighbor(coord, ex.to[: topo.rank]) is None or ncoord not in per_rank:
                problems.append(f"{coord}: {ex} targets a missing neighbor")
                continue
            nlocal, nbuf_lb, nexs = per_rank[ncoord]
            back = [e for e in nexs if e.to == tuple(-t for t in ex.to)]
            if len(back) != 1:
                problems.append(f"{coord}: {ex} has {len(back)} matching exchanges on {ncoord}")
                continue
            if _box(nbuf_lb, back[0], True) != recv:
                problems.append(f"{coord}: receives {recv} but {ncoord} sends {_box(nbuf_lb, back[0], True)}")
            if _box(nbuf_lb, back[0], False) != send:
                problems.append(f"{coord}: sends {send} but {ncoord} receives {_box(nbuf_lb, back[0], False)}")
        want = np.zeros(canvas.shape, dtype=np.int64)
        for slab in _needed(local, domain, h):
            want[slab.slices(canvas.lb)] += 1
        if not np.array_equal(hits, want):
            bad = np.argwhere(hits != want)[0]
            point = tuple(int(i) + l for i, l in zip(bad, canvas.lb))
            problems.append(
                f"{coord}: halo point {point} received {hits[tuple(bad)]} time(s), needed {want[tuple(bad)]}"
            )
    return problems


__all__ = ["check_exchanges"]
