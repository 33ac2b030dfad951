"""Decomposition strategies: local domains and halo-exchange declarations."""

from __future__ import annotations

from abc import ABC, abstractmethod

from ..stencil.analysis import AccessExtent
from ..stencil.dialect import Bounds
from .dialect import ExchangeAttr, GridAttr


class DecompositionError(ValueError):
    """The requested decomposition cannot be realized."""


def halo_widths(extent) -> tuple[int, ...]:
    """Symmetric halo per dimension: the larger of the two access reaches.

    ``extent`` is an :class:`AccessExtent` (combined over its operands) or
    a sequence of ``(min, max)`` pairs.
    """
    pairs = extent.halo() if isinstance(extent, AccessExtent) else extent
    return tuple(max(-lo, hi, 0) for lo, hi in pairs)


class DecompositionStrategy(ABC):
    """How a global domain is split over a rank grid and which halo
    exchanges the resulting local domains need."""

    @abstractmethod
    def local_bounds(self, global_: Bounds, topo: GridAttr, coord) -> Bounds: ...

    def grid_attr(self, topo: GridAttr) -> GridAttr:
        return topo

    @abstractmethod
    def exchanges(
        self, extent, local: Bounds, topo: GridAttr, coord=None, buffer: Bounds | None = None
    ) -> list[ExchangeAttr]: ...


class SlicingStrategy(DecompositionStrategy):
    """Standard slicing along the leading ``topo.rank`` dimensions.

    Each decomposed extent ``E`` over ``d`` ranks gives rank ``i`` a
    consecutive block of ``E // d + (1 if i < E % d else 0)`` points;
    trailing dimensions stay whole. Only face neighbors exchange data.
    """

    def local_bounds(self, global_: Bounds, topo: GridAttr, coord) -> Bounds:
        if topo.rank > global_.rank:
            raise DecompositionError(f"grid {topo} has more dimensions than the domain {global_}")
        if len(coord) != topo.rank or any(not 0 <= c < d for c, d in zip(coord, topo.dims)):
            raise DecompositionError(f"coordinate {tuple(coord)} outside grid {topo}")
        lb, ub = list(global_.lb), list(global_.ub)
        for k, (c, d) in enumerate(zip(coord, topo.dims)):
            extent = global_.ub[k] - global_.lb[k]
            if d > extent:
                raise DecompositionError(f"{d} ranks along dimension {k} exceed its {extent} points")
            base, rem = divmod(extent, d)
            start = global_.lb[k] + c * base + min(c, rem)
            lb[k], ub[k] = start, start + base + (1 if c < rem else 0)
        return Bounds(tuple(lb), tuple(ub))

    def exchanges(self, extent, local, topo, coord=None, buffer=None):
        """Exchange declarations for one rank (or, with ``coord=None``, the
        rank-independent template holding every direction the grid has).

        Coordinates are buffer indices: ``at`` is relative to ``buffer.lb``,
        where ``buffer`` defaults to ``local`` widened by the halo. Order is
        dimension-major, negative direction before positive.
        """
        h = halo_widths(extent)
        if len(h) != local.rank:
            raise DecompositionError(f"extent has rank {len(h)}, local domain has rank {local.rank}")
        if buffer is None:
            buffer = local.widen([(-w, w) for w in h])
        if not buffer.contains(local.widen([(-w, w) if k < topo.rank else (0, 0) for k, w in enumerate(h)])):
            raise DecompositionError(f"buffer {buffer} cannot hold the halo of {local}")
        core_at = tuple(l - b for l, b in zip(local.lb, buffer.lb))
        out: list[ExchangeAttr] = []
        for k in range(topo.rank):
            if topo.dims[k] == 1 or h[k] == 0:
                continue
            n = local.shape[k]
            if n < h[k]:
                raise DecompositionError(
                    f"local extent {n} along dimension {k} is smaller than the halo width {h[k]}"
                )
            for sign in (-1, 1):
                to = tuple(sign if j == k else 0 for j in range(local.rank))
                if coord is not None and topo.neighbor(coord, to[: topo.rank]) is None:
                    continue
                at = list(core_at)
                size = list(local.shape)
                off = [0] * local.rank
                size[k] = h[k]
                if sign < 0:
                    at[k] = core_at[k] - h[k]
                    off[k] = h[k]
                else:
                    at[k] = core_at[k] + n
                    off[k] = -h[k]
                out.append(ExchangeAttr(tuple(at), tuple(size), tuple(off), to))
        return out


def local_bounds(strategy: DecompositionStrategy, global_: Bounds, topo: GridAttr, coord) -> Bounds:
    return strategy.local_bounds(global_, topo, coord)


def generate_exchanges(
    strategy: DecompositionStrategy, extent, local: Bounds, topo: GridAttr, coord=None, buffer: Bounds | None = None
) -> list[ExchangeAttr]:
    return strategy.exchanges(extent, local, topo, coord, buffer)


STRATEGIES = {"slicing": SlicingStrategy}
