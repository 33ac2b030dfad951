"""Rank-grid helpers shared by the lowering and the simulator."""

from __future__ import annotations

from ..dmp.dialect import GridAttr

GridTopology = GridAttr


def neighbor_rank(topo: GridAttr, coord, offset) -> int | None:
    """Row-major rank at ``coord + offset``, or None outside the grid."""
    return topo.neighbor(tuple(coord), tuple(offset))


def direction_index(to) -> int:
    """Stable index of a face direction: dimension k gives 2k (negative), 2k+1 (positive)."""
    nz = [k for k, t in enumerate(to) if t]
    if len(nz) != 1:
        raise ValueError(f"not a face direction: {tuple(to)}")
    k = nz[0]
    return 2 * k + (1 if to[k] > 0 else 0)
