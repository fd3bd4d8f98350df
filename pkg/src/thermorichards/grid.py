"""Uniform structured grids in 1D and 2D with explicit face lists.

Cells are addressed by a single flat index; every interior face stores its
two neighbor cells, spacing and area, every boundary face its owner cell and
area.  All discrete operators are built from these lists, which keeps the
operator code dimension-generic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class Grid:
    dim: int
    cells_per_axis: Tuple[int, ...]
    extent: Tuple[float, ...]
    spacing: Tuple[float, ...]
    ncells: int
    cell_volume: float
    cell_centers: np.ndarray          # (M, dim)
    face_left: np.ndarray             # (F,) neighbor on the low side
    face_right: np.ndarray            # (F,) neighbor on the high side
    face_h: np.ndarray                # (F,) center-to-center distance
    face_area: np.ndarray             # (F,)
    bface_cell: np.ndarray            # (B,) owner cell of each boundary face
    bface_area: np.ndarray            # (B,)
    bface_axis: np.ndarray            # (B,) axis of the outward normal
    bface_side: np.ndarray            # (B,) -1 low side, +1 high side

    @property
    def total_volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def nfaces(self) -> int:
        return self.face_left.shape[0]

    @property
    def nbfaces(self) -> int:
        return self.bface_cell.shape[0]


def make_grid(dim: int, cells, extent) -> Grid:
    if dim not in (1, 2):
        raise ValueError("only 1D and 2D grids are supported")
    cells = tuple(int(c) for c in np.atleast_1d(cells))[:dim]
    extent = tuple(float(e) for e in np.atleast_1d(extent))[:dim]
    if len(cells) != dim or len(extent) != dim:
        raise ValueError("cells and extent must match the grid dimension")
    if any(c < 1 for c in cells) or any(e <= 0 for e in extent):
        raise ValueError("cell counts must be >= 1 and extents positive")
    spacing = tuple(e / c for e, c in zip(extent, cells))

    if dim == 1:
        nx, = cells
        hx, = spacing
        centers = (np.arange(nx) + 0.5)[:, None] * hx
        fl = np.arange(nx - 1)
        fr = fl + 1
        fh = np.full(nx - 1, hx)
        fa = np.ones(nx - 1)
        bcell = np.array([0, nx - 1], dtype=int)
        barea = np.ones(2)
        baxis = np.zeros(2, dtype=int)
        bside = np.array([-1, 1], dtype=int)
        vol = hx
    else:
        nx, ny = cells
        hx, hy = spacing
        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        centers = np.column_stack([((ix + 0.5) * hx).ravel(), ((iy + 0.5) * hy).ravel()])

        def cid(i, j):
            return i * ny + j

        # x-direction faces
        ixf, iyf = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="ij")
        flx = cid(ixf, iyf).ravel()
        frx = cid(ixf + 1, iyf).ravel()
        # y-direction faces
        ixg, iyg = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
        fly = cid(ixg, iyg).ravel()
        fry = cid(ixg, iyg + 1).ravel()

        fl = np.concatenate([flx, fly])
        fr = np.concatenate([frx, fry])
        fh = np.concatenate([np.full(flx.size, hx), np.full(fly.size, hy)])
        fa = np.concatenate([np.full(flx.size, hy), np.full(fly.size, hx)])

        jb = np.arange(ny)
        ib = np.arange(nx)
        bcell = np.concatenate([cid(0, jb), cid(nx - 1, jb), cid(ib, 0), cid(ib, ny - 1)])
        barea = np.concatenate([np.full(ny, hy), np.full(ny, hy),
                                np.full(nx, hx), np.full(nx, hx)])
        baxis = np.concatenate([np.zeros(ny), np.zeros(ny),
                                np.ones(nx), np.ones(nx)]).astype(int)
        bside = np.concatenate([-np.ones(ny), np.ones(ny),
                                -np.ones(nx), np.ones(nx)]).astype(int)
        vol = hx * hy

    return Grid(
        dim=dim,
        cells_per_axis=cells,
        extent=extent,
        spacing=spacing,
        ncells=int(np.prod(cells)),
        cell_volume=float(vol),
        cell_centers=centers,
        face_left=fl.astype(int),
        face_right=fr.astype(int),
        face_h=fh,
        face_area=fa,
        bface_cell=bcell.astype(int),
        bface_area=barea,
        bface_axis=baxis,
        bface_side=bside,
    )
