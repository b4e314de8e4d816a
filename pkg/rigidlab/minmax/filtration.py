"""
Lower-star cubical filtrations of a GFQI over T^n x [-R, R]^k.

Cells are (base vertex, axis mask) pairs on the product grid. Periodic q
axes wrap around, fiber axes are bounded. The filtration value of a cell is
the maximum of S over its corners, saturated to [-c_box, c_box]. When some
cells reach -c_box, a cone vertex at -inf is joined to all of them so that
the reduced homology of the filtration is the homology of the pair
(S^lambda, S^-c_box).
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from rigidlab.config import settings
from rigidlab.errors import MinMaxError
from rigidlab.gfqi.models import GFQI
from rigidlab.utils.logger import LogUtil

logger = logging.getLogger(__name__)

CONE_VALUE = -np.inf


@dataclass(frozen=True, eq=False)
class CubicalFiltration:
    """
    Cells in filtration order with Z/2 boundaries.

    ``boundaries[i]`` lists positions (in the same order) of the faces of
    cell i; every face precedes its coface.
    """

    values: np.ndarray
    dims: np.ndarray
    boundaries: List[np.ndarray]
    c_box: float
    radius: float
    resolution: Tuple[int, ...]
    has_cone: bool
    n: int
    k: int
    vertex_values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def range(self) -> Tuple[float, float]:
        return -self.c_box, self.c_box

    def check_monotone(self) -> bool:
        for i, faces in enumerate(self.boundaries):
            if faces.size and np.any(self.values[faces] > self.values[i]):
                return False
        return True


def normalize_resolution(
    S: GFQI, resolution: Union[int, Sequence[int], None]
) -> Tuple[int, ...]:
    """Per-axis resolution; a scalar applies to every axis."""
    if resolution is None:
        resolution = settings.numeric.minmax_resolution
    if np.isscalar(resolution):
        res = (int(resolution),) * S.dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != S.dim:
        raise MinMaxError(f"need {S.dim} resolutions, got {len(res)}")
    floor = settings.numeric.min_grid_resolution
    if min(res) < floor:
        raise MinMaxError(f"resolution {res} below the minimum of {floor} per axis")
    return res


def grid_axes(n: int, k: int, resolution: Sequence[int], radius: float) -> List[np.ndarray]:
    axes = [np.arange(r) / r for r in resolution[:n]]
    axes += [np.linspace(-radius, radius, r) for r in resolution[n:]]
    return axes


def sample_vertices(
    S: GFQI, resolution: Sequence[int], radius: float
) -> np.ndarray:
    mesh = np.meshgrid(*grid_axes(S.n, S.k, resolution, radius), indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return S.values(pts).reshape(tuple(resolution))


def _masks(dim: int) -> List[Tuple[int, ...]]:
    """Axis masks ordered by cell dimension, then lexicographically."""
    out = []
    for size in range(dim + 1):
        out.extend(combinations(range(dim), size))
    return out


def build_filtration(
    S: GFQI,
    resolution: Union[int, Sequence[int], None],
    c_box: float,
    radius: Optional[float] = None,
) -> CubicalFiltration:
    """
    Lower-star cubical filtration of S.

    Args:
        S: generating function
        resolution: vertices per axis (scalar or one per axis)
        c_box: saturation level; sublevels below -c_box are coned off
        radius: fiber half-width R; defaults to cutoff + 1

    Returns:
        CubicalFiltration with cells sorted by (value, dimension, cell index)
    """
    res = normalize_resolution(S, resolution)
    if not c_box > 0:
        raise MinMaxError(f"c_box must be positive, got {c_box}")
    radius = S.fiber_radius if radius is None else float(radius)
    dim = S.dim
    shape = tuple(res)
    nv = int(np.prod(shape))
    periodic = [True] * S.n + [False] * S.k

    vertex_values = sample_vertices(S, res, radius)
    if not np.all(np.isfinite(vertex_values)):
        raise MinMaxError("generating function is not finite on the grid")
    LogUtil.log_array(logger, f"vertex values of {S.name or 'S'}", vertex_values)

    masks = _masks(dim)
    mask_pos = {m: i for i, m in enumerate(masks)}
    idx = np.indices(shape).reshape(dim, -1)

    slot_values = []
    slot_valid = []
    for m in masks:
        w = vertex_values
        for a in m:
            w = np.maximum(w, np.roll(w, -1, axis=a))
        valid = np.ones(nv, dtype=bool)
        for a in m:
            if not periodic[a]:
                valid &= idx[a] < res[a] - 1
        slot_values.append(w.reshape(-1))
        slot_valid.append(valid)
    values = np.concatenate(slot_values)
    valid = np.concatenate(slot_valid)
    dims = np.concatenate([np.full(nv, len(m)) for m in masks])

    # slot -> compressed cell id
    cell_id = np.full(values.shape[0], -1, dtype=np.int64)
    cell_id[valid] = np.arange(int(valid.sum()))

    faces_per_slot = {}
    for m in masks:
        if not m:
            continue
        base = mask_pos[m] * nv
        cols = []
        for a in m:
            face_slot = mask_pos[tuple(x for x in m if x != a)] * nv
            shifted = idx.copy()
            shifted[a] = (shifted[a] + 1) % res[a]
            cols.append(face_slot + np.arange(nv))
            cols.append(face_slot + np.ravel_multi_index(shifted, shape))
        faces_per_slot[base] = np.stack(cols, axis=1)

    values = np.clip(values[valid], -c_box, c_box)
    dims = dims[valid]
    n_cells = values.shape[0]
    face_lists: List[np.ndarray] = [np.zeros(0, dtype=np.int64)] * n_cells
    for m in masks:
        if not m:
            continue
        base = mask_pos[m] * nv
        ok = slot_valid[mask_pos[m]]
        ids = cell_id[base + np.flatnonzero(ok)]
        faces = cell_id[faces_per_slot[base][ok]]
        for cid, row in zip(ids, faces):
            face_lists[cid] = row

    has_cone = bool(np.any(values <= -c_box))
    if has_cone:
        coned = np.flatnonzero(values <= -c_box)
        apex = n_cells
        cone_of = {int(c): apex + 1 + i for i, c in enumerate(coned)}
        cone_values = [CONE_VALUE] + [values[c] for c in coned]
        cone_dims = [0] + [dims[c] + 1 for c in coned]
        cone_faces = [np.zeros(0, dtype=np.int64)]
        for c in coned:
            faces = face_lists[c]
            if faces.size == 0:
                cone_faces.append(np.array([c, apex], dtype=np.int64))
            else:
                cone_faces.append(
                    np.concatenate([[c], [cone_of[int(f)] for f in faces]]).astype(np.int64)
                )
        values = np.concatenate([values, cone_values])
        dims = np.concatenate([dims, cone_dims])
        face_lists = face_lists + cone_faces

    order = np.lexsort((np.arange(values.shape[0]), dims, values))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])
    boundaries = [np.sort(rank[face_lists[c]]) for c in order]

    logger.debug(
        f"cubical filtration: {order.shape[0]} cells, resolution {res}, "
        f"R={radius:.4g}, c_box={c_box:.4g}, cone={has_cone}"
    )
    return CubicalFiltration(
        values=values[order],
        dims=dims[order],
        boundaries=boundaries,
        c_box=float(c_box),
        radius=radius,
        resolution=res,
        has_cone=has_cone,
        n=S.n,
        k=S.k,
        vertex_values=vertex_values,
    )
