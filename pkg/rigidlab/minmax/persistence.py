import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from rigidlab.minmax.filtration import CubicalFiltration

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PersistencePair:
    degree: int
    birth: float
    death: float = np.inf

    @property
    def essential(self) -> bool:
        return np.isinf(self.death)

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class PersistenceDiagram:
    """Z/2 persistence pairs; death = inf marks an essential class."""

    pairs: List[PersistencePair] = field(default_factory=list)

    def degree(self, d: int) -> List[PersistencePair]:
        return [pair for pair in self.pairs if pair.degree == d]

    def essential(self, d: int = None) -> List[PersistencePair]:
        return [
            pair
            for pair in self.pairs
            if pair.essential and (d is None or pair.degree == d)
        ]

    def essential_census(self) -> Dict[int, int]:
        return dict(Counter(pair.degree for pair in self.essential()))

    def finite(self, d: int = None) -> List[PersistencePair]:
        return [
            pair
            for pair in self.pairs
            if not pair.essential and (d is None or pair.degree == d)
        ]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "degree": pair.degree,
                "birth": pair.birth,
                "death": None if pair.essential else pair.death,
            }
            for pair in sorted(self.pairs, key=lambda x: (x.degree, x.birth, x.death))
        ]
        return pd.DataFrame(rows, columns=["degree", "birth", "death"])

    def to_csv(self, path: Union[str, os.PathLike]) -> None:
        """Write degree,birth,death rows; death is empty for essential classes."""
        tmp = f"{path}.tmp"
        self.to_frame().to_csv(tmp, index=False, float_format="%.17g", na_rep="")
        os.replace(tmp, path)


def _reduce(filtration: CubicalFiltration) -> Tuple[Dict[int, int], np.ndarray]:
    """
    Column reduction with clearing, highest dimension first.

    Returns:
        (pivot row -> column, mask of cells whose reduced column is zero)
    """
    n = filtration.size
    zero = np.zeros(n, dtype=bool)
    cleared = np.zeros(n, dtype=bool)
    pivot_of: Dict[int, int] = {}
    columns: Dict[int, set] = {}
    additions = 0

    for d in range(int(filtration.dims.max()), -1, -1):
        for j in np.flatnonzero(filtration.dims == d):
            j = int(j)
            if cleared[j]:
                zero[j] = True
                continue
            col = set(int(x) for x in filtration.boundaries[j])
            while col:
                low = max(col)
                other = pivot_of.get(low)
                if other is None:
                    break
                col ^= columns[other]
                additions += 1
            if col:
                low = max(col)
                pivot_of[low] = j
                columns[j] = col
                cleared[low] = True
            else:
                zero[j] = True

    logger.debug(f"reduced {n} columns with {additions} additions, {len(pivot_of)} pairs")
    return pivot_of, zero


def compute_persistence(filtration: CubicalFiltration) -> PersistenceDiagram:
    """
    Persistence diagram of a cubical filtration over Z/2.

    Zero-length pairs are dropped. With a cone, the class of the apex is the
    extra reduced degree-0 class and is dropped as well.
    """
    pivot_of, zero = _reduce(filtration)
    values, dims = filtration.values, filtration.dims
    pairs: List[PersistencePair] = []
    for low, j in pivot_of.items():
        birth, death = float(values[low]), float(values[j])
        if death > birth:
            pairs.append(PersistencePair(int(dims[low]), birth, death))
    for i in np.flatnonzero(zero):
        i = int(i)
        if i in pivot_of:
            continue
        if filtration.has_cone and np.isneginf(values[i]):
            continue
        pairs.append(PersistencePair(int(dims[i]), float(values[i])))
    pairs.sort(key=lambda x: (x.degree, x.birth, x.death))
    diagram = PersistenceDiagram(pairs)
    logger.debug(f"essential census {diagram.essential_census()}")
    return diagram
