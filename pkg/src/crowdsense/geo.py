"""Grid-based location matching with randomized matrices.

The covered region is an m x n grid (rows follow longitude, columns follow
latitude). A customer encodes its sensing area as a sparse matrix L_a with
distinct random nonzero entries on covered cells and publishes
N_a = L_a^T M_a for a random m x n mask M_a. A user does the same for its
route and publishes N_u = M_u^T L_u. The provider declares a match when
N_u N_a = M_u^T (L_u L_a^T) M_a is nonzero.

L_u L_a^T pairs every user row with every area row over shared columns, so
the product is nonzero exactly when the two supports share a column, and
the zero rows of N_a / zero columns of N_u expose those column supports.
``column_overlap`` is the predicate the construction decides;
``cells_overlap`` is plain cell intersection.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Iterable, Tuple

import numpy as np

from . import group

Cell = Tuple[int, int]
MAX_RESAMPLE = 64


class GeoError(Exception):
    pass


@dataclass(frozen=True)
class GeoFrame:
    """Rectangular lat/long frame cut into half-open cells."""

    lon_min: Fraction
    lon_max: Fraction
    lat_min: Fraction
    lat_max: Fraction
    step: Fraction

    @classmethod
    def from_degrees(cls, lon_min, lon_max, lat_min, lat_max, step) -> "GeoFrame":
        f = lambda v: Fraction(str(v))
        return cls(f(lon_min), f(lon_max), f(lat_min), f(lat_max), f(step))

    @property
    def rows(self) -> int:
        return math.ceil((self.lon_max - self.lon_min) / self.step)

    @property
    def cols(self) -> int:
        return math.ceil((self.lat_max - self.lat_min) / self.step)

    def cell_of(self, lon, lat) -> Cell:
        lon, lat = Fraction(str(lon)), Fraction(str(lat))
        if not (self.lon_min <= lon < self.lon_max and self.lat_min <= lat < self.lat_max):
            raise GeoError("point outside frame")
        return (int((lon - self.lon_min) // self.step), int((lat - self.lat_min) // self.step))


ONTARIO = GeoFrame.from_degrees(74.40, 95.15, 41.66, 57.00, 0.1)


@dataclass(frozen=True)
class GridRegion:
    rows: int
    cols: int
    cells: FrozenSet[Cell]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GeoError("grid needs at least one row and column")
        for i, j in self.cells:
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                raise GeoError("cell (%d, %d) outside %dx%d grid" % (i, j, self.rows, self.cols))

    @classmethod
    def of(cls, rows: int, cols: int, cells: Iterable[Cell]) -> "GridRegion":
        return cls(rows, cols, frozenset((int(i), int(j)) for i, j in cells))

    @classmethod
    def box(cls, rows, cols, r0, r1, c0, c1) -> "GridRegion":
        """Cells with r0 <= row < r1 and c0 <= col < c1."""
        return cls.of(rows, cols, [(i, j) for i in range(r0, r1) for j in range(c0, c1)])

    def columns(self) -> FrozenSet[int]:
        return frozenset(j for _, j in self.cells)


@dataclass(frozen=True)
class SparseLocationMatrix:
    role: str  # "area" or "user"
    entries: np.ndarray  # m x n object array of ints mod p


@dataclass(frozen=True)
class ObfuscatedMatrix:
    origin: str  # "area" or "user"
    data: np.ndarray  # n x n object array of ints mod p

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def encode(self) -> bytes:
        rows, cols = self.data.shape
        body = b"".join(group.encode_scalar(int(v)) for v in self.data.flat)
        return struct.pack(">HH", rows, cols) + body

    @classmethod
    def decode(cls, data: bytes, origin: str) -> "ObfuscatedMatrix":
        rows, cols = struct.unpack(">HH", data[:4])
        w = group.SCALAR_BYTES
        if len(data) != 4 + rows * cols * w:
            raise group.DecodeError("matrix body length mismatch")
        vals = [group.decode_scalar(data[4 + k * w:4 + (k + 1) * w]) for k in range(rows * cols)]
        return cls(origin, np.array(vals, dtype=object).reshape(rows, cols))

    def __eq__(self, other):
        return isinstance(other, ObfuscatedMatrix) and self.encode() == other.encode()

    def __hash__(self):
        return hash(self.encode())


def matrix_wire_size(n: int) -> int:
    return 4 + n * n * group.SCALAR_BYTES


def _sparse(region: GridRegion, rng, p: int) -> np.ndarray:
    L = np.zeros((region.rows, region.cols), dtype=object)
    cells = sorted(region.cells)
    for _ in range(MAX_RESAMPLE):
        vals = [rng.randrange(1, p) for _ in cells]
        if len(set(vals)) == len(vals):
            break
    else:
        raise GeoError("could not draw distinct nonzero entries")
    for (i, j), v in zip(cells, vals):
        L[i, j] = v
    return L


def _mask(m: int, n: int, rng, p: int) -> np.ndarray:
    return np.array([[rng.randrange(1, p) for _ in range(n)] for _ in range(m)], dtype=object)


def encode_region(region: GridRegion, rng, p: int = group.ORDER):
    if not region.cells:
        raise GeoError("sensing area is empty")
    L = _sparse(region, rng, p)
    M = _mask(region.rows, region.cols, rng, p)
    return SparseLocationMatrix("area", L), ObfuscatedMatrix("area", L.T.dot(M) % p)


def encode_user_route(route: GridRegion, rng, p: int = group.ORDER):
    if not route.cells:
        raise GeoError("route is empty")
    L = _sparse(route, rng, p)
    M = _mask(route.rows, route.cols, rng, p)
    return SparseLocationMatrix("user", L), ObfuscatedMatrix("user", M.T.dot(L) % p)


def _product(user: ObfuscatedMatrix, area: ObfuscatedMatrix, p: int) -> np.ndarray:
    if user.data.shape != area.data.shape or user.data.shape[0] != user.data.shape[1]:
        raise GeoError("matrices must both be n x n")
    return user.data.dot(area.data) % p


def match(user: ObfuscatedMatrix, area: ObfuscatedMatrix, p: int = group.ORDER) -> bool:
    return bool(_product(user, area, p).any())


def leakage_profile(user: ObfuscatedMatrix, area: ObfuscatedMatrix, p: int = group.ORDER) -> FrozenSet[int]:
    """Columns the provider sees occupied by both parties.

    Row j of N_a is nonzero iff the area occupies column j; column j of N_u
    is nonzero iff the user does. Row indices never enter either matrix.
    """
    if not match(user, area, p):
        raise GeoError("no match, nothing to profile")
    area_cols = {j for j in range(area.n) if area.data[j, :].any()}
    user_cols = {j for j in range(user.n) if user.data[:, j].any()}
    return frozenset(area_cols & user_cols)


def cells_overlap(a: GridRegion, b: GridRegion) -> bool:
    return bool(a.cells & b.cells)


def column_overlap(a: GridRegion, b: GridRegion) -> bool:
    return bool(a.columns() & b.columns())
