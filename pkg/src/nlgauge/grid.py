"""Uniform 1D grids, grid functions and off-diagonal two-point forms.

The continuous objects live on the line with the singular reference measure
``dx dy / |x - y|``.  On a grid of ``M`` nodes with spacing ``h`` this becomes
the pair weight ``mu(i, j) = h**2 / r(i, j)`` for ``i != j``; the diagonal is
excluded everywhere (principal-value semantics).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

DEFAULT_PAIR_CAP = 1 << 24


class Geometry(str, Enum):
    TRUNCATED_LINE = "truncated_line"
    PERIODIC_TORUS = "periodic_torus"


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Discretized line ``x_i = -L + i*h`` with ``h = 2L/M``.

    ``distance`` is the plain (min-image on the torus) node distance.
    ``rdist`` is the kernel distance used by every operator; it equals
    ``distance`` except on the torus with ``image_count > 0`` where the
    ``|x-y|**-2`` kernel is periodized over ``2*image_count + 1`` copies and
    folded back into a single effective distance.
    """

    half_width: float
    points: int
    geometry: Geometry = Geometry.TRUNCATED_LINE
    image_count: int = 0

    @property
    def M(self) -> int:
        return self.points

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.points

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.points)

    @cached_property
    def distance(self) -> np.ndarray:
        diff = np.abs(self.x[:, None] - self.x[None, :])
        if self.geometry is Geometry.PERIODIC_TORUS:
            diff = np.minimum(diff, 2.0 * self.half_width - diff)
        np.fill_diagonal(diff, np.inf)
        diff.setflags(write=False)
        return diff

    @cached_property
    def rdist(self) -> np.ndarray:
        if self.geometry is not Geometry.PERIODIC_TORUS or self.image_count == 0:
            return self.distance
        period = 2.0 * self.half_width
        delta = self.x[:, None] - self.x[None, :]
        # |delta| keeps the image sum (and hence mu) bitwise symmetric
        delta = np.abs(delta - period * np.round(delta / period))
        acc = np.zeros_like(delta)
        for k in range(-self.image_count, self.image_count + 1):
            shifted = np.abs(delta + k * period)
            with np.errstate(divide="ignore"):
                acc += np.where(shifted > 0, shifted ** -2.0, 0.0)
        np.fill_diagonal(acc, 1.0)
        r = acc ** -0.5
        np.fill_diagonal(r, np.inf)
        r.setflags(write=False)
        return r

    @cached_property
    def mu(self) -> np.ndarray:
        """Pair weights ``h**2 / r``; zero on the diagonal."""
        w = self.h ** 2 / self.rdist
        w.setflags(write=False)
        return w

    @cached_property
    def dy(self) -> np.ndarray:
        """Row weights ``h / r`` of the partial measure ``dy/|x-y|``."""
        w = self.h / self.rdist
        w.setflags(write=False)
        return w

    def rpow(self, power: float) -> np.ndarray:
        """``r(i,j)**-power`` with zero diagonal."""
        return self.rdist ** (-power)

    def to_dict(self) -> dict:
        return {
            "half_width": float(self.half_width),
            "points": int(self.points),
            "geometry": self.geometry.value,
            "image_count": int(self.image_count),
        }

    def same_as(self, other: "GridSpec") -> bool:
        return self is other or self.to_dict() == other.to_dict()


def make_grid(
    L: float,
    M: int,
    geometry: Geometry | str = Geometry.TRUNCATED_LINE,
    image_count: int = 0,
    pair_cap: int = DEFAULT_PAIR_CAP,
) -> GridSpec:
    """Build a grid; raises :class:`GridError` on bad sizes."""
    if not np.isfinite(L) or L <= 0:
        raise GridError(f"half width must be positive, got {L}")
    if int(M) != M or M < 2:
        raise GridError(f"need at least 2 points, got {M}")
    if image_count < 0:
        raise GridError("image_count must be >= 0")
    if M * M > pair_cap:
        raise GridError(f"{M}x{M} pair storage exceeds cap of {pair_cap} pairs")
    geometry = Geometry(geometry)
    if geometry is Geometry.TRUNCATED_LINE:
        image_count = 0
    return GridSpec(float(L), int(M), geometry, int(image_count))


def _check_grid(a: GridSpec, b: GridSpec) -> None:
    if not a.same_as(b):
        raise GridError("operands live on different grids")


@dataclass(frozen=True, eq=False)
class Field:
    """Grid function with values of shape ``(M,)``, ``(M, N)`` or ``(M, N, N)``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 0 or v.shape[0] != self.grid.M:
            raise GridError(f"field length {v.shape[:1]} does not match M={self.grid.M}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def channel_shape(self) -> tuple:
        return self.values.shape[1:]

    @property
    def channels(self) -> int:
        return self.values.shape[1] if self.values.ndim > 1 else 1

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean / Frobenius magnitude."""
        v = self.values.reshape(self.grid.M, -1)
        return np.sqrt(np.einsum("ia,ia->i", v, v))

    def orthogonality_defect(self) -> float:
        if self.values.ndim != 3:
            raise ValueError("orthogonality needs a matrix field")
        n = self.values.shape[1]
        g = np.einsum("iab,icb->iac", self.values, self.values) - np.eye(n)
        return float(np.abs(g).max())

    def is_special_orthogonal(self, tol: float = 1e-10) -> bool:
        if self.orthogonality_defect() > tol:
            return False
        return bool(np.all(np.linalg.det(self.values) > 0))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other):
        if isinstance(other, Field):
            _check_grid(self.grid, other.grid)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            _check_grid(self.grid, other.grid)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __mul__(self, c: float):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class OdForm:
    """Off-diagonal two-point kernel ``F(x_i, x_j)``.

    ``kernel`` has shape ``(M, M)`` plus channel axes.  The diagonal is stored
    as zero and never enters a sum.
    """

    grid: GridSpec
    kernel: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = np.array(self.kernel, dtype=float)
        M = self.grid.M
        if k.ndim < 2 or k.shape[:2] != (M, M):
            raise GridError(f"kernel shape {k.shape} does not start with ({M}, {M})")
        idx = np.arange(M)
        k[idx, idx] = 0.0
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel entries must be finite")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def channel_shape(self) -> tuple:
        return self.kernel.shape[2:]

    def star(self) -> "OdForm":
        """Swap the two grid arguments; channels are untouched."""
        return OdForm(self.grid, np.swapaxes(self.kernel, 0, 1))

    def antisymmetry_defect(self) -> float:
        """Max entry of ``F + F^T`` in the matrix channels (pairwise)."""
        if self.kernel.ndim != 4:
            raise ValueError("matrix antisymmetry needs a matrix-valued form")
        return float(np.abs(self.kernel + np.swapaxes(self.kernel, 2, 3)).max())

    def restrict(self, rows, cols=None) -> "OdForm":
        """Zero every pair outside ``rows x cols`` (``chi_D(x) chi_D(y) F``)."""
        cols = rows if cols is None else cols
        M = self.grid.M
        mask = np.zeros((M, M), dtype=bool)
        mask[np.ix_(np.asarray(rows), np.asarray(cols))] = True
        mask = mask.reshape(mask.shape + (1,) * (self.kernel.ndim - 2))
        return OdForm(self.grid, np.where(mask, self.kernel, 0.0))

    def __add__(self, other: "OdForm"):
        _check_grid(self.grid, other.grid)
        return OdForm(self.grid, self.kernel + other.kernel)

    def __sub__(self, other: "OdForm"):
        _check_grid(self.grid, other.grid)
        return OdForm(self.grid, self.kernel - other.kernel)

    def __mul__(self, c: float):
        return OdForm(self.grid, self.kernel * c)

    __rmul__ = __mul__

    def __neg__(self):
        return OdForm(self.grid, -self.kernel)


def zero_field(grid: GridSpec, channel_shape: tuple = ()) -> Field:
    return Field(grid, np.zeros((grid.M,) + tuple(channel_shape)))


def identity_field(grid: GridSpec, n: int) -> Field:
    return Field(grid, np.broadcast_to(np.eye(n), (grid.M, n, n)))


def zero_form(grid: GridSpec, channel_shape: tuple = ()) -> OdForm:
    return OdForm(grid, np.zeros((grid.M, grid.M) + tuple(channel_shape)))
