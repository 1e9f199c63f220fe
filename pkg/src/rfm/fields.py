"""Grids, fields, quadrature, and spectral transforms on the unit domain.

Everything downstream (samplers, solvers, feature maps, training) is built
on the two containers defined here: an equispaced `Grid` on (0,1) or
(0,1)^2 and a `Field` of real values living on it. All objects are
immutable after construction and all operations are pure functions.

Conventions
-----------
* 1D periodic grids follow the duplicate-endpoint convention: a grid with
  ``points_per_axis = K`` has nodes ``x_i = i/(K-1)`` for ``i = 0..K-2``;
  the node at ``x = 1`` is identified with ``x = 0`` and is not stored.
  File I/O writes the duplicated endpoint back out (see `save_fields`).
* Non-periodic grids store all ``points_per_axis`` nodes per axis,
  endpoints included.
* 2D fields are stored row-major with x1 varying fastest, i.e.
  ``values[j, i] = u(x1_i, x2_j)``.
* The spectral transform returns Fourier *coefficients*: the k = 0 entry
  equals the field mean, so ``u(x) = sum_k c_k exp(2*pi*i*k*x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARIES = (PERIODIC, DIRICHLET, NEUMANN)

_MAGIC = "FIELDS 1"


@dataclass(frozen=True)
class Grid:
    """Equispaced mesh of the unit interval or unit square."""

    dim: int
    points_per_axis: int
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.points_per_axis < 3:
            raise ValueError("points_per_axis must be at least 3")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == PERIODIC and self.dim != 1:
            raise ValueError("periodic grids are 1D only")

    @property
    def h(self) -> float:
        """Mesh spacing."""
        return 1.0 / (self.points_per_axis - 1)

    @property
    def stored_per_axis(self) -> int:
        """Number of stored nodes per axis (excludes the duplicate periodic endpoint)."""
        if self.boundary == PERIODIC:
            return self.points_per_axis - 1
        return self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.stored_per_axis,) * self.dim

    @property
    def num_values(self) -> int:
        return self.stored_per_axis**self.dim

    def axis_points(self) -> np.ndarray:
        return self.h * np.arange(self.stored_per_axis)

    def coords(self):
        """Node coordinates: x for 1D, (X1, X2) meshgrids for 2D."""
        x = self.axis_points()
        if self.dim == 1:
            return x
        return np.meshgrid(x, x, indexing="xy")

    def quad_weights(self) -> np.ndarray:
        """Composite trapezoid weights, same shape as a field on this grid."""
        if self.boundary == PERIODIC:
            # endpoint identified with start point: uniform weights
            return np.full(self.shape, self.h)
        w = np.full(self.stored_per_axis, self.h)
        w[0] = w[-1] = 0.5 * self.h
        if self.dim == 1:
            return w
        return np.outer(w, w)


@dataclass(frozen=True)
class Field:
    """Real-valued function samples on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "Field":
        """Same grid, new values."""
        return Field(self.grid, values)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field on a 1D periodic grid.

    Coefficients use the half-spectrum (rfft) layout: entry k holds the
    coefficient of exp(2*pi*i*k*x) for k = 0..N//2, with the negative
    wavenumbers implied by conjugate symmetry.
    """

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        _require_periodic_1d(self.grid)
        coeffs = np.asarray(self.coefficients, dtype=np.complex128)
        n = self.grid.stored_per_axis
        if coeffs.shape != (n // 2 + 1,):
            raise ValueError(
                f"expected {n // 2 + 1} coefficients for grid with {n} stored points"
            )
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)

    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.grid.stored_per_axis // 2 + 1)


def _require_periodic_1d(grid: Grid):
    if grid.dim != 1 or grid.boundary != PERIODIC:
        raise ValueError("operation requires a 1D periodic grid")


def _require_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


def inner_product_l2(u: Field, v: Field) -> float:
    """Composite-trapezoid approximation of the L2 inner product over the unit domain."""
    _require_same_grid(u, v)
    w = u.grid.quad_weights()
    return float(np.sum(w * u.values * v.values))


def norm_l2(u: Field) -> float:
    return float(np.sqrt(max(inner_product_l2(u, u), 0.0)))


def relative_l2_error(truth: Field, approx: Field) -> float:
    """|| truth - approx ||_{L2} / || truth ||_{L2} under trapezoid quadrature."""
    _require_same_grid(truth, approx)
    denom = norm_l2(truth)
    if denom == 0.0:
        raise ValueError("relative error undefined for zero-norm truth")
    diff = Field(truth.grid, truth.values - approx.values)
    return norm_l2(diff) / denom


def spectral_transform(u: Field) -> SpectralField:
    """Forward transform; the k = 0 coefficient equals the field mean."""
    _require_periodic_1d(u.grid)
    n = u.grid.stored_per_axis
    return SpectralField(u.grid, np.fft.rfft(u.values) / n)


def inverse_transform(s: SpectralField) -> Field:
    n = s.grid.stored_per_axis
    return Field(s.grid, np.fft.irfft(s.coefficients * n, n=n))


def subsample(u: Field, target: Grid) -> Field:
    """Restriction onto a nested coarser grid; values at coincident nodes are copied exactly."""
    src = u.grid
    if target.dim != src.dim or target.boundary != src.boundary:
        raise ValueError("subsample target must share dimension and boundary type")
    step_num = src.points_per_axis - 1
    step_den = target.points_per_axis - 1
    if step_num % step_den != 0:
        raise ValueError(
            f"grids are not nested: {src.points_per_axis} -> {target.points_per_axis}"
        )
    stride = step_num // step_den
    if src.dim == 1:
        vals = u.values[::stride][: target.stored_per_axis]
    else:
        vals = u.values[::stride, ::stride]
    return Field(target, vals)


# ---------------------------------------------------------------------------
# Field container file format
#
# A container holds any number of fields sharing one grid. Layout: a plain
# text header terminated by a line reading "<end>", followed by the raw
# values of each field in order, little-endian float64. For 1D periodic
# grids the duplicate endpoint IS written (points_per_axis values per
# field) so files carry the conventional K; it is checked and dropped on
# read. Header keys: dim, points_per_axis, boundary, count, plus free-form
# "meta.*" provenance entries.
# ---------------------------------------------------------------------------


def save_fields(path, fields, meta: dict | None = None):
    if not fields:
        raise ValueError("cannot save an empty field list")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("all fields in a container must share one grid")
    lines = [
        _MAGIC,
        f"dim = {grid.dim}",
        f"points_per_axis = {grid.points_per_axis}",
        f"boundary = {grid.boundary}",
        f"count = {len(fields)}",
    ]
    for key, value in (meta or {}).items():
        lines.append(f"meta.{key} = {value}")
    lines.append("<end>")
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        for f in fields:
            vals = f.values
            if grid.boundary == PERIODIC:
                vals = np.concatenate([vals, vals[:1]])
            fh.write(vals.astype("<f8").tobytes())


def load_fields(path):
    """Returns (fields, meta)."""
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii").strip()
        if first != _MAGIC:
            raise ValueError(f"{path}: not a field container (bad magic {first!r})")
        header = {}
        meta = {}
        while True:
            line = fh.readline().decode("ascii").strip()
            if line == "<end>":
                break
            if not line:
                raise ValueError(f"{path}: truncated header")
            key, _, value = line.partition(" = ")
            if key.startswith("meta."):
                meta[key[5:]] = value
            else:
                header[key] = value
        grid = Grid(
            dim=int(header["dim"]),
            points_per_axis=int(header["points_per_axis"]),
            boundary=header["boundary"],
        )
        count = int(header["count"])
        per_field = grid.num_values
        if grid.boundary == PERIODIC:
            per_field += 1
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != count * per_field:
        raise ValueError(f"{path}: expected {count * per_field} values, found {raw.size}")
    fields = []
    for i in range(count):
        vals = raw[i * per_field : (i + 1) * per_field]
        if grid.boundary == PERIODIC:
            if vals[-1] != vals[0]:
                raise ValueError(f"{path}: periodic endpoint mismatch in field {i}")
            vals = vals[:-1]
        fields.append(Field(grid, vals.reshape(grid.shape)))
    return fields, meta


def export_csv(path, fields):
    """One field per column; 2D fields are flattened row-major (x1 fastest)."""
    cols = [f.values.ravel() for f in fields]
    data = np.column_stack(cols) if cols else np.empty((0, 0))
    header = ",".join(f"field{i}" for i in range(len(fields)))
    np.savetxt(path, data, delimiter=",", header=header, comments="")
