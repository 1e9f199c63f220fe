"""Gaussian random fields with Matern-like covariance, sampled by truncated
Karhunen-Loeve expansion, plus the two-value level-set pushforward used for
high-contrast coefficients.

The covariance operator is tau^(2*alpha-d) * (-Laplacian + tau^2)^(-alpha)
restricted to mean-zero functions. Closed-form eigenpairs are used on the
unit interval with periodic boundary conditions (d=1) and on the unit
square with homogeneous Neumann conditions (d=2). Samples are synthesized
from stored KL coefficient arrays with FFT-type fast summation, so the same
draw can be re-realized exactly on any compatible grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .fields import DIRICHLET, NEUMANN, PERIODIC, Field, Grid

PERIODIC_1D = "periodic-1d"
NEUMANN_2D = "neumann-2d"


@dataclass(frozen=True)
class GrfSpec:
    """Parameters of the Gaussian measure N(0, C).

    ``truncation`` is the largest retained mode index per axis; ``None``
    means "every mode representable without aliasing on the sampling grid"
    (the grid Nyquist limit).
    """

    tau: float
    regularity: float
    boundary: str = PERIODIC_1D
    truncation: int | None = None

    def __post_init__(self):
        if self.boundary not in (PERIODIC_1D, NEUMANN_2D):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        d = self.dim
        if not self.regularity > d / 2:
            raise ValueError(f"regularity must exceed d/2 = {d / 2}")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError("truncation must be a positive mode index")

    @property
    def dim(self) -> int:
        return 1 if self.boundary == PERIODIC_1D else 2

    def grid_compatible(self, grid: Grid) -> bool:
        if self.boundary == PERIODIC_1D:
            return grid.dim == 1 and grid.boundary == PERIODIC
        return grid.dim == 2 and grid.boundary in (NEUMANN, DIRICHLET)

    def max_modes(self, grid: Grid) -> int:
        """Largest alias-free mode index per axis on ``grid``."""
        if self.boundary == PERIODIC_1D:
            return (grid.stored_per_axis - 1) // 2
        return grid.points_per_axis - 1

    def resolve_truncation(self, grid: Grid) -> int:
        limit = self.max_modes(grid)
        if self.truncation is None:
            return limit
        if self.truncation > limit:
            raise ValueError(
                f"truncation {self.truncation} exceeds the {limit} modes "
                f"representable on a grid with {grid.points_per_axis} points per axis"
            )
        return self.truncation


def eigenvalues_periodic_1d(spec: GrfSpec, j: np.ndarray) -> np.ndarray:
    """lambda_j for mode index j >= 0 (j = 0 is the constant mode)."""
    tau, alpha = spec.tau, spec.regularity
    j = np.asarray(j, dtype=np.float64)
    lam = tau ** (2 * alpha - 1) * (4 * np.pi**2 * j**2 + tau**2) ** (-alpha)
    return np.where(j == 0, tau**-1.0, lam)


def eigenvalues_neumann_2d(spec: GrfSpec, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    tau, alpha = spec.tau, spec.regularity
    ksq = np.asarray(k1, dtype=np.float64) ** 2 + np.asarray(k2, dtype=np.float64) ** 2
    return tau ** (2 * alpha - 2) * (np.pi**2 * ksq + tau**2) ** (-alpha)


def eigenpairs_periodic_1d(spec: GrfSpec, count: int, grid: Grid):
    """First ``count`` eigenpairs in non-increasing eigenvalue order.

    Ordering: constant mode first, then per frequency j the sine mode
    before the cosine mode (the pair shares one eigenvalue).
    """
    if spec.boundary != PERIODIC_1D:
        raise ValueError("spec boundary must be periodic-1d")
    if not spec.grid_compatible(grid):
        raise ValueError("grid incompatible with periodic-1d spec")
    jmax = spec.max_modes(grid)
    if count > 2 * jmax + 1:
        raise ValueError(
            f"requested {count} modes but only {2 * jmax + 1} are representable "
            f"without aliasing on this grid"
        )
    x = grid.axis_points()
    pairs = [(float(eigenvalues_periodic_1d(spec, 0)), Field(grid, np.ones_like(x)))]
    for j in range(1, jmax + 1):
        lam = float(eigenvalues_periodic_1d(spec, j))
        pairs.append((lam, Field(grid, np.sqrt(2.0) * np.sin(2 * np.pi * j * x))))
        pairs.append((lam, Field(grid, np.sqrt(2.0) * np.cos(2 * np.pi * j * x))))
        if len(pairs) >= count:
            break
    return pairs[:count]


def eigenpairs_neumann_2d(spec: GrfSpec, count: int, grid: Grid):
    """First ``count`` eigenpairs, non-increasing, ties broken lexicographically
    by the multi-index (k1, k2). The (0,0) mode is excluded: samples are
    constrained to integrate to zero.
    """
    if spec.boundary != NEUMANN_2D:
        raise ValueError("spec boundary must be neumann-2d")
    if not spec.grid_compatible(grid):
        raise ValueError("grid incompatible with neumann-2d spec")
    kmax = spec.max_modes(grid)
    if count > (kmax + 1) ** 2 - 1:
        raise ValueError(
            f"requested {count} modes but only {(kmax + 1) ** 2 - 1} are representable "
            f"without aliasing on this grid"
        )
    k1g, k2g = np.meshgrid(np.arange(kmax + 1), np.arange(kmax + 1), indexing="ij")
    modes = [(int(a), int(b)) for a, b in zip(k1g.ravel(), k2g.ravel()) if (a, b) != (0, 0)]
    lams = {k: float(eigenvalues_neumann_2d(spec, *k)) for k in modes}
    modes.sort(key=lambda k: (-lams[k], k))
    x1, x2 = grid.coords()
    pairs = []
    for k1, k2 in modes[:count]:
        norm = np.sqrt(2.0) if (k1 == 0 or k2 == 0) else 2.0
        phi = norm * np.cos(k1 * np.pi * x1) * np.cos(k2 * np.pi * x2)
        pairs.append((lams[(k1, k2)], Field(grid, phi)))
    return pairs


def draw_coefficients(spec: GrfSpec, truncation: int, rng) -> np.ndarray:
    """i.i.d. standard normal KL coefficients for one draw.

    1D: shape (truncation, 2) holding (sine, cosine) coefficients for
    j = 1..truncation. 2D: shape (truncation+1, truncation+1) indexed by
    (k1, k2), with the (0,0) entry forced to zero (zero spatial mean).
    """
    rng = np.random.default_rng(rng)
    if spec.boundary == PERIODIC_1D:
        return rng.standard_normal((truncation, 2))
    xi = rng.standard_normal((truncation + 1, truncation + 1))
    xi[0, 0] = 0.0
    return xi


def synthesize(spec: GrfSpec, coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Field values of the KL sum with the given coefficients on ``grid``.

    Modes beyond the grid's alias-free limit are dropped, which is what
    makes a stored draw re-realizable on any resolution: on finer grids
    the synthesis is the exact band-limited extension.
    """
    if not spec.grid_compatible(grid):
        raise ValueError("grid incompatible with spec boundary")
    if spec.boundary == PERIODIC_1D:
        return _synthesize_periodic_1d(spec, coeffs, grid)
    return _synthesize_neumann_2d(spec, coeffs, grid)


def _synthesize_periodic_1d(spec, coeffs, grid):
    n = grid.stored_per_axis
    jmax = min(coeffs.shape[0], spec.max_modes(grid))
    lam = eigenvalues_periodic_1d(spec, np.arange(1, jmax + 1))
    # complex coefficient c_j = sqrt(lam_j/2) * (xi_cos - i*xi_sin) reproduces
    # sqrt(lam_j)*(xi_sin*sqrt(2)*sin + xi_cos*sqrt(2)*cos) through irfft
    c = np.zeros(n // 2 + 1, dtype=np.complex128)
    c[1 : jmax + 1] = np.sqrt(lam / 2.0) * (coeffs[:jmax, 1] - 1j * coeffs[:jmax, 0])
    return np.fft.irfft(c * n, n=n)


def _synthesize_neumann_2d(spec, coeffs, grid):
    r = grid.points_per_axis
    kmax = min(coeffs.shape[0] - 1, spec.max_modes(grid))
    k1, k2 = np.meshgrid(np.arange(kmax + 1), np.arange(kmax + 1), indexing="ij")
    norm = np.where((k1 == 0) | (k2 == 0), np.sqrt(2.0), 2.0)
    amp = norm * np.sqrt(eigenvalues_neumann_2d(spec, k1, k2)) * coeffs[: kmax + 1, : kmax + 1]
    amp[0, 0] = 0.0
    # evaluate sum_k amp * cos(k1 pi x1) cos(k2 pi x2) via a type-I DCT per axis
    c = np.zeros((r, r))
    c[: kmax + 1, : kmax + 1] = amp
    c[1 : r - 1, :] *= 0.5
    c[:, 1 : r - 1] *= 0.5
    vals = scipy.fft.dctn(c, type=1)
    # axes: first index of c is k1 (the x1 frequency); fields store x1 last
    return vals.T


def sample_grf(spec: GrfSpec, grid: Grid, seed) -> Field:
    """One mean-zero draw of N(0, C) on ``grid``, deterministic given ``seed``.

    ``seed`` may be anything `numpy.random.default_rng` accepts; pass
    (dataset_seed, sample_index) tuples for counter-style per-sample streams.
    """
    trunc = spec.resolve_truncation(grid)
    coeffs = draw_coefficients(spec, trunc, seed)
    return Field(grid, synthesize(spec, coeffs, grid))


@dataclass(frozen=True)
class LevelSetSpec:
    """Two-value threshold pushforward of a Gaussian field."""

    a_plus: float
    a_minus: float
    underlying: GrfSpec

    def __post_init__(self):
        if not (0 < self.a_minus <= self.a_plus):
            raise ValueError("need 0 < a_minus <= a_plus")


def pushforward_levelset(spec: LevelSetSpec, g: Field) -> Field:
    """a_plus where g > 0, a_minus where g <= 0 (the tie g = 0 is a
    measure-zero event; assigning it to a_minus keeps the map deterministic)."""
    return Field(g.grid, np.where(g.values > 0, spec.a_plus, spec.a_minus))


def sample_levelset(spec: LevelSetSpec, grid: Grid, seed) -> Field:
    return pushforward_levelset(spec, sample_grf(spec.underlying, grid, seed))
