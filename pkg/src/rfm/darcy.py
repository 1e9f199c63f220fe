"""Darcy flow on the unit square: finite-difference data generation, an
FFT-based fast Poisson solver, heat-equation coefficient smoothing, and
predictor-corrector random features.

The data-generating solver discretizes -div(a grad u) = f with a
conservative five-point stencil, harmonic averaging of the coefficient at
cell faces, and homogeneous Dirichlet boundary conditions. The feature map
replaces the variable-coefficient solve with two constant-coefficient
Poisson solves: a randomized prediction and a randomized correction driven
by the advective term grad(log a_eps) . grad(p0), where a_eps is the
heat-smoothed coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse
import scipy.sparse.linalg

from .fields import Field, Grid, PERIODIC
from .grf import GrfSpec, NEUMANN_2D


def _require_2d(grid: Grid):
    if grid.dim != 2 or grid.boundary == PERIODIC:
        raise ValueError("operation requires a 2D tensor grid")


@dataclass(frozen=True)
class DarcyProblem:
    """-div(a grad u) = f on (0,1)^2, u = 0 on the boundary; f is fixed to 1."""

    source: float = 1.0


def _face_harmonic(a: np.ndarray, axis: int) -> np.ndarray:
    """Harmonic mean of adjacent node values along ``axis``."""
    if axis == 0:
        left, right = a[:-1, :], a[1:, :]
    else:
        left, right = a[:, :-1], a[:, 1:]
    return 2.0 * left * right / (left + right)


def darcy_operator(a: Field) -> scipy.sparse.csr_matrix:
    """Sparse SPD matrix of the conservative stencil on interior nodes."""
    _require_2d(a.grid)
    if np.any(a.values <= 0):
        raise ValueError("coefficient must be strictly positive")
    r = a.grid.points_per_axis
    h = a.grid.h
    av = a.values
    # face coefficients between node pairs, harmonic average
    ax2 = _face_harmonic(av, 0)  # between rows (x2 direction), shape (r-1, r)
    ax1 = _face_harmonic(av, 1)  # between columns (x1 direction), shape (r, r-1)
    ni = r - 2
    idx = np.arange(ni * ni).reshape(ni, ni)
    diag = (
        ax1[1:-1, :-1]  # west faces of interior nodes
        + ax1[1:-1, 1:]  # east
        + ax2[:-1, 1:-1]  # south
        + ax2[1:, 1:-1]  # north
    )
    rows, cols, vals = [], [], []
    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    # west neighbors (x1 - h)
    rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel())
    vals.append(-ax1[1:-1, 1:-1].ravel())
    # east neighbors
    rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel())
    vals.append(-ax1[1:-1, 1:-1].ravel())
    # south neighbors (x2 - h)
    rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel())
    vals.append(-ax2[1:-1, 1:-1].ravel())
    # north neighbors
    rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel())
    vals.append(-ax2[1:-1, 1:-1].ravel())
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ni * ni, ni * ni),
    )
    return (mat / h**2).tocsr()


def darcy_solve_fd(prob: DarcyProblem, a: Field, f: Field | None = None) -> Field:
    """Solve the Darcy problem for one coefficient field.

    The right-hand side defaults to the problem's constant source. The
    solution vanishes identically on the boundary ring.
    """
    mat = darcy_operator(a)
    r = a.grid.points_per_axis
    if f is None:
        rhs_full = np.full(a.grid.shape, float(prob.source))
    else:
        if f.grid != a.grid:
            raise ValueError("source grid mismatch")
        rhs_full = f.values
    rhs = rhs_full[1:-1, 1:-1].ravel()
    sol = scipy.sparse.linalg.spsolve(mat, rhs)
    resid = np.linalg.norm(mat @ sol - rhs)
    if not np.all(np.isfinite(sol)) or resid > 1e-8 * max(np.linalg.norm(rhs), 1e-300):
        raise FloatingPointError("Darcy solve did not converge")
    out = np.zeros(a.grid.shape)
    out[1:-1, 1:-1] = sol.reshape(r - 2, r - 2)
    return Field(a.grid, out)


# ---------------------------------------------------------------------------
# Fast Poisson solver (discrete sine transform)
# ---------------------------------------------------------------------------


def poisson_eigenvalues(r: int) -> np.ndarray:
    """Eigenvalues of the five-point -Laplacian on the (r-2)^2 interior."""
    ni = r - 2
    h = 1.0 / (r - 1)
    s = (2.0 / h**2) * (1.0 - np.cos(np.pi * np.arange(1, ni + 1) / (ni + 1)))
    return s[:, None] + s[None, :]


def fast_poisson_interior(rhs_interior: np.ndarray, r: int) -> np.ndarray:
    """Solve -Lap5 p = rhs on the interior via DST-I diagonalization.

    ``rhs_interior`` may carry leading batch dimensions; the last two axes
    are the (r-2)^2 interior nodes.
    """
    lam = poisson_eigenvalues(r)
    coeff = scipy.fft.dstn(rhs_interior, type=1, axes=(-2, -1), workers=-1)
    coeff /= lam
    return scipy.fft.idstn(coeff, type=1, axes=(-2, -1), overwrite_x=True, workers=-1)


def fast_poisson_dirichlet(rhs: Field) -> Field:
    """Solve -Lap5 p = rhs with homogeneous Dirichlet boundary values."""
    _require_2d(rhs.grid)
    r = rhs.grid.points_per_axis
    out = np.zeros(rhs.grid.shape)
    out[1:-1, 1:-1] = fast_poisson_interior(rhs.values[1:-1, 1:-1], r)
    return Field(rhs.grid, out)


# ---------------------------------------------------------------------------
# Coefficient smoothing
# ---------------------------------------------------------------------------


def smooth_coefficient_heat(a: Field, eta: float = 1e-4, dt: float = 0.03,
                            steps: int = 34) -> Field:
    """Explicit heat smoothing with reflecting (Neumann) boundaries.

    Runs ``steps`` forward-Euler steps of v_t = eta * Lap v; the defaults
    evolve one time unit. The trapezoid-quadrature spatial mean is
    conserved exactly by the reflected stencil.
    """
    _require_2d(a.grid)
    h = a.grid.h
    c = eta * dt / h**2
    if c > 0.25:
        raise ValueError(
            f"explicit step unstable: eta*dt/h^2 = {c:.3g} exceeds the 1/4 bound"
        )
    v = a.values.copy()
    for _ in range(steps):
        p = np.pad(v, 1, mode="reflect")
        v = v + c * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * v)
    return Field(a.grid, v)


# ---------------------------------------------------------------------------
# Predictor-corrector random features
# ---------------------------------------------------------------------------


def sigma_gamma(r, s_plus: float, s_minus: float, delta: float):
    """Thresholded sigmoid with range (s_minus, s_plus) and slope scale delta."""
    r = np.asarray(r, dtype=np.float64)
    return (s_plus - s_minus) / (1.0 + np.exp(-r / delta)) + s_minus


@dataclass(frozen=True)
class PredictorCorrectorSpec:
    """Hyperparameters of the randomized predictor-corrector feature map."""

    s_plus: float = 1.0 / 12.0
    s_minus: float = -1.0 / 3.0
    sigmoid_delta: float = 0.15
    theta_measure: GrfSpec = field(
        default_factory=lambda: GrfSpec(tau=7.5, regularity=2.0, boundary=NEUMANN_2D)
    )
    smoothing_eta: float = 1e-4
    smoothing_dt: float = 0.03
    smoothing_steps: int = 34
    source: float = 1.0

    def __post_init__(self):
        if self.s_minus > self.s_plus:
            raise ValueError("need s_minus <= s_plus")
        if self.sigmoid_delta <= 0:
            raise ValueError("sigmoid delta must be positive")
        if self.theta_measure.boundary != NEUMANN_2D:
            raise ValueError("theta measure must be neumann-2d")

    def smooth(self, a: Field) -> Field:
        return smooth_coefficient_heat(
            a, self.smoothing_eta, self.smoothing_dt, self.smoothing_steps
        )


def _gradient(values: np.ndarray, h: float):
    """(d/dx1, d/dx2): centered differences inside, one-sided on the boundary ring."""
    g2, g1 = np.gradient(values, h)
    return g1, g2


def predictor_corrector_prepare(a: Field, spec: PredictorCorrectorSpec):
    """Input-dependent quantities shared by every feature evaluation:
    base right-hand side f/a_eps and the gradient of log a_eps."""
    if np.any(a.values <= 0):
        raise ValueError("coefficient must be strictly positive")
    a_eps = spec.smooth(a)
    base_rhs = spec.source / a_eps.values
    glog1, glog2 = _gradient(np.log(a_eps.values), a.grid.h)
    return base_rhs, glog1, glog2


def predictor_corrector_feature(a: Field, theta1: Field, theta2: Field,
                                spec: PredictorCorrectorSpec,
                                randomize: bool = True) -> Field:
    """One feature evaluation: corrected pressure p1 (vanishes on the boundary).

    With ``randomize=False`` the two sigmoid terms are dropped, leaving the
    deterministic predictor-corrector surrogate for the Darcy solve.
    """
    _require_2d(a.grid)
    if theta1.grid != a.grid or theta2.grid != a.grid:
        raise ValueError("theta fields must live on the coefficient grid")
    base_rhs, glog1, glog2 = predictor_corrector_prepare(a, spec)
    r = a.grid.points_per_axis
    if randomize:
        rhs0 = base_rhs + sigma_gamma(theta1.values, spec.s_plus, spec.s_minus, spec.sigmoid_delta)
        rhs1 = base_rhs + sigma_gamma(theta2.values, spec.s_plus, spec.s_minus, spec.sigmoid_delta)
    else:
        rhs0 = rhs1 = base_rhs
    p0 = np.zeros(a.grid.shape)
    p0[1:-1, 1:-1] = fast_poisson_interior(rhs0[1:-1, 1:-1], r)
    gp1, gp2 = _gradient(p0, a.grid.h)
    advect = glog1 * gp1 + glog2 * gp2
    p1 = np.zeros(a.grid.shape)
    p1[1:-1, 1:-1] = fast_poisson_interior((rhs1 + advect)[1:-1, 1:-1], r)
    return Field(a.grid, p1)


def precompute_feature_statics(sig1: np.ndarray, sig2: np.ndarray, r: int) -> dict:
    """Input-independent pieces of the batched feature evaluation.

    The feature map is affine in the per-feature sigmoid fields, so the
    predictor solves P(sigma(theta1)) and their gradients can be reused for
    every input once the evaluation grid is fixed. ``sig1``/``sig2`` are the
    thresholded fields of the two parameter draws, shape (m, r, r).
    """
    m = sig1.shape[0]
    s1 = np.zeros((m, r, r))
    s1[:, 1:-1, 1:-1] = fast_poisson_interior(sig1[:, 1:-1, 1:-1], r)
    h = 1.0 / (r - 1)
    g2, g1 = np.gradient(s1, h, axis=(-2, -1))
    return {"r": r, "sig2": sig2, "grad1": g1, "grad2": g2}


def predictor_corrector_batch(a: Field, statics: dict,
                              spec: PredictorCorrectorSpec) -> np.ndarray:
    """Vectorized feature evaluation for one input against precomputed
    per-feature statics (see `precompute_feature_statics`).

    Splits p0 = P(f/a_eps) + P(sigma(theta1)) by linearity of the Poisson
    solve; only the corrector solve remains batched per input. Agrees with
    `predictor_corrector_feature` to rounding.
    """
    if a.grid.points_per_axis != statics["r"]:
        raise ValueError("statics were prepared for a different grid")
    base_rhs, glog1, glog2 = predictor_corrector_prepare(a, spec)
    r = statics["r"]
    m = statics["sig2"].shape[0]
    p0_base = np.zeros(a.grid.shape)
    p0_base[1:-1, 1:-1] = fast_poisson_interior(base_rhs[1:-1, 1:-1], r)
    gb1, gb2 = _gradient(p0_base, a.grid.h)
    shared = base_rhs + glog1 * gb1 + glog2 * gb2
    rhs = shared + statics["sig2"] + glog1 * statics["grad1"] + glog2 * statics["grad2"]
    out = np.zeros((m, r, r))
    out[:, 1:-1, 1:-1] = fast_poisson_interior(rhs[:, 1:-1, 1:-1], r)
    return out
