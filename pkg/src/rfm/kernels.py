"""Kernel-side verification of the random feature machinery.

Random features implicitly define an operator-valued kernel; this module
makes that kernel explicit at small scale so the training engine can be
checked against it. It provides Brownian bridge features (whose exact
kernel min(x,x') - x*x' is known in closed form), empirical kernels built
from sampled features, a dense kernel ridge regression oracle over the
empirical kernel, and the Monte Carlo projection of coefficient functions.
Everything here is oracle-scale by design; dimension guards refuse inputs
large enough to make the dense linear algebra meaningless.
"""

from __future__ import annotations

import numpy as np

from .fields import Field, Grid, PERIODIC
from .model import Dataset, FeatureFamily

ORACLE_SIZE_LIMIT = 200_000


# ---------------------------------------------------------------------------
# Brownian bridge features and their exact kernel
# ---------------------------------------------------------------------------


def bb_feature_values(thetas: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate Brownian bridge features at points ``x``.

    phi(x; theta) = sum_{j<=J} theta_j * (j*pi)^(-1) * sqrt(2) * sin(j*pi*x);
    ``thetas`` has shape (..., J), the result shape (..., len(x)).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    j = np.arange(1, thetas.shape[-1] + 1)
    basis = np.sqrt(2.0) * np.sin(np.outer(j, x) * np.pi) / (j[:, None] * np.pi)
    return thetas @ basis


def bb_feature_eval(theta: np.ndarray, grid: Grid) -> Field:
    """One Brownian bridge draw realized as a field on a 1D grid over (0,1)."""
    if grid.dim != 1 or grid.boundary == PERIODIC:
        raise ValueError("Brownian bridge features live on a 1D non-periodic grid")
    return Field(grid, bb_feature_values(theta, grid.axis_points())[0])


def default_bb_modes(grid: Grid) -> int:
    """Truncation at the grid's resolvable sine modes."""
    return grid.points_per_axis - 2


def sample_bb_thetas(modes: int, m: int, seed) -> np.ndarray:
    return np.stack(
        [np.random.default_rng((seed, j)).standard_normal(modes) for j in range(m)]
    )


def bb_kernel_exact(x, x_prime):
    """Covariance of the Brownian bridge: min(x, x') - x*x' on [0,1]^2."""
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1) or np.any(x_prime < 0) or np.any(x_prime > 1):
        raise ValueError("arguments must lie in [0, 1]")
    return np.minimum(x, x_prime) - x * x_prime


def bb_empirical_kernel(thetas: np.ndarray, x, x_prime) -> np.ndarray:
    """Monte Carlo kernel (1/m) sum_j phi(x; th_j) phi(x'; th_j) on a point grid."""
    px = bb_feature_values(thetas, np.atleast_1d(x))
    pxp = bb_feature_values(thetas, np.atleast_1d(x_prime))
    return (px.T @ pxp) / thetas.shape[0]


# ---------------------------------------------------------------------------
# Scalar random feature regression (the one-dimensional verification track)
# ---------------------------------------------------------------------------


def bb_rfm_train(thetas: np.ndarray, xs: np.ndarray, ys: np.ndarray, lam: float):
    """Coefficients of the scalar Brownian bridge RFM on point data."""
    from .model import solve_ridge

    m = thetas.shape[0]
    phi = bb_feature_values(thetas, np.asarray(xs, dtype=np.float64))  # (m, n)
    gram = (phi @ phi.T) / m
    gram = np.triu(gram) + np.triu(gram, 1).T
    rhs = phi @ np.asarray(ys, dtype=np.float64)
    alpha, _ = solve_ridge(gram, rhs, lam)
    return alpha


def bb_rfm_eval(thetas: np.ndarray, alpha: np.ndarray, x) -> np.ndarray:
    phi = bb_feature_values(thetas, np.atleast_1d(x))
    return (alpha @ phi) / thetas.shape[0]


def bb_kernel_interpolant(xs: np.ndarray, ys: np.ndarray, lam: float = 0.0):
    """Kernel ridge regression with the exact Brownian bridge kernel.

    At lam = 0 this is the piecewise linear nonparametric interpolant the
    random feature model approaches as m grows. Returns a callable on
    points of (0,1).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    K = bb_kernel_exact(xs[:, None], xs[None, :])
    if lam > 0:
        beta = np.linalg.solve(K + lam * np.eye(len(xs)), ys)
    else:
        beta = np.linalg.lstsq(K, ys, rcond=None)[0]

    def interpolant(x):
        return bb_kernel_exact(np.atleast_1d(x)[:, None], xs[None, :]) @ beta

    return interpolant


# ---------------------------------------------------------------------------
# Operator-valued empirical kernel
# ---------------------------------------------------------------------------


class EmpiricalKernelEval:
    """k_m(a, a') = (1/m) sum_j phi(a; th_j) (x) phi(a'; th_j) for a feature family."""

    def __init__(self, family: FeatureFamily, grid: Grid):
        family.check_grid(grid)
        self.family = family
        self.grid = grid

    def apply(self, a: Field, a_prime: Field, y: Field) -> Field:
        if a.grid != self.grid or a_prime.grid != self.grid or y.grid != self.grid:
            raise ValueError("all arguments must live on the evaluation grid")
        w = self.grid.quad_weights().ravel()
        phi_a = self.family.feature_matrix(a).reshape(self.family.m, -1)
        phi_ap = self.family.feature_matrix(a_prime).reshape(self.family.m, -1)
        coeff = phi_ap @ (w * y.values.ravel())
        vals = (coeff @ phi_a) / self.family.m
        return Field(self.grid, vals.reshape(self.grid.shape))


def empirical_kernel_apply(ek: EmpiricalKernelEval, a: Field, a_prime: Field,
                           y: Field) -> Field:
    return ek.apply(a, a_prime, y)


def kernel_ridge_oracle(ek: EmpiricalKernelEval, data: Dataset, lam: float):
    """Dense kernel ridge regression over the empirical kernel.

    Solves the block representer system
        sum_j (k_m(a_i, a_j) + lam * delta_ij) beta_j = y_i
    for the functions beta_j and returns the predictor
        F(a) = sum_j k_m(a, a_j) beta_j
    as a callable Field -> Field. At lam = 0 the minimum-norm solution of
    the (singular) block system is used. Exists purely to cross-check the
    normal-equation training path; refuses systems past the oracle scale.
    """
    n = len(data)
    if n == 0:
        raise ValueError("dataset is empty")
    grid = data.grid
    nvals = grid.num_values
    size = n * nvals
    if size > ORACLE_SIZE_LIMIT:
        raise ValueError(
            f"oracle refuses block system of size {size} > {ORACLE_SIZE_LIMIT}"
        )
    family = ek.family
    m = family.m
    w = grid.quad_weights().ravel()
    phis = np.stack(
        [family.feature_matrix(a).reshape(m, -1) for a in data.inputs]
    )  # (n, m, nvals)
    phis_w = phis * w
    # block (i, j) of the kernel matrix: (1/m) Phi_i^T (Phi_j * w)
    big = np.zeros((size, size))
    for i in range(n):
        for j in range(n):
            big[i * nvals : (i + 1) * nvals, j * nvals : (j + 1) * nvals] = (
                phis[i].T @ phis_w[j]
            ) / m
    ystack = np.concatenate([y.values.ravel() for y in data.outputs])
    if lam > 0:
        beta = np.linalg.solve(big + lam * np.eye(size), ystack)
    else:
        evals, evecs = np.linalg.eigh(big)
        cutoff = size * np.finfo(np.float64).eps * max(evals.max(), 0.0)
        inv = np.where(evals > cutoff, 1.0 / np.where(evals > cutoff, evals, 1.0), 0.0)
        beta = evecs @ (inv * (evecs.T @ ystack))
    betas = beta.reshape(n, nvals)
    # F(a) = sum_j k(a, a_j) beta_j = (1/m) Phi_a^T gamma with the reduced
    # coefficients gamma_l = sum_j <phi(a_j; th_l), beta_j>
    gamma = np.einsum("jlv,jv->l", phis_w, betas)

    def predictor(a: Field) -> Field:
        phi_a = family.feature_matrix(a).reshape(m, -1)
        vals = (gamma @ phi_a) / m
        return Field(a.grid, vals.reshape(a.grid.shape))

    return predictor


def monte_carlo_project(c, family: FeatureFamily):
    """Empirical-measure projection (1/m) sum_j c(theta_j) phi(.; theta_j).

    ``c`` is a callable on feature parameters. Returns a map Field -> Field;
    for input-independent families the argument only supplies the grid.
    """
    cvec = np.array([float(c(theta)) for theta in family.thetas])

    def projected(a: Field) -> Field:
        phi = family.feature_matrix(a).reshape(family.m, -1)
        vals = (cvec @ phi) / family.m
        return Field(a.grid, vals.reshape(a.grid.shape))

    return projected


def discrete_feature_operator(family: FeatureFamily, data: Dataset):
    """Matrices of the feature-expansion operator, its adjoint, and the
    kernel integral operator under the empirical measures.

    A maps coefficient vectors to stacked fields over the data inputs,
    A* is its adjoint w.r.t. the (1/m)-weighted and empirical-data inner
    products, and T = A A* equals the kernel integral operator of the
    empirical kernel; the identity holds exactly at this discrete level.
    Returns (A, A_star, T_kernel).
    """
    n = len(data)
    grid = data.grid
    nvals = grid.num_values
    if n * nvals > ORACLE_SIZE_LIMIT:
        raise ValueError("refusing to build dense operators at this size")
    m = family.m
    w = grid.quad_weights().ravel()
    phis = np.stack([family.feature_matrix(a).reshape(m, -1) for a in data.inputs])
    a_mat = np.concatenate([phis[i].T for i in range(n)], axis=0) / m  # (n*nvals, m)
    a_star = np.concatenate([phis[i] * w for i in range(n)], axis=1) / n  # (m, n*nvals)
    t_mat = np.zeros((n * nvals, n * nvals))
    for i in range(n):
        for j in range(n):
            t_mat[i * nvals : (i + 1) * nvals, j * nvals : (j + 1) * nvals] = (
                phis[i].T @ (phis[j] * w)
            ) / (m * n)
    return a_mat, a_star, t_mat
