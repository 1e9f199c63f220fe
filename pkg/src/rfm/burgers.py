"""Viscous Burgers' equation: pseudospectral data generation, Fourier-space
random features, and repeated-composition (time upscaling) evaluation.

The solver integrates u_t + (u^2/2)_x = eps * u_xx with periodic boundary
conditions on (0,1) using an integrating-factor RK4 scheme: the diffusion
term is handled exactly in Fourier space and the advective term is stepped
with classical RK4 and 2/3-rule dealiasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Field, Grid, PERIODIC
from .grf import GrfSpec, PERIODIC_1D

DT_CAP = 0.01


@dataclass(frozen=True)
class BurgersProblem:
    viscosity: float = 1e-2
    final_time: float = 1.0
    # forcing is fixed at zero: solutions keep zero mean and decay to rest

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ValueError("viscosity must be positive")
        if self.final_time <= 0:
            raise ValueError("final_time must be positive")


def default_dt(grid: Grid) -> float:
    """CFL-style step: dt = min(0.5/K, cap)."""
    return min(0.5 / grid.points_per_axis, DT_CAP)


def _require_periodic(grid: Grid):
    if grid.dim != 1 or grid.boundary != PERIODIC:
        raise ValueError("Burgers solver requires a 1D periodic grid")


def solve_batch(prob: BurgersProblem, values: np.ndarray, grid: Grid,
                dt: float | None = None, snapshot_times=None) -> dict:
    """Integrate a batch of initial conditions, returning {time: values array}.

    ``values`` has shape (batch, n_stored). Snapshot times must be
    increasing; the final time of ``prob`` is appended if absent. Each
    segment between snapshots is integrated with an integer number of steps
    of size <= dt.
    """
    _require_periodic(grid)
    n = grid.stored_per_axis
    vals = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if vals.shape[1] != n:
        raise ValueError("initial values do not match grid")
    if dt is None:
        dt = default_dt(grid)
    times = sorted(set(snapshot_times or []) | {prob.final_time})
    if any(t <= 0 for t in times):
        raise ValueError("snapshot times must be positive")

    k = np.arange(n // 2 + 1)
    k_ang = 2 * np.pi * k
    lam = -prob.viscosity * k_ang**2
    dealias = k <= n // 3
    deriv = -0.5j * k_ang * dealias

    def nonlin(uhat):
        u = np.fft.irfft(uhat, n=n)
        return deriv * np.fft.rfft(u * u)

    uhat = np.fft.rfft(vals)
    out = {}
    t = 0.0
    for t_next in times:
        span = t_next - t
        steps = max(1, int(np.ceil(span / dt - 1e-12)))
        h = span / steps
        e_half = np.exp(0.5 * h * lam)
        e_full = e_half**2
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(steps):
                n1 = nonlin(uhat)
                n2 = nonlin(e_half * (uhat + 0.5 * h * n1))
                n3 = nonlin(e_half * uhat + 0.5 * h * n2)
                n4 = nonlin(e_full * uhat + h * e_half * n3)
                uhat = e_full * uhat + (h / 6.0) * (
                    e_full * n1 + 2.0 * e_half * (n2 + n3) + n4
                )
        if not np.all(np.isfinite(uhat)):
            raise FloatingPointError(f"Burgers solve blew up by t = {t_next:g}")
        t = t_next
        out[t_next] = np.fft.irfft(uhat, n=n)
    return out


def burgers_solve(prob: BurgersProblem, a: Field, dt: float | None = None) -> Field:
    """Solution u(T, .) for a single initial condition."""
    snaps = solve_batch(prob, a.values[None, :], a.grid, dt=dt)
    return Field(a.grid, snaps[prob.final_time][0])


# ---------------------------------------------------------------------------
# Fourier-space random features
# ---------------------------------------------------------------------------


def filter_chi(k, delta: float, beta: float):
    """Wavenumber filter: chi(k) = sigma_chi(2*pi*|k|*delta) with
    sigma_chi(r) = max(0, min(2r, (r + 1/2)^(-beta)))."""
    r = 2 * np.pi * np.abs(np.asarray(k, dtype=np.float64)) * delta
    return np.maximum(0.0, np.minimum(2 * r, (r + 0.5) ** (-beta)))


def elu(r):
    r = np.asarray(r, dtype=np.float64)
    return np.where(r >= 0, r, np.expm1(np.minimum(r, 0.0)))


@dataclass(frozen=True)
class FourierFeatureSpec:
    """Hyperparameters of the filtered-random-convolution feature map.

    ``gain`` is a fixed dimensionless amplification applied to the filtered
    convolution before the ELU. Under the default input/parameter measures
    the raw convolution has pointwise scale ~1e-3, which would leave the
    activation in its linear regime; gain ~1e3 drives it into the nonlinear
    regime where test errors reach their observed floor. Being a constant,
    it does not depend on the evaluation mesh.
    """

    filter_delta: float = 0.0025
    filter_beta: float = 4.0
    theta_measure: GrfSpec = field(
        default_factory=lambda: GrfSpec(tau=5.0, regularity=2.0, boundary=PERIODIC_1D)
    )
    gain: float = 1024.0

    def __post_init__(self):
        if self.filter_delta <= 0 or self.filter_beta <= 0:
            raise ValueError("filter parameters must be positive")
        if self.theta_measure.boundary != PERIODIC_1D:
            raise ValueError("theta measure must be periodic-1d")
        if self.gain <= 0:
            raise ValueError("gain must be positive")


def feature_multiplier(theta_hat: np.ndarray, spec: FourierFeatureSpec) -> np.ndarray:
    """Per-wavenumber multiplier chi(k) * theta_hat(k) applied to Fa."""
    k = np.arange(theta_hat.shape[-1])
    return filter_chi(k, spec.filter_delta, spec.filter_beta) * theta_hat


def fourier_feature(a: Field, theta: Field, spec: FourierFeatureSpec) -> Field:
    """ELU(F^{-1}(chi * Fa * Ftheta)) on the (shared, periodic) grid of ``a``.

    F is the Fourier-coefficient transform (k = 0 entry equals the mean),
    so the construction is independent of the evaluation resolution; the
    result is real by conjugate symmetry of the half-spectrum product.
    """
    _require_periodic(a.grid)
    if theta.grid != a.grid:
        raise ValueError("a and theta must share one grid")
    n = a.grid.stored_per_axis
    a_hat = np.fft.rfft(a.values) / n
    theta_hat = np.fft.rfft(theta.values) / n
    conv = np.fft.irfft(feature_multiplier(theta_hat, spec) * a_hat * n, n=n)
    return Field(a.grid, elu(spec.gain * conv))


def semigroup_compose_eval(model, a: Field, j: int) -> Field:
    """j-fold composition of a trained model with itself: emulates evolution
    to time j*T from a model trained on the time-T map."""
    from .model import predict

    if j < 1:
        raise ValueError("composition count must be >= 1")
    out = a
    for _ in range(j):
        out = predict(model, out)
    return out
