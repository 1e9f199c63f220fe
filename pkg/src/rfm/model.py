"""Random feature model training and evaluation.

A feature family holds m parameter draws, sampled once and frozen. The
model F(a) = (1/m) * sum_j alpha_j * phi(a; theta_j) is linear in the
trainable coefficients alpha, so training reduces to the m-by-m normal
equations

    (1/m) sum_j <phi(a_j; theta_i), phi(a_j; theta_l)>_{L2} alpha_i
        + lambda * alpha_l  =  sum_j <y_j, phi(a_j; theta_l)>_{L2},

solved by a Cholesky factorization for lambda > 0 and by a truncated-SVD
minimum-norm pseudoinverse for lambda = 0. Feature parameters are stored as
spectral (KL) coefficient vectors, never as grid samples, so a trained
model can be evaluated on any compatible resolution without interpolation.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from . import burgers as _burgers
from . import darcy as _darcy
from . import grf as _grf
from .fields import DIRICHLET, Field, Grid, PERIODIC, relative_l2_error

_MODEL_MAGIC = "RFMODEL 1"


class FeatureFamily:
    """Base class: m frozen parameter draws plus an evaluation rule."""

    kind = "custom"

    def __init__(self, thetas: np.ndarray, seed=None):
        thetas = np.asarray(thetas, dtype=np.float64).copy()
        thetas.flags.writeable = False
        self.thetas = thetas
        self.seed = seed

    @property
    def m(self) -> int:
        return self.thetas.shape[0]

    def check_grid(self, grid: Grid):
        raise NotImplementedError

    def feature_matrix(self, a: Field) -> np.ndarray:
        """All m features evaluated at one input, shape (m, *grid.shape)."""
        raise NotImplementedError

    def predict_values(self, a: Field, coeffs: np.ndarray) -> np.ndarray:
        """(1/m) * coeffs . features(a); families may shortcut the full stack."""
        phi = self.feature_matrix(a).reshape(self.m, -1)
        return ((coeffs @ phi) / self.m).reshape(a.grid.shape)

    def hyperparameters(self) -> dict:
        return {}


class FourierFeatures(FeatureFamily):
    """Filtered random convolutions with ELU activation (Burgers)."""

    kind = "fourier-burgers"

    def __init__(self, spec: _burgers.FourierFeatureSpec, thetas, seed=None):
        super().__init__(thetas, seed)
        self.spec = spec
        self._mult_cache = {}

    @classmethod
    def sample(cls, spec: _burgers.FourierFeatureSpec, m: int, train_grid: Grid, seed):
        trunc = spec.theta_measure.resolve_truncation(train_grid)
        thetas = np.stack(
            [_grf.draw_coefficients(spec.theta_measure, trunc, (seed, j)) for j in range(m)]
        )
        return cls(spec, thetas, seed)

    def check_grid(self, grid: Grid):
        if grid.dim != 1 or grid.boundary != PERIODIC:
            raise ValueError("fourier-burgers features need a 1D periodic grid")

    def _multipliers(self, grid: Grid) -> np.ndarray:
        key = grid.stored_per_axis
        if key not in self._mult_cache:
            n = grid.stored_per_axis
            jmax = min(self.thetas.shape[1], (n - 1) // 2)
            measure = self.spec.theta_measure
            lam = _grf.eigenvalues_periodic_1d(measure, np.arange(1, jmax + 1))
            theta_hat = np.zeros((self.m, n // 2 + 1), dtype=np.complex128)
            theta_hat[:, 1 : jmax + 1] = np.sqrt(lam / 2.0) * (
                self.thetas[:, :jmax, 1] - 1j * self.thetas[:, :jmax, 0]
            )
            self._mult_cache[key] = _burgers.feature_multiplier(theta_hat, self.spec)
        return self._mult_cache[key]

    def feature_matrix(self, a: Field) -> np.ndarray:
        self.check_grid(a.grid)
        n = a.grid.stored_per_axis
        a_hat = np.fft.rfft(a.values) / n
        conv = np.fft.irfft(a_hat * self._multipliers(a.grid) * n, n=n)
        return _burgers.elu(self.spec.gain * conv)

    def hyperparameters(self) -> dict:
        s = self.spec
        return {
            "filter_delta": s.filter_delta,
            "filter_beta": s.filter_beta,
            "gain": s.gain,
            "theta_tau": s.theta_measure.tau,
            "theta_regularity": s.theta_measure.regularity,
        }

    @classmethod
    def from_hyperparameters(cls, hyper: dict, thetas, seed=None):
        spec = _burgers.FourierFeatureSpec(
            filter_delta=hyper["filter_delta"],
            filter_beta=hyper["filter_beta"],
            gain=hyper["gain"],
            theta_measure=_grf.GrfSpec(
                tau=hyper["theta_tau"],
                regularity=hyper["theta_regularity"],
                boundary=_grf.PERIODIC_1D,
            ),
        )
        return cls(spec, thetas, seed)


class PredictorCorrectorFeatures(FeatureFamily):
    """Randomized predictor-corrector Poisson solves (Darcy).

    Each feature carries two independent Gaussian field draws; ``thetas``
    has shape (m, 2, kmax+1, kmax+1).
    """

    kind = "predictor-corrector-darcy"

    def __init__(self, spec: _darcy.PredictorCorrectorSpec, thetas, seed=None):
        super().__init__(thetas, seed)
        self.spec = spec
        self._statics_cache = (None, None)

    @classmethod
    def sample(cls, spec: _darcy.PredictorCorrectorSpec, m: int, train_grid: Grid, seed):
        trunc = spec.theta_measure.resolve_truncation(train_grid)
        thetas = np.stack(
            [
                np.stack(
                    [
                        _grf.draw_coefficients(spec.theta_measure, trunc, (seed, j, pair))
                        for pair in (0, 1)
                    ]
                )
                for j in range(m)
            ]
        )
        return cls(spec, thetas, seed)

    def check_grid(self, grid: Grid):
        if grid.dim != 2 or grid.boundary == PERIODIC:
            raise ValueError("predictor-corrector features need a 2D tensor grid")

    def _statics(self, grid: Grid):
        key = grid.points_per_axis
        if self._statics_cache[0] != key:
            spec = self.spec
            sig = np.stack(
                [
                    [
                        _darcy.sigma_gamma(
                            _grf.synthesize(spec.theta_measure, th, grid),
                            spec.s_plus, spec.s_minus, spec.sigmoid_delta,
                        )
                        for th in pair
                    ]
                    for pair in self.thetas
                ]
            )
            statics = _darcy.precompute_feature_statics(sig[:, 0], sig[:, 1], key)
            self._statics_cache = (key, statics)
        return self._statics_cache[1]

    def feature_matrix(self, a: Field) -> np.ndarray:
        self.check_grid(a.grid)
        return _darcy.predictor_corrector_batch(a, self._statics(a.grid), self.spec)

    def predict_values(self, a: Field, coeffs: np.ndarray) -> np.ndarray:
        """Collapse the coefficient-weighted feature sum into one Poisson solve.

        The corrector solve is linear in its right-hand side, so
        (1/m) sum_l alpha_l P(rhs_l) = P((1/m) sum_l alpha_l rhs_l); the
        alpha-reduced static fields are cached per (grid, coefficients).
        """
        self.check_grid(a.grid)
        statics = self._statics(a.grid)
        key = (a.grid.points_per_axis, hash(coeffs.tobytes()))
        cached = getattr(self, "_reduced_cache", None)
        if cached is None or cached[0] != key:
            scale = coeffs / self.m
            reduced = {
                name: np.einsum("l,lxy->xy", scale, statics[name])
                for name in ("sig2", "grad1", "grad2")
            }
            self._reduced_cache = (key, reduced, float(scale.sum()))
        _, reduced, alpha_mean = self._reduced_cache
        base_rhs, glog1, glog2 = _darcy.predictor_corrector_prepare(a, self.spec)
        r = a.grid.points_per_axis
        p0_base = np.zeros(a.grid.shape)
        p0_base[1:-1, 1:-1] = _darcy.fast_poisson_interior(base_rhs[1:-1, 1:-1], r)
        gb2, gb1 = np.gradient(p0_base, a.grid.h)
        shared = base_rhs + glog1 * gb1 + glog2 * gb2
        rhs = (
            alpha_mean * shared
            + reduced["sig2"]
            + glog1 * reduced["grad1"]
            + glog2 * reduced["grad2"]
        )
        out = np.zeros(a.grid.shape)
        out[1:-1, 1:-1] = _darcy.fast_poisson_interior(rhs[1:-1, 1:-1], r)
        return out

    def hyperparameters(self) -> dict:
        s = self.spec
        return {
            "s_plus": s.s_plus,
            "s_minus": s.s_minus,
            "sigmoid_delta": s.sigmoid_delta,
            "theta_tau": s.theta_measure.tau,
            "theta_regularity": s.theta_measure.regularity,
            "smoothing_eta": s.smoothing_eta,
            "smoothing_dt": s.smoothing_dt,
            "smoothing_steps": s.smoothing_steps,
            "source": s.source,
        }

    @classmethod
    def from_hyperparameters(cls, hyper: dict, thetas, seed=None):
        spec = _darcy.PredictorCorrectorSpec(
            s_plus=hyper["s_plus"],
            s_minus=hyper["s_minus"],
            sigmoid_delta=hyper["sigmoid_delta"],
            theta_measure=_grf.GrfSpec(
                tau=hyper["theta_tau"],
                regularity=hyper["theta_regularity"],
                boundary=_grf.NEUMANN_2D,
            ),
            smoothing_eta=hyper["smoothing_eta"],
            smoothing_dt=hyper["smoothing_dt"],
            smoothing_steps=int(hyper["smoothing_steps"]),
            source=hyper["source"],
        )
        return cls(spec, thetas, seed)


class BrownianBridgeFeatures(FeatureFamily):
    """Brownian bridge draws used as input-independent operator features.

    Each feature is the fixed output field phi(.; theta_j); the induced
    operator-valued kernel is constant over inputs. Used by the
    verification suite, where exact kernel formulas are available.
    """

    kind = "brownian-bridge"

    def __init__(self, thetas, seed=None):
        super().__init__(thetas, seed)

    @classmethod
    def sample(cls, modes: int, m: int, seed):
        thetas = np.stack(
            [np.random.default_rng((seed, j)).standard_normal(modes) for j in range(m)]
        )
        return cls(thetas, seed)

    def check_grid(self, grid: Grid):
        if grid.dim != 1 or grid.boundary == PERIODIC:
            raise ValueError("brownian-bridge features need a 1D non-periodic grid")

    def feature_matrix(self, a: Field) -> np.ndarray:
        self.check_grid(a.grid)
        from .kernels import bb_feature_values

        return bb_feature_values(self.thetas, a.grid.axis_points())

    def hyperparameters(self) -> dict:
        return {"modes": self.thetas.shape[1]}

    @classmethod
    def from_hyperparameters(cls, hyper: dict, thetas, seed=None):
        return cls(thetas, seed)


class CustomFeatures(FeatureFamily):
    """Wraps explicit callables Field -> Field; handy in tests."""

    kind = "custom"

    def __init__(self, fns, grid_check=None):
        super().__init__(np.arange(len(fns), dtype=np.float64)[:, None])
        self.fns = list(fns)
        self._grid_check = grid_check

    def check_grid(self, grid: Grid):
        if self._grid_check is not None:
            self._grid_check(grid)

    def feature_matrix(self, a: Field) -> np.ndarray:
        return np.stack([fn(a).values for fn in self.fns])


_FAMILY_KINDS = {
    cls.kind: cls
    for cls in (FourierFeatures, PredictorCorrectorFeatures, BrownianBridgeFeatures)
}


# ---------------------------------------------------------------------------
# Datasets and training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    inputs: tuple
    outputs: tuple
    grid: Grid
    provenance: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs must have equal length")
        for f in (*self.inputs, *self.outputs):
            if f.grid != self.grid:
                raise ValueError("all dataset fields must share the dataset grid")

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True)
class TrainedModel:
    family: FeatureFamily
    coeffs: np.ndarray
    ridge: float
    train_grid: Grid
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.family.m,):
            raise ValueError("coefficient vector length must equal the feature count")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)


def assemble_normal_system(family: FeatureFamily, data: Dataset):
    """Gram matrix and right-hand side of the normal equations.

    gram[i, l] = (1/m) sum_j <phi(a_j; th_i), phi(a_j; th_l)>_{L2}
    rhs[l]     =       sum_j <y_j, phi(a_j; th_l)>_{L2}

    The Gram matrix is mirrored from its upper triangle after accumulation
    so it is symmetric exactly, not merely to rounding.
    """
    if len(data) == 0:
        raise ValueError("dataset is empty")
    family.check_grid(data.grid)
    m = family.m
    w = data.grid.quad_weights().ravel()
    gram = np.zeros((m, m))
    rhs = np.zeros(m)
    for j, (a, y) in enumerate(zip(data.inputs, data.outputs)):
        phi = family.feature_matrix(a).reshape(m, -1)
        bad = ~np.isfinite(phi)
        if bad.any():
            l = int(np.argwhere(bad.any(axis=1))[0, 0])
            raise FloatingPointError(
                f"non-finite feature evaluation at training pair {j}, feature {l}"
            )
        phi_w = phi * w
        gram += phi_w @ phi.T
        rhs += phi_w @ y.values.ravel()
    gram /= m
    gram = np.triu(gram) + np.triu(gram, 1).T
    return gram, rhs


def solve_ridge(gram: np.ndarray, rhs: np.ndarray, lam: float):
    """Coefficients of (gram + lam*I) alpha = rhs.

    lam > 0: Cholesky solve. lam = 0: minimum-norm solution through a
    truncated eigendecomposition, discarding spectrum below
    m * eps * max_eigenvalue (standard pseudoinverse cutoff).
    Returns (alpha, diagnostics).
    """
    gram = np.asarray(gram, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1] or gram.shape[0] != rhs.shape[0]:
        raise ValueError("shape mismatch in normal system")
    if not np.array_equal(gram, gram.T):
        raise ValueError("gram matrix must be symmetric")
    if lam < 0:
        raise ValueError("ridge parameter must be non-negative")
    m = gram.shape[0]
    if lam > 0:
        c, low = scipy.linalg.cho_factor(gram + lam * np.eye(m))
        alpha = scipy.linalg.cho_solve((c, low), rhs)
        resid = np.linalg.norm((gram + lam * np.eye(m)) @ alpha - rhs)
        diag = {"method": "cholesky", "rank": m,
                "relative_residual": float(resid / max(np.linalg.norm(rhs), 1e-300))}
        return alpha, diag
    evals, evecs = np.linalg.eigh(gram)
    cutoff = m * np.finfo(np.float64).eps * max(evals.max(), 0.0)
    keep = evals > cutoff
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    alpha = evecs @ (inv * (evecs.T @ rhs))
    resid = np.linalg.norm(gram @ alpha - rhs)
    diag = {"method": "truncated-svd", "rank": int(keep.sum()), "cutoff": float(cutoff),
            "relative_residual": float(resid / max(np.linalg.norm(rhs), 1e-300))}
    return alpha, diag


def train(family: FeatureFamily, data: Dataset, lam: float) -> TrainedModel:
    gram, rhs = assemble_normal_system(family, data)
    alpha, diag = solve_ridge(gram, rhs, lam)
    meta = {"n": len(data), "lambda": lam, "seed": family.seed, **diag}
    return TrainedModel(family, alpha, lam, data.grid, meta)


def predict(model: TrainedModel, a: Field) -> Field:
    """(1/m) sum_j alpha_j phi(a; theta_j) on the grid of ``a``.

    Feature parameters are re-synthesized from their stored spectral
    coefficients, so any resolution the feature map supports is valid.
    """
    family = model.family
    family.check_grid(a.grid)
    return Field(a.grid, family.predict_values(a, model.coeffs))


def expected_relative_test_error(model: TrainedModel, test: Dataset) -> float:
    """Mean relative L2 prediction error over a test set."""
    if len(test) == 0:
        raise ValueError("test dataset is empty")
    errs = [
        relative_l2_error(y, predict(model, a))
        for a, y in zip(test.inputs, test.outputs)
    ]
    return float(np.mean(errs))


def empirical_risk(model: TrainedModel, data: Dataset, coeffs=None) -> float:
    """Training objective: sum_j 0.5*||y_j - F(a_j)||^2 + (lambda/2m)*||alpha||^2."""
    alpha = model.coeffs if coeffs is None else np.asarray(coeffs, dtype=np.float64)
    family = model.family
    w = data.grid.quad_weights().ravel()
    total = 0.0
    for a, y in zip(data.inputs, data.outputs):
        phi = family.feature_matrix(a).reshape(family.m, -1)
        diff = y.values.ravel() - (alpha @ phi) / family.m
        total += 0.5 * float(np.sum(w * diff * diff))
    return total + 0.5 * model.ridge / family.m * float(alpha @ alpha)


# ---------------------------------------------------------------------------
# Model container file
#
# Text header terminated by "<end>", then two little-endian float64 blocks:
# the theta spectral coefficients (shape recorded in the header) and the
# coefficient vector alpha.
# ---------------------------------------------------------------------------


def save_model(path, model: TrainedModel, extra_meta: dict | None = None):
    family = model.family
    if family.kind not in _FAMILY_KINDS:
        raise ValueError(f"cannot serialize feature family of kind {family.kind!r}")
    grid = model.train_grid
    lines = [
        _MODEL_MAGIC,
        f"kind = {family.kind}",
        f"m = {family.m}",
        f"lambda = {model.ridge!r}",
        f"seed = {family.seed}",
        f"train_dim = {grid.dim}",
        f"train_points_per_axis = {grid.points_per_axis}",
        f"train_boundary = {grid.boundary}",
        "theta_shape = " + " ".join(str(s) for s in family.thetas.shape),
    ]
    for key, val in family.hyperparameters().items():
        lines.append(f"hyper.{key} = {val!r}")
    meta = {**model.metadata, **(extra_meta or {})}
    for key in sorted(meta):
        lines.append(f"meta.{key} = {meta[key]}")
    lines.append("<end>")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(family.thetas.astype("<f8").tobytes())
        fh.write(model.coeffs.astype("<f8").tobytes())


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii").strip()
        if first != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        header, hyper, meta = {}, {}, {}
        while True:
            line = fh.readline().decode("ascii").strip()
            if line == "<end>":
                break
            key, _, value = line.partition(" = ")
            if key.startswith("hyper."):
                hyper[key[6:]] = _parse_literal(value)
            elif key.startswith("meta."):
                meta[key[5:]] = value
            else:
                header[key] = value
        theta_shape = tuple(int(s) for s in header["theta_shape"].split())
        count = int(np.prod(theta_shape))
        thetas = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(theta_shape)
        m = int(header["m"])
        alpha = np.frombuffer(fh.read(8 * m), dtype="<f8")
    seed = header.get("seed")
    if seed in (None, "None"):
        seed = None
    else:
        try:
            seed = ast.literal_eval(seed)
        except (ValueError, SyntaxError):
            pass
    family = _FAMILY_KINDS[header["kind"]].from_hyperparameters(hyper, thetas, seed)
    grid = Grid(
        dim=int(header["train_dim"]),
        points_per_axis=int(header["train_points_per_axis"]),
        boundary=header["train_boundary"],
    )
    return TrainedModel(family, alpha, float(header["lambda"]), grid, meta)


def _parse_literal(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip("'\"")
