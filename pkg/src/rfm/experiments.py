"""Config-driven experiment harness: dataset generation, training runs,
mesh-transfer and composed-evolution evaluations, m-sweeps, and CSV/plot
exports.

Experiments are described by a YAML file (nested key-value). Every output
artifact embeds a hash of the resolved configuration so results remain
traceable; re-running the same configuration reproduces dataset and model
files byte for byte (result tables append rows that are identical except
for wall time).
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import os
import time

import numpy as np
import yaml

from . import burgers as _burgers
from . import darcy as _darcy
from . import grf as _grf
from . import kernels as _kernels
from . import model as _model
from .fields import DIRICHLET, Field, Grid, PERIODIC, load_fields, save_fields, subsample

RESULT_COLUMNS = [
    "experiment", "problem", "K_train", "K_test", "m", "n",
    "lambda", "compose", "error", "wall_time_s", "config_hash",
]

_DEFAULTS = {
    "burgers": {
        "experiment": "burgers",
        "problem": "burgers",
        "output_dir": "runs/burgers",
        "seeds": {"data": 1, "features": 2},
        "dataset": {
            "n_train": 512,
            "n_test": 500,
            "master_points": 513,
            "resolutions": [129],
            "prior": {"tau": 7.0, "regularity": 2.5},
        },
        "burgers": {"viscosity": 0.01, "final_time": 1.0, "compose_max": 1},
        "model": {
            "m": 1024,
            "ridge": 0.0,
            "train_points": 129,
            "features": {
                "filter_delta": 0.0025,
                "filter_beta": 4.0,
                "gain": 1024.0,
                "theta_tau": 5.0,
                "theta_regularity": 2.0,
            },
        },
    },
    "darcy": {
        "experiment": "darcy",
        "problem": "darcy",
        "output_dir": "runs/darcy",
        "seeds": {"data": 1, "features": 2},
        "dataset": {
            "n_train": 256,
            "n_test": 500,
            "master_points": 129,
            "resolutions": [33],
            "prior": {"tau": 3.0, "regularity": 2.0, "a_plus": 12.0, "a_minus": 3.0},
        },
        "darcy": {"source": 1.0},
        "model": {
            "m": 512,
            "ridge": 1e-8,
            "train_points": 33,
            "features": {
                "s_plus": 1.0 / 12.0,
                "s_minus": -1.0 / 3.0,
                "sigmoid_delta": 0.15,
                "theta_tau": 7.5,
                "theta_regularity": 2.0,
                "smoothing_eta": 1e-4,
                "smoothing_dt": 0.03,
                "smoothing_steps": 34,
                "source": 1.0,
            },
        },
    },
    "brownian-bridge": {
        "experiment": "brownian-bridge",
        "problem": "brownian-bridge",
        "output_dir": "runs/brownian-bridge",
        "seeds": {"data": 1, "features": 2},
        "dataset": {
            "n_train": 16,
            "n_test": 8,
            "master_points": 65,
            "resolutions": [65],
            "prior": {"modes": 63},
        },
        "model": {"m": 8, "ridge": 0.0, "train_points": 65, "features": {"modes": 63}},
    },
}


def _deep_update(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


class ExperimentConfig:
    """Resolved experiment description with paper-default hyperparameters."""

    def __init__(self, raw: dict):
        problem = raw.get("problem")
        if problem not in _DEFAULTS:
            raise ValueError(f"unknown problem {problem!r}")
        self.data = _deep_update(_DEFAULTS[problem], raw)

    @classmethod
    def load(cls, path, overrides: dict | None = None):
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        cfg = cls(raw)
        for dotted, value in (overrides or {}).items():
            cfg.set(dotted, value)
        return cfg

    def set(self, dotted: str, value):
        node = self.data
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value

    def __getitem__(self, key):
        return self.data[key]

    @property
    def problem(self) -> str:
        return self.data["problem"]

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    def hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.data, fh, sort_keys=True)

    # -- grids ------------------------------------------------------------

    def grid(self, points: int) -> Grid:
        if self.problem == "burgers":
            return Grid(1, points, PERIODIC)
        return Grid(2, points, DIRICHLET) if self.problem == "darcy" else Grid(1, points, DIRICHLET)

    def master_grid(self) -> Grid:
        return self.grid(self.data["dataset"]["master_points"])

    def train_grid(self) -> Grid:
        return self.grid(self.data["model"]["train_points"])

    # -- model building ----------------------------------------------------

    def feature_family(self, m: int | None = None) -> _model.FeatureFamily:
        m = m if m is not None else self.data["model"]["m"]
        feats = self.data["model"]["features"]
        seed = (self.data["seeds"]["features"], m)
        grid = self.train_grid()
        if self.problem == "burgers":
            spec = _burgers.FourierFeatureSpec(
                filter_delta=feats["filter_delta"],
                filter_beta=feats["filter_beta"],
                gain=feats["gain"],
                theta_measure=_grf.GrfSpec(
                    tau=feats["theta_tau"],
                    regularity=feats["theta_regularity"],
                    boundary=_grf.PERIODIC_1D,
                ),
            )
            return _model.FourierFeatures.sample(spec, m, grid, seed)
        if self.problem == "darcy":
            spec = _darcy.PredictorCorrectorSpec(
                s_plus=feats["s_plus"],
                s_minus=feats["s_minus"],
                sigmoid_delta=feats["sigmoid_delta"],
                theta_measure=_grf.GrfSpec(
                    tau=feats["theta_tau"],
                    regularity=feats["theta_regularity"],
                    boundary=_grf.NEUMANN_2D,
                ),
                smoothing_eta=feats["smoothing_eta"],
                smoothing_dt=feats["smoothing_dt"],
                smoothing_steps=feats["smoothing_steps"],
                source=feats["source"],
            )
            return _model.PredictorCorrectorFeatures.sample(spec, m, grid, seed)
        return _model.BrownianBridgeFeatures.sample(feats["modes"], m, seed)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def dataset_path(out_dir, role, kind, points, compose=1):
    tag = f"_j{compose}" if compose > 1 else ""
    return os.path.join(out_dir, "data", f"{role}_{kind}{tag}_K{points}.fld")


def generate_dataset(config: ExperimentConfig) -> list:
    """Write train/test datasets at the master resolution's nested coarsenings.

    Returns the list of files written. Burgers outputs are stored at the
    final time T and, when ``compose_max`` > 1, at every multiple j*T for
    the test split (the composed-evolution targets).
    """
    out_dir = config.output_dir
    os.makedirs(os.path.join(out_dir, "data"), exist_ok=True)
    config.save(os.path.join(out_dir, "config.yaml"))
    ds = config.data["dataset"]
    n_train, n_test = ds["n_train"], ds["n_test"]
    master = config.master_grid()
    resolutions = sorted(set(ds["resolutions"]) | {master.points_per_axis})
    meta = {"config_hash": config.hash(), "problem": config.problem}
    written = []

    if config.problem == "burgers":
        prior = _grf.GrfSpec(tau=ds["prior"]["tau"], regularity=ds["prior"]["regularity"])
        seed = config.data["seeds"]["data"]
        inputs = np.stack(
            [
                _grf.synthesize(prior, _grf.draw_coefficients(
                    prior, prior.resolve_truncation(master), (seed, i)), master)
                for i in range(n_train + n_test)
            ]
        )
        bcfg = config.data["burgers"]
        prob = _burgers.BurgersProblem(bcfg["viscosity"], bcfg["final_time"])
        j_max = bcfg["compose_max"]
        times = [bcfg["final_time"] * j for j in range(1, j_max + 1)]
        try:
            snaps = _burgers.solve_batch(prob, inputs, master, snapshot_times=times)
        except FloatingPointError as exc:
            raise RuntimeError(f"data generation aborted: {exc}") from exc
        splits = {"train": slice(0, n_train), "test": slice(n_train, n_train + n_test)}
        for points in resolutions:
            target = config.grid(points)
            for role, sl in splits.items():
                if sl.stop - sl.start == 0:
                    continue
                ins = [subsample(Field(master, v), target) for v in inputs[sl]]
                written.append(dataset_path(out_dir, role, "inputs", points))
                save_fields(written[-1], ins, meta)
                for j in range(1, j_max + 1):
                    if j > 1 and role == "train":
                        continue
                    outs = [subsample(Field(master, v), target)
                            for v in snaps[bcfg["final_time"] * j][sl]]
                    written.append(dataset_path(out_dir, role, "outputs", points, j))
                    save_fields(written[-1], outs, meta)
    elif config.problem == "darcy":
        prior = _grf.LevelSetSpec(
            ds["prior"]["a_plus"], ds["prior"]["a_minus"],
            _grf.GrfSpec(tau=ds["prior"]["tau"], regularity=ds["prior"]["regularity"],
                         boundary=_grf.NEUMANN_2D),
        )
        prob = _darcy.DarcyProblem(config.data["darcy"]["source"])
        seed = config.data["seeds"]["data"]
        ins_m, outs_m = [], []
        for i in range(n_train + n_test):
            a = _grf.sample_levelset(prior, master, (seed, i))
            try:
                outs_m.append(_darcy.darcy_solve_fd(prob, a))
            except FloatingPointError as exc:
                raise RuntimeError(f"data generation aborted at sample {i}: {exc}") from exc
            ins_m.append(a)
        splits = {"train": (0, n_train), "test": (n_train, n_train + n_test)}
        for points in resolutions:
            target = config.grid(points)
            for role, (lo, hi) in splits.items():
                if hi - lo == 0:
                    continue
                for kind, src in (("inputs", ins_m), ("outputs", outs_m)):
                    fields = [subsample(f, target) for f in src[lo:hi]]
                    written.append(dataset_path(out_dir, role, kind, points))
                    save_fields(written[-1], fields, meta)
    else:  # brownian-bridge verification data: random sine-series fields
        seed = config.data["seeds"]["data"]
        modes = ds["prior"]["modes"]
        for points in resolutions:
            target = config.grid(points)
            for role, count, off in (("train", n_train, 0), ("test", n_test, n_train)):
                if count == 0:
                    continue
                ins = [
                    _kernels.bb_feature_eval(
                        np.random.default_rng((seed, off + i, 0)).standard_normal(modes), target)
                    for i in range(count)
                ]
                outs = [
                    _kernels.bb_feature_eval(
                        np.random.default_rng((seed, off + i, 1)).standard_normal(modes), target)
                    for i in range(count)
                ]
                for kind, fields in (("inputs", ins), ("outputs", outs)):
                    written.append(dataset_path(out_dir, role, kind, points))
                    save_fields(written[-1], fields, meta)
    return written


def load_dataset(config: ExperimentConfig, role: str, points: int, compose: int = 1) -> _model.Dataset:
    out_dir = config.output_dir
    ins, meta_i = load_fields(dataset_path(out_dir, role, "inputs", points))
    outs, meta_o = load_fields(dataset_path(out_dir, role, "outputs", points, compose))
    prov = {"role": role, "points": points, "compose": compose, **meta_i}
    return _model.Dataset(ins, outs, ins[0].grid, prov)


# ---------------------------------------------------------------------------
# Result table
# ---------------------------------------------------------------------------


def results_path(config: ExperimentConfig) -> str:
    return os.path.join(config.output_dir, "results.csv")


def append_rows(path, rows: list[dict]):
    exists = os.path.exists(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        if not exists:
            writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in RESULT_COLUMNS})


def read_rows(path) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _row(config, model, k_test, error, wall, compose=1, m=None, n=None):
    return {
        "experiment": config.data["experiment"],
        "problem": config.problem,
        "K_train": config.data["model"]["train_points"],
        "K_test": k_test,
        "m": model.family.m if m is None else m,
        "n": n if n is not None else model.metadata.get("n", ""),
        "lambda": model.ridge,
        "compose": compose,
        "error": "" if error is None else f"{error:.6e}",
        "wall_time_s": f"{wall:.3f}",
        "config_hash": config.hash(),
    }


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def model_path(config: ExperimentConfig, m: int | None = None) -> str:
    m = m if m is not None else config.data["model"]["m"]
    return os.path.join(config.output_dir, "models", f"model_m{m}.rfm")


def run_training(config: ExperimentConfig, m: int | None = None):
    """Train on the configured split, save the model, append one result row.

    Returns (model, error); the error is None when there is no test split.
    """
    t0 = time.perf_counter()
    points = config.data["model"]["train_points"]
    train_data = load_dataset(config, "train", points)
    family = config.feature_family(m)
    ridge = config.data["model"]["ridge"]
    model = _model.train(family, train_data, ridge)
    os.makedirs(os.path.join(config.output_dir, "models"), exist_ok=True)
    _model.save_model(model_path(config, m), model, {"config_hash": config.hash()})
    error = None
    if config.data["dataset"]["n_test"] > 0:
        test_data = load_dataset(config, "test", points)
        error = _model.expected_relative_test_error(model, test_data)
    wall = time.perf_counter() - t0
    append_rows(results_path(config), [
        _row(config, model, points, error, wall, n=len(train_data))
    ])
    return model, error


def run_eval(config: ExperimentConfig, model: _model.TrainedModel, points: int,
             compose: int = 1):
    """Evaluate a trained model on the test split at one resolution."""
    t0 = time.perf_counter()
    test_data = load_dataset(config, "test", points, compose)
    if compose == 1:
        error = _model.expected_relative_test_error(model, test_data)
    else:
        errs = []
        for a, y in zip(test_data.inputs, test_data.outputs):
            pred = _burgers.semigroup_compose_eval(model, a, compose)
            errs.append(_model_relative(y, pred))
        error = float(np.mean(errs))
    wall = time.perf_counter() - t0
    row = _row(config, model, points, error, wall, compose=compose)
    append_rows(results_path(config), [row])
    return error


def _model_relative(y, pred):
    from .fields import relative_l2_error

    return relative_l2_error(y, pred)


def run_mesh_transfer(config: ExperimentConfig, model=None, resolutions=None) -> dict:
    """One row per test resolution; the model is fixed throughout."""
    if model is None:
        model = _model.load_model(model_path(config))
    resolutions = resolutions or config.data["dataset"]["resolutions"]
    errors = {}
    for points in resolutions:
        errors[points] = run_eval(config, model, points)
        if points <= 17:
            print(f"note: K={points} is low resolution; error is dominated by "
                  "discretization effects")
    return errors


def run_semigroup_experiment(config: ExperimentConfig, model=None,
                             j_max: int | None = None) -> dict:
    """Composed-model errors against the j*T evolution targets, j = 1..j_max."""
    if model is None:
        model = _model.load_model(model_path(config))
    if j_max is None:
        j_max = config.data["burgers"]["compose_max"]
    points = config.data["model"]["train_points"]
    errors = {}
    for j in range(1, j_max + 1):
        errors[j] = run_eval(config, model, points, compose=j)
    trend = [errors[j] for j in sorted(errors)]
    if any(b < a for a, b in zip(trend, trend[1:])):
        print("warning: composed error is not non-decreasing in j")
    return errors


def run_m_sweep(config: ExperimentConfig, m_values) -> dict:
    """Retrain with freshly sampled features for each m; returns {m: error}."""
    errors = {}
    for m in m_values:
        _, err = run_training(config, m=m)
        errors[m] = err
    return errors


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def export_results(table_path, out_dir, fmt: str = "csv"):
    """Write the collected rows plus plot-ready data files.

    Produces ``results_export.csv`` (always), ``plot_error_vs_K.csv`` from
    mesh-transfer rows, and ``plot_error_vs_m.csv`` from m-sweep rows with a
    Monte Carlo reference column c*m^(-1/2) fitted to the largest m.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported export format {fmt!r}")
    rows = read_rows(table_path)
    os.makedirs(out_dir, exist_ok=True)
    export_path = os.path.join(out_dir, "results_export.csv")
    with open(export_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    written = [export_path]

    plain = [r for r in rows if r["error"] and int(r.get("compose", 1) or 1) == 1]
    transfer = {}
    for r in plain:
        key = (r["experiment"], r["m"])
        transfer.setdefault(key, {})[int(r["K_test"])] = float(r["error"])
    path_k = os.path.join(out_dir, "plot_error_vs_K.csv")
    with open(path_k, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "m", "K_test", "error"])
        for (exp, m), series in sorted(transfer.items()):
            for points in sorted(series):
                writer.writerow([exp, m, points, f"{series[points]:.6e}"])
    written.append(path_k)

    sweeps = {}
    for r in plain:
        if r["K_test"] == r["K_train"]:
            sweeps.setdefault(r["experiment"], {})[int(r["m"])] = float(r["error"])
    path_m = os.path.join(out_dir, "plot_error_vs_m.csv")
    with open(path_m, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "m", "error", "mc_reference"])
        for exp, series in sorted(sweeps.items()):
            ms = sorted(series)
            scale = series[ms[-1]] * np.sqrt(ms[-1])
            for m in ms:
                writer.writerow([exp, m, f"{series[m]:.6e}", f"{scale / np.sqrt(m):.6e}"])
    written.append(path_m)
    return written


# ---------------------------------------------------------------------------
# Verification and provenance
# ---------------------------------------------------------------------------


def check_provenance(out_dir) -> list:
    """Verify that every artifact under ``out_dir`` embeds the config hash."""
    cfg = ExperimentConfig.load(os.path.join(out_dir, "config.yaml"))
    expect = cfg.hash()
    bad = []
    data_dir = os.path.join(out_dir, "data")
    if os.path.isdir(data_dir):
        for name in sorted(os.listdir(data_dir)):
            _, meta = load_fields(os.path.join(data_dir, name))
            if meta.get("config_hash") != expect:
                bad.append(name)
    model_dir = os.path.join(out_dir, "models")
    if os.path.isdir(model_dir):
        for name in sorted(os.listdir(model_dir)):
            mdl = _model.load_model(os.path.join(model_dir, name))
            if mdl.metadata.get("config_hash") != expect:
                bad.append(name)
    rows = read_rows(os.path.join(out_dir, "results.csv"))
    for i, row in enumerate(rows):
        if row["config_hash"] != expect:
            bad.append(f"results.csv row {i}")
    return bad


def run_verification(report=print) -> bool:
    """Kernel-side checks: training-path equivalence with the kernel ridge
    oracle, the discrete operator identity, and the Monte Carlo rates."""
    ok = True

    def check(name, passed, detail):
        nonlocal ok
        ok = ok and passed
        report(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    grid = Grid(1, 65, DIRICHLET)
    family = _model.BrownianBridgeFeatures.sample(modes=63, m=8, seed=11)
    rng = np.random.default_rng(42)

    def rand_field():
        x = grid.axis_points()
        coef = rng.standard_normal(6)
        return Field(grid, sum(c * np.sin((j + 1) * np.pi * x) for j, c in enumerate(coef)))

    data = _model.Dataset([rand_field() for _ in range(16)],
                          [rand_field() for _ in range(16)], grid)
    probes = [rand_field() for _ in range(5)]
    for lam in (0.0, 1e-3):
        model = _model.train(family, data, lam)
        oracle = _kernels.kernel_ridge_oracle(_kernels.EmpiricalKernelEval(family, grid), data, lam)
        gap = max(float(np.max(np.abs(_model.predict(model, a).values - oracle(a).values)))
                  for a in probes)
        check(f"normal equations match kernel ridge oracle (lambda={lam:g})",
              gap <= 1e-8, f"max pointwise gap {gap:.3e}")

    a_mat, a_star, t_mat = _kernels.discrete_feature_operator(family, data)
    dev = float(np.max(np.abs(a_mat @ a_star - t_mat)))
    check("discrete A A* equals kernel integral operator", dev <= 1e-10, f"max dev {dev:.3e}")

    xs = np.linspace(1 / 17, 16 / 17, 16)
    exact = _kernels.bb_kernel_exact(xs[:, None], xs[None, :])
    errs = []
    for m in (100, 1000, 10000):
        th = _kernels.sample_bb_thetas(128, m, seed=2)
        errs.append(float(np.max(np.abs(_kernels.bb_empirical_kernel(th, xs, xs) - exact))))
    slope = float(np.polyfit(np.log([100, 1000, 10000]), np.log(errs), 1)[0])
    check("empirical kernel converges at the Monte Carlo rate",
          -0.65 <= slope <= -0.35, f"log-log slope {slope:.3f}")

    mid_grid = Grid(1, 65, DIRICHLET)
    variances = []
    for m in (100, 1000, 10000):
        vals = []
        for rep in range(40):
            th = _kernels.sample_bb_thetas(63, m, seed=(300, m, rep))
            proj = _kernels.monte_carlo_project(lambda t: 1.0,
                                                _model.BrownianBridgeFeatures(th))
            vals.append(proj(Field(mid_grid, np.zeros(mid_grid.shape))).values[32])
        variances.append(float(np.var(vals)))
    vslope = float(np.polyfit(np.log([100, 1000, 10000]), np.log(variances), 1)[0])
    check("Monte Carlo projection variance decays like 1/m",
          -1.3 <= vslope <= -0.7, f"log-log slope {vslope:.3f}")
    return ok
