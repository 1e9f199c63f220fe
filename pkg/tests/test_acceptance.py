"""Acceptance suite: every desk-scale criterion with its stated tolerance.

Each test prints one pass/fail line with the measured quantities. The PDE
experiments run the real pipeline end to end (dataset generation at a fine
master resolution, subsampled training data, normal-equation training,
evaluation) at desk scale; expect a few minutes of total runtime.

Run with:  pytest tests/test_acceptance.py -v -s
"""

import numpy as np
import pytest

from rfm.experiments import (
    ExperimentConfig,
    generate_dataset,
    run_m_sweep,
    run_mesh_transfer,
    run_semigroup_experiment,
    run_training,
)
from rfm.fields import Field, Grid, relative_l2_error
from rfm.kernels import (
    EmpiricalKernelEval,
    bb_empirical_kernel,
    bb_kernel_exact,
    kernel_ridge_oracle,
    sample_bb_thetas,
)
from rfm.model import BrownianBridgeFeatures, Dataset, predict, train

pytestmark = pytest.mark.acceptance


def report(num, name, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {num} ({name}): {detail}")
    assert passed, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# Shared experiment runs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def burgers_main(tmp_path_factory):
    """T=1 run: n=512, n'=500, m=1024, trained at K=129, master K=513."""
    out = tmp_path_factory.mktemp("burgers_main")
    cfg = ExperimentConfig({
        "experiment": "burgers-main",
        "problem": "burgers",
        "output_dir": str(out),
        "dataset": {"n_train": 512, "n_test": 500, "master_points": 513,
                    "resolutions": [33, 65, 129, 257, 513]},
        "burgers": {"viscosity": 0.01, "final_time": 1.0, "compose_max": 1},
        "model": {"m": 1024, "ridge": 0.0, "train_points": 129},
    })
    generate_dataset(cfg)
    model, error = run_training(cfg)
    return cfg, model, error


@pytest.fixture(scope="session")
def burgers_upscale(tmp_path_factory):
    """T=0.5 run with composed-evolution targets at j*T for j = 1..4."""
    out = tmp_path_factory.mktemp("burgers_upscale")
    cfg = ExperimentConfig({
        "experiment": "burgers-upscale",
        "problem": "burgers",
        "output_dir": str(out),
        "dataset": {"n_train": 512, "n_test": 500, "master_points": 513,
                    "resolutions": [129]},
        "burgers": {"viscosity": 0.01, "final_time": 0.5, "compose_max": 4},
        "model": {"m": 1024, "ridge": 0.0, "train_points": 129},
    })
    generate_dataset(cfg)
    model, error = run_training(cfg)
    return cfg, model, error


@pytest.fixture(scope="session")
def darcy_main(tmp_path_factory):
    """Darcy run: n=256, n'=500, m=512, trained at r=33, master r=129."""
    out = tmp_path_factory.mktemp("darcy_main")
    cfg = ExperimentConfig({
        "experiment": "darcy-main",
        "problem": "darcy",
        "output_dir": str(out),
        "dataset": {"n_train": 256, "n_test": 500, "master_points": 129,
                    "resolutions": [33, 65, 129]},
        "model": {"m": 512, "ridge": 1e-8, "train_points": 33},
    })
    generate_dataset(cfg)
    model, error = run_training(cfg)
    return cfg, model, error


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def test_criterion_1_burgers_error(burgers_main):
    _, _, error = burgers_main
    report(1, "Burgers desk-scale error", error <= 0.06,
           f"e = {error:.4f} (bound 0.06, paper 0.031)")


def test_criterion_2_monte_carlo_rate(burgers_main):
    cfg, _, error_1024 = burgers_main
    errors = run_m_sweep(cfg, [256, 512])
    errors[1024] = error_1024
    scaled = np.array([errors[m] * np.sqrt(m) for m in (256, 512, 1024)])
    deviation = float(np.max(np.abs(scaled / scaled.mean() - 1.0)))
    detail = (f"errors {errors[256]:.4f}/{errors[512]:.4f}/{errors[1024]:.4f}, "
              f"e*sqrt(m) spread {deviation * 100:.1f}% (band 35%)")
    report(2, "Monte Carlo rate in m", deviation <= 0.35, detail)


def test_criterion_3_time_upscaling(burgers_upscale):
    cfg, model, _ = burgers_upscale
    errors = run_semigroup_experiment(cfg, model, 4)
    seq = [errors[j] for j in (1, 2, 3, 4)]
    monotone = all(b >= a for a, b in zip(seq, seq[1:]))
    ratio = seq[-1] / seq[0]
    detail = ("errors " + "/".join(f"{e:.4f}" for e in seq)
              + f", e(4T)/e(T) = {ratio:.2f} (bound 3.0, paper 2.19)")
    report(3, "time upscaling", monotone and ratio <= 3.0, detail)


def test_criterion_4_mesh_invariance(burgers_main):
    cfg, model, _ = burgers_main
    errors = run_mesh_transfer(cfg, model, [33, 65, 257, 513])
    vals = [errors[k] for k in (33, 65, 257, 513)]
    ratio = max(vals) / min(vals)
    detail = ("errors " + "/".join(f"{e:.4f}" for e in vals)
              + f", max/min = {ratio:.3f} (bound 1.25)")
    report(4, "Burgers mesh invariance", ratio <= 1.25, detail)


def test_criterion_5_darcy_error(darcy_main):
    _, _, error = darcy_main
    report(5, "Darcy desk-scale error", error <= 0.09,
           f"e = {error:.4f} (bound 0.09, paper 0.0381)")


def test_criterion_6_darcy_mesh_invariance(darcy_main):
    cfg, model, _ = darcy_main
    errors = run_mesh_transfer(cfg, model, [33, 65, 129])
    vals = [errors[r] for r in (33, 65, 129)]
    ratio = max(vals) / min(vals)
    detail = ("errors " + "/".join(f"{e:.4f}" for e in vals)
              + f", max/min = {ratio:.3f} (bound 1.35)")
    report(6, "Darcy mesh invariance", ratio <= 1.35, detail)


def test_criterion_7_ridge_equivalence():
    grid = Grid(1, 65, "dirichlet")
    x = grid.axis_points()
    family = BrownianBridgeFeatures.sample(modes=63, m=8, seed=11)
    rng = np.random.default_rng(42)

    def rand_field():
        coef = rng.standard_normal(6)
        return Field(grid, sum(c * np.sin((j + 1) * np.pi * x)
                               for j, c in enumerate(coef)))

    data = Dataset([rand_field() for _ in range(16)],
                   [rand_field() for _ in range(16)], grid)
    probes = [rand_field() for _ in range(5)]
    worst = 0.0
    for lam in (0.0, 1e-3):
        model = train(family, data, lam)
        oracle = kernel_ridge_oracle(EmpiricalKernelEval(family, grid), data, lam)
        gap = max(float(np.max(np.abs(predict(model, a).values - oracle(a).values)))
                  for a in probes)
        worst = max(worst, gap)
    report(7, "normal equations match kernel ridge oracle", worst <= 1e-8,
           f"max pointwise gap {worst:.3e} (bound 1e-8) over lambda in {{0, 1e-3}}")


def test_criterion_8_kernel_convergence_rate():
    xs = np.linspace(1 / 17, 16 / 17, 16)
    exact = bb_kernel_exact(xs[:, None], xs[None, :])
    ms = (100, 1000, 10_000)
    errs = [float(np.max(np.abs(bb_empirical_kernel(sample_bb_thetas(128, m, seed=2),
                                                    xs, xs) - exact)))
            for m in ms]
    slope = float(np.polyfit(np.log(ms), np.log(errs), 1)[0])
    report(8, "Brownian bridge kernel convergence", -0.65 <= slope <= -0.35,
           f"log-log slope {slope:.3f} (band -0.5 +/- 0.15)")


def test_criterion_9_solver_verification():
    from rfm.burgers import BurgersProblem, burgers_solve
    from rfm.darcy import DarcyProblem, darcy_solve_fd, fast_poisson_dirichlet

    # Burgers: RK4 self-convergence order
    g = Grid(1, 129, "periodic")
    xg = g.axis_points()
    a = Field(g, 0.5 * np.sin(2 * np.pi * xg) + 0.2 * np.cos(4 * np.pi * xg))
    prob = BurgersProblem(viscosity=1e-2, final_time=0.25)
    sols = {f: burgers_solve(prob, a, dt=4e-3 / f).values for f in (1, 2, 4)}
    order_t = float(np.log2(np.linalg.norm(sols[1] - sols[2])
                            / np.linalg.norm(sols[2] - sols[4])))

    # Darcy: manufactured-solution spatial order
    errs = []
    for r in (17, 33, 65):
        grid = Grid(2, r, "dirichlet")
        x1, x2 = grid.coords()
        f = Field(grid, 2 * np.pi**2 * np.sin(np.pi * x1) * np.sin(np.pi * x2))
        exact = Field(grid, np.sin(np.pi * x1) * np.sin(np.pi * x2))
        u = darcy_solve_fd(DarcyProblem(), Field(grid, np.ones(grid.shape)), f)
        errs.append(relative_l2_error(exact, u))
    order_x = float(np.mean(np.log2(np.array(errs[:-1]) / np.array(errs[1:]))))

    # fast Poisson against an independently assembled dense stencil at r=17
    r = 17
    grid = Grid(2, r, "dirichlet")
    ni, h = r - 2, grid.h
    lap = np.zeros((ni * ni, ni * ni))
    for j in range(ni):
        for i in range(ni):
            k = j * ni + i
            lap[k, k] = 4.0 / h**2
            for dk, cond in ((-1, i > 0), (1, i < ni - 1), (-ni, j > 0), (ni, j < ni - 1)):
                if cond:
                    lap[k, k + dk] = -1.0 / h**2
    rhs = Field(grid, np.random.default_rng(3).standard_normal(grid.shape))
    dense = np.linalg.solve(lap, rhs.values[1:-1, 1:-1].ravel())
    fast = fast_poisson_dirichlet(rhs).values[1:-1, 1:-1].ravel()
    gap = float(np.max(np.abs(dense - fast)))

    ok = abs(order_t - 4.0) <= 0.5 and abs(order_x - 2.0) <= 0.3 and gap <= 1e-10
    report(9, "solver verification suite", ok,
           f"RK4 order {order_t:.2f} (4 +/- 0.5), Darcy order {order_x:.2f} "
           f"(2 +/- 0.3), fast Poisson vs dense {gap:.2e} (bound 1e-10)")


def test_criterion_10_full_scale_configurable(tmp_path):
    # K=1025 and r=257^2 runs are configuration-only changes; prove the
    # paths execute by generating one sample at each full-paper resolution
    cfg_b = ExperimentConfig({
        "experiment": "full-burgers", "problem": "burgers",
        "output_dir": str(tmp_path / "b"),
        "dataset": {"n_train": 1, "n_test": 0, "master_points": 1025,
                    "resolutions": [129]},
        "burgers": {"final_time": 1.0, "compose_max": 1},
        "model": {"m": 4, "train_points": 129},
    })
    files_b = generate_dataset(cfg_b)
    cfg_d = ExperimentConfig({
        "experiment": "full-darcy", "problem": "darcy",
        "output_dir": str(tmp_path / "d"),
        "dataset": {"n_train": 1, "n_test": 0, "master_points": 257,
                    "resolutions": [33]},
        "model": {"m": 4, "train_points": 33},
    })
    files_d = generate_dataset(cfg_d)
    report(10, "full paper scale supported by configuration",
           len(files_b) > 0 and len(files_d) > 0,
           "generated samples at K=1025 and r=257 per axis")
