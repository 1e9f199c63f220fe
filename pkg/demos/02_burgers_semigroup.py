"""Learning the viscous Burgers' evolution operator from data.

Generates a small dataset with the pseudospectral solver, trains a random
feature model with Fourier-space features, evaluates it on unseen initial
conditions, and demonstrates the two headline properties: evaluation on a
mesh the model never saw, and time upscaling by repeated composition.

Desk-scale settings keep this to about a minute; raise n, n_test, and m
toward the defaults in rfm.experiments for production-quality error.
"""

import numpy as np

from rfm.burgers import BurgersProblem, FourierFeatureSpec, semigroup_compose_eval, solve_batch
from rfm.fields import Field, Grid, relative_l2_error, subsample
from rfm.grf import GrfSpec, draw_coefficients, synthesize
from rfm.model import Dataset, FourierFeatures, expected_relative_test_error, predict, train

n, n_test, m = 128, 64, 256
master = Grid(1, 513, "periodic")
train_grid = Grid(1, 129, "periodic")
prior = GrfSpec(tau=7.0, regularity=2.5)
prob = BurgersProblem(viscosity=1e-2, final_time=0.5)

# solve once on the master mesh, keep snapshots at T and 2T
print(f"solving {n + n_test} initial conditions on K = {master.points_per_axis} ...")
ics = np.stack([
    synthesize(prior, draw_coefficients(prior, prior.resolve_truncation(master), (1, i)), master)
    for i in range(n + n_test)
])
snaps = solve_batch(prob, ics, master, snapshot_times=[0.5, 1.0])

def restrict(stack, grid):
    return [subsample(Field(master, v), grid) for v in stack]

data = Dataset(restrict(ics[:n], train_grid), restrict(snaps[0.5][:n], train_grid), train_grid)
test = Dataset(restrict(ics[n:], train_grid), restrict(snaps[0.5][n:], train_grid), train_grid)

family = FourierFeatures.sample(FourierFeatureSpec(), m, train_grid, seed=2)
model = train(family, data, lam=0.0)
print(f"trained m = {m} features on n = {n} pairs at K = {train_grid.points_per_axis}")
print(f"relative test error at T:      {expected_relative_test_error(model, test):.4f}")

# mesh transfer: same coefficients, different resolution, no retraining
for k_new in (65, 257):
    grid_new = Grid(1, k_new, "periodic")
    test_new = Dataset(restrict(ics[n:], grid_new), restrict(snaps[0.5][n:], grid_new), grid_new)
    err = expected_relative_test_error(model, test_new)
    print(f"same model evaluated at K = {k_new}: {err:.4f}")

# time upscaling: compose the learned half-second map to reach t = 1
errs = []
for a, y in zip(restrict(ics[n:], train_grid), restrict(snaps[1.0][n:], train_grid)):
    errs.append(relative_l2_error(y, semigroup_compose_eval(model, a, 2)))
print(f"composed model vs. t = 2T truth: {np.mean(errs):.4f}")
