"""Gaussian random field sampler: closed-form eigenpairs, KL synthesis,
determinism, and the level-set pushforward."""

import numpy as np
import pytest

from rfm.fields import Field, Grid, inner_product_l2
from rfm.grf import (
    GrfSpec,
    LevelSetSpec,
    draw_coefficients,
    eigenpairs_neumann_2d,
    eigenpairs_periodic_1d,
    pushforward_levelset,
    sample_grf,
    sample_levelset,
    synthesize,
)

# closed forms evaluated independently of the library:
#   1d periodic: lam_0 = 1/tau, lam_j = tau^(2a-1) * (4 pi^2 j^2 + tau^2)^(-a)
#   2d neumann:  lam_k = tau^(2a-2) * (pi^2 |k|^2 + tau^2)^(-a)
LAM1_TAU7_A25 = 7.0**4 * (4.0 * np.pi**2 + 49.0) ** -2.5
LAM10_TAU3_A2 = 9.0 * (np.pi**2 + 9.0) ** -2


class TestSpecValidation:
    def test_regularity_bound(self):
        with pytest.raises(ValueError):
            GrfSpec(tau=1.0, regularity=0.5, boundary="periodic-1d")
        with pytest.raises(ValueError):
            GrfSpec(tau=1.0, regularity=1.0, boundary="neumann-2d")

    def test_unknown_boundary(self):
        with pytest.raises(ValueError):
            GrfSpec(tau=1.0, regularity=2.0, boundary="dirichlet-3d")


class TestEigenpairsPeriodic:
    spec = GrfSpec(tau=7.0, regularity=2.5)

    def test_constant_mode(self):
        g = Grid(1, 64, "periodic")
        lam0, phi0 = eigenpairs_periodic_1d(self.spec, 1, g)[0]
        assert lam0 == pytest.approx(1.0 / 7.0, rel=1e-14)
        assert np.all(phi0.values == 1.0)

    def test_first_pair_value(self):
        g = Grid(1, 64, "periodic")
        pairs = eigenpairs_periodic_1d(self.spec, 3, g)
        assert pairs[1][0] == pytest.approx(LAM1_TAU7_A25, rel=1e-13)
        assert pairs[2][0] == pytest.approx(LAM1_TAU7_A25, rel=1e-13)

    def test_ordering_nonincreasing(self):
        g = Grid(1, 128, "periodic")
        lams = [lam for lam, _ in eigenpairs_periodic_1d(self.spec, 41, g)]
        assert all(a >= b for a, b in zip(lams, lams[1:]))

    def test_unit_norms(self):
        g = Grid(1, 257, "periodic")
        for lam, phi in eigenpairs_periodic_1d(self.spec, 11, g):
            assert inner_product_l2(phi, phi) == pytest.approx(1.0, abs=1e-6)

    def test_aliasing_guard(self):
        g = Grid(1, 17, "periodic")  # 16 stored points -> j <= 7 -> 15 modes
        eigenpairs_periodic_1d(self.spec, 15, g)
        with pytest.raises(ValueError):
            eigenpairs_periodic_1d(self.spec, 16, g)


class TestEigenpairsNeumann:
    spec = GrfSpec(tau=3.0, regularity=2.0, boundary="neumann-2d")

    def test_first_eigenvalue(self):
        g = Grid(2, 33, "dirichlet")
        pairs = eigenpairs_neumann_2d(self.spec, 2, g)
        assert pairs[0][0] == pytest.approx(LAM10_TAU3_A2, rel=1e-13)
        assert pairs[0][0] == pytest.approx(0.025276498901552463, rel=1e-12)

    def test_axis_mode_shape(self):
        # the (1,0) eigenfunction is sqrt(2)*cos(pi*x1), constant in x2;
        # lexicographic tie-break orders it second after (0,1)
        g = Grid(2, 33, "dirichlet")
        pairs = eigenpairs_neumann_2d(self.spec, 2, g)
        x1, _ = g.coords()
        phi10 = pairs[1][1].values
        assert np.max(np.abs(phi10 - np.sqrt(2.0) * np.cos(np.pi * x1))) < 1e-12
        assert np.max(np.abs(phi10 - phi10[0:1, :])) < 1e-12

    def test_orthonormal_gram(self):
        g = Grid(2, 65, "dirichlet")
        pairs = eigenpairs_neumann_2d(self.spec, 25, g)
        w = g.quad_weights().ravel()
        mat = np.stack([phi.values.ravel() for _, phi in pairs])
        gram = (mat * w) @ mat.T
        assert np.max(np.abs(gram - np.eye(25))) < 1e-6

    def test_tie_break_lexicographic(self):
        g = Grid(2, 33, "dirichlet")
        pairs = eigenpairs_neumann_2d(self.spec, 8, g)
        lams = [lam for lam, _ in pairs]
        assert all(a >= b for a, b in zip(lams, lams[1:]))
        # (0,1) and (1,0) share an eigenvalue; lexicographic order puts (0,1) first,
        # whose eigenfunction varies along x2 (axis -2) and is constant in x1
        first = pairs[0][1].values
        assert np.max(np.abs(first - first[:, 0:1])) < 1e-12

    def test_aliasing_guard(self):
        g = Grid(2, 5, "dirichlet")  # kmax=4 -> 24 usable modes
        eigenpairs_neumann_2d(self.spec, 24, g)
        with pytest.raises(ValueError):
            eigenpairs_neumann_2d(self.spec, 25, g)


class TestSampling:
    spec = GrfSpec(tau=7.0, regularity=2.5)

    def test_deterministic(self):
        g = Grid(1, 129, "periodic")
        f1 = sample_grf(self.spec, g, (0, 3))
        f2 = sample_grf(self.spec, g, (0, 3))
        assert np.array_equal(f1.values, f2.values)
        f3 = sample_grf(self.spec, g, (0, 4))
        assert not np.array_equal(f1.values, f3.values)

    def test_zero_mean(self):
        g = Grid(1, 129, "periodic")
        for i in range(5):
            f = sample_grf(self.spec, g, (1, i))
            assert abs(f.values.mean()) < 1e-12

    def test_pointwise_variance_identity(self):
        # sample variance at x = 0.5 vs sum of lam_k * phi_k(0.5)^2 over
        # the retained modes (the KL variance identity)
        g = Grid(1, 65, "periodic")
        pairs = eigenpairs_periodic_1d(self.spec, 63, g)
        mid = g.stored_per_axis // 2  # x = 0.5
        target = sum(lam * phi.values[mid] ** 2 for lam, phi in pairs[1:])  # mean-zero: drop const
        draws = np.array(
            [sample_grf(self.spec, g, (2, i)).values[mid] for i in range(2000)]
        )
        assert np.var(draws) == pytest.approx(target, rel=0.05)

    def test_two_point_covariance(self):
        g = Grid(1, 65, "periodic")
        pairs = eigenpairs_periodic_1d(self.spec, 63, g)
        i1, i2 = 10, 40
        target = sum(lam * phi.values[i1] * phi.values[i2] for lam, phi in pairs[1:])
        draws = np.array(
            [sample_grf(self.spec, g, (3, i)).values[[i1, i2]] for i in range(4000)]
        )
        emp = np.mean(draws[:, 0] * draws[:, 1])
        assert emp == pytest.approx(target, abs=6.0 * 0.075 / np.sqrt(4000))

    def test_synthesis_band_limited_extension(self):
        # the same draw realized on a finer grid has identical node values
        coarse, fine = Grid(1, 65, "periodic"), Grid(1, 257, "periodic")
        coeffs = draw_coefficients(self.spec, self.spec.resolve_truncation(coarse), (4, 0))
        on_coarse = synthesize(self.spec, coeffs, coarse)
        on_fine = synthesize(self.spec, coeffs, fine)
        assert np.max(np.abs(on_fine[::4] - on_coarse)) < 1e-12

    def test_truncation_guard(self):
        g = Grid(1, 17, "periodic")
        spec = GrfSpec(tau=7.0, regularity=2.5, truncation=20)
        with pytest.raises(ValueError):
            sample_grf(spec, g, 0)

    def test_2d_sampling_zero_mean(self):
        spec = GrfSpec(tau=3.0, regularity=2.0, boundary="neumann-2d")
        g = Grid(2, 33, "dirichlet")
        f = sample_grf(spec, g, (5, 1))
        w = g.quad_weights()
        assert abs(np.sum(w * f.values)) < 1e-12


class TestLevelSet:
    ls = LevelSetSpec(12.0, 3.0, GrfSpec(tau=3.0, regularity=2.0, boundary="neumann-2d"))

    def test_constant_signs(self):
        g = Grid(2, 17, "dirichlet")
        plus = pushforward_levelset(self.ls, Field(g, np.ones(g.shape)))
        minus = pushforward_levelset(self.ls, Field(g, -np.ones(g.shape)))
        assert np.all(plus.values == 12.0)
        assert np.all(minus.values == 3.0)

    def test_two_values_only(self):
        g = Grid(2, 33, "dirichlet")
        a = sample_levelset(self.ls, g, (6, 0))
        assert set(np.unique(a.values)) == {3.0, 12.0}

    def test_idempotent_on_positive_image(self):
        g = Grid(2, 17, "dirichlet")
        a = sample_levelset(self.ls, g, (6, 1))
        again = pushforward_levelset(self.ls, a)
        assert np.all(again.values == 12.0)  # both 3 and 12 are positive

    def test_zero_assigned_minus(self):
        g = Grid(2, 17, "dirichlet")
        out = pushforward_levelset(self.ls, Field(g, np.zeros(g.shape)))
        assert np.all(out.values == 3.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            LevelSetSpec(3.0, 12.0, self.ls.underlying)
