import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fissura.affine import AffineMap
from fissura.crack import horizontal_crack, opening_crack, uncracked
from fissura.energy import (
    EnergyBreakdown,
    Model,
    ModelParams,
    bulk_density,
    density_derivatives,
    energy_breakdown,
    energy_gradient_u,
    energy_gradient_v,
    homogeneous_state,
    sharp_elastic_density,
    sharp_energy,
    surface_density,
    total_energy,
)
from fissura.grid import Field, Grid
from fissura.recovery import optimal_profile
from fissura.tensor import SymTensor2

MODELS = list(Model)


def random_strains(n, rng, scale=1.0):
    return SymTensor2(*(scale * rng.normal(size=(3, n))))


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.mu, p.bulk, p.G_c, p.k_interp) == (1.0, 2.0, 1.0, 2.0)
        assert p.eta == p.eps ** 2
        assert p.lame_lambda == 1.0

    @pytest.mark.parametrize("kw", [
        {"mu": 0.0}, {"bulk": -1.0}, {"k_interp": 3.0}, {"k_interp": -0.1},
        {"G_c": 0.0}, {"eps": 0.0}, {"eta": -1.0}, {"M": 0.0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_warns_when_eta_exceeds_eps(self):
        with pytest.warns(UserWarning):
            ModelParams(eps=0.01, eta=0.1)

    def test_from_lame(self):
        p = ModelParams.from_lame(1.0, -0.5)
        assert p.bulk == 0.5 and p.lame_lambda == -0.5
        with pytest.raises(ValueError):
            ModelParams.from_lame(1.0, -1.5)


class TestBulkDensity:
    def test_uniaxial_example(self):
        t = 0.3
        p = ModelParams(eta=0.0)
        tot, _, _ = bulk_density(p, SymTensor2(t, 0.0, 0.0), 1.0)
        assert tot == pytest.approx(1.5 * t * t, rel=1e-14)

    @pytest.mark.parametrize("v", [0.0, 0.3, 1.0])
    def test_biaxial_compression_not_degraded(self, v):
        t = 0.4
        p = ModelParams(eta=0.0)
        tot, mod, unmod = bulk_density(p, SymTensor2(-t, -t, 0.0), v)
        assert tot == pytest.approx(4 * t * t, rel=1e-14)
        assert mod == 0.0

    def test_masonry_broken_tensile(self):
        p = ModelParams(eta=0.0, model=Model.MASONRY)
        tot, _, _ = bulk_density(p, SymTensor2(1.0, 0.5, 0.2), 0.0)
        assert tot == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("model", MODELS)
    def test_nonnegative(self, model):
        rng = np.random.default_rng(1)
        p = ModelParams(model=model)
        E = random_strains(5000, rng)
        v = rng.uniform(-1, 2, 5000)
        assert np.all(bulk_density(p, E, v)[0] >= 0)

    def test_degraded_interpolation_term(self):
        E = SymTensor2(-0.3, 0.1, 0.2)
        base = ModelParams(k_interp=0.5, eta=0.0)
        lit = base.with_(degrade_interp=True)
        d = E.trace
        # at v = 0 only the undegraded terms survive
        assert bulk_density(base, E, 0.0)[0] == pytest.approx(0.5 * (0.5 * d * d + 1.5 * d * d))
        assert bulk_density(lit, E, 0.0)[0] == pytest.approx(0.5 * 0.5 * d * d)
        # both coincide with the intact elastic energy at v = 1
        assert bulk_density(base, E, 1.0)[0] == pytest.approx(bulk_density(lit, E, 1.0)[0])

    def test_k_zero_matches_shear_only(self):
        rng = np.random.default_rng(2)
        E = random_strains(100_000, rng)
        v = rng.uniform(0, 1, 100_000)
        a = bulk_density(ModelParams(k_interp=0.0), E, v)[0]
        b = bulk_density(ModelParams(model=Model.SHEAR_ONLY), E, v)[0]
        assert np.max(np.abs(a - b)) <= 1e-12

    @pytest.mark.parametrize("model", [Model.NON_INTERPENETRATION, Model.SHEAR_ONLY])
    def test_intact_equals_sharp(self, model):
        rng = np.random.default_rng(3)
        p = ModelParams(eta=0.0, model=model)
        E = random_strains(10_000, rng)
        diff = bulk_density(p, E, 1.0)[0] - sharp_elastic_density(p, E)
        assert np.max(np.abs(diff)) <= 1e-14

    def test_masonry_intact_equals_sharp_on_definite(self):
        rng = np.random.default_rng(4)
        p = ModelParams(eta=0.0, model=Model.MASONRY)
        M = rng.normal(size=(2000, 2, 2))
        P = M @ M.transpose(0, 2, 1)
        for sign in (1.0, -1.0):
            E = SymTensor2(sign * P[:, 0, 0], sign * P[:, 1, 1], sign * P[:, 0, 1])
            got = bulk_density(p, E, 1.0)[0]
            assert np.allclose(got, sharp_elastic_density(p, E), rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("model", MODELS)
    def test_convex_in_strain(self, model):
        rng = np.random.default_rng(5)
        p = ModelParams(model=model)
        n = 20_000
        E1, E2 = random_strains(n, rng), random_strains(n, rng)
        v = rng.uniform(0, 1, n)
        t = rng.uniform(0, 1, n)
        mid = E1 * t + E2 * (1 - t)
        lhs = bulk_density(p, mid, v)[0]
        rhs = t * bulk_density(p, E1, v)[0] + (1 - t) * bulk_density(p, E2, v)[0]
        assert np.all(lhs <= rhs + 1e-12)

    @pytest.mark.parametrize("model", MODELS)
    def test_monotone_in_phase(self, model):
        rng = np.random.default_rng(6)
        p = ModelParams(model=model)
        E = random_strains(5000, rng)
        v1 = rng.uniform(0, 1, 5000)
        v2 = np.minimum(v1 + rng.uniform(0, 0.5, 5000), 1.0)
        assert np.all(bulk_density(p, E, v2)[1] >= bulk_density(p, E, v1)[1])


class TestDensityDerivatives:
    @pytest.mark.parametrize("model, kw", [(m, {}) for m in MODELS] + [
        (Model.NON_INTERPENETRATION, {"k_interp": 0.7}),
        (Model.NON_INTERPENETRATION, {"k_interp": 0.7, "degrade_interp": True}),
    ])
    def test_gradient_matches_finite_differences(self, model, kw):
        rng = np.random.default_rng(7)
        p = ModelParams(model=model, **kw)
        h = 1e-6
        checked = 0
        for _ in range(200):
            x = rng.normal(size=3)
            g = rng.uniform(0.1, 1.0)
            E = SymTensor2(*x)
            ev = np.linalg.eigvalsh(E.as_matrix())
            if abs(E.trace) < 1e-3 or np.min(np.abs(ev)) < 1e-3:
                continue
            grad, hess = density_derivatives(p, E, g)
            fd = np.empty(3)
            fdh = np.empty((3, 3))
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                # eta = 0 and v = sqrt(g) reproduce the degradation factor g
                dens = lambda y: bulk_density(p.with_(eta=0.0), SymTensor2(*y), math.sqrt(g))[0]
                fd[i] = (dens(x + e) - dens(x - e)) / (2 * h)
                gp, _ = density_derivatives(p, SymTensor2(*(x + e)), g)
                gm, _ = density_derivatives(p, SymTensor2(*(x - e)), g)
                fdh[:, i] = (gp - gm) / (2 * h)
            assert np.allclose(grad, fd, rtol=1e-5, atol=1e-7)
            assert np.allclose(hess, fdh, rtol=1e-4, atol=1e-6)
            assert np.allclose(hess, hess.T)
            checked += 1
        assert checked > 50

    @pytest.mark.parametrize("model", MODELS)
    def test_hessian_positive_semidefinite(self, model):
        rng = np.random.default_rng(8)
        p = ModelParams(model=model)
        _, H = density_derivatives(p, random_strains(2000, rng), rng.uniform(0, 1, 2000))
        assert np.min(np.linalg.eigvalsh(H)) >= -1e-12

    def test_masonry_repeated_eigenvalues(self):
        p = ModelParams(model=Model.MASONRY)
        grad, hess = density_derivatives(p, SymTensor2(0.3, 0.3, 0.0), 0.5)
        assert np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))


class TestSurfaceDensity:
    def test_intact(self):
        assert surface_density(ModelParams(), 1.0, (0.0, 0.0)) == 0.0

    def test_broken(self):
        assert surface_density(ModelParams(eps=0.01), 0.0, (0.0, 0.0)) == pytest.approx(25.0)

    def test_optimal_profile_equipartition(self):
        eps = 0.05
        x = np.linspace(0, 10 * eps, 101)
        v = optimal_profile(x / eps)
        dv = 0.5 * np.exp(-0.5 * x / eps) / eps
        assert np.allclose(eps * dv ** 2, (1 - v) ** 2 / (4 * eps), rtol=1e-12)


class TestTotalEnergy:
    def test_zero_state(self):
        g = Grid(4, 4)
        e = total_energy(Field.constant(g, 0.0, 2), Field.constant(g, 1.0), ModelParams())
        assert e.total == pytest.approx(0.0, abs=1e-25)

    def test_uniaxial_stretch(self):
        t = 0.2
        g = Grid(6, 6)
        u = Field.from_function(g, lambda x, y: (t * x, 0 * x))
        e = total_energy(u, Field.constant(g, 1.0), ModelParams(eta=0.0))
        assert e.bulk == pytest.approx(1.5 * t * t, rel=1e-12)
        assert e.surface == pytest.approx(0.0, abs=1e-25)

    def test_fully_broken_well(self):
        g = Grid(4, 5, 2.0, 1.0)
        p = ModelParams(eps=0.1, G_c=3.0)
        e = total_energy(Field.constant(g, 0.0, 2), Field.constant(g, 0.0), p)
        assert e.surface_well == pytest.approx(3.0 / 0.4 * 2.0, rel=1e-12)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            total_energy(Field.constant(Grid(3, 3), 0.0, 2), Field.constant(Grid(4, 4), 1.0), ModelParams())

    def test_breakdown_parts(self):
        e = EnergyBreakdown(1.0, 2.0, 3.0, 4.0)
        assert (e.bulk, e.surface, e.total) == (3.0, 7.0, 10.0)
        assert e.as_row() == (1.0, 2.0, 3.0, 4.0, 10.0)

    @pytest.mark.parametrize("model", MODELS)
    def test_gradients_match_finite_differences(self, model):
        rng = np.random.default_rng(9)
        g = Grid(5, 4)
        p = ModelParams(model=model, eps=0.2)
        h = 1e-6
        for _ in range(20):
            u = rng.normal(0, 0.3, 2 * g.n_nodes)
            v = rng.uniform(0, 1, g.n_nodes)
            du = rng.normal(size=u.size)
            dv = rng.normal(size=v.size)
            gu = energy_gradient_u(g, u, v, p)
            gv = energy_gradient_v(g, u, v, p)
            E = lambda uu, vv: energy_breakdown(g, uu, vv, p).total
            fd_u = (E(u + h * du, v) - E(u - h * du, v)) / (2 * h)
            fd_v = (E(u, v + h * dv) - E(u, v - h * dv)) / (2 * h)
            assert gu @ du == pytest.approx(fd_u, rel=1e-4, abs=1e-8)
            assert gv @ dv == pytest.approx(fd_v, rel=1e-4, abs=1e-8)


class TestSharpEnergy:
    def test_opening_crack(self):
        e, ok = sharp_energy(opening_crack(0.1), ModelParams())
        assert ok and e == pytest.approx(1.0)

    def test_interpenetrating_crack(self):
        _, ok = sharp_energy(opening_crack(-0.1), ModelParams())
        assert not ok

    def test_tangential_jump(self):
        cfg = horizontal_crack(0.5, AffineMap.constant((-0.1, 0.0)), AffineMap.constant((0.1, 0.0)))
        assert sharp_energy(cfg, ModelParams())[1]
        assert not sharp_energy(cfg, ModelParams(model=Model.MASONRY))[1]
        assert sharp_energy(cfg, ModelParams(model=Model.SHEAR_ONLY))[1]

    def test_shear_only_rejects_opening(self):
        assert not sharp_energy(opening_crack(0.1), ModelParams(model=Model.SHEAR_ONLY))[1]

    def test_masonry_accepts_normal_opening(self):
        assert sharp_energy(opening_crack(0.1), ModelParams(model=Model.MASONRY))[1]

    def test_bulk_part_of_affine_pieces(self):
        t = 0.1
        W = [[t, 0.0], [0.0, 0.0]]
        e, ok = sharp_energy(uncracked(AffineMap.linear(W), 2.0, 1.0), ModelParams(G_c=5.0))
        assert ok and e == pytest.approx(1.5 * t * t * 2.0)

    def test_toughness_scales_length(self):
        e, _ = sharp_energy(opening_crack(0.1, lx=2.0), ModelParams(G_c=3.0))
        assert e == pytest.approx(6.0)


class TestHomogeneousState:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.01, 0.5), st.floats(0.1, 5.0))
    def test_scalar_stationarity(self, t, eps, G):
        p = ModelParams(eps=eps, G_c=G, eta=0.0)
        v, _ = homogeneous_state(p, SymTensor2(t, 0.0, 0.0))
        A = 3 * t * t
        assert A * v + G * (v - 1) / (2 * eps) == pytest.approx(0.0, abs=1e-12 * (1 + A + G / eps))
        assert 0 < v <= 1

    def test_compression_is_intact(self):
        v, dens = homogeneous_state(ModelParams(eta=0.0), SymTensor2(-0.5, -0.5, 0.0))
        assert v == 1.0 and dens == pytest.approx(1.0)
