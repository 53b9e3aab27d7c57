import math

import numpy as np
import pytest

from fissura.affine import AffineMap
from fissura.crack import opening_crack, path_of, uncracked
from fissura.energy import Model, ModelParams
from fissura.grid import Field, Grid
from fissura.recovery import (
    RecoveryParams,
    build_v_recovery,
    bump_kernel,
    distance_field,
    max_strain_norm,
    minkowski_estimate,
    mollify_u,
    negative_divergence_l2,
    optimal_profile,
    profile_energy_halfline,
    recovery_energy_check,
    recovery_sweep,
)


class TestProfile:
    def test_examples(self):
        assert optimal_profile(0.0) == 0.0
        assert optimal_profile(2 * math.log(2)) == pytest.approx(0.5, abs=1e-15)
        # 1 - 1e-20 rounds to 1.0 in double precision, so bound the complement
        assert 1.0 - optimal_profile(100.0) < 1e-20

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            optimal_profile(-1e-9)

    def test_monotone_vectorized(self):
        t = np.linspace(0, 50, 501)
        g = optimal_profile(t)
        assert np.all(np.diff(g) > 0) and g[0] == 0 and g[-1] < 1

    def test_equipartition(self):
        # gamma' = (1 - gamma) / 2 balances the two surface terms pointwise
        t = np.linspace(0, 20, 201)
        g = optimal_profile(t)
        dg = 0.5 * np.exp(-0.5 * t)
        assert np.allclose(dg * dg, 0.25 * (1 - g) ** 2, atol=1e-15)


class TestHalflineEnergy:
    @pytest.mark.parametrize("eps", [0.01, 1.0, 0.3])
    def test_half_surface(self, eps):
        assert profile_energy_halfline(eps) == pytest.approx(0.5, abs=1e-6)

    def test_truncated(self):
        assert profile_energy_halfline(0.02, cutoff=5.0) == pytest.approx(0.5 * (1 - math.exp(-5)), abs=1e-9)

    def test_toughness_scaling(self):
        assert profile_energy_halfline(0.1, G_c=3.0) == pytest.approx(1.5, abs=1e-6)


class TestDistance:
    def test_examples(self):
        g = Grid(4, 4)
        path = path_of([((0.0, 0.5), (1.0, 0.5))])
        d = distance_field(path, g).values
        k = int(np.flatnonzero(np.all(np.isclose(g.nodes, [0.5, 0.75]), axis=1))[0])
        assert d[k] == pytest.approx(0.25)
        short = path_of([((0.0, 0.5), (0.5, 0.5))])
        k = int(np.flatnonzero(np.all(np.isclose(g.nodes, [1.0, 1.0]), axis=1))[0])
        assert distance_field(short, g).values[k] == pytest.approx(math.hypot(0.5, 0.5))

    def test_union_is_minimum(self):
        g = Grid(8, 8)
        a, b = ((0.1, 0.2), (0.9, 0.3)), ((0.5, 0.1), (0.4, 0.9))
        both = distance_field(path_of([a, b]), g).values
        expected = np.minimum(distance_field(path_of([a]), g).values, distance_field(path_of([b]), g).values)
        assert np.array_equal(both, expected)

    def test_empty_is_infinite(self):
        g = Grid(3, 3)
        assert np.all(np.isinf(distance_field(path_of([]), g).values))
        v = build_v_recovery(path_of([]), RecoveryParams(0.1), g)
        assert np.all(v.values == 1.0)


class TestBuildV:
    def test_examples(self):
        rp = RecoveryParams(0.05)
        y = 0.5 + rp.delta + 2 * rp.eps * math.log(2)
        g = Grid(2, 2)
        path = path_of([((0.0, 0.5), (1.0, 0.5))])
        v = build_v_recovery(path, rp, g).values
        assert np.all(v[np.isclose(g.nodes[:, 1], 0.5)] == 0.0)
        pts = np.array([[0.3, y]])
        from fissura.recovery import _v_from_distance
        assert _v_from_distance(path.distance(pts), rp)[0] == pytest.approx(0.5, abs=1e-14)

    def test_core_is_fully_cracked(self):
        rp = RecoveryParams(0.1, 0.01)
        g = Grid(40, 40)
        path = path_of([((0.0, 0.5), (1.0, 0.5))])
        v = build_v_recovery(path, rp, g).values
        core = np.abs(g.nodes[:, 1] - 0.5) <= rp.delta
        assert np.all(v[core] == 0.0) and np.all(v[~core] > 0.0)

    def test_params(self):
        rp = RecoveryParams(0.04)
        assert rp.eta == pytest.approx(0.0016)
        assert rp.delta == pytest.approx(0.04 ** 1.5)
        assert rp.ell == pytest.approx(0.2)
        with pytest.raises(ValueError):
            RecoveryParams(0.1, 0.0)
        with pytest.raises(ValueError):
            RecoveryParams(-0.1)


class TestMollify:
    def test_kernel_normalized_and_symmetric(self):
        offs, w = bump_kernel(0.1, 0.01)
        assert w.sum() == pytest.approx(1.0)
        assert np.allclose(offs.T @ w, 0.0, atol=1e-15)
        with pytest.raises(ValueError):
            bump_kernel(0.01, 0.02)

    @pytest.mark.parametrize("W", [[[1.0, 0.2], [-0.3, 0.5]], [[0.0, 0.0], [0.0, 0.0]]])
    def test_affine_reproduced(self, W):
        A = AffineMap(W, (0.1, -0.4))
        g = Grid(10, 10)
        u = mollify_u(A, 0.05, g)
        assert np.max(np.abs(u.values - A(g.nodes))) < 1e-12

    def test_rejects_coarse_lattice(self):
        with pytest.raises(ValueError):
            bump_kernel(1e-3, 0.1)

    def test_opening_crack(self):
        cfg = opening_crack(0.2)
        rp = RecoveryParams(0.05)
        g = Grid(60, 60)
        u = mollify_u(cfg.displacement, rp.delta, g)
        # far from the crack the mollified field equals the sharp one
        far = np.abs(g.nodes[:, 1] - 0.5) > rp.delta + 1e-12
        assert np.allclose(u.values[far], cfg.displacement(g.nodes[far]), atol=1e-14)
        assert negative_divergence_l2(u) <= 1e-10
        c = max_strain_norm(u) * rp.delta / 0.2
        assert 0 < c < 10


class TestMinkowski:
    def test_exact_single_segment(self):
        path = path_of([((0.0, 0.0), (1.0, 0.0))])
        for t in (0.1, 0.01, 0.001):
            assert minkowski_estimate(path, t, "exact") == pytest.approx(1 + math.pi * t / 2)

    def test_quadrature_matches_exact(self):
        path = path_of([((0.0, 0.0), (1.0, 0.0))])
        for t in (0.1, 0.05):
            q = minkowski_estimate(path, t, resolution=128)
            assert q == pytest.approx(1 + math.pi * t / 2, rel=2e-3)

    def test_converges_linearly(self):
        path = path_of([((0.0, 0.0), (1.0, 0.0))])
        ts = np.array([0.08, 0.04, 0.02])
        err = np.array([minkowski_estimate(path, t, "exact") - 1 for t in ts])
        assert np.allclose(err / ts, math.pi / 2)

    def test_two_disjoint_segments(self):
        path = path_of([((0.0, 0.0), (1.0, 0.0)), ((0.0, 1.0), (1.0, 1.0))])
        assert minkowski_estimate(path, 1e-3, "exact") == pytest.approx(2.0, rel=1e-2)
        assert minkowski_estimate(path, 0.01, resolution=32) == pytest.approx(2 + math.pi * 0.01, rel=5e-3)

    def test_exact_refuses_overlap_and_clipping(self):
        path = path_of([((0.0, 0.0), (1.0, 0.0)), ((0.5, -0.5), (0.5, 0.5))])
        with pytest.raises(ValueError):
            minkowski_estimate(path, 0.01, "exact")
        with pytest.raises(ValueError):
            minkowski_estimate(path_of([((0.0, 0.5), (1.0, 0.5))]), 0.01, "exact", domain=(1.0, 1.0))

    def test_clipped_domain(self):
        path = path_of([((0.0, 0.5), (1.0, 0.5))])
        assert minkowski_estimate(path, 0.02, domain=(1.0, 1.0)) == pytest.approx(1.0, rel=1e-3)

    def test_empty_and_errors(self):
        assert minkowski_estimate(path_of([]), 0.1) == 0.0
        with pytest.raises(ValueError):
            minkowski_estimate(path_of([((0, 0), (1, 0))]), 0.0)
        with pytest.raises(ValueError):
            minkowski_estimate(path_of([((0, 0), (1, 0))]), 0.1, "bogus")


class TestRecoveryEnergy:
    def test_opening_crack_surface_bound(self):
        rp = RecoveryParams(0.02)
        rep = recovery_energy_check(opening_crack(0.1), ModelParams(), rp)
        assert rep.ell == pytest.approx(math.sqrt(0.02))
        # only the residual stiffness eta acts inside the mollified jump
        assert rep.regularized.bulk <= 0.01
        assert rep.surface_ratio <= 1.15
        assert rep.ratio <= rep.surface_bound + 0.10
        assert rep.div_minus_l2 <= 1e-10

    def test_uncracked_ratio(self):
        eps = 0.05
        rp = RecoveryParams(eps)
        rep = recovery_energy_check(uncracked(AffineMap.linear([[0.1, 0.0], [0.0, 0.0]])), ModelParams(), rp)
        assert rep.regularized.surface == pytest.approx(0.0, abs=1e-25)
        assert rep.ratio == pytest.approx(1 + rp.eta, rel=1e-10)

    def test_refuses_violated_constraint(self):
        from fissura.crack import horizontal_crack
        cfg = horizontal_crack(0.5, AffineMap.constant((0.0, 0.0)), AffineMap.constant((0.1, 0.0)))
        with pytest.raises(ValueError):
            recovery_energy_check(cfg, ModelParams(model=Model.MASONRY), RecoveryParams(0.1))
        with pytest.raises(ValueError):
            recovery_energy_check(opening_crack(-0.1), ModelParams(), RecoveryParams(0.1))

    def test_sweep_approaches_sharp(self):
        reps = recovery_sweep(opening_crack(0.1), ModelParams(), [0.1, 0.05, 0.025])
        ratios = [r.ratio for r in reps]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))
        assert all(r.ratio <= r.surface_bound + 0.10 for r in reps)

    def test_fields_on_grid(self):
        from fissura.recovery import recovery_fields
        g = Grid(20, 20)
        u, v = recovery_fields(opening_crack(0.1), RecoveryParams(0.1), g)
        assert isinstance(u, Field) and isinstance(v, Field)
        assert v.values.min() == 0.0 and v.values.max() < 1.0
