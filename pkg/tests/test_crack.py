import math

import numpy as np
import pytest

from fissura.affine import AffineMap
from fissura.crack import (
    AffinePiece,
    CrackConfig,
    CrackPath,
    Segment,
    horizontal_crack,
    opening_crack,
    path_of,
    through_crack,
    uncracked,
)
from fissura.energy import Model, ModelParams, sharp_energy


class TestSegment:
    def test_default_normal(self):
        s = Segment((0.0, 0.0), (2.0, 0.0))
        assert np.allclose(s.unit_normal, [0.0, 1.0]) and s.length == 2.0

    @pytest.mark.parametrize("kw", [
        {"p": (0.0, 0.0), "q": (0.0, 0.0)},
        {"p": (0.0, 0.0), "q": (1.0, 0.0), "normal": (1.0, 0.0)},
        {"p": (0.0, 0.0), "q": (1.0, 0.0), "normal": (0.0, 2.0)},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Segment(**kw)

    def test_distance(self):
        s = Segment((0.0, 0.0), (1.0, 0.0))
        d = s.distance(np.array([[0.5, 0.3], [-1.0, 0.0], [2.0, 1.0]]))
        assert np.allclose(d, [0.3, 1.0, math.sqrt(2)])


class TestPath:
    def test_length_and_inside(self):
        p = path_of([((0, 0), (1, 0)), ((0, 0.5), (0, 1))])
        assert p.length == 1.5 and p.inside(1.0, 1.0)
        assert not path_of([((0, 0), (1.5, 0))]).inside(1.0, 1.0)
        assert CrackPath().length == 0


class TestConfigs:
    def test_through_crack_split(self):
        cfg = through_crack((0.0, 0.25), (1.0, 1.0), AffineMap.constant((0, 0)), AffineMap.constant((1, 0)))
        cfg.validate()
        seg = cfg.path.segments[0]
        assert seg.length == pytest.approx(0.75 * math.sqrt(2))
        assert sum(p.area for p in cfg.pieces) == pytest.approx(1.0)

    def test_through_crack_misses(self):
        with pytest.raises(ValueError):
            through_crack((0.0, 2.0), (1.0, 0.0), AffineMap.constant((0, 0)), AffineMap.constant((0, 0)))

    def test_opening_jumps(self):
        cfg = opening_crack(0.1)
        for a, b in cfg.segment_jumps():
            assert np.allclose(a, [0.0, 0.2]) and np.allclose(b, [0.0, 0.2])
        assert cfg.displacement(np.array([[0.5, 0.9]]))[0, 1] == pytest.approx(0.1)
        assert cfg.displacement(np.array([[0.5, 0.1]]))[0, 1] == pytest.approx(-0.1)

    def test_displacement_extends_beyond_domain(self):
        cfg = opening_crack(0.1)
        out = cfg.displacement(np.array([[-0.2, 1.3], [1.2, -0.3]]))
        assert np.allclose(out, [[0.0, 0.1], [0.0, -0.1]])

    def test_validate(self):
        cfg = opening_crack(0.1)
        bad = CrackConfig(cfg.path, cfg.pieces, (), 1.0, 1.0)
        with pytest.raises(ValueError):
            bad.validate()
        with pytest.raises(ValueError):
            CrackConfig(path_of([((0, 0), (2, 0))]), cfg.pieces, ((0, 1),)).validate()

    def test_uncovered(self):
        tri = np.array([[0, 0], [1, 0], [0, 1]], float)
        cfg = CrackConfig(CrackPath(), (AffinePiece(tri, AffineMap.constant((0, 0))),), ())
        with pytest.raises(ValueError):
            cfg.displacement(np.array([[0.9, 0.9]]))


class TestSharpEnergy:
    def test_opening_surface_only(self):
        E, ok = sharp_energy(opening_crack(0.1), ModelParams(G_c=2.0))
        assert ok and E == pytest.approx(2.0)

    def test_affine_bulk(self):
        E, ok = sharp_energy(uncracked(AffineMap.linear([[1.0, 0.0], [0.0, 0.0]])), ModelParams())
        assert ok and E == pytest.approx(1.5)

    @pytest.mark.parametrize("jump, expected", [
        ((0.0, 0.1), {Model.NON_INTERPENETRATION: True, Model.SHEAR_ONLY: False, Model.MASONRY: True}),
        ((0.1, 0.0), {Model.NON_INTERPENETRATION: True, Model.SHEAR_ONLY: True, Model.MASONRY: False}),
        ((0.0, -0.1), {Model.NON_INTERPENETRATION: False, Model.SHEAR_ONLY: False, Model.MASONRY: False}),
    ])
    def test_constraints(self, jump, expected):
        cfg = horizontal_crack(0.5, AffineMap.constant((0.0, 0.0)), AffineMap.constant(jump))
        for model, ok in expected.items():
            assert sharp_energy(cfg, ModelParams(model=model))[1] is ok
