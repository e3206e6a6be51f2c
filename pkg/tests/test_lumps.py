import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snlab import diagnostics as dg
from snlab import evolve as ev
from snlab.errors import (BoundaryWarning, ConfigurationError, PlacementError, PreconditionError,
                          ResolutionError, SeparationWarning, SingularityError)
from snlab.grid import Grid3
from snlab.lumps import (FieldPair, LumpSpec, LumpSystem, accelerated_frame, core_radius,
                         galilean_boost, lump_radius, make_lump, phase_gauge, scale_fields,
                         superpose)
from snlab.radial import sample_profile

pytestmark = pytest.mark.usefixtures("quiet_boundary")


@pytest.fixture(scope="module")
def unit(profile, unit_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        return make_lump(profile, LumpSpec(1.0), 0.0, unit_grid)


def grid_backed(f):
    return FieldPair(f.psi.copy(), f.phi.copy(), f.grid, f.t)


def residual(f, t, dt):
    a, b, c = (f.at_time(s) for s in (t - dt, t, t + dt))
    return dg.residual_H(a.psi, b.psi, c.psi, b.phi, dt, f.grid)


class TestSpecs:
    @pytest.mark.parametrize("kw", [dict(m=0.0), dict(m=-1.0), dict(m=math.inf),
                                    dict(m=1.0, a=(0, 0)), dict(m=1.0, v=(0, math.nan, 0))])
    def test_spec_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            LumpSpec(**kw)

    def test_position(self):
        s = LumpSpec(1.0, (1, 2, 3), (0.5, 0, -1))
        np.testing.assert_array_equal(s.position(2.0), [2, 2, 1])

    def test_mass_sum(self):
        with pytest.raises(ConfigurationError, match="sum to 1"):
            LumpSystem((LumpSpec(0.5), LumpSpec(0.4, (1, 0, 0))))

    def test_coincident(self):
        with pytest.raises(SingularityError):
            LumpSystem((LumpSpec(0.5, (1, 1, 1)), LumpSpec(0.5, (1, 1, 1))))

    def test_json_roundtrip(self, tmp_path):
        sys = LumpSystem((LumpSpec(0.25, (1, 2, 3), (0.1, 0, 0)), LumpSpec(0.75, (-4, 0, 0))))
        path = tmp_path / "lumps.json"
        sys.write(path)
        assert json.loads(path.read_text())["lumps"][0] == {"m": 0.25, "a": [1, 2, 3],
                                                            "v": [0.1, 0, 0]}
        assert LumpSystem.read(path) == sys

    @pytest.mark.parametrize("doc", [{}, {"lumps": [{"mass": 1}]}, [1, 2]])
    def test_bad_json(self, doc):
        with pytest.raises(ConfigurationError):
            LumpSystem.from_dict(doc)


class TestRadii:
    def test_unit_radii(self, profile):
        assert lump_radius(profile, 1.0, 0.5) == pytest.approx(97.72, abs=0.01)
        assert lump_radius(profile, 1.0, 1e-3) == pytest.approx(431.0, abs=0.1)
        assert lump_radius(profile) == pytest.approx(1384.2, abs=0.1)
        assert core_radius(profile) == pytest.approx(249.97, abs=0.01)

    def test_mass_scaling(self, profile):
        assert core_radius(profile, 0.5) == pytest.approx(2 * core_radius(profile), rel=1e-12)


class TestMakeLump:
    def test_identity_parameters(self, profile, unit):
        X, Y, Z = unit.grid.mesh()
        psi0, phi0 = sample_profile(profile, np.sqrt(X**2 + Y**2 + Z**2).ravel())
        np.testing.assert_array_equal(unit.psi.real, psi0.reshape(unit.grid.shape))
        assert not unit.psi.imag.any()
        np.testing.assert_array_equal(unit.phi, phi0.reshape(unit.grid.shape))

    def test_half_mass(self, profile):
        g = Grid3(64, 2000.0)
        f = make_lump(profile, LumpSpec(0.5), 0.0, g)
        assert dg.norm(f.psi, g) == pytest.approx(0.5, abs=1e-6)
        # argument m r: the half-amplitude radius doubles
        src = f.source
        r = 2 * lump_radius(profile, 1.0, 0.5)
        val = abs(src(np.array([r]), np.zeros(1), np.zeros(1), 0.0)[0][0])
        assert val == pytest.approx(0.5 * 0.25 * profile.psi0[0], rel=1e-9)

    def test_momentum(self, profile, unit_grid):
        f = make_lump(profile, LumpSpec(1.0, v=(0.04, 0.0, 0.0)), 0.0, unit_grid)
        p = ev.momentum(f.psi, unit_grid) / dg.norm(f.psi, unit_grid)
        np.testing.assert_allclose(p, [0.02, 0, 0], rtol=1e-2, atol=1e-12)

    def test_centroid_follows_path(self, profile, unit_grid):
        s = LumpSpec(1.0, (10.0, 0.0, -5.0), (0.01, 0.02, 0.0))
        f = make_lump(profile, s, 800.0, unit_grid)
        assert np.max(np.abs(ev.centroid(f.psi, unit_grid) - s.position(800.0))) <= unit_grid.h

    def test_placement_refused(self, profile, unit_grid):
        with pytest.raises(PlacementError):
            make_lump(profile, LumpSpec(1.0, (200.0, 0.0, 0.0)), 0.0, unit_grid)

    def test_support_warning(self, profile, unit_grid):
        with pytest.warns(BoundaryWarning):
            make_lump(profile, LumpSpec(1.0), 0.0, unit_grid)


class TestSuperpose:
    def test_single_lump(self, profile, unit, unit_grid):
        f = superpose(LumpSystem((LumpSpec(1.0),)), profile, 0.0, unit_grid)
        np.testing.assert_array_equal(f.psi, unit.psi)
        np.testing.assert_array_equal(f.phi, unit.phi)

    def test_wide_pair(self, profile):
        # 20 core radii apart; 256^3 resolves the m = 0.5 lumps well enough for 1e-8
        d = 20 * core_radius(profile, 0.5)
        g = Grid3(256, 12800.0)
        sys = LumpSystem((LumpSpec(0.5, (-d / 2, 0, 0)), LumpSpec(0.5, (d / 2, 0, 0))))
        f = superpose(sys, profile, 0.0, g)
        assert abs(dg.norm(f.psi, g) - 1.0) <= 1e-8
        assert f.meta["wide"] and f.meta["overlap_bound"] < 1e-8
        c = g.n // 2
        assert f.phi[c, c, c] == pytest.approx(2 * (-0.5 / (4 * math.pi * d / 2)), rel=1e-9)

    def test_close_pair_warns(self, profile):
        g = Grid3(64, 3000.0)
        sys = LumpSystem((LumpSpec(0.5, (-400, 0, 0)), LumpSpec(0.5, (400, 0, 0))))
        with pytest.warns(SeparationWarning):
            f = superpose(sys, profile, 0.0, g)
        assert not f.meta["wide"]


class TestBoost:
    def test_zero_velocity(self, unit):
        f = galilean_boost(unit, (0, 0, 0))
        np.testing.assert_array_equal(f.psi, unit.psi)

    @pytest.mark.parametrize("backing", ["profile", "grid"])
    def test_inverse(self, unit, backing):
        f = unit if backing == "profile" else grid_backed(unit)
        v = (0.03, -0.01, 0.02)
        back = galilean_boost(galilean_boost(f, v, 0.0), tuple(-x for x in v), 0.0)
        assert np.max(np.abs(back.psi - f.psi)) <= 1e-10 * np.max(np.abs(f.psi))

    def test_norm_preserved(self, unit):
        f = galilean_boost(grid_backed(unit), (0.05, 0.0, 0.0))
        assert dg.norm(f.psi, f.grid) == pytest.approx(dg.norm(unit.psi, unit.grid), rel=1e-12)

    def test_translates_modulus(self, profile, unit):
        f = galilean_boost(unit, (0.1, 0.0, 0.0), 300.0)
        g = make_lump(profile, LumpSpec(1.0, (30.0, 0, 0)), 0.0, unit.grid)
        np.testing.assert_allclose(np.abs(f.psi), np.abs(g.psi), atol=1e-15)

    def test_composition(self, unit):
        v1, v2 = np.array([0.02, 0.0, 0.01]), np.array([-0.01, 0.03, 0.0])
        a = galilean_boost(galilean_boost(unit, v2, 0.0), v1, 0.0)
        b = galilean_boost(unit, v1 + v2, 0.0)
        np.testing.assert_allclose(np.abs(a.psi), np.abs(b.psi), atol=1e-18)
        rel = a.psi * np.conj(b.psi)
        mask = np.abs(unit.psi) > 1e-3 * np.abs(unit.psi).max()
        assert np.ptp(np.angle(rel[mask])) < 1e-12

    def test_grid_backed_needs_own_time(self, unit):
        with pytest.raises(PreconditionError):
            galilean_boost(grid_backed(unit), (0.01, 0, 0), 5.0)

    def test_boundary_clash(self, unit):
        with pytest.raises(PlacementError):
            galilean_boost(unit, (1.0, 0, 0), 300.0)


class TestAcceleratedFrame:
    def test_constant_is_translation(self, profile, unit):
        f = accelerated_frame(unit, ([12.0], [0.0], [-3.0]))
        g = make_lump(profile, LumpSpec(1.0, (12.0, 0.0, -3.0)), 0.0, unit.grid)
        np.testing.assert_allclose(f.psi, g.psi, atol=1e-18)
        np.testing.assert_allclose(f.phi, g.phi, atol=1e-18)

    def test_linear_is_boost(self, unit):
        v = (0.02, 0.01, 0.0)
        a = accelerated_frame(unit, ([0, v[0]], [0, v[1]], [0, v[2]]), 100.0)
        b = galilean_boost(unit, v, 100.0)
        np.testing.assert_allclose(a.psi, b.psi, atol=1e-18)
        np.testing.assert_allclose(a.phi, b.phi, atol=1e-18)

    def test_uniform_acceleration_potential(self, unit):
        A = np.array([2e-6, -1e-6, 3e-6])
        f = accelerated_frame(unit, tuple([0, 0, 0.5 * x] for x in A), 0.0)
        X, Y, Z = unit.grid.mesh()
        np.testing.assert_allclose(f.phi - unit.phi, -0.5 * (A[0] * X + A[1] * Y + A[2] * Z),
                                   atol=1e-18)

    def test_rejects_high_degree(self, unit):
        with pytest.raises(ConfigurationError):
            accelerated_frame(unit, ([0, 0, 0, 0, 0, 1e-9], [0], [0]))


class TestPhaseGauge:
    def test_zero(self, unit):
        f = phase_gauge(unit, [0.0])
        np.testing.assert_array_equal(f.psi, unit.psi)
        np.testing.assert_array_equal(f.phi, unit.phi)

    def test_linear_shifts_eigenvalue(self, profile, unit):
        # psi0 e^{-i E0 t} e^{i c t}: the frequency becomes E0 - c while phi drops by c
        c, t = 3e-4, 700.0
        f = phase_gauge(unit, [0.0, c], t)
        k = unit.grid.n // 2
        got = np.angle(f.psi[k, k, k] / unit.at_time(0.0).psi[k, k, k])
        assert got == pytest.approx(-(profile.E0 - c) * t, rel=1e-12)
        np.testing.assert_allclose(f.phi, unit.phi - c, atol=1e-18)

    @given(st.floats(-3, 3), st.floats(0.0, 6.3))
    @settings(max_examples=20, deadline=None)
    def test_modulus_exact(self, unit, c2, c0):
        f = phase_gauge(unit, [c0, 0.0, c2], 0.4)
        np.testing.assert_allclose(np.abs(f.psi), np.abs(unit.at_time(0.4).psi), rtol=1e-15)

    def test_residual_of_evolved_state(self, unit):
        # snapshots of a numerical run at consecutive steps, gauged with Omega = t^2
        dt = 1e-4
        stepper = ev.SplitStepper(unit.grid, dt)
        snaps, phis = [unit.psi], []
        psi, phi = unit.psi, None
        for _ in range(2):
            psi, phi = stepper.run(psi, 1, phi)
            snaps.append(psi)
        mid_phi = ev.potential(snaps[1], unit.grid)
        base = dg.residual_H(*snaps, mid_phi, dt, unit.grid)
        gauged = [phase_gauge(FieldPair(s, mid_phi, unit.grid, k * dt), [0, 0, 1.0])
                  for k, s in enumerate(snaps)]
        res = dg.residual_H(gauged[0].psi, gauged[1].psi, gauged[2].psi, gauged[1].phi, dt,
                            unit.grid)
        for a, b in zip(res, base):
            assert abs(a - b) <= 1e-12


class TestExactSymmetry:
    """Residuals of transformed lumps stay at the untransformed floor."""

    @pytest.mark.parametrize("name", ["boost", "accel", "gauge"])
    def test_residual(self, unit, name):
        t = 5.0
        if name == "boost":
            f, dt = galilean_boost(unit, (0.02, 0.0, 0.0)), 1.0
        elif name == "accel":
            f, dt = accelerated_frame(unit, ([0, 0, 1e-4], [0, 0.01, 0], [0.0])), 1.0
        else:
            f, dt = phase_gauge(unit, [0, 0, 1.0]), 1e-4
        base = residual(unit, t, dt)
        res = residual(f, t, dt)
        for a, b in zip(res, base):
            assert a <= 10 * b


class TestScaleFields:
    def test_identity(self, unit):
        f = scale_fields(unit, 1.0)
        np.testing.assert_array_equal(f.psi, unit.psi)
        assert f.meta["scale"] == 1.0

    @pytest.mark.parametrize("backing", ["profile", "grid"])
    def test_norm(self, unit, profile, backing):
        f = unit if backing == "profile" else grid_backed(unit)
        s = scale_fields(f, 2.0, profile)
        assert dg.norm(s.psi, f.grid) == pytest.approx(2.0, rel=1e-6)

    def test_time_relabel(self, unit):
        s = scale_fields(unit.at_time(9.0), 1.5)
        assert s.t == 4.0 and s.meta["time_from"] == 9.0

    def test_unresolvable(self, unit, profile):
        with pytest.raises(ResolutionError):
            scale_fields(unit, 4.0, profile)

    @pytest.mark.parametrize("lam", [0.0, -2.0])
    def test_bad_factor(self, unit, lam):
        with pytest.raises(ConfigurationError):
            scale_fields(unit, lam)

    def test_scaled_state_is_stationary(self, profile):
        # |psi| stays put when the step is rescaled by 1/lam^2 (the 1e-3 bound is the
        # spatial discretization floor at this resolution)
        lam, dt, steps = 0.8, 40.0, 20
        g = Grid3(64, 1400.0)
        s = scale_fields(make_lump(profile, LumpSpec(1.0), 0.0, g), lam, profile)
        out, _ = ev.SplitStepper(g, dt / lam**2).run(s.psi, steps)
        drift = np.max(np.abs(np.abs(out) - np.abs(s.psi)))
        assert drift <= 1e-3 * np.max(np.abs(s.psi))
