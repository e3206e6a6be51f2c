"""Acceptance suite: one test per criterion.

Each test records a ``Criterion N: PASS|FAIL ...`` line that the conftest
summary hook prints at the end of the session. Run standalone with

    python tests/test_acceptance.py

Criterion 7 runs at 64^3 with the 20% bound by default; set
``SNLAB_ACCEPT_FULL=1`` for the 128^3 run with the 10% bound (tens of
minutes on one core).
"""
import math
import os
import warnings

import numpy as np
import pytest
from scipy.integrate import cumulative_simpson

from snlab import compare as cp
from snlab import diagnostics as dg
from snlab import evolve as ev
from snlab import lumps as lp
from snlab import nbody as nb
from snlab import symmetry as sy
from snlab.errors import BoundaryWarning
from snlab.grid import Grid3
from snlab.radial import RadialGrid, find_ground_state

# golden eigenvalue frozen from the shooting solver (n = 20000, r_max = 40) and
# cross-checked against solve_ivp at rtol 1e-12
E0_GOLDEN = -5.153740249717e-4

FULL = os.environ.get("SNLAB_ACCEPT_FULL", "") not in ("", "0")


def record(criteria, n, ok, detail):
    line = f"Criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    criteria.append(line)
    return ok


@pytest.fixture(scope="module")
def gs():
    return find_ground_state(grid=RadialGrid(40.0, 20000))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        yield


def test_criterion_1_virial(gs, criteria):
    r1, r2 = dg.virial_check(gs)
    ok = abs(r1 + 1 / 3) <= 1e-3 and abs(r2 - 4 / 3) <= 1e-3
    assert record(criteria, 1, ok, f"virial ratios ({r1:.9f}, {r2:.9f}) vs (-1/3, 4/3), tol 1e-3")


@pytest.mark.slow
def test_criterion_2_dual_oracle(gs, criteria):
    # norm 40 shrinks the lump 40-fold (scaling covariance), so a 24-unit box holds it
    N = 40.0
    relax = ev.relax_ground_state(Grid3(64, 24.0), norm=N)
    rel = relax.unit_eigenvalue / gs.E0 - 1
    golden = abs(gs.E0 / E0_GOLDEN - 1)
    ok = abs(rel) <= 0.01 and golden <= 1e-9
    assert record(criteria, 2, ok, f"shooting E0 = {gs.E0:.12e}, relaxation E0 = "
                  f"{relax.unit_eigenvalue:.6e} (rel {rel:+.3%}, tol 1%); golden match {golden:.1e}")


def green_potential(p):
    """phi from psi0^2 alone: -(1/r) int_0^r rho s^2 ds - int_r^inf rho s ds."""
    r, rho = p.grid.nodes, p.psi0**2
    inner = cumulative_simpson(rho * r * r, x=r, initial=0.0)
    cs = cumulative_simpson(rho * r, x=r, initial=0.0)
    phi = -(cs[-1] - cs)
    phi[1:] -= inner[1:] / r[1:]
    return phi


def test_criterion_3_potential_tail(gs, criteria):
    # the tail is read off a potential rebuilt from the density, so the check
    # does not lean on the solver's own phi table
    r = gs.grid.nodes
    phi = green_potential(gs)
    sel = (r >= 0.5 * gs.grid.r_max) & (r <= 0.9 * gs.grid.r_max)
    dev = float(np.max(np.abs(4 * math.pi * r[sel] * phi[sel] + 1)))
    table = float(np.max(np.abs(4 * math.pi * r[sel] * gs.phi0[sel] + 1)))
    agree = float(np.max(np.abs(phi - gs.phi0)) / abs(gs.phi0[0]))
    ok = dev <= 1e-3 and table <= 1e-3 and agree <= 1e-6
    assert record(criteria, 3, ok, f"max |4 pi r phi + 1| on [0.5, 0.9] r_max = {dev:.3e} "
                  f"(Green quadrature), {table:.3e} (solver table), tol 1e-3; "
                  f"tables agree to {agree:.1e}")


def test_criterion_4_symmetries(criteria):
    rows = sy.verify(sy.KINDS[:10], points=100, seed=7)
    worst = {}
    for r in rows:
        worst[r.generator] = max(worst.get(r.generator, 0.0), r.relative)
    ok_fam = len(worst) == 10 and max(worst.values()) <= 1e-9
    controls = {}
    for term in ("X9:eta_w", "X10:phase"):
        bad = sy.verify((term.split(":")[0],), points=100, seed=7, drop=(term,))
        controls[term] = max(r.relative for r in bad)
    ok_ctl = min(controls.values()) >= 1e-3
    detail = (f"families max {max(worst.values()):.2e} (tol 1e-9, 10 x 100 points); controls "
              + ", ".join(f"{k} {v:.2e}" for k, v in controls.items()) + " (need >= 1e-3)")
    assert record(criteria, 4, ok_fam and ok_ctl, detail)


@pytest.mark.slow
def test_criterion_5_conservation(gs, criteria, quiet):
    g, dt, steps = Grid3(64, 1000.0), 1e-3, 10_000
    v = 0.2
    f = lp.make_lump(gs, lp.LumpSpec(1.0, v=(v, 0.0, 0.0)), 0.0, g)
    res = ev.evolve(f.psi, g, ev.EvolveConfig(dt=dt, steps=steps, diag_every=500))
    n, e = res.column("norm"), res.column("energy")
    t, cx = res.column("t"), res.column("cx")
    ndrift = float(np.max(np.abs(n - n[0])))
    edrift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    vel = float(np.polyfit(t, cx, 1)[0])
    ok = ndrift <= 1e-10 and edrift <= 1e-4 and abs(vel / v - 1) <= 0.01
    assert record(criteria, 5, ok, f"norm drift {ndrift:.2e} (tol 1e-10), energy drift "
                  f"{edrift:.2e} (tol 1e-4), centroid velocity {vel:.8f} vs {v} "
                  f"(rel {vel / v - 1:+.2e}, tol 1%)")


@pytest.mark.slow
def test_criterion_6_stationarity(gs, criteria, quiet):
    g, dt, steps = Grid3(64, 1000.0), 0.01, 1000
    f = lp.make_lump(gs, lp.LumpSpec(1.0), 0.0, g)
    a0 = np.abs(f.psi)
    worst = [0.0]

    def track(t, psi, phi):
        worst[0] = max(worst[0], float(np.max(np.abs(np.abs(psi) - a0))))

    ev.evolve(f.psi, g, ev.EvolveConfig(dt=dt, steps=steps, diag_every=10), callback=track)
    # measured against the peak: the unit lump's peak amplitude is itself ~1e-3
    rel = worst[0] / float(a0.max())
    assert record(criteria, 6, rel <= 1e-3, f"sup ||psi(t)| - |psi(0)|| over t = 10 is "
                  f"{worst[0]:.2e} = {rel:.2e} of the peak, tol 1e-3")


@pytest.mark.slow
def test_criterion_7_geodesic_arbiter(gs, criteria, quiet):
    n, bound = (128, 0.10) if FULL else (64, 0.20)
    g, sys_, dt, steps = cp.default_pair_setup(gs, n)
    rep = cp.compare(gs, sys_, g, dt, steps, diag_every=10)
    k_ratio = rep.kappa_measured() / nb.KAPPA_ORDERED
    traj = rep.trajectory_error()
    alt = cp.with_kappa(rep, sys_, dt, nb.KAPPA_UNORDERED)
    alt_ratio = alt.kappa_measured() / nb.KAPPA_UNORDERED
    alt_traj = alt.trajectory_error()
    ok_main = abs(k_ratio - 1) <= bound and traj <= bound
    # the unordered reading must miss by about a factor of two
    ok_ctl = alt_traj > bound and 1.6 <= alt_ratio <= 2.4
    assert record(criteria, 7, ok_main and ok_ctl,
                  f"{n}^3: measured kappa / (1/2pi) = {k_ratio:.4f}, infall error {traj:.2%} "
                  f"(tol {bound:.0%}); kappa = 1/4pi control: ratio {alt_ratio:.3f}, "
                  f"infall error {alt_traj:.1%}; boundary flag {rep.boundary_flag}")


def test_criterion_8_nbody(criteria):
    r = 300.0
    T = nb.kepler_period(r)
    traj = nb.integrate(nb.circular_binary(r), nb.NBodyConfig(dt=T / 2000, steps=20_000))
    drift = float(np.max(np.abs(traj.energy - traj.energy[0])) / abs(traj.energy[0]))
    perr = abs(nb.measure_period(traj) / T - 1)
    ok = drift <= 1e-8 and perr <= 1e-4
    assert record(criteria, 8, ok, f"energy drift {drift:.2e} over 10 periods (tol 1e-8), "
                  f"period error {perr:.2e} (tol 1e-4)")


@pytest.mark.slow
def test_criterion_9_energy_bookkeeping(gs, criteria, quiet):
    r99 = lp.core_radius(gs, 0.5)
    d = 8 * r99
    g = Grid3(128, 6400.0)
    sys_ = cp.symmetric_pair(d)
    f = lp.superpose(sys_, gs, 0.0, g)
    E = dg.energy(f.psi, ev.potential(f.psi, g), g).total
    pred = dg.predicted_energy(sys_, gs.E0)
    half = dg.predicted_energy(sys_, gs.E0, ordered=False)
    rel, rel_half = E / pred - 1, E / half - 1
    # separation-dependent part measured on the grid, against the halved term
    singles = 0.0
    for s in sys_.lumps:
        h = lp.make_lump(gs, s, 0.0, g)
        singles += dg.energy(h.psi, ev.potential(h.psi, g), g).total
    factor = (E - singles) / dg.interaction_energy(sys_.masses, sys_.positions, ordered=False)
    ok = abs(rel) <= 0.02 and abs(rel_half) > 0.02 and 1.6 <= factor <= 2.4
    assert record(criteria, 9, ok, f"d = 8 r99 = {d:.1f}: grid {E:.6e} vs predicted {pred:.6e} "
                  f"(rel {rel:+.2%}, tol 2%); halved-term control rel {rel_half:+.2%}, "
                  f"interaction / halved term = {factor:.3f}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
