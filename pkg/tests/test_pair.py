"""Tests for the two-particle configuration-space wave and coupled solitons."""

import numpy as np
import pytest

from solidyn.diagnostics import equivariance_distance
from solidyn.errors import SolidynError
from solidyn.grids import Field, Grid
from solidyn.pair import (
    PairState,
    PairWave,
    conditional_q,
    ls2_step,
    pair_continuity_residual,
    pair_step,
    pair_tracking_residual,
    pair_velocity_fields,
    product_pair,
    run_pair,
    symmetrized_pair,
)
from solidyn.potentials import PhysicalParams, Potentials
from solidyn.schrodinger import madelung_extract
from solidyn.soliton import GaussonParams, SolitonState, gausson_init, \
    nls_step, run_coupled
from solidyn.trajectories import FlowHistory, integrate_flow

PARAMS = PhysicalParams(omega0=1.0, charge=1.0)
FREE = (Potentials.free(1), Potentials.free(1))


def grid_pair(n=128, box=24.0):
    return Grid((n, n), (box, box)), Grid(n, box)


def packet(g1, center=0.0, k=0.0, sigma=1.0):
    x = g1.axes[0]
    return (np.exp(-((x - center) ** 2) / (4 * sigma**2))
            * np.exp(1j * k * x)).astype(complex)


def soliton(g1, center, b=25.0, velocity=0.0):
    u = gausson_init(GaussonParams(b, 1.0, center=(center,),
                                   velocity=(velocity,)), g1, 1.0)
    return SolitonState(u, PARAMS, b, 1.0, coupling_mode="dbb")


def schmidt_ratio(psi2d):
    s = np.linalg.svd(psi2d, compute_uv=False)
    return s[1] / s[0]


# ---------------------------------------------------------------------------
# ls2_step
# ---------------------------------------------------------------------------

def test_ls2_product_stays_product():
    g2, g1 = grid_pair()
    pair = product_pair(packet(g1, -2.0), packet(g1, 2.0), g2, (1.0, 1.0),
                        1.0, FREE)
    assert schmidt_ratio(pair.psi.samples) < 1e-12
    for _ in range(200):
        pair = ls2_step(pair, 2e-3)
    assert schmidt_ratio(pair.psi.samples) < 1e-8


def test_ls2_norm_conserved_entangled():
    g2, g1 = grid_pair()
    pair = symmetrized_pair(packet(g1, -2.0, k=1.0), packet(g1, 2.0, k=-1.0),
                            g2, (1.0, 1.0), 1.0, FREE)
    n0 = pair.norm()
    for _ in range(500):
        pair = ls2_step(pair, 2e-3)
    assert abs(pair.norm() - n0) / n0 < 1e-12


def test_ls2_trap_on_one_leaves_partner_marginal():
    # product with a uniform partner: a trap acting on particle 1 only
    # cannot move particle 2's reduced density
    g2, g1 = grid_pair()
    pots = (Potentials.harmonic(1.0), Potentials.free(1))
    pair = product_pair(packet(g1, 1.0), np.ones(g1.points[0], complex),
                        g2, (1.0, 1.0), 1.0, pots)
    rho2_initial = np.sum(pair.psi.density(), axis=0)
    for _ in range(300):
        pair = ls2_step(pair, 2e-3)
    rho2_final = np.sum(pair.psi.density(), axis=0)
    assert np.max(np.abs(rho2_final - rho2_initial)) / rho2_initial.max() \
        < 1e-10


def test_ls2_different_masses_dispersion():
    # particle 2 twice as heavy spreads slower
    g2, g1 = grid_pair()
    pair = product_pair(packet(g1), packet(g1), g2, (1.0, 2.0), 1.0, FREE)
    for _ in range(500):
        pair = ls2_step(pair, 2e-3)
    rho = pair.psi.density()
    x = g1.axes[0]
    rho1 = np.sum(rho, axis=1)
    rho2 = np.sum(rho, axis=0)
    var1 = np.sum(rho1 * x**2) / np.sum(rho1)
    var2 = np.sum(rho2 * x**2) / np.sum(rho2)
    assert var1 > var2


# ---------------------------------------------------------------------------
# conditional_q
# ---------------------------------------------------------------------------

def test_conditional_q_product_partner_independent():
    g2, g1 = grid_pair()
    pair = product_pair(packet(g1, -1.0), packet(g1, 1.5), g2, (1.0, 1.0),
                        1.0, FREE)
    qa = conditional_q(pair, 1, 1.5)
    qb = conditional_q(pair, 1, 0.2)
    lit = np.abs(packet(g1, -1.0)) > 1e-4
    assert np.max(np.abs(qa[lit] - qb[lit])) < 1e-8


def test_conditional_q_plane_wave_is_zero():
    g2, g1 = grid_pair()
    k = 2 * np.pi * 4 / g1.lengths[0]
    pair = product_pair(np.exp(1j * k * g1.axes[0]), packet(g1, 0.5), g2,
                        (1.0, 1.0), 1.0, FREE)
    q1 = conditional_q(pair, 1, 0.5)
    assert np.max(np.abs(q1)) < 1e-8


def test_conditional_q_matches_single_particle_potential():
    # uniform partner: the conditional potential is the 1D Madelung q
    g2, g1 = grid_pair()
    psi1 = packet(g1, 0.7)
    pair = product_pair(psi1, np.ones(g1.points[0], complex), g2, (1.0, 1.0),
                        1.0, FREE)
    q_cond = conditional_q(pair, 1, float(g2.axes[1][40]))
    bundle = madelung_extract(Field(g1, psi1), PARAMS, Potentials.free(1))
    assert np.array_equal(q_cond, bundle.quantum_potential)


def test_conditional_q_entangled_depends_on_partner():
    g2, g1 = grid_pair()
    pair = symmetrized_pair(packet(g1, -2.0), packet(g1, 2.0), g2,
                            (1.0, 1.0), 1.0, FREE)
    qa = conditional_q(pair, 1, -2.0)
    qb = conditional_q(pair, 1, 2.0)
    # compare where the relevant slices are lit
    amp = np.abs(pair.psi.samples)
    lit = (np.abs(packet(g1, -2.0)) + np.abs(packet(g1, 2.0))) > 1e-3
    assert np.max(np.abs(qa[lit] - qb[lit])) > 0.1


def test_conditional_q_rejects_dead_slice():
    g2, g1 = grid_pair()
    pair = product_pair(packet(g1, 0.0, sigma=0.5),
                        packet(g1, 0.0, sigma=0.5), g2, (1.0, 1.0), 1.0, FREE)
    with pytest.raises(SolidynError):
        conditional_q(pair, 1, 11.0)


# ---------------------------------------------------------------------------
# pair_step: separability and bit-identity
# ---------------------------------------------------------------------------

def test_pair_product_bit_identical_to_single_run():
    # uniform partner pinned on a grid node, with the partner's rest energy
    # absorbed into a flat (pure-gauge) potential: every float op along the
    # particle-1 path coincides with the 1D coupled run
    g1 = Grid(256, 20.0)
    g2 = Grid((256, 256), (20.0, 20.0))
    x = g1.axes[0]
    psi1 = np.exp(-x**2 / 4).astype(complex)
    b = 25.0
    start = -0.6745
    u0 = gausson_init(GaussonParams(b, 1.0, center=(start,)), g1, 1.0)
    single = run_coupled(
        Field(g1, psi1.copy()),
        SolitonState(u0, PARAMS, b, 1.0, coupling_mode="dbb"),
        PARAMS, Potentials.free(1), dt=1e-3, steps=300)

    omega2 = 1.0
    gauge = Potentials(1, scalar=lambda t, c: -omega2 + 0.0 * c[0],
                       scalar_gradient=lambda t, c: (0.0,))
    pair = product_pair(psi1, np.ones(256, complex), g2, (1.0, omega2), 1.0,
                        (Potentials.free(1), gauge))
    z2_node = float(g2.axes[1][160])
    state = PairState(
        u1=SolitonState(gausson_init(GaussonParams(b, 1.0, center=(start,)),
                                     g1, 1.0), PARAMS, b, 1.0,
                        coupling_mode="dbb"),
        u2=soliton(g1, 2.5, b=b),
        z=[start, z2_node])
    run = run_pair(pair, state, dt=1e-3, steps=300)

    assert np.array_equal(run.z[:, 1], np.full(301, z2_node))
    assert np.array_equal(run.z[:, 0], single.reference.positions[:, 0])
    assert np.array_equal(run.centers1, single.centers[:, 0])
    assert np.array_equal(run.final_state.u1.u.samples,
                          single.final_state.u.samples)


def test_pair_product_separability_generic_packets():
    # generic product packets factorize to interpolation/round-off accuracy
    g2, g1 = grid_pair(n=128, box=20.0)
    psi1 = packet(g1, -1.0)
    pair = product_pair(psi1, packet(g1, 2.0), g2, (1.0, 1.0), 1.0, FREE)
    u1 = soliton(g1, -1.0)
    u2 = soliton(g1, 2.0)
    # start the synchronized point exactly where the single run starts: at
    # the soliton's computed first moment
    state = PairState(u1=u1, u2=u2, z=[u1.center[0], u2.center[0]])
    run = run_pair(pair, state, dt=2e-3, steps=400)

    single = run_coupled(
        Field(g1, psi1.copy()), soliton(g1, -1.0), PARAMS,
        Potentials.free(1), dt=2e-3, steps=400)
    assert np.max(np.abs(run.z[:, 0] - single.reference.positions[:, 0])) \
        < 1e-8
    assert np.max(np.abs(run.centers1 - single.centers[:, 0])) < 1e-8


def test_pair_continuity_residual():
    g2, g1 = grid_pair()
    pair = symmetrized_pair(packet(g1, -2.0, k=0.5), packet(g1, 2.0, k=-0.5),
                            g2, (1.0, 1.0), 1.0, FREE)
    dt = 1e-3
    snaps = [pair]
    for _ in range(2):
        pair = ls2_step(pair, dt)
        snaps.append(pair)
    resid = pair_continuity_residual(snaps, dt)
    rho_max = float(np.max(snaps[1].psi.density()))
    assert resid < 1e-4 * rho_max / dt


# ---------------------------------------------------------------------------
# nonlocality and tracking
# ---------------------------------------------------------------------------

def momentum_correlated_wave(g2, g1, k=1.5):
    """(L(x1)L(x2) + R(x1)R(x2))/sqrt(2): partner position selects the
    branch, so particle 1's velocity flips sign with z2."""
    left = packet(g1, -2.0, k=-k)
    right = packet(g1, 2.0, k=+k)
    psi2d = (np.outer(left, left) + np.outer(right, right)) / np.sqrt(2)
    return PairWave(Field(g2, psi2d), (1.0, 1.0), 1.0, FREE)


def test_pair_nonlocality_witness():
    g2, g1 = grid_pair()
    dx = g2.spacing[0]

    def resting_state(z1, z2):
        return PairState(u1=soliton(g1, z1), u2=soliton(g1, z2), z=[z1, z2])

    run_a = run_pair(momentum_correlated_wave(g2, g1),
                     resting_state(-2.0, -2.0), dt=2e-3, steps=400)
    run_b = run_pair(momentum_correlated_wave(g2, g1),
                     resting_state(-2.0, 3.0), dt=2e-3, steps=400)
    assert np.max(np.abs(run_a.z[:, 0] - run_b.z[:, 0])) > 10 * dx

    psi1 = packet(g1, -2.0)
    psi2 = (packet(g1, -2.0) + packet(g1, 3.0)) / np.sqrt(2)
    prod_a = run_pair(product_pair(psi1, psi2, g2, (1.0, 1.0), 1.0, FREE),
                      resting_state(-2.0, -2.0), dt=2e-3, steps=400)
    prod_b = run_pair(product_pair(psi1, psi2, g2, (1.0, 1.0), 1.0, FREE),
                      resting_state(-2.0, 3.0), dt=2e-3, steps=400)
    assert np.max(np.abs(prod_a.z[:, 0] - prod_b.z[:, 0])) < dx / 10


def test_pair_tracking_product_free():
    g2, g1 = grid_pair()
    pair = product_pair(packet(g1, -2.0), packet(g1, 2.0), g2, (1.0, 1.0),
                        1.0, FREE)
    state = PairState(u1=soliton(g1, -2.0), u2=soliton(g1, 2.0),
                      z=[-2.0, 2.0])
    run = run_pair(pair, state, dt=2e-3, steps=600)
    r1, r2 = pair_tracking_residual(run)
    assert r1 < 3 * g2.spacing[0]
    assert r2 < 3 * g2.spacing[1]


def test_pair_tracking_entangled():
    g2, g1 = grid_pair()
    wave = momentum_correlated_wave(g2, g1)
    vel, _ = pair_velocity_fields(wave)
    z0 = np.array([[-2.0, -2.0]])
    v0 = [g2.interpolate(vel[a], z0)[0] for a in range(2)]
    state = PairState(u1=soliton(g1, -2.0, velocity=v0[0]),
                      u2=soliton(g1, -2.0, velocity=v0[1]),
                      z=[-2.0, -2.0])
    run = run_pair(wave, state, dt=2e-3, steps=500)
    r1, r2 = pair_tracking_residual(run)
    assert r1 < 5 * g2.spacing[0]
    assert r2 < 5 * g2.spacing[1]


def test_pair_zero_coupling_straight_lines():
    # with the conditional potential forced off, the solitons ignore the
    # wave entirely and fly ballistically
    g2, g1 = grid_pair()
    wave = momentum_correlated_wave(g2, g1)
    zero_q = np.zeros(g1.shape)
    u1 = soliton(g1, -2.0, b=9.0, velocity=0.5)
    u2 = soliton(g1, 2.0, b=9.0, velocity=-0.25)
    dt = 2e-3
    for _ in range(500):
        wave = ls2_step(wave, dt)
        u1 = nls_step(u1, FREE[0], dt, external_q=zero_q)
        u2 = nls_step(u2, FREE[1], dt, external_q=zero_q)
    assert u1.center[0] == pytest.approx(-2.0 + 0.5 * 1.0, abs=1e-4)
    assert u2.center[0] == pytest.approx(2.0 - 0.25 * 1.0, abs=1e-4)


def test_pair_equivariance_2d():
    g2, g1 = grid_pair()
    pair = symmetrized_pair(packet(g1, -2.0, k=1.0), packet(g1, 2.0, k=-1.0),
                            g2, (1.0, 1.0), 1.0, FREE)
    hist = FlowHistory(g2, PARAMS, Potentials.free(2))
    densities = []
    dt = 2e-3
    for i in range(251):
        vel, amp = pair_velocity_fields(pair)
        hist.append(pair.psi.time_tag, vel, amp)
        densities.append(amp**2)
        if i < 250:
            pair = ls2_step(pair, dt)
    hist.freeze()
    starts = g2.sample_density(densities[0], 2000, seed=11)
    pos, _, _, _, _ = integrate_flow(hist, starts, record_quantum_force=False)
    report = equivariance_distance(densities, g2, hist.times, pos,
                                   indices=[0, 250], bins=8)
    assert np.all(report.distances < 0.07)
