"""Two-particle configuration-space pilot wave with per-particle solitons.

The pair wave Psi(t, x1, x2) lives on a 2D periodic grid (one axis per
particle, possibly different masses) and evolves under

    i dPsi/dt = sum_k [ w0k + e V_k(x_k) - (d/dx_k)^2 / (2 w0k) ] Psi

with both particle clocks synchronized to the single time t.  Each particle
k carries its own 1D u-field on the corresponding axis grid, driven by the
conditional quantum potential: the configuration-space amplitude sliced at
the partner's instantaneous position,

    q_k(x) = - (d^2 a / dx_k^2)(x, z_partner) / (2 w0k a(x, z_partner)).

For entangled waves this makes particle 1's dynamics depend on where
particle 2 actually is: the nonlocality of the guidance law, made explicit.
For product waves the partner dependence cancels and everything factorizes
into independent single-particle runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

import numpy as np

from .errors import SolidynError
from .grids import Field, Grid, _cubic_weights
from .potentials import Potentials
from .soliton import SolitonState, nls_step
from .stepping import NODE_MASK_REL, check_finite, strang_step
from .trajectories import FlowHistory, advance_positions


@dataclass
class PairWave:
    """Configuration-space wave plus per-particle masses and potentials."""

    psi: Field                    # 2D samples, axes (x1, x2)
    masses: tuple                 # (w01, w02)
    charge: float
    potentials: tuple             # (Potentials dim-1, Potentials dim-1)

    def __post_init__(self):
        if self.psi.grid.dim != 2:
            raise SolidynError("pair wave needs a 2D configuration grid")
        self.axis_grids = tuple(
            Grid(self.psi.grid.points[a], self.psi.grid.lengths[a])
            for a in range(2))

    def norm(self):
        return self.psi.norm()


def product_pair(samples1, samples2, grid: Grid, masses, charge,
                 potentials, time_tag=0.0) -> PairWave:
    """Psi(x1, x2) = psi1(x1) psi2(x2) on the 2D grid."""
    psi2d = np.outer(np.asarray(samples1, dtype=complex),
                     np.asarray(samples2, dtype=complex))
    return PairWave(Field(grid, psi2d, time_tag), tuple(masses), charge,
                    tuple(potentials))


def symmetrized_pair(samples_a, samples_b, grid: Grid, masses, charge,
                     potentials, time_tag=0.0) -> PairWave:
    """(psi_a psi_b + psi_b psi_a)/sqrt(2) exchange-symmetric entangled wave."""
    a = np.asarray(samples_a, dtype=complex)
    b = np.asarray(samples_b, dtype=complex)
    psi2d = (np.outer(a, b) + np.outer(b, a)) / np.sqrt(2.0)
    return PairWave(Field(grid, psi2d, time_tag), tuple(masses), charge,
                    tuple(potentials))


def ls2_step(pair: PairWave, dt: float) -> PairWave:
    """Strang split step of the two-particle wave (unitary to round-off)."""
    grid = pair.psi.grid
    t = pair.psi.time_tag
    e = pair.charge

    def w_at(tt):
        w1 = pair.masses[0] + e * pair.potentials[0].scalar_on_grid(
            pair.axis_grids[0], tt)
        w2 = pair.masses[1] + e * pair.potentials[1].scalar_on_grid(
            pair.axis_grids[1], tt)
        return w1[:, None] + w2[None, :]

    total = 0.0
    zero_a = np.zeros(1)
    for axis in range(2):
        k = grid._k_along(axis)
        total = total + (k - e * zero_a[0]) ** 2 / (2.0 * pair.masses[axis])
    kin = np.exp(-1j * dt * total)
    out = strang_step(pair.psi.samples, dt, w_at(t), w_at(t + dt), kin)
    return PairWave(Field(grid, out, t + dt), pair.masses, pair.charge,
                    pair.potentials)


def pair_velocity_fields(pair: PairWave):
    """Guidance velocity components v_k = Im[d_k Psi / Psi] / w0k plus the
    amplitude (for node masking)."""
    grid = pair.psi.grid
    psi = pair.psi.samples
    a = np.abs(psi)
    peak = float(a.max())
    if peak == 0.0:
        raise SolidynError("zero pair wave")
    floor = NODE_MASK_REL * peak
    rho_safe = np.maximum(a, floor) ** 2
    vel = np.empty((2,) + grid.shape)
    for axis in range(2):
        grad = grid.derivative(psi, axis)
        current = np.imag(np.conj(psi) * grad)
        vel[axis] = (current / rho_safe - 0.0) / pair.masses[axis]
    return vel, a


def conditional_q(pair: PairWave, which: int, partner_pos: float):
    """Conditional quantum potential for particle `which` (1 or 2).

    Slices |Psi| at the partner's position (cubic interpolation along the
    partner axis) and returns -(second derivative along the own axis) /
    (2 w0k slice amplitude) with the node floor, on the own-axis grid.
    """
    if which not in (1, 2):
        raise SolidynError("which must be 1 or 2")
    grid = pair.psi.grid
    own = which - 1
    other = 1 - own
    half = 0.5 * grid.lengths[other]
    if not (-half <= partner_pos < half):
        raise SolidynError("partner position outside the box")
    a = np.abs(pair.psi.samples)
    peak = float(a.max())
    floor = NODE_MASK_REL * peak
    d2a = grid.second_derivative(a, own)
    a_slice = _axis_slice(grid, a, other, partner_pos)
    d2a_slice = _axis_slice(grid, d2a, other, partner_pos)
    if np.all(a_slice < floor):
        raise SolidynError(
            "conditional slice lies entirely below the node floor")
    q = -d2a_slice / (2.0 * pair.masses[own] * np.maximum(a_slice, floor))
    return q


def _axis_slice(grid: Grid, data, axis, coord):
    """Cubic interpolation of a 2D array along one axis at a scalar coord."""
    base, frac = grid._fraction_index(np.asarray([coord]), axis)
    weights = _cubic_weights(frac)[:, 0]
    n = grid.points[axis]
    idx = [(int(base[0]) + off) % n for off in (-1, 0, 1, 2)]
    take = (lambda j: data[:, j]) if axis == 1 else (lambda j: data[j, :])
    out = weights[0] * take(idx[0])
    for s in (1, 2, 3):
        out = out + weights[s] * take(idx[s])
    return out


@dataclass
class PairState:
    """Both solitons, the synchronized configuration-space point, and the
    per-step caches (conditional potentials and velocity fields evaluated at
    the end of the previous step)."""

    u1: SolitonState
    u2: SolitonState
    z: np.ndarray
    q_cache: tuple = None
    vel_cache: tuple = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float).reshape(2)


def pair_step(pair: PairWave, state: PairState, dt: float):
    """Advance wave, synchronized trajectory point, and both solitons.

    Order per step: wave first; then the configuration-space RK4 for
    (z1, z2) against the bracketing velocity fields; then each particle's
    conditional quantum potential (at the partner's start and end
    positions) drives its 1D soliton.
    """
    t = pair.psi.time_tag
    grid = pair.psi.grid
    new_pair = ls2_step(pair, dt)
    check_finite(new_pair.psi.samples, round(t / max(dt, 1e-300)) + 1)

    if state.vel_cache is not None:
        vel_t, amp_t = state.vel_cache
    else:
        vel_t, amp_t = pair_velocity_fields(pair)
    vel_next, amp_next = pair_velocity_fields(new_pair)
    flow = FlowHistory(grid, None, None)
    flow.append(t, vel_t, amp_t)
    flow.append(t + dt, vel_next, amp_next)
    flow.freeze()
    z_old = state.z
    z_new = advance_positions(flow, np.atleast_2d(z_old), t, t + dt)[0]

    if state.q_cache is not None:
        q1_start, q2_start = state.q_cache
    else:
        q1_start = conditional_q(pair, 1, z_old[1])
        q2_start = conditional_q(pair, 2, z_old[0])
    q1_end = conditional_q(new_pair, 1, z_new[1])
    q2_end = conditional_q(new_pair, 2, z_new[0])

    u1 = nls_step(state.u1, pair.potentials[0], dt,
                  external_q=q1_start, external_q_end=q1_end)
    u2 = nls_step(state.u2, pair.potentials[1], dt,
                  external_q=q2_start, external_q_end=q2_end)
    return new_pair, PairState(u1=u1, u2=u2, z=z_new,
                               q_cache=(q1_end, q2_end),
                               vel_cache=(vel_next, amp_next))


@dataclass
class PairRun:
    times: np.ndarray
    z: np.ndarray                 # (n, 2) synchronized trajectory
    centers1: np.ndarray          # (n,) soliton-1 first moment
    centers2: np.ndarray
    wave_norms: np.ndarray
    u1_norms: np.ndarray
    u2_norms: np.ndarray
    final_pair: PairWave = None
    final_state: PairState = None
    psi_snapshots: list = _dc_field(default_factory=list)
    snapshot_times: list = _dc_field(default_factory=list)


def run_pair(pair: PairWave, state: PairState, dt: float, steps: int,
             store_every: int = 0) -> PairRun:
    """Drive pair_step, recording trajectory and tracking series."""
    times = [pair.psi.time_tag]
    zs = [state.z.copy()]
    c1 = [state.u1.center[0]]
    c2 = [state.u2.center[0]]
    wn = [pair.norm()]
    n1 = [state.u1.u.norm()]
    n2 = [state.u2.u.norm()]
    snaps, snap_times = [], []
    for i in range(steps):
        pair, state = pair_step(pair, state, dt)
        times.append(pair.psi.time_tag)
        zs.append(state.z.copy())
        c1.append(state.u1.center[0])
        c2.append(state.u2.center[0])
        wn.append(pair.norm())
        n1.append(state.u1.u.norm())
        n2.append(state.u2.u.norm())
        if store_every and (i + 1) % store_every == 0:
            snaps.append(pair.psi)
            snap_times.append(pair.psi.time_tag)
    return PairRun(times=np.asarray(times), z=np.asarray(zs),
                   centers1=np.asarray(c1), centers2=np.asarray(c2),
                   wave_norms=np.asarray(wn), u1_norms=np.asarray(n1),
                   u2_norms=np.asarray(n2), final_pair=pair,
                   final_state=state, psi_snapshots=snaps,
                   snapshot_times=snap_times)


def pair_tracking_residual(run: PairRun):
    """Per-particle max |xbar_k(t) - z_k(t)| over the run."""
    r1 = float(np.max(np.abs(run.centers1 - run.z[:, 0])))
    r2 = float(np.max(np.abs(run.centers2 - run.z[:, 1])))
    return r1, r2


def pair_continuity_residual(pairs, dt_between):
    """Max |d rho/dt + sum_k d_k(rho v_k)| from three consecutive waves."""
    if len(pairs) != 3:
        raise SolidynError("need exactly three consecutive snapshots")
    grid = pairs[1].psi.grid
    rho = [p.psi.density() for p in pairs]
    drho = (rho[2] - rho[0]) / (2.0 * dt_between)
    vel, amp = pair_velocity_fields(pairs[1])
    div = grid.derivative(rho[1] * vel[0], 0) \
        + grid.derivative(rho[1] * vel[1], 1)
    floor = NODE_MASK_REL * float(amp.max())
    mask = amp >= floor
    return float(np.max(np.abs(drho + div)[mask]))
