"""Nonlinear u-field with logarithmic nonlinearity: Gaussons and coupling.

The field obeys an NLS-type equation whose nonlinear term comes from

    N_log(rho) = -b [1 + ln(rho / f0^2)],   U_log(rho) = -b rho ln(rho / f0^2),

the only nonlinearity for which U - rho N = b rho pointwise, which makes the
static energy exactly b * integral(rho).  Its localized stationary solution
is the Gausson, a Gaussian profile of inverse squared width b.

Two coupling modes:

  classical  i du/dt = (w0 + eV) u + N_log(|u|^2)/(2 w0) u - (grad - ieA)^2 u/(2 w0)
  dbb        adds a pointwise external potential q(t, x) supplied by the
             linear pilot wave, which steers the soliton center along the
             guidance trajectory.

Coupling is strictly one way: the pilot wave never sees the u-field.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as _dc_field, replace

import numpy as np

from .errors import BoundaryMassError, SolidynError
from .grids import Field, Grid
from .potentials import PhysicalParams, Potentials
from .schrodinger import MadelungBundle, ls_step, madelung_extract
from .stepping import (BOUNDARY_MASS_LIMIT, check_finite, kinetic_multiplier,
                       strang_step)
from .trajectories import FlowHistory, TrajectoryRecord, advance_positions, \
    guided_velocity

RHO_FLOOR_REL = 1e-30      # vacuum floor for the logarithm, relative to f0^2
SCALE_SEPARATION = 20.0    # recommended sqrt(b) * sigma_psi lower bound


def log_nonlinearity(rho, b, f0):
    """N_log(rho) with a vacuum floor; the floor only touches regions of
    negligible density, where the phase it produces is physically empty."""
    floor = RHO_FLOOR_REL * f0**2
    return -b * (1.0 + np.log(np.maximum(rho, floor) / f0**2))


def log_potential_density(rho, b, f0):
    """U_log(rho); satisfies U - rho N = b rho pointwise."""
    floor = RHO_FLOOR_REL * f0**2
    return -b * rho * np.log(np.maximum(rho, floor) / f0**2)


@dataclass(frozen=True)
class GaussonParams:
    """Gausson shape and kinematics: inverse squared width b, reference
    amplitude f0, initial center, velocity, and global phase."""

    b: float
    f0: float
    center: tuple = (0.0,)
    velocity: tuple = (0.0,)
    global_phase: float = 0.0

    def __post_init__(self):
        if self.b <= 0 or self.f0 <= 0:
            raise SolidynError("b and f0 must be positive")


def gausson_init(gp: GaussonParams, grid: Grid, omega0: float) -> Field:
    """Construct a (possibly boosted) Gausson on the grid.

    The amplitude carries the dimension correction f0 * exp((d-1)/2): with it
    the profile solves lap F = N_log(F^2) F exactly in d dimensions, not just
    in 1D.  The phase w0 v . (x - center) boosts the soliton to velocity v
    without touching |u|.
    """
    d = grid.dim
    center = np.asarray(gp.center, dtype=float).reshape(d)
    velocity = np.asarray(gp.velocity, dtype=float).reshape(d)
    min_width = 10.0 / np.sqrt(gp.b)
    for L in grid.lengths:
        if L < min_width:
            raise SolidynError(
                f"box length {L} below {min_width:.3g} = 10/sqrt(b); the "
                "Gausson would wrap around the periodic seam")
    meshes = grid.meshes()
    r2 = 0.0
    phase = gp.global_phase
    for a in range(d):
        delta = meshes[a] - center[a]
        r2 = r2 + delta**2
        phase = phase + omega0 * velocity[a] * delta
    peak = gp.f0 * np.exp(0.5 * (d - 1))
    return Field(grid, peak * np.exp(-0.5 * gp.b * r2) * np.exp(1j * phase))


@dataclass
class SolitonState:
    """Evolving u-field plus its nonlinearity, coupling mode, and tracked
    center (kept wrap-aware so seam crossings stay continuous)."""

    u: Field
    params: PhysicalParams
    b: float
    f0: float
    coupling_mode: str = "classical"   # or "dbb"
    center: np.ndarray = None

    def __post_init__(self):
        if self.coupling_mode not in ("classical", "dbb"):
            raise SolidynError(f"unknown coupling mode {self.coupling_mode!r}")
        if self.center is None:
            self.center, _ = soliton_center(self.u)
        else:
            self.center = np.asarray(self.center, dtype=float)


def soliton_center(u: Field, previous=None):
    """First moment xbar of |u|^2 and the norm C, wrap-aware.

    Coordinates are re-referenced to the previous center (mapped into the
    half-open window of width L around it), so a soliton crossing the
    periodic seam keeps a continuous track.
    """
    grid = u.grid
    rho = u.density()
    c = float(grid.integrate(rho))
    if c <= 0.0:
        raise SolidynError("u-field has zero norm; no center defined")
    if previous is None:
        peak = np.unravel_index(int(np.argmax(rho)), grid.shape)
        previous = np.array([grid.axes[a][peak[a]] for a in range(grid.dim)])
    previous = np.asarray(previous, dtype=float)
    meshes = grid.meshes()
    xbar = np.empty(grid.dim)
    for a in range(grid.dim):
        box = grid.lengths[a]
        delta = np.mod(meshes[a] - previous[a] + 0.5 * box, box) - 0.5 * box
        xbar[a] = previous[a] + grid.integrate(rho * delta) / c
    return xbar, c


def second_central_moments(u: Field, center):
    """Per-axis variance of |u|^2 about `center` (wrap-aware)."""
    grid = u.grid
    rho = u.density()
    c = grid.integrate(rho)
    meshes = grid.meshes()
    out = np.empty(grid.dim)
    for a in range(grid.dim):
        box = grid.lengths[a]
        delta = np.mod(meshes[a] - center[a] + 0.5 * box, box) - 0.5 * box
        out[a] = grid.integrate(rho * delta**2) / c
    return out


def nls_step(state: SolitonState, potentials: Potentials, dt: float,
             external_q=None, external_q_end=None) -> SolitonState:
    """One Strang split step of the nonlinear field.

    Phase sub-steps use w0 + eV + [q] + N_log(|u|^2)/(2 w0); they leave the
    modulus untouched, so the norm is conserved to round-off.  In dbb mode
    `external_q` (and optionally `external_q_end` for the second half step)
    must supply the pilot quantum potential on the same grid.
    """
    if (state.coupling_mode == "dbb") != (external_q is not None):
        raise SolidynError("external_q must be supplied exactly in dbb mode")
    u, grid = state.u, state.u.grid
    p = state.params
    t = u.time_tag
    e = p.charge
    two_w0 = 2.0 * p.omega0
    if external_q_end is None:
        external_q_end = external_q

    w_start = p.omega0 + e * potentials.scalar_on_grid(grid, t)
    if external_q is not None:
        w_start = w_start + external_q
    w_start = w_start + log_nonlinearity(u.density(), state.b, state.f0) / two_w0

    base_end = p.omega0 + e * potentials.scalar_on_grid(grid, t + dt)
    if external_q_end is not None:
        base_end = base_end + external_q_end

    def w_end(mid):
        rho = np.abs(mid) ** 2
        return base_end + log_nonlinearity(rho, state.b, state.f0) / two_w0

    kin = kinetic_multiplier(grid, p.omega0, e,
                             potentials.vector(t + 0.5 * dt), dt)
    out = strang_step(u.samples, dt, w_start, w_end, kin)
    new_u = Field(grid, out, t + dt)
    xbar, _ = soliton_center(new_u, previous=state.center)
    return replace(state, u=new_u, center=xbar)


def phase_harmony_residual(state: SolitonState, madelung: MadelungBundle,
                           z, radius: float, potentials: Potentials = None) -> float:
    """Mismatch between the soliton's local wavevector and the pilot phase
    gradient at the guidance point z.

    Density-weighted RMS over the ball |x - z| < radius of
    |Im[grad u / u](x) - w0 v_psi(z) - eA|, normalized by w0 |v_psi(z)| + sqrt(b).
    """
    grid = state.u.grid
    z = np.asarray(z, dtype=float).reshape(grid.dim)
    for a in range(grid.dim):
        half = 0.5 * grid.lengths[a]
        if z[a] - radius < -half or z[a] + radius > half:
            raise SolidynError("phase-harmony window clipped by the boundary")
    p = state.params
    u = state.u.samples
    rho = np.abs(u) ** 2
    floor = (1e-8 * np.sqrt(float(rho.max()))) ** 2
    grad = grid.gradient(u)
    rho_safe = np.maximum(rho, floor)

    v_z = np.array([grid.interpolate(madelung.velocity[a], [z])[0]
                    for a in range(grid.dim)])
    if potentials is not None:
        avec = p.charge * potentials.vector(state.u.time_tag)
    else:
        avec = np.zeros(grid.dim)

    meshes = grid.meshes()
    dist2 = 0.0
    for a in range(grid.dim):
        dist2 = dist2 + (meshes[a] - z[a]) ** 2
    window = dist2 < radius**2
    weights = rho[window]
    total = float(np.sum(weights))
    if total <= 0.0:
        raise SolidynError("empty phase-harmony window")

    mismatch2 = 0.0
    for a in range(grid.dim):
        kappa = np.imag(np.conj(u) * grad[a]) / rho_safe
        target = p.omega0 * v_z[a] + avec[a]
        mismatch2 = mismatch2 + (kappa[window] - target) ** 2
    rms = np.sqrt(np.sum(weights * mismatch2) / total)
    return float(rms / (p.omega0 * np.linalg.norm(v_z) + np.sqrt(state.b)))


@dataclass
class SolitonRun:
    """Series recorded along a soliton evolution (classical or coupled)."""

    grid: Grid
    params: PhysicalParams
    potentials: Potentials
    b: float
    f0: float
    mode: str
    times: np.ndarray = None
    centers: np.ndarray = None        # (n, dim) wrap-aware xbar
    norms: np.ndarray = None          # (n,) C = integral |u|^2
    mean_em_force: np.ndarray = None  # (n, dim) integral(rho e E) / C
    fq_at_center: np.ndarray = None   # (n, dim); zeros in classical mode
    boundary_mass: np.ndarray = None
    snapshot_times: np.ndarray = None
    u_snapshots: list = _dc_field(default_factory=list)
    final_state: SolitonState = None
    # coupled runs only:
    reference: TrajectoryRecord = None
    psi_snapshots: list = _dc_field(default_factory=list)
    harmony_times: np.ndarray = None
    harmony: np.ndarray = None


def _grid_positions(grid):
    meshes = grid.meshes()
    return np.stack([m.reshape(-1) for m in meshes], axis=1)


def run_classical(state: SolitonState, potentials: Potentials, dt: float,
                  steps: int, store_every: int = 1,
                  abort_on_boundary_mass: bool = False) -> SolitonRun:
    """Evolve a classical-mode soliton, recording center and norm series."""
    if state.coupling_mode != "classical":
        raise SolidynError("run_classical needs a classical-mode state")
    grid = state.u.grid
    pos = _grid_positions(grid)
    e = state.params.charge
    times = [state.u.time_tag]
    centers = [state.center.copy()]
    norms = [state.u.norm()]
    edge = [grid.boundary_mass_fraction(state.u.density())]
    mean_em = [_density_mean_force(state.u, potentials, pos, e)]
    snaps = [state.u]
    snap_times = [state.u.time_tag]
    for i in range(steps):
        state = nls_step(state, potentials, dt)
        check_finite(state.u.samples, i + 1)
        frac = grid.boundary_mass_fraction(state.u.density())
        if abort_on_boundary_mass and frac > BOUNDARY_MASS_LIMIT:
            raise BoundaryMassError(
                f"boundary mass fraction {frac:.3e} exceeded "
                f"{BOUNDARY_MASS_LIMIT} at step {i + 1}")
        times.append(state.u.time_tag)
        centers.append(state.center.copy())
        norms.append(state.u.norm())
        edge.append(frac)
        mean_em.append(_density_mean_force(state.u, potentials, pos, e))
        if (i + 1) % store_every == 0:
            snaps.append(state.u)
            snap_times.append(state.u.time_tag)
    n = len(times)
    return SolitonRun(
        grid=grid, params=state.params, potentials=potentials,
        b=state.b, f0=state.f0, mode="classical",
        times=np.asarray(times), centers=np.asarray(centers),
        norms=np.asarray(norms), mean_em_force=np.asarray(mean_em),
        fq_at_center=np.zeros((n, grid.dim)),
        boundary_mass=np.asarray(edge),
        snapshot_times=np.asarray(snap_times), u_snapshots=snaps,
        final_state=state)


def _density_mean_force(u: Field, potentials: Potentials, grid_positions, e):
    """integral(|u|^2 e E(t, x)) / C: the density-averaged Lorentz force."""
    grid = u.grid
    rho = u.density()
    c = grid.integrate(rho)
    efield = potentials.electric_field(u.time_tag, grid_positions)
    out = np.empty(grid.dim)
    for a in range(grid.dim):
        out[a] = grid.integrate(rho * efield[:, a].reshape(grid.shape)) / c
    return e * out


def run_coupled(psi0: Field, state: SolitonState, pilot_params: PhysicalParams,
                potentials: Potentials, dt: float, steps: int,
                store_every: int = 0, harmony_every: int = 0,
                harmony_radius: float = None,
                abort_on_boundary_mass: bool = False) -> SolitonRun:
    """Co-evolve pilot wave and dbb-coupled soliton in lockstep.

    Per step: advance the pilot wave, extract its quantum potential at both
    ends of the step, advance the u-field with that external potential, and
    advance the reference guidance trajectory (same start as the soliton)
    against the same two Madelung snapshots.  The coupling is one way: the
    pilot wave never sees u.
    """
    if state.coupling_mode != "dbb":
        raise SolidynError("run_coupled needs a dbb-mode state")
    grid = psi0.grid
    if grid != state.u.grid:
        raise SolidynError("pilot wave and soliton must share one grid")
    bundle = madelung_extract(psi0, pilot_params, potentials)
    _warn_scale_separation(psi0, state.b)

    z = np.atleast_2d(state.center.copy())
    if grid.interpolate(bundle.amplitude, z)[0] < bundle.amp_floor:
        raise SolidynError("soliton center starts on the pilot node mask")

    pos = _grid_positions(grid)
    e = state.params.charge
    psi = psi0
    times = [psi.time_tag]
    centers = [state.center.copy()]
    norms = [state.u.norm()]
    edge = [grid.boundary_mass_fraction(state.u.density())]
    mean_em = [_density_mean_force(state.u, potentials, pos, e)]
    fq_c = [_interp_vector(grid, bundle.quantum_force, state.center)]
    ref_pos = [z[0].copy()]
    ref_vel = []
    ref_fq = [_interp_vector(grid, bundle.quantum_force, z[0])]
    ref_fem = [pilot_params.charge * potentials.electric_field(psi.time_tag, z)[0]]
    ref_near = [False]
    u_snaps, psi_snaps, snap_times = [state.u], [psi], [psi.time_tag]
    harmony_t, harmony_v = [], []

    for i in range(steps):
        t = psi.time_tag
        psi_next = ls_step(psi, pilot_params, potentials, dt)
        check_finite(psi_next.samples, i + 1)
        bundle_next = madelung_extract(psi_next, pilot_params, potentials)

        flow = FlowHistory(grid, pilot_params, potentials)
        flow.append(t, bundle.velocity, bundle.amplitude, bundle.quantum_force)
        flow.append(t + dt, bundle_next.velocity, bundle_next.amplitude,
                    bundle_next.quantum_force)
        flow.freeze()
        k1 = guided_velocity(flow, t, z, t)
        ref_vel.append(k1[0].copy())
        z = advance_positions(flow, z, t, t + dt, k1=k1)

        state = nls_step(state, potentials, dt,
                         external_q=bundle.quantum_potential,
                         external_q_end=bundle_next.quantum_potential)
        check_finite(state.u.samples, i + 1)

        frac = grid.boundary_mass_fraction(state.u.density())
        frac_psi = grid.boundary_mass_fraction(psi_next.density())
        if abort_on_boundary_mass and max(frac, frac_psi) > BOUNDARY_MASS_LIMIT:
            raise BoundaryMassError(
                f"boundary mass fraction exceeded at step {i + 1}")

        times.append(psi_next.time_tag)
        centers.append(state.center.copy())
        norms.append(state.u.norm())
        edge.append(frac)
        mean_em.append(_density_mean_force(state.u, potentials, pos, e))
        fq_c.append(_interp_vector(grid, bundle_next.quantum_force, state.center))
        ref_pos.append(z[0].copy())
        ref_fq.append(_interp_vector(grid, bundle_next.quantum_force, z[0]))
        ref_fem.append(pilot_params.charge
                       * potentials.electric_field(psi_next.time_tag, z)[0])
        ref_near.append(bool(flow.proximity_flags(t + dt, z)[0]))

        if store_every and (i + 1) % store_every == 0:
            u_snaps.append(state.u)
            psi_snaps.append(psi_next)
            snap_times.append(psi_next.time_tag)
        if harmony_every and (i + 1) % harmony_every == 0:
            radius = harmony_radius or 4.0 / np.sqrt(state.b)
            harmony_t.append(psi_next.time_tag)
            harmony_v.append(phase_harmony_residual(
                state, bundle_next, state.center, radius, potentials))

        psi, bundle = psi_next, bundle_next

    ref_vel.append(guided_velocity(
        _single_flow(grid, pilot_params, potentials, psi.time_tag, bundle),
        psi.time_tag, z, psi.time_tag)[0].copy())
    reference = TrajectoryRecord(
        times=np.asarray(times), positions=np.asarray(ref_pos),
        velocities=np.asarray(ref_vel), quantum_force=np.asarray(ref_fq),
        em_force=np.asarray(ref_fem),
        node_proximity=np.asarray(ref_near))
    return SolitonRun(
        grid=grid, params=state.params, potentials=potentials,
        b=state.b, f0=state.f0, mode="dbb",
        times=np.asarray(times), centers=np.asarray(centers),
        norms=np.asarray(norms), mean_em_force=np.asarray(mean_em),
        fq_at_center=np.asarray(fq_c), boundary_mass=np.asarray(edge),
        snapshot_times=np.asarray(snap_times), u_snapshots=u_snaps,
        final_state=state, reference=reference, psi_snapshots=psi_snaps,
        harmony_times=np.asarray(harmony_t), harmony=np.asarray(harmony_v))


def _single_flow(grid, params, potentials, t, bundle):
    flow = FlowHistory(grid, params, potentials)
    flow.append(t, bundle.velocity, bundle.amplitude, bundle.quantum_force)
    flow.append(t, bundle.velocity, bundle.amplitude, bundle.quantum_force)
    return flow.freeze()


def _interp_vector(grid, components, point):
    point = np.atleast_2d(point)
    return np.array([grid.interpolate(components[a], point)[0]
                     for a in range(grid.dim)])


def _warn_scale_separation(psi0: Field, b: float):
    grid = psi0.grid
    rho = psi0.density()
    total = grid.integrate(rho)
    meshes = grid.meshes()
    var = 0.0
    for a in range(grid.dim):
        mean = grid.integrate(rho * meshes[a]) / total
        var += grid.integrate(rho * (meshes[a] - mean) ** 2) / total
    sigma = np.sqrt(var / grid.dim)
    if np.sqrt(b) < SCALE_SEPARATION / sigma:
        warnings.warn(
            f"soliton width 1/sqrt(b) = {1/np.sqrt(b):.3g} is not well "
            f"separated from the pilot scale sigma = {sigma:.3g} "
            f"(want sqrt(b) >= {SCALE_SEPARATION}/sigma)", stacklevel=2)


def classical_trajectory(times, z0, v0, params: PhysicalParams,
                         potentials: Potentials):
    """Second-order reference path w0 z'' = e E (quantum force omitted).

    RK4 on the (position, velocity) pair over the same time stamps as a
    guidance trajectory; used as the discriminating comparison for coupled
    tracking runs.
    """
    z = np.asarray(z0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    e_over_m = params.charge / params.omega0

    def accel(t, pos):
        return e_over_m * potentials.electric_field(t, pos[None, :])[0]

    out = np.empty((len(times), z.size))
    out[0] = z
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        k1z, k1v = v, accel(t, z)
        k2z, k2v = v + 0.5 * h * k1v, accel(t + 0.5 * h, z + 0.5 * h * k1z)
        k3z, k3v = v + 0.5 * h * k2v, accel(t + 0.5 * h, z + 0.5 * h * k2z)
        k4z, k4v = v + h * k3v, accel(t + h, z + h * k3z)
        z = z + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        out[i + 1] = z
    return out
