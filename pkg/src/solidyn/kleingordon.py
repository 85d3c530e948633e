"""1+1D linear Klein-Gordon pilot wave: leapfrog evolution, variable quantum
mass, relativistic guidance trajectories, and tachyon-sector detection.

The field obeys (natural units, A = 0, static scalar potential V(x))

    (d/dt + ieV)^2 Psi = d^2Psi/dx^2 - w0^2 Psi

advanced by an explicit leapfrog in time with a spectral spatial Laplacian.
The polar split yields a variable squared mass

    M^2(t, x) = w0^2 + box(a)/a,   box(a) = d^2a/dt^2 - d^2a/dx^2

and a current J = (J0, J1) whose flow velocity J1/J0 guides particles.
Where M^2 <= 0 the would-be motion is space-like (imaginary mass) and where
J0 <= 0 the current points into the past; both sectors are detected and
refused: trajectories abort rather than continue through them.

d^2a/dt^2 uses three stored amplitude levels of the scheme itself, so the
residual diagnostics measure the discrete dynamics actually run, not a
mismatched analytic derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (PastOrientedCurrentError, SolidynError,
                     TachyonicRegionError)
from .grids import Field, Grid
from .potentials import PhysicalParams, Potentials
from .stepping import NODE_MASK_REL, check_finite
from .trajectories import FlowHistory, trajectory_from_flow

CFL_RATIO = 0.5   # dt <= CFL_RATIO * dx


def discrete_mode_frequency(k: float, omega0: float, dt: float) -> float:
    """Temporal frequency of the leapfrog scheme's own plane-wave mode.

    sin(E dt / 2) = (dt/2) sqrt(k^2 + w0^2); initializing with this E makes
    e^{i(kx - E t)} an exact eigenmode of the discrete update.
    """
    arg = 0.5 * dt * np.sqrt(k**2 + omega0**2)
    if arg >= 1.0:
        raise SolidynError("mode outside the leapfrog stability region")
    return 2.0 / dt * np.arcsin(arg)


@dataclass
class KGState:
    """Two retained field levels (t - dt, t) plus the step size."""

    grid: Grid
    params: PhysicalParams
    potentials: Potentials
    psi_prev: np.ndarray
    psi: np.ndarray
    time: float
    dt: float

    @classmethod
    def _validate(cls, grid, potentials, dt, t):
        if grid.dim != 1:
            raise SolidynError("the Klein-Gordon sector is 1+1D only")
        if dt > CFL_RATIO * grid.spacing[0]:
            raise SolidynError(
                f"dt = {dt} violates the CFL bound dt <= "
                f"{CFL_RATIO} dx = {CFL_RATIO * grid.spacing[0]:.6g}")
        if np.any(potentials.vector(t) != 0.0):
            raise SolidynError("the Klein-Gordon sector requires A = 0")

    @classmethod
    def from_initial(cls, psi0: Field, dpsi_dt0, params: PhysicalParams,
                     potentials: Potentials, dt: float) -> "KGState":
        """Build the starting level pair from Psi(0) and dPsi/dt(0).

        Psi(-dt) comes from a second-order Taylor step backwards using the
        field equation for the second time derivative.
        """
        grid = psi0.grid
        cls._validate(grid, potentials, dt, psi0.time_tag)
        e = params.charge
        v = potentials.scalar_on_grid(grid, psi0.time_tag)
        dpsi = np.asarray(dpsi_dt0, dtype=complex)
        d2 = (grid.laplacian(psi0.samples) - params.omega0**2 * psi0.samples
              - 2j * e * v * dpsi + (e * v) ** 2 * psi0.samples)
        psi_prev = psi0.samples - dt * dpsi + 0.5 * dt**2 * d2
        return cls(grid=grid, params=params, potentials=potentials,
                   psi_prev=psi_prev, psi=psi0.samples.copy(),
                   time=psi0.time_tag, dt=dt)

    @classmethod
    def from_levels(cls, psi_prev, psi0: Field, params: PhysicalParams,
                    potentials: Potentials, dt: float) -> "KGState":
        """Start from two explicitly supplied levels Psi(-dt), Psi(0); use
        this to seed exact discrete eigenmodes of the leapfrog."""
        grid = psi0.grid
        cls._validate(grid, potentials, dt, psi0.time_tag)
        return cls(grid=grid, params=params, potentials=potentials,
                   psi_prev=np.asarray(psi_prev, dtype=complex),
                   psi=psi0.samples.copy(), time=psi0.time_tag, dt=dt)


def lkg_step(state: KGState) -> tuple:
    """One leapfrog update; returns (new state, psi at t + dt).

    Central differences in time around t, spectral Laplacian in space; with
    V = 0 the scheme conserves the discrete field energy up to a bounded
    O(dt^2) oscillation with no secular drift.
    """
    grid, p = state.grid, state.params
    e = p.charge
    dt = state.dt
    v = e * state.potentials.scalar_on_grid(grid, state.time)
    rhs = (grid.laplacian(state.psi) - p.omega0**2 * state.psi
           + v**2 * state.psi + 2.0 * state.psi / dt**2
           - state.psi_prev * (1.0 / dt**2 - 1j * v / dt))
    psi_next = rhs / (1.0 / dt**2 + 1j * v / dt)
    new = KGState(grid=grid, params=p, potentials=state.potentials,
                  psi_prev=state.psi, psi=psi_next, time=state.time + dt,
                  dt=dt)
    return new, psi_next


@dataclass
class KGMadelung:
    """Polar-split fields of a Klein-Gordon snapshot (at the middle of three
    retained time levels)."""

    grid: Grid
    time_tag: float
    amplitude: np.ndarray
    mass_sq: np.ndarray          # w0^2 + box(a)/a, floored amplitude
    current_t: np.ndarray        # J0
    current_x: np.ndarray        # J1
    velocity: np.ndarray         # J1/J0 where defined
    node_mask: np.ndarray
    tachyon_mask: np.ndarray     # M^2 <= 0
    past_oriented_mask: np.ndarray  # J0 <= 0


def kg_madelung(psi_prev, psi, psi_next, t, dt, grid: Grid,
                params: PhysicalParams, potentials: Potentials) -> KGMadelung:
    """Amplitude, variable mass, current, and sector masks at time t."""
    p = params
    a_prev = np.abs(psi_prev)
    a = np.abs(psi)
    a_next = np.abs(psi_next)
    peak = float(a.max())
    if peak == 0.0:
        raise SolidynError("zero field has no Madelung decomposition")
    floor = NODE_MASK_REL * peak
    a_safe = np.maximum(a, floor)
    box_a = (a_next - 2.0 * a + a_prev) / dt**2 - grid.laplacian(a)
    mass_sq = p.omega0**2 + box_a / a_safe
    dpsi_dt = (psi_next - psi_prev) / (2.0 * dt)
    v_pot = potentials.scalar_on_grid(grid, t)
    j0 = (-np.imag(np.conj(psi) * dpsi_dt)
          - p.charge * v_pot * a**2) / p.omega0
    j1 = np.imag(np.conj(psi) * grid.derivative(psi, 0)) / p.omega0
    node = a < floor
    tachyon = mass_sq <= 0.0
    past = j0 <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        velocity = np.where(np.abs(j0) > 0, j1 / j0, 0.0)
    bad = node | tachyon | past
    if bad.all():
        raise SolidynError("every sample is masked; no guidance flow exists")
    return KGMadelung(grid=grid, time_tag=t, amplitude=a, mass_sq=mass_sq,
                      current_t=j0, current_x=j1, velocity=velocity,
                      node_mask=node, tachyon_mask=tachyon,
                      past_oriented_mask=past)


class KGHistory(FlowHistory):
    """Snapshot history with relativistic sector masks and mass fields."""

    def __init__(self, grid, params, potentials):
        super().__init__(grid, params, potentials)
        self.mass_sq = []
        self.j0 = []
        self.j1 = []
        self.tachyon_masks = []
        self.past_masks = []

    def append_kg(self, bundle: KGMadelung):
        self.append(bundle.time_tag, bundle.velocity[None, ...],
                    bundle.amplitude)
        self.mass_sq.append(bundle.mass_sq)
        self.j0.append(bundle.current_t)
        self.j1.append(bundle.current_x)
        self.tachyon_masks.append(bundle.tachyon_mask)
        self.past_masks.append(bundle.past_oriented_mask)

    def _nearest_cells(self, positions):
        x = positions[:, 0]
        n = self.grid.points[0]
        idx = np.rint((x + 0.5 * self.grid.lengths[0])
                      / self.grid.spacing[0]).astype(int)
        return idx % n

    def check(self, t, positions, last_valid):
        super().check(t, positions, last_valid)
        i, j = self.bracket(t)
        cells = self._nearest_cells(positions)
        for snap in (i, j):
            if self.tachyon_masks[snap][cells].any():
                raise TachyonicRegionError(
                    f"tachyonic region (M^2 <= 0) at t={t:.6g}", last_valid)
            if self.past_masks[snap][cells].any():
                raise PastOrientedCurrentError(
                    f"past-oriented current (J0 <= 0) at t={t:.6g}",
                    last_valid)
        speed = np.abs(self.velocity_at(t, positions))
        if np.any(speed >= 1.0):
            raise TachyonicRegionError(
                f"tachyonic region (|v| >= 1) at t={t:.6g}", last_valid)

    def mass_at(self, t, positions):
        msq = self._blend(self.mass_sq, t, positions)
        return np.sqrt(np.maximum(msq, 0.0))

    def _mass_fields(self):
        if not hasattr(self, "_mass_cache"):
            self._mass_cache = [np.sqrt(np.maximum(m, 0.0))
                                for m in self.mass_sq]
        return self._mass_cache

    def mass_at_series(self, ts, zs):
        """M interpolated along a path sampled at (ts[i], zs[i])."""
        out = np.empty(len(ts))
        for i in range(len(ts)):
            out[i] = self.mass_at(ts[i], zs[i:i + 1])[0]
        return out

    def mass_gradients(self, ts, zs):
        """(dM/dt, dM/dx) along a path; dM/dt by centered snapshot
        differences, dM/dx spectral."""
        m = self._mass_fields()
        times = self.times
        n = len(times)
        dmdt_fields = []
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            dmdt_fields.append((m[hi] - m[lo]) / (times[hi] - times[lo]))
        dmdx_fields = [self.grid.derivative(f, 0) for f in m]
        out_t = np.empty(len(ts))
        out_x = np.empty(len(ts))
        for i in range(len(ts)):
            out_t[i] = self._blend(dmdt_fields, ts[i], zs[i:i + 1])[0]
            out_x[i] = self._blend(dmdx_fields, ts[i], zs[i:i + 1])[0]
        return out_t, out_x


@dataclass
class KGRun:
    history: KGHistory
    final_psi: Field
    energies: np.ndarray    # discrete field energy at snapshot times


def evolve_kg(psi0: Field, dpsi_dt0, params: PhysicalParams,
              potentials: Potentials, dt: float, steps: int,
              psi_prev=None) -> KGRun:
    """Evolve the Klein-Gordon wave, caching guidance snapshots at every
    step time 0, dt, ..., steps*dt.

    Initial data: Psi(0) plus either dPsi/dt(0) or an explicit previous
    level Psi(-dt) (`psi_prev`, for exact discrete modes).
    """
    if psi_prev is not None:
        state = KGState.from_levels(psi_prev, psi0, params, potentials, dt)
    else:
        state = KGState.from_initial(psi0, dpsi_dt0, params, potentials, dt)
    grid = psi0.grid
    history = KGHistory(grid, params, potentials)
    energies = []
    prev_level = state.psi_prev
    for n in range(steps + 1):
        state, psi_next = lkg_step(state)
        check_finite(psi_next, n)
        t_mid = state.time - dt
        bundle = kg_madelung(prev_level, state.psi_prev, psi_next, t_mid, dt,
                             grid, params, potentials)
        history.append_kg(bundle)
        energies.append(_field_energy(prev_level, state.psi_prev, psi_next,
                                      dt, grid, params.omega0))
        prev_level = state.psi_prev
    history.freeze()
    final = Field(grid, state.psi_prev, state.time - dt)
    return KGRun(history=history, final_psi=final,
                 energies=np.asarray(energies))


def _field_energy(psi_prev, psi, psi_next, dt, grid, omega0):
    """Centered-difference field energy |dPsi/dt|^2 + |dPsi/dx|^2 + w0^2|Psi|^2."""
    dpsi_dt = (psi_next - psi_prev) / (2.0 * dt)
    dpsi_dx = grid.derivative(psi, 0)
    density = (np.abs(dpsi_dt) ** 2 + np.abs(dpsi_dx) ** 2
               + omega0**2 * np.abs(psi) ** 2)
    return float(grid.integrate(density))


def kg_bohm_trajectory(z0, history: KGHistory):
    """Guidance trajectory dz/dt = J1/J0; aborts on tachyonic regions,
    past-oriented current, node encounters, and box exits."""
    traj = trajectory_from_flow(history, z0)
    if np.any(np.abs(traj.velocities) >= 1.0):
        raise TachyonicRegionError(
            "tachyonic region: recorded speed reached 1",
            float(traj.times[0]))
    return traj


def current_conservation_residual(history: KGHistory) -> float:
    """Max |dJ0/dt + dJ1/dx| over interior snapshots (centered in time)."""
    times = history.times
    if len(times) < 3:
        raise SolidynError("need at least 3 snapshots")
    worst = 0.0
    for i in range(1, len(times) - 1):
        dt2 = times[i + 1] - times[i - 1]
        dj0 = (history.j0[i + 1] - history.j0[i - 1]) / dt2
        dj1 = history.grid.derivative(history.j1[i], 0)
        worst = max(worst, float(np.max(np.abs(dj0 + dj1))))
    return worst


def kg_newton_residual(traj, history: KGHistory, params: PhysicalParams,
                       potentials: Potentials):
    """Residual of d/dtau(M u^mu) = d^mu M + e F^{mu nu} u_nu along a path.

    Proper time comes from dtau = sqrt(1 - v^2) dt; the mass and its
    gradients are interpolated from the stored snapshots.  Returns interior
    times, the (n, 2) residual series, and its RMS relative to the dominant
    term scale.
    """
    t = traj.times
    z = traj.positions
    v = traj.velocities[:, 0]
    if np.any(np.abs(v) >= 1.0):
        raise SolidynError("path contains luminal segments")
    gamma = 1.0 / np.sqrt(1.0 - v**2)
    dtau_steps = 0.5 * (np.sqrt(1 - v[1:] ** 2) + np.sqrt(1 - v[:-1] ** 2)) \
        * np.diff(t)
    tau = np.concatenate([[0.0], np.cumsum(dtau_steps)])

    mass = history.mass_at_series(t, z)
    dmass_dt, dmass_dx = history.mass_gradients(t, z)
    p0 = mass * gamma
    p1 = mass * gamma * v
    dp0 = np.gradient(p0, tau)
    dp1 = np.gradient(p1, tau)

    efield = np.array([params.charge
                       * potentials.electric_field(t[i], z[i:i + 1])[0, 0]
                       for i in range(len(t))])
    rhs0 = dmass_dt + efield * gamma * v
    rhs1 = -dmass_dx + efield * gamma
    r0 = dp0 - rhs0
    r1 = dp1 - rhs1
    interior = slice(2, -2)
    res = np.stack([r0[interior], r1[interior]], axis=1)
    scale = max(float(np.max(np.abs(rhs0[interior])) if res.size else 0),
                float(np.max(np.abs(rhs1[interior]))),
                float(np.max(np.abs(dp0[interior]))),
                float(np.max(np.abs(dp1[interior]))), 1e-300)
    rel = float(np.sqrt(np.mean(res**2)) / scale)
    return t[interior], res, rel
