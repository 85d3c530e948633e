"""Shared time-stepping kernels: Strang split steps and RK4 for trajectories.

The same Strang kernel drives the linear Schrodinger wave, the nonlinear
u-field, and the two-particle configuration-space wave; only the potential
arrays and the kinetic Fourier multiplier differ.  Phase sub-steps multiply
by unit-modulus factors, so |field| is untouched by them and the total norm
is conserved to round-off by the kinetic step's unitarity.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteFieldError

# Relative amplitude thresholds shared by all solvers: below NODE_MASK_REL
# times the peak amplitude, Madelung quantities are masked and trajectories
# abort; below NODE_PROXIMITY_REL they are flagged but integration continues.
NODE_MASK_REL = 1e-8
NODE_PROXIMITY_REL = 1e-6
BOUNDARY_MASS_LIMIT = 1e-8


def strang_step(samples, dt, w_start, w_end, kinetic_phase):
    """One Strang split step of i du/dt = (W + K) u.

    Parameters
    ----------
    samples : complex ndarray
    dt : time step
    w_start : potential array for the first half phase (evaluated at t)
    w_end : potential array for the second half phase (evaluated at t + dt),
        or a callable receiving the post-kinetic samples (for nonlinear W).
    kinetic_phase : precomputed exp(-i dt K) multiplier in Fourier space.
    """
    out = np.exp(-0.5j * dt * w_start) * samples
    out = np.fft.ifftn(np.fft.fftn(out) * kinetic_phase)
    if callable(w_end):
        w_end = w_end(out)
    out *= np.exp(-0.5j * dt * w_end)
    return out


def kinetic_multiplier(grid, omega0, charge, vector_potential, dt):
    """exp(-i dt (k - eA)^2 / (2 omega0)) on the grid's wavenumber lattice."""
    total = 0.0
    for axis in range(grid.dim):
        k = grid._k_along(axis)
        total = total + (k - charge * vector_potential[axis]) ** 2 / (2.0 * omega0)
    return np.exp(-1j * dt * total)


def check_finite(samples, step_index):
    if not np.all(np.isfinite(samples)):
        raise NonFiniteFieldError(f"non-finite field after step {step_index}")
