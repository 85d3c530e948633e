"""External electromagnetic potentials in the restricted gauge.

The vector potential is spatially uniform, A = A(t), so the Coulomb gauge
div A = 0 holds identically and the magnetic field B = curl A vanishes.
The electric field is then E(t, x) = -dA/dt - grad V, and the Lorentz force
on a charge e reduces to e E.  This covers every configuration the solvers
need: free motion, uniform electric fields (as a linear scalar ramp or a
time-ramped vector potential), and harmonic traps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Rest mass omega0 (inverse length, hbar = c = 1) and charge e."""

    omega0: float
    charge: float = 1.0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")


class Potentials:
    """Scalar potential V(t, x) plus a spatially uniform vector potential A(t).

    V and its gradient are supplied as callables of (t, coords) where coords
    is a tuple of per-axis coordinate arrays (broadcastable); A and dA/dt are
    callables of t returning a length-dim vector.
    """

    def __init__(self, dim, scalar=None, scalar_gradient=None,
                 vector=None, vector_rate=None):
        self.dim = dim
        zero_vec = np.zeros(dim)
        self._scalar = scalar or (lambda t, coords: 0.0)
        self._scalar_gradient = scalar_gradient or (
            lambda t, coords: tuple(0.0 for _ in range(dim)))
        self._vector = vector or (lambda t: zero_vec)
        self._vector_rate = vector_rate or (lambda t: zero_vec)

    # -- evaluation ------------------------------------------------------

    def scalar_on_grid(self, grid, t):
        """V(t, .) sampled on the grid (always a full array)."""
        v = self._scalar(t, grid.meshes())
        return np.broadcast_to(np.asarray(v, dtype=float), grid.shape).copy() \
            if np.ndim(v) == 0 else np.asarray(v, dtype=float)

    def scalar_at(self, t, positions):
        positions = np.atleast_2d(positions)
        coords = tuple(positions[:, a] for a in range(self.dim))
        v = self._scalar(t, coords)
        return np.broadcast_to(np.asarray(v, dtype=float), positions.shape[:1])

    def vector(self, t):
        return np.asarray(self._vector(t), dtype=float)

    def electric_field(self, t, positions):
        """E = -dA/dt - grad V at particle positions, shape (n, dim)."""
        positions = np.atleast_2d(positions)
        coords = tuple(positions[:, a] for a in range(self.dim))
        gradv = self._scalar_gradient(t, coords)
        out = np.empty(positions.shape, dtype=float)
        rate = np.asarray(self._vector_rate(t), dtype=float)
        for a in range(self.dim):
            out[:, a] = -rate[a] - np.broadcast_to(
                np.asarray(gradv[a], dtype=float), positions.shape[:1])
        return out

    # -- constructors ----------------------------------------------------

    @classmethod
    def free(cls, dim=1):
        return cls(dim)

    @classmethod
    def uniform_field(cls, e_field, dim=1, axis=0):
        """Uniform electric field via a linear scalar ramp V = -E x_axis.

        Periodic boxes tolerate the seam because runs keep the wave mass away
        from the edges (boundary watchdog).
        """
        def scalar(t, coords):
            return -e_field * coords[axis]

        def gradient(t, coords):
            return tuple(
                -e_field if a == axis else 0.0 for a in range(dim))

        return cls(dim, scalar=scalar, scalar_gradient=gradient)

    @classmethod
    def vector_ramp(cls, e_field, dim=1, axis=0):
        """Uniform electric field via A(t) = -E t (no scalar seam at all)."""
        direction = np.zeros(dim)
        direction[axis] = 1.0

        return cls(
            dim,
            vector=lambda t: -e_field * t * direction,
            vector_rate=lambda t: -e_field * direction,
        )

    @classmethod
    def harmonic(cls, spring, dim=1):
        """Harmonic trap V = (k/2) |x|^2."""
        def scalar(t, coords):
            out = 0.0
            for c in coords:
                out = out + 0.5 * spring * c**2
            return out

        def gradient(t, coords):
            return tuple(spring * c for c in coords)

        return cls(dim, scalar=scalar, scalar_gradient=gradient)
