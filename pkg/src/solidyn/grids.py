"""Periodic grids, spectral differentiation, interpolation, and sampling.

Everything downstream (wave solvers, trajectory integrators, diagnostics)
lives on a periodic Cartesian box centered at the origin:

    x_j = -L/2 + j * dx,   dx = L / N,   j = 0 .. N-1

per axis, in natural units (hbar = c = 1).  Derivatives are computed in
Fourier space, so they are exact for band-limited fields; quadrature is the
rectangle rule, which is spectrally accurate for smooth periodic or rapidly
decaying integrands.

All operations are pure: they never mutate their inputs, so fields may be
shared freely across threads once produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteFieldError, SolidynError

# Hard cap on total sample count: 2**24 complex doubles is 256 MB, well
# within desk-scale memory for the 1D/2D runs this package targets.
MAX_TOTAL_SAMPLES = 2**24


class Grid:
    """Periodic Cartesian sample grid in 1 or 2 spatial dimensions.

    Parameters
    ----------
    points : int or sequence of int
        Samples per axis (powers of two recommended for FFT speed).
    lengths : float or sequence of float
        Physical box length per axis.
    """

    def __init__(self, points, lengths):
        if np.isscalar(points):
            points = (int(points),)
        if np.isscalar(lengths):
            lengths = (float(lengths),)
        self.points = tuple(int(n) for n in points)
        self.lengths = tuple(float(L) for L in lengths)
        self.dim = len(self.points)
        if self.dim not in (1, 2):
            raise SolidynError(f"grid dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim:
            raise SolidynError("points and lengths must have matching axis counts")
        if any(n <= 0 for n in self.points):
            raise SolidynError("points per axis must be positive")
        if any(L <= 0 for L in self.lengths):
            raise SolidynError("box lengths must be positive")
        if int(np.prod(self.points)) > MAX_TOTAL_SAMPLES:
            raise SolidynError(
                f"total sample count {np.prod(self.points)} exceeds the "
                f"memory budget ({MAX_TOTAL_SAMPLES})"
            )
        self.spacing = tuple(L / n for L, n in zip(self.lengths, self.points))
        self.cell_volume = float(np.prod(self.spacing))
        self.shape = self.points
        self.size = int(np.prod(self.points))
        # axis coordinates and spectral wavenumbers, cached once
        self.axes = tuple(
            -0.5 * L + dx * np.arange(n)
            for L, dx, n in zip(self.lengths, self.spacing, self.points)
        )
        self.wavenumbers = tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=dx)
            for n, dx in zip(self.points, self.spacing)
        )

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.points == other.points
            and self.lengths == other.lengths
        )

    def __repr__(self):
        return f"Grid(points={self.points}, lengths={self.lengths})"

    def meshes(self):
        """Coordinate arrays broadcast to the full grid shape (indexing='ij')."""
        if self.dim == 1:
            return (self.axes[0],)
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def _k_along(self, axis):
        """Wavenumber array of axis `axis` shaped for broadcasting."""
        k = self.wavenumbers[axis]
        if self.dim == 1:
            return k
        shape = [1, 1]
        shape[axis] = self.points[axis]
        return k.reshape(shape)

    def k_squared(self):
        """|k|^2 on the full grid (for Laplacian multipliers)."""
        out = 0.0
        for axis in range(self.dim):
            out = out + self._k_along(axis) ** 2
        return out

    # ------------------------------------------------------------------
    # spectral differentiation
    # ------------------------------------------------------------------

    def derivative(self, samples, axis):
        """First derivative along one axis via FFT; dtype follows the input."""
        _require_finite(samples, "derivative input")
        ik = 1j * self._k_along(axis)
        out = np.fft.ifft(ik * np.fft.fft(samples, axis=axis), axis=axis)
        if not np.iscomplexobj(samples):
            out = out.real
        return out

    def second_derivative(self, samples, axis):
        """Second derivative along one axis via FFT (-k^2 multiplier)."""
        _require_finite(samples, "second_derivative input")
        k2 = self._k_along(axis) ** 2
        out = np.fft.ifft(-k2 * np.fft.fft(samples, axis=axis), axis=axis)
        if not np.iscomplexobj(samples):
            out = out.real
        return out

    def gradient(self, samples):
        """All first derivatives, stacked as shape (dim, *grid shape)."""
        return np.stack([self.derivative(samples, a) for a in range(self.dim)])

    def laplacian(self, samples):
        """Sum of second derivatives over all axes."""
        out = self.second_derivative(samples, 0)
        for axis in range(1, self.dim):
            out = out + self.second_derivative(samples, axis)
        return out

    def divergence(self, components):
        """Divergence of a vector field stored as (dim, *grid shape)."""
        out = self.derivative(components[0], 0)
        for axis in range(1, self.dim):
            out = out + self.derivative(components[axis], axis)
        return out

    # ------------------------------------------------------------------
    # quadrature and moments
    # ------------------------------------------------------------------

    def integrate(self, samples):
        """Rectangle-rule integral over the box."""
        return np.sum(samples) * self.cell_volume

    def boundary_mass_fraction(self, density, cells=3):
        """Fraction of total mass within `cells` samples of any box edge."""
        total = float(np.sum(density))
        if total <= 0.0:
            return 0.0
        interior = density
        for axis in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[axis] = slice(cells, self.points[axis] - cells)
            interior = interior[tuple(sl)]
        return float((total - np.sum(interior)) / total)

    # ------------------------------------------------------------------
    # off-grid evaluation
    # ------------------------------------------------------------------

    def _fraction_index(self, coords, axis):
        """Cell index and fractional offset of coordinates along one axis."""
        s = (coords + 0.5 * self.lengths[axis]) / self.spacing[axis]
        base = np.floor(s)
        frac = s - base
        return base.astype(np.int64), frac

    def contains(self, positions):
        """True where every coordinate lies inside the box (half-open)."""
        positions = np.atleast_2d(positions)
        ok = np.ones(positions.shape[0], dtype=bool)
        for axis in range(self.dim):
            half = 0.5 * self.lengths[axis]
            ok &= (positions[:, axis] >= -half) & (positions[:, axis] < half)
        return ok

    def interpolate(self, samples, positions):
        """Separable cubic (4-point Lagrange) interpolation at off-grid points.

        Exact at sample nodes and for polynomials of degree <= 3 per axis on
        the wrapped stencil; positions must lie inside the box.

        Parameters
        ----------
        samples : ndarray of the grid shape
        positions : (n, dim) or (dim,) array of query points

        Returns
        -------
        ndarray of n interpolated values (dtype follows `samples`).
        """
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if positions.shape[1] != self.dim:
            raise SolidynError(
                f"query points have dim {positions.shape[1]}, grid has {self.dim}"
            )
        if not np.all(self.contains(positions)):
            raise SolidynError("interpolation point outside the box")
        weights = []
        indices = []
        for axis in range(self.dim):
            base, frac = self._fraction_index(positions[:, axis], axis)
            weights.append(_cubic_weights(frac))
            n = self.points[axis]
            idx = np.stack([(base + off) % n for off in (-1, 0, 1, 2)])
            indices.append(idx)
        if self.dim == 1:
            vals = samples[indices[0]]                       # (4, n)
            return np.einsum("sn,sn->n", weights[0], vals)
        # 2D: reduce the second axis first, then the first.
        vals = samples[indices[0][:, None, :], indices[1][None, :, :]]  # (4,4,n)
        partial = np.einsum("tn,stn->sn", weights[1], vals)
        return np.einsum("sn,sn->n", weights[0], partial)

    # ------------------------------------------------------------------
    # Born-rule sampling
    # ------------------------------------------------------------------

    def sample_density(self, density, count, seed):
        """Draw `count` positions from a non-negative density on this grid.

        Inverse-CDF over the flattened (row-major) grid density using
        jitter-stratified probes u_i = (i + r_i)/count.  Each probe's
        remainder within its cell's CDF span supplies the intra-cell jitter
        along the last axis (the exact inverse of the piecewise-linear CDF);
        any remaining axes jitter uniformly from the seeded generator.
        Stratification keeps interval counts within O(1) of expectation,
        which the equivariance diagnostics rely on; plain multinomial draws
        would add O(sqrt(bins/count)) histogram noise.  Deterministic for a
        fixed seed.
        """
        density = np.asarray(density, dtype=float)
        if density.shape != self.shape:
            raise SolidynError("density shape does not match the grid")
        if np.any(density < 0.0):
            raise SolidynError("density must be non-negative")
        flat = density.reshape(-1)
        total = flat.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise SolidynError("density integrates to zero; cannot sample")
        cdf = np.cumsum(flat) / total
        rng = np.random.default_rng(seed)
        probes = (np.arange(count) + rng.random(count)) / count
        cells = np.searchsorted(cdf, probes, side="right")
        cells = np.minimum(cells, flat.size - 1)
        below = np.where(cells > 0, cdf[cells - 1], 0.0)
        span = cdf[cells] - below
        with np.errstate(invalid="ignore", divide="ignore"):
            remainder = np.where(span > 0, (probes - below) / span, 0.5)
        remainder = np.clip(remainder, 0.0, np.nextafter(1.0, 0.0))
        multi = np.unravel_index(cells, self.shape)
        out = np.empty((count, self.dim), dtype=float)
        for axis in range(self.dim):
            jitter = remainder if axis == self.dim - 1 else rng.random(count)
            out[:, axis] = (
                -0.5 * self.lengths[axis]
                + (multi[axis] + jitter) * self.spacing[axis]
            )
        return out


def _cubic_weights(frac):
    """Lagrange weights on the stencil {-1, 0, 1, 2} for offset frac in [0,1).

    Returns shape (4, n).  At frac == 0 the weights are exactly (0, 1, 0, 0),
    so node queries reproduce stored samples bit-for-bit.
    """
    f = frac
    w_m1 = -f * (f - 1.0) * (f - 2.0) / 6.0
    w_0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
    w_p1 = -(f + 1.0) * f * (f - 2.0) / 2.0
    w_p2 = (f + 1.0) * f * (f - 1.0) / 6.0
    return np.stack([w_m1, w_0, w_p1, w_p2])


def interpolate_in_time(field_a, field_b, t, positions):
    """Linear-in-time, cubic-in-space evaluation between two field snapshots.

    `field_a` and `field_b` are (time, samples) pairs on the same grid that
    bracket the query time t.
    """
    (ta, sa, grid) = field_a
    (tb, sb, _) = field_b
    if tb == ta:
        return grid.interpolate(sa, positions)
    theta = (t - ta) / (tb - ta)
    va = grid.interpolate(sa, positions)
    vb = grid.interpolate(sb, positions)
    return (1.0 - theta) * va + theta * vb


@dataclass
class Field:
    """Scalar field samples (real or complex) tagged with a simulation time."""

    grid: Grid
    samples: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.shape != self.grid.shape:
            raise SolidynError("sample count does not match the grid")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.samples)

    def density(self):
        """|samples|^2 as a real array."""
        return np.abs(self.samples) ** 2

    def norm(self):
        """Integral of |samples|^2 over the box."""
        return float(self.grid.integrate(self.density()))

    def require_finite(self, context=""):
        _require_finite(self.samples, context or "field")
        return self


@dataclass
class VectorField:
    """Per-axis components stacked as (dim, *grid shape)."""

    grid: Grid
    components: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        self.components = np.asarray(self.components)
        if self.components.shape != (self.grid.dim,) + self.grid.shape:
            raise SolidynError("component layout does not match the grid")


def _require_finite(samples, context):
    if not np.all(np.isfinite(samples)):
        raise NonFiniteFieldError(f"non-finite values in {context}")


def spectral_gradient(field: Field) -> VectorField:
    """Gradient of a field; components keep the input dtype."""
    return VectorField(field.grid, field.grid.gradient(field.samples), field.time_tag)


def spectral_laplacian(field: Field) -> Field:
    """Laplacian of a field (same kind as the input)."""
    return Field(field.grid, field.grid.laplacian(field.samples), field.time_tag)


def integrate(field: Field) -> float:
    """Box integral of a real field."""
    return float(field.grid.integrate(field.samples))


def sample_density(field: Field, count: int, seed: int) -> np.ndarray:
    """Draw positions from a non-negative density field (see Grid.sample_density)."""
    return field.grid.sample_density(field.samples, count, seed)
