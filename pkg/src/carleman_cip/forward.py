"""Implicit finite-difference solver for c(x) u_tt = u_xx on [-a, a] with
first-order absorbing boundaries, and the boundary data derived from it."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .model import CoefficientProfile, ForwardGrid, _frozen, smoothed_delta

log = logging.getLogger(__name__)

# the smoothed delta has width 1/30; ten nodes across it
MAX_RESOLVED_DX = 1.0 / 150.0


@dataclass(frozen=True)
class WaveField:
    """u(x_i, t_j) stored as ``values[j, i]`` (time-major)."""

    grid: ForwardGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.grid.Nt, self.grid.Nx):
            raise ValueError("wave field shape does not match its grid")


@dataclass(frozen=True)
class BoundaryData:
    """Time samples of u(eps, t) and, once computed, u_x(eps, t).

    ``eps`` records where the samples were taken when known.
    """

    times: np.ndarray
    g0: np.ndarray
    g1: np.ndarray | None = None
    noise_level: float = 0.0
    eps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "g0", _frozen(self.g0))
        if self.g1 is not None:
            object.__setattr__(self, "g1", _frozen(self.g1))
            if self.g1.shape != self.times.shape:
                raise ValueError("g1 must share the time axis of g0")
        if self.g0.shape != self.times.shape or self.times.ndim != 1:
            raise ValueError("g0 must be a 1-D series on the time axis")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def shifted(self, t, shift: float) -> tuple[np.ndarray, np.ndarray]:
        """(g0, g1) at times ``t + shift`` by linear interpolation."""
        s = np.asarray(t, dtype=float) + shift
        if s.min() < self.times[0] - 1e-9 or s.max() > self.times[-1] + 1e-9:
            raise ValueError(
                f"data cover [{self.times[0]:.6g}, {self.times[-1]:.6g}] but "
                f"[{s.min():.6g}, {s.max():.6g}] is required"
            )
        if self.g1 is None:
            raise ValueError("g1 is missing; differentiate g0 first")
        return np.interp(s, self.times, self.g0), np.interp(s, self.times, self.g1)


def _resample(c: CoefficientProfile, grid: ForwardGrid) -> np.ndarray:
    if c.x.shape == (grid.Nx,) and np.allclose(c.x, grid.x, rtol=0, atol=1e-12):
        return np.asarray(c.values)
    return c.at(grid.x)


def solve_forward(c: CoefficientProfile, grid: ForwardGrid) -> WaveField:
    """Solve the truncated forward problem with u(x,0) = 0, u_t(x,0) = smoothed delta.

    Time stepping is implicit in the Laplacian::

        c_i (u_i^{j+1} - 2 u_i^j + u_i^{j-1}) / dt^2 = (u_{i+1} - 2 u_i + u_{i-1})^{j+1} / dx^2

    with u_t - u_x = 0 at x = -a and u_t + u_x = 0 at x = a, each discretized
    by a one-sided space difference and a backward time difference. The first
    step is u^1 = dt * delta(x). Every step solves the same tridiagonal system.
    A profile given on other nodes is interpolated (c = 1 outside its nodes).
    """
    cv = _resample(c, grid)
    if np.any(cv <= 0) or not np.all(np.isfinite(cv)):
        raise ValueError("forward solve needs a finite, positive coefficient")
    if grid.dx > MAX_RESOLVED_DX:
        warnings.warn(
            f"dx = {grid.dx:.4g} does not resolve the smoothed delta (need dx <= {MAX_RESOLVED_DX:.4g})",
            RuntimeWarning,
            stacklevel=2,
        )
    dx, dt, n = grid.dx, grid.dt, grid.Nx
    r = dt * dt / (dx * dx)

    ab = np.zeros((3, n))
    ab[1, 1:-1] = cv[1:-1] + 2 * r
    ab[0, 2:] = -r
    ab[2, :-2] = -r
    ab[1, 0] = 1 / dt + 1 / dx
    ab[0, 1] = -1 / dx
    ab[1, -1] = 1 / dt + 1 / dx
    ab[2, -2] = -1 / dx

    u = np.zeros((grid.Nt, n))
    u[1] = dt * smoothed_delta(grid.x)
    rhs = np.empty(n)
    for j in range(1, grid.Nt - 1):
        rhs[1:-1] = cv[1:-1] * (2 * u[j, 1:-1] - u[j - 1, 1:-1])
        rhs[0] = u[j, 0] / dt
        rhs[-1] = u[j, -1] / dt
        u[j + 1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("forward solve produced non-finite values")
    return WaveField(grid, u)


def extract_boundary_data(u: WaveField, eps: float) -> BoundaryData:
    """Sample u at the grid node nearest to ``eps``; g1 is left unset."""
    x = u.grid.x
    if not x[0] <= eps <= x[-1]:
        raise ValueError(f"eps = {eps} lies outside [{x[0]}, {x[-1]}]")
    i = int(np.argmin(np.abs(x - eps)))
    snap = abs(x[i] - eps)
    if snap > 1e-12:
        log.debug("eps = %g snapped to node %d at x = %.12g (distance %.3g)", eps, i, x[i], snap)
    return BoundaryData(u.grid.t, u.values[:, i].copy(), eps=float(x[i]))


def correct_near_origin(data: BoundaryData, x_window: float = 0.0067, t_window: float = 0.26) -> BoundaryData:
    """Replace g0 by its exact early-time value 1/2 on [0, t_window].

    Near (0, 0) the wave equals 1/2 exactly (c = 1 there), but the smoothed
    source spoils the computed field; ``x_window`` is the spatial extent of that
    region and only serves as a sanity check on ``data.eps``.
    """
    if data.eps is not None and data.eps > x_window:
        warnings.warn(
            f"sampling point eps = {data.eps:.4g} lies outside the corrected window [0, {x_window}]",
            RuntimeWarning,
            stacklevel=2,
        )
    g0 = np.array(data.g0)
    g0[data.times <= t_window] = 0.5
    return replace(data, g0=g0)


def add_noise(data: BoundaryData, delta: float, seed: int) -> BoundaryData:
    """Multiplicative noise g0 (1 + delta * r), r i.i.d. uniform on [-1, 1].

    Uses numpy's PCG64 generator seeded with ``seed``.
    """
    if delta < 0:
        raise ValueError("noise level must be nonnegative")
    if delta == 0:
        return replace(data, noise_level=0.0)
    r = np.random.default_rng(seed).uniform(-1.0, 1.0, size=data.g0.shape)
    return replace(data, g0=data.g0 * (1.0 + delta * r), noise_level=float(delta))
