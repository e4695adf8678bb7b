"""Grids, coefficient profiles and the small closed-form functions shared by
the forward and inverse solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ForwardGrid:
    """Uniform space-time grid on [-a, a] x [0, T], endpoints included."""

    a: float = 5.0
    T: float = 6.0
    Nx: int = 3001
    Nt: int = 301

    def __post_init__(self):
        if not self.a > 0 or not self.T > 0:
            raise ValueError("ForwardGrid needs a > 0 and T > 0")
        if self.Nx < 3 or self.Nt < 3:
            raise ValueError("ForwardGrid needs Nx >= 3 and Nt >= 3")

    @property
    def dx(self) -> float:
        return 2 * self.a / (self.Nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.Nt - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.a, self.a, self.Nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt)


@dataclass(frozen=True)
class InversionGrid:
    """Grid on the rectangle [eps, xmax] x [0, T] where q(x, t) is sought."""

    eps: float = 1.0 / 150.0
    xmax: float = 3.0
    T: float = 5.98
    Mx: int = 899
    Mt: int = 300

    def __post_init__(self):
        if not 0 < self.eps < self.xmax:
            raise ValueError("InversionGrid needs 0 < eps < xmax")
        if not self.T > 0:
            raise ValueError("InversionGrid needs T > 0")
        if self.Mx < 2 or self.Mt < 2:
            raise ValueError("InversionGrid needs at least two nodes per axis")

    @property
    def dx(self) -> float:
        return (self.xmax - self.eps) / (self.Mx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.Mt - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.eps, self.xmax, self.Mx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Mt)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Mx, self.Mt)


@dataclass(frozen=True)
class CoefficientProfile:
    """Dielectric constant c sampled at the nodes ``x``.

    ``cmax`` is the a-priori upper bound on c. Outside the sampled interval
    the medium is homogeneous, so :meth:`at` returns 1 there.
    """

    x: np.ndarray
    values: np.ndarray
    cmax: float = 16.0

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.x.shape != self.values.shape or self.x.ndim != 1:
            raise ValueError("profile nodes and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("profile nodes must be strictly increasing")

    def at(self, x) -> np.ndarray:
        """Linear interpolation of c, extended by 1 outside the nodes."""
        return np.interp(x, self.x, self.values, left=1.0, right=1.0)

    def max(self) -> tuple[float, float]:
        """(maximum value, node where it occurs)."""
        k = int(np.argmax(self.values))
        return float(self.values[k]), float(self.x[k])


@dataclass(frozen=True)
class CarlemanParams:
    """Carleman weight exponent, time slope, regularization and iteration cap."""

    lam: float = 2.0
    alpha: float = 0.3
    beta: float = 1e-11
    n_iters: int = 10

    def __post_init__(self):
        problems = []
        if not self.lam > 1:
            problems.append("lam must exceed 1")
        if not 0 < self.alpha < 0.5:
            problems.append("alpha must lie in (0, 1/2)")
        if not 0 < self.beta < 1:
            problems.append("beta must lie in (0, 1)")
        if self.n_iters < 1:
            problems.append("n_iters must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


TEST_IDS = (1, 2, 3, 4)


def _bump(x: np.ndarray, center: float, radius: float, height: float) -> np.ndarray:
    d2 = (x - center) ** 2
    inside = np.abs(x - center) < radius
    out = np.zeros_like(x)
    out[inside] = height * np.exp(d2[inside] / (d2[inside] - radius**2))
    return out


def true_values(kind: int, x) -> np.ndarray:
    """Exact dielectric constant of numerical test ``kind`` at positions ``x``."""
    x = np.asarray(x, dtype=float)
    c = np.ones_like(x)
    if kind == 1:
        c += _bump(x, 1.0, 0.2, 14.0)
    elif kind == 2:
        c += _bump(x, 0.6, 0.2, 5.0) + _bump(x, 1.4, 0.3, 8.0)
    elif kind == 3:
        c[np.abs(x - 1.0) < 0.15] = 10.0
    elif kind == 4:
        curve = np.abs(x - 0.9) < 0.5
        c[curve] = 3.5 + 0.3 * np.sin(np.pi * (x[curve] - 1.35))
        c[np.abs(x - 2.0) < 0.37] = 8.0
    else:
        raise ValueError(f"unknown test id {kind!r}; expected one of {TEST_IDS}")
    return c


# support of c - 1 for each test, used to check that a grid covers it
TEST_SUPPORT = {1: (0.8, 1.2), 2: (0.4, 1.7), 3: (0.85, 1.15), 4: (0.4, 2.37)}


def make_true_profile(kind: int, grid, cmax: float = 16.0) -> CoefficientProfile:
    """Sample the exact coefficient of test ``kind`` on a grid's spatial axis.

    ``grid`` may be a :class:`ForwardGrid`, an :class:`InversionGrid` or an
    array of nodes.
    """
    x = grid.x if hasattr(grid, "x") else np.asarray(grid, dtype=float)
    if kind not in TEST_IDS:
        raise ValueError(f"unknown test id {kind!r}; expected one of {TEST_IDS}")
    lo, hi = TEST_SUPPORT[kind]
    if x[0] > lo or x[-1] < hi:
        raise ValueError(f"grid [{x[0]}, {x[-1]}] does not cover the support [{lo}, {hi}] of test {kind}")
    return CoefficientProfile(x, true_values(kind, x), cmax)


def travel_time(c: CoefficientProfile, x: float) -> float:
    """Travel time from the source at 0 to ``x``: integral of sqrt(c) over [0, x].

    Composite trapezoid on the profile nodes. If the nodes start to the right
    of 0 the gap is homogeneous (c = 1).
    """
    nodes = c.x
    if x < min(nodes[0], 0.0) or x > nodes[-1]:
        raise ValueError(f"x = {x} lies outside the profile grid [{nodes[0]}, {nodes[-1]}]")
    if np.any(c.values <= 0):
        raise ValueError("travel time needs a positive coefficient")
    lo, hi = min(0.0, x), max(0.0, x)
    inner = nodes[(nodes > lo) & (nodes < hi)]
    pts = np.concatenate([[lo], inner, [hi]])
    tau = np.trapezoid(np.sqrt(c.at(pts)), pts)
    return float(tau if x >= 0 else -tau)


def travel_times(c: CoefficientProfile) -> np.ndarray:
    """Travel time at every profile node (vectorized :func:`travel_time` for x >= 0 grids)."""
    s = np.sqrt(c.values)
    tau = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(c.x))])
    return tau + travel_time(c, c.x[0])


def smoothed_delta(x):
    """Gaussian approximation of the Dirac delta, width 1/30."""
    x = np.asarray(x, dtype=float)
    return 30.0 / np.sqrt(2 * np.pi) * np.exp(-((30.0 * x) ** 2) / 2)


def carleman_weight(x, t, params: CarlemanParams):
    """exp(-2 lam (x + alpha t))."""
    return np.exp(-2.0 * params.lam * (np.asarray(x, dtype=float) + params.alpha * np.asarray(t, dtype=float)))
