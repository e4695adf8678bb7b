"""Minimizers for :class:`~carleman_cip.system.QuadraticSystem`.

Direct solves go through the normal equations with a nested-dissection
ordering and a sparse LU factorization. Gradient descent and gradient
projection are the explicit iterative schemes; they are practical on small
or well-conditioned systems only.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .forward import BoundaryData
from .model import InversionGrid, _frozen
from .stencil import h2_operator
from .system import QuadraticSystem

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class DivergenceError(RuntimeError):
    """An explicit iteration increased the objective repeatedly."""


def nested_dissection(ci, cj, width: int = 2, leaf: int = 64) -> np.ndarray:
    """Fill-reducing ordering of nodes with integer grid coordinates.

    Splits the bounding box across its longer side by a separator ``width``
    nodes wide, orders both halves recursively and the separator last. A width
    of 2 decouples halves of any operator whose normal matrix couples only
    nodes at most 2 apart.
    """
    ci, cj = np.asarray(ci), np.asarray(cj)
    out = []

    def rec(sel):
        if len(sel) <= leaf:
            out.append(sel)
            return
        i, j = ci[sel], cj[sel]
        ei, ej = int(np.ptp(i)), int(np.ptp(j))
        c, ext = (i, ei) if ei >= ej else (j, ej)
        if ext < 2 * width + 1:
            out.append(sel)
            return
        m = c.min() + (ext + 1 - width) // 2
        rec(sel[c < m])
        rec(sel[c >= m + width])
        out.append(sel[(c >= m) & (c < m + width)])

    rec(np.arange(len(ci)))
    return np.concatenate(out)


def _factor(N, perm):
    Np = N[perm][:, perm].tocsc()
    try:
        # symmetric positive definite: no pivoting needed, keep our ordering
        lu = spla.splu(Np, permc_spec="NATURAL", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        log.warning("symmetric factorization failed (%s); retrying with partial pivoting", exc)
        lu = spla.splu(Np)
    return lu


def solve_direct(system: QuadraticSystem, max_refine: int = 3) -> np.ndarray:
    """Unique minimizer over the free DOFs.

    Solves the normal equations by sparse LU with iterative refinement and
    checks that the relative residual is at most 1e-10.
    """
    N = system.normal_matrix()
    rhs = system.normal_rhs()
    coords = system.free_coords
    if coords is not None:
        perm = nested_dissection(*coords, leaf=16)
    else:
        perm = reverse_cuthill_mckee(sp.csr_matrix(N), symmetric_mode=True).astype(np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    lu = _factor(N, perm)

    def solve(r):
        return lu.solve(r[perm])[inv]

    nrm = np.linalg.norm(rhs)
    if nrm == 0:
        return np.zeros(system.n_free)
    z = solve(rhs)
    res = rhs - N @ z
    rel = np.linalg.norm(res) / nrm
    for _ in range(max_refine):
        if rel <= RESIDUAL_TOL * 1e-2:
            break
        z_new = z + solve(res)
        res_new = rhs - N @ z_new
        rel_new = np.linalg.norm(res_new) / nrm
        if not rel_new < rel:
            break
        z, res, rel = z_new, res_new, rel_new
    if not np.all(np.isfinite(z)) or rel > RESIDUAL_TOL:
        raise np.linalg.LinAlgError(f"normal equations solved to relative residual {rel:.3g} only")
    log.debug("direct solve: %d DOFs, relative residual %.2e", system.n_free, rel)
    return z


def _descend(objective, gradient, z, eta, k_max, backtrack, project=None, gtol=0.0):
    if not 0 < eta < 1:
        raise ValueError("step size eta must lie in (0, 1)")
    z = np.array(z, dtype=float)
    f = objective(z)
    history = [f]
    rises = 0
    for _ in range(k_max):
        g = gradient(z)
        if np.linalg.norm(g) <= gtol:
            break
        step = eta
        while True:
            z_new = z - step * g
            if project is not None:
                z_new = project(z_new)
            f_new = objective(z_new)
            if not backtrack or f_new <= f:
                break
            step /= 2
            if step < 1e-30:
                raise DivergenceError("backtracking could not decrease the objective")
        if backtrack:
            eta = step
        if not np.isfinite(f_new):
            raise DivergenceError("objective became non-finite; reduce eta")
        rises = rises + 1 if f_new > f else 0
        if rises >= 3:
            raise DivergenceError(f"objective increased 3 consecutive steps at eta = {eta:g}; reduce eta")
        z, f = z_new, f_new
        history.append(f)
    return z, np.array(history)


def gradient_descent(
    system: QuadraticSystem,
    z_start,
    eta: float = 0.1,
    k_max: int = 1000,
    backtrack: bool = True,
    gtol: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Explicit steps ``z <- z - eta * grad``.

    With ``backtrack`` the step is halved whenever it would increase the
    objective, and the reduced step is kept. Returns the last iterate and the
    objective after every step (the first entry is at ``z_start``).
    """
    return _descend(system.objective, system.gradient, z_start, eta, k_max, backtrack, gtol=gtol)


@dataclass(frozen=True)
class ProjectionBall:
    """Ball of radius ``radius`` about the origin of the zero-BC subspace.

    ``norm_op`` maps a full field to the vector whose Euclidean length times
    ``scale`` is the norm; without it the plain Euclidean norm is used.
    """

    radius: float
    norm_op: sp.spmatrix | None = None
    scale: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def norm(self, p) -> float:
        p = np.ravel(p)
        v = p if self.norm_op is None else self.norm_op @ p
        return float(self.scale * np.linalg.norm(v))

    @classmethod
    def h2(cls, grid: InversionGrid, radius: float) -> "ProjectionBall":
        return cls(radius, h2_operator(grid), float(np.sqrt(grid.dx * grid.dt)))


def project_ball(p, ball: ProjectionBall) -> np.ndarray:
    """Identity inside the ball, radial scaling onto its sphere outside."""
    p = np.asarray(p, dtype=float)
    n = ball.norm(p)
    return p if n <= ball.radius else p * (ball.radius / n)


def smoothstep(s) -> np.ndarray:
    """Quintic 1 -> 0 transition on [0, 1], flat to second order at both ends."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - s**3 * (10 - 15 * s + 6 * s**2)


@dataclass(frozen=True)
class LiftFunction:
    """A field F on the inversion grid carrying the boundary conditions."""

    grid: InversionGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != self.grid.shape:
            raise ValueError("lift values do not match the grid")

    def bc_residuals(self, data: BoundaryData) -> tuple[float, float, float]:
        """Max violation of F(eps,t)=g0, F_x(eps,t)=2 g0', F_x(xmax,t)=0 by one-sided differences."""
        G, DG = data.shifted(self.grid.t, self.grid.eps)
        F, dx = self.values, self.grid.dx
        return (
            float(np.max(np.abs(F[0] - G))),
            float(np.max(np.abs((F[1] - F[0]) / dx - 2 * DG))),
            float(np.max(np.abs((F[-1] - F[-2]) / dx))),
        )


def build_lift(data: BoundaryData, grid: InversionGrid) -> LiftFunction:
    """F(x,t) = chi(x) (g0(t+eps) + 2 (x-eps) g0'(t+eps)).

    chi is 1 on [eps, xmax/4], 0 on [xmax/2, xmax] and a quintic smoothstep in
    between. The linear term is anchored at eps so the value and slope at eps
    match the boundary data exactly.
    """
    G, DG = data.shifted(grid.t, grid.eps)
    b = grid.xmax
    x = grid.x
    chi = smoothstep((x - b / 4) / (b / 4))
    F = chi[:, None] * (G[None, :] + 2 * (x - grid.eps)[:, None] * DG[None, :])
    return LiftFunction(grid, F)


def gradient_projection(
    system: QuadraticSystem,
    lift: LiftFunction,
    ball: ProjectionBall,
    eta: float = 0.1,
    k_max: int = 1000,
    p_start=None,
    backtrack: bool = True,
    gtol: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize I(p) = J(p + F) over zero-BC fields p in the ball.

    Returns the free-DOF values of q = p + F and the objective history.
    """
    F = np.ravel(lift.values)
    if not system.is_feasible(F, atol=1e-9):
        raise ValueError("lift does not satisfy the boundary conditions of the system")
    if ball.norm(F) >= ball.radius / 2:
        warnings.warn("lift norm is not below R = radius / 2", RuntimeWarning, stacklevel=2)
    zF = system.restrict(F)
    E = system.E

    def project(y):
        n = ball.norm(E @ y)
        return y if n <= ball.radius else y * (ball.radius / n)

    y0 = np.zeros(system.n_free) if p_start is None else project(np.asarray(p_start, dtype=float))
    y, hist = _descend(
        lambda y: system.objective(y + zF),
        lambda y: system.gradient(y + zF),
        y0,
        eta,
        k_max,
        backtrack,
        project=project,
        gtol=gtol,
    )
    return y + zF, hist
