"""Carleman-weighted quadratic functionals for q(x,t) = u(x, t + tau(x)) and
the outer iteration that turns their minimizers into c(x).

At step n the unknown q solves, in the weighted least-squares sense,

    q_xx - q_xt / (2 p^2) + q_t^prev * q_x^prev(x,0) / (2 p^3) = 0,

where p = clamp(q^prev(x,0)); the first step uses q_xx - 2 q_xt = 0. Boundary
conditions q(eps,t) = g0(t+eps), q_x(eps,t) = 2 g0'(t+eps) and q_x(xmax,t) = 0
are imposed by eliminating unknowns.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import optim
from .forward import BoundaryData
from .model import CarlemanParams, CoefficientProfile, InversionGrid, _frozen, carleman_weight
from .stencil import first_derivative, h2_norm, h2_operator, pde_operators
from .system import QuadraticSystem

log = logging.getLogger(__name__)

SOLVERS = ("direct", "gd", "gp")
# with the clamp off, q(x,0) below this (c above 1e4) is treated as breakdown
SAFETY_FLOOR = 0.05


class InversionError(RuntimeError):
    """Failure inside the outer iteration; ``iteration`` is the step index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


def q0_bounds(cmax: float) -> tuple[float, float]:
    return 1.0 / (2.0 * cmax**0.25), 0.5


def clamp_q0(q_line, cmax: float = 16.0) -> np.ndarray:
    """Clip q(x,0) to [1/(2 cmax^(1/4)), 1/2], i.e. c to [1, cmax]."""
    if not cmax > 1:
        raise ValueError("cmax must exceed 1")
    lo, hi = q0_bounds(cmax)
    return np.clip(np.asarray(q_line, dtype=float), lo, hi)


@dataclass(frozen=True)
class QField:
    """q(x_i, t_j) stored as ``values[i, j]``."""

    grid: InversionGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != self.grid.shape:
            raise ValueError(f"q has shape {self.values.shape}, grid needs {self.grid.shape}")

    @property
    def line0(self) -> np.ndarray:
        return self.values[:, 0]

    def bc_residuals(self, data: BoundaryData) -> tuple[float, float, float]:
        """Max violations of the three boundary conditions (one-sided x-differences)."""
        G, DG = data.shifted(self.grid.t, self.grid.eps)
        q, dx = self.values, self.grid.dx
        return (
            float(np.max(np.abs(q[0] - G))),
            float(np.max(np.abs((q[1] - q[0]) / dx - 2 * DG))),
            float(np.max(np.abs((q[-1] - q[-2]) / dx))),
        )


def _check_grid(grid: InversionGrid):
    if grid.Mx < 4 or grid.Mt < 3:
        raise ValueError(f"inversion grid {grid.Mx} x {grid.Mt} is too coarse (need Mx >= 4, Mt >= 3)")


def _constraints(grid: InversionGrid, G, DG):
    Mx, Mt = grid.shape
    j = np.arange(Mt)
    fixed_idx = np.concatenate([j, Mt + j])
    fixed_values = np.concatenate([G, G + 2 * grid.dx * DG])
    tie_dst = (Mx - 1) * Mt + j
    tie_src = (Mx - 2) * Mt + j
    return dict(fixed_idx=fixed_idx, fixed_values=fixed_values, tie_dst=tie_dst, tie_src=tie_src)


@lru_cache(maxsize=2)
def _regularizer(grid: InversionGrid):
    """(R, R E, (R E)^T (R E)); the constraint pattern depends only on the grid."""
    N = grid.Mx * grid.Mt
    zeros = np.zeros(grid.Mt)
    template = QuadraticSystem(sp.csr_matrix((0, N)), [], [], N, **_constraints(grid, zeros, zeros))
    R = h2_operator(grid)
    RE = sp.csr_matrix(R @ template.E)
    return R, RE, sp.csr_matrix(RE.T @ RE)


def _assemble(grid, coef, source, G, DG, params: CarlemanParams) -> QuadraticSystem:
    qxx, qxt = pde_operators(grid)
    Mt = grid.Mt
    A = qxx - sp.diags(np.repeat(coef[1:-1], Mt)) @ qxt
    X, T = np.meshgrid(grid.x[1:-1], grid.t, indexing="ij")
    w = np.sqrt(carleman_weight(X, T, params) * grid.dx * grid.dt).ravel()
    R, RE, gram = _regularizer(grid)
    return QuadraticSystem(
        rows=A,
        weights=w,
        targets=-np.ravel(source[1:-1]),
        n_dofs=grid.Mx * Mt,
        reg_rows=R,
        reg_weight=float(np.sqrt(params.beta * grid.dx * grid.dt)),
        grid_shape=grid.shape,
        reg_free=RE,
        reg_gram=gram,
        **_constraints(grid, G, DG),
    )


def assemble_functional_0(data: BoundaryData, params: CarlemanParams, grid: InversionGrid) -> QuadraticSystem:
    """Weighted system for q_xx - 2 q_xt = 0 plus the H^2 regularization.

    The objective is sum over interior nodes of (q_xx - 2 q_xt)^2 e^{-2 lam (x + alpha t)} dx dt
    plus beta dx dt |R q|^2.
    """
    _check_grid(grid)
    G, DG = data.shifted(grid.t, grid.eps)
    return _assemble(grid, np.full(grid.Mx, 2.0), np.zeros(grid.shape), G, DG, params)


def assemble_functional_n(
    q_prev: QField,
    data: BoundaryData,
    params: CarlemanParams,
    clamp: bool = True,
    cmax: float = 16.0,
) -> QuadraticSystem:
    """Weighted system linearized about the previous iterate ``q_prev``.

    q(x,0) of the previous iterate enters clamped (unless ``clamp`` is off);
    q_x(x,0) and q_t use the unclamped previous values.
    """
    grid = q_prev.grid
    _check_grid(grid)
    Q = q_prev.values
    p = clamp_q0(Q[:, 0], cmax) if clamp else np.array(Q[:, 0])
    if not np.all(np.isfinite(Q)):
        raise InversionError("previous iterate is not finite")
    if p.min() < SAFETY_FLOOR:
        raise InversionError(f"q(x,0) = {p.min():.3g} is below the safety floor {SAFETY_FLOOR}; enable the clamp")
    qx0 = first_derivative(grid.Mx, grid.dx) @ Q[:, 0]
    qt = (first_derivative(grid.Mt, grid.dt) @ Q.T).T
    coef = 1.0 / (2.0 * p**2)
    source = qt * (qx0 / (2.0 * p**3))[:, None]
    G, DG = data.shifted(grid.t, grid.eps)
    return _assemble(grid, coef, source, G, DG, params)


def reconstruct_c(q: QField, cmax: float = 16.0) -> CoefficientProfile:
    """c(x) = 1 / (2 clamp(q(x,0)))^4 on the inversion nodes."""
    return CoefficientProfile(q.grid.x, 1.0 / (2.0 * clamp_q0(q.line0, cmax)) ** 4, cmax)


def consecutive_error(c_new: CoefficientProfile, c_old: CoefficientProfile) -> float:
    """|c_new - c_old|_inf / |c_new|_inf."""
    return float(np.max(np.abs(c_new.values - c_old.values)) / np.max(np.abs(c_new.values)))


def supported_extent(c: CoefficientProfile, T: float) -> float:
    """Largest x at which a reflection from x returns to the source by time T.

    Beyond it the data carry no information about c.
    """
    from .model import travel_times

    tau = travel_times(c)
    ok = np.flatnonzero(2 * tau <= T)
    return float(c.x[ok[-1]]) if len(ok) else float(c.x[0])


@dataclass(frozen=True)
class IterationRecord:
    n: int
    c: CoefficientProfile
    consec_err: float
    objective: float
    grad_norm: float
    seconds: float


@dataclass
class IterationTrace:
    """Per-iteration reconstructions and diagnostics; ``consec_err`` is NaN at n = 0."""

    records: list[IterationRecord] = field(default_factory=list)
    q_comp: QField | None = None
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def c_comp(self) -> CoefficientProfile:
        return self.records[-1].c

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.consec_err for r in self.records[1:]])

    @property
    def iterations(self) -> int:
        """Number of updates after the initial solve."""
        return len(self.records) - 1


def _minimize(system, solver, z_start, data, grid, opts):
    if solver == "direct":
        return optim.solve_direct(system)
    eta = opts.get("eta", 0.1)
    k_max = opts.get("k_max", 1000)
    if solver == "gd":
        return optim.gradient_descent(system, z_start, eta=eta, k_max=k_max)[0]
    lift = optim.build_lift(data, grid)
    R = opts.get("R") or 10.0 * h2_norm(lift.values, grid)
    ball = optim.ProjectionBall.h2(grid, 2.0 * R)
    p_start = None if z_start is None else z_start - system.restrict(lift.values)
    return optim.gradient_projection(system, lift, ball, eta=eta, k_max=k_max, p_start=p_start)[0]


def run_algorithm(
    data: BoundaryData,
    params: CarlemanParams,
    grid: InversionGrid,
    solver: str = "direct",
    tol: float = 1e-3,
    clamp: bool = True,
    cmax: float = 16.0,
    solver_options: dict | None = None,
    progress: Callable[[IterationRecord], None] | None = None,
) -> IterationTrace:
    """Initial solve followed by up to ``params.n_iters`` linearized updates.

    Stops early once the consecutive relative error drops below ``tol``.
    ``solver`` is ``direct``, ``gd`` (gradient descent) or ``gp`` (gradient
    projection); ``solver_options`` may set ``eta``, ``k_max`` and ``R``.
    """
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if data.g1 is None:
        raise ValueError("boundary data lack g1; differentiate g0 first")
    _check_grid(grid)
    data.shifted(grid.t, grid.eps)  # coverage check before any work
    opts = dict(solver_options or {})
    trace = IterationTrace()
    q = None
    z = None
    for n in range(params.n_iters + 1):
        t0 = time.perf_counter()
        try:
            system = assemble_functional_0(data, params, grid) if n == 0 else assemble_functional_n(q, data, params, clamp, cmax)
            z_start = z
            if z_start is None and solver != "direct":
                z_start = system.restrict(optim.build_lift(data, grid).values)
            z = _minimize(system, solver, z_start, data, grid, opts)
        except InversionError as exc:
            raise InversionError(str(exc), n) from exc
        except Exception as exc:
            raise InversionError(f"{type(exc).__name__}: {exc}", n) from exc
        if not np.all(np.isfinite(z)):
            raise InversionError("minimizer is not finite", n)
        q = QField(grid, system.full(z).reshape(grid.shape))
        c = reconstruct_c(q, cmax)
        err = consecutive_error(c, trace.records[-1].c) if trace.records else float("nan")
        rec = IterationRecord(
            n=n,
            c=c,
            consec_err=err,
            objective=system.objective(z),
            grad_norm=float(np.linalg.norm(system.gradient(z))),
            seconds=time.perf_counter() - t0,
        )
        trace.records.append(rec)
        log.info("iteration %d: max c = %.4g, consecutive error %.3g, %.1fs", n, c.max()[0], err, rec.seconds)
        if progress is not None:
            progress(rec)
        if n > 0 and err < tol:
            trace.converged = True
            break
    trace.q_comp = q
    return trace
