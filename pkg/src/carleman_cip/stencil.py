"""Finite-difference operators on the inversion grid.

Unknowns on an (Mx, Mt) grid are flattened x-major: ``k = i * Mt + j``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .model import InversionGrid


def first_derivative(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference, second-order one-sided at both ends."""
    rows = np.repeat(np.arange(1, n - 1), 2)
    cols = np.ravel(np.column_stack([np.arange(0, n - 2), np.arange(2, n)]))
    vals = np.tile([-1.0, 1.0], n - 2)
    rows = np.concatenate([rows, [0, 0, 0, n - 1, n - 1, n - 1]])
    cols = np.concatenate([cols, [0, 1, 2, n - 3, n - 2, n - 1]])
    vals = np.concatenate([vals, [-3.0, 4.0, -1.0, 1.0, -4.0, 3.0]])
    return sp.csr_matrix((vals / (2 * h), (rows, cols)), shape=(n, n))


def second_derivative_interior(n: int, h: float) -> sp.csr_matrix:
    """Centered second difference at nodes 1..n-2, shape (n-2, n)."""
    return sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n), format="csr") / h**2


def forward_difference(n: int, h: float) -> sp.csr_matrix:
    """(f[k+1] - f[k]) / h, shape (n-1, n)."""
    return sp.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n), format="csr") / h


@lru_cache(maxsize=4)
def pde_operators(grid: InversionGrid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(q_xx, q_xt) evaluated at x-interior nodes, every time level.

    q_xt is the product of centered differences; at t = 0 and t = T the time
    difference is one-sided second order.
    """
    Mx, Mt, dx, dt = grid.Mx, grid.Mt, grid.dx, grid.dt
    dx_int = first_derivative(Mx, dx)[1:-1]
    qxx = sp.kron(second_derivative_interior(Mx, dx), sp.identity(Mt), format="csr")
    qxt = sp.kron(dx_int, first_derivative(Mt, dt), format="csr")
    return qxx, qxt


@lru_cache(maxsize=4)
def h2_operator(grid: InversionGrid) -> sp.csr_matrix:
    """Stack of q, q_x, q_t, q_xx, q_xt, q_tt so that the discrete squared H^2
    norm is ``dx * dt * |R q|^2``."""
    Mx, Mt, dx, dt = grid.Mx, grid.Mt, grid.dx, grid.dt
    Ix, It = sp.identity(Mx), sp.identity(Mt)
    Fx, Ft = forward_difference(Mx, dx), forward_difference(Mt, dt)
    blocks = [
        sp.identity(Mx * Mt),
        sp.kron(Fx, It),
        sp.kron(Ix, Ft),
        sp.kron(second_derivative_interior(Mx, dx), It),
        sp.kron(Fx, Ft),
        sp.kron(Ix, second_derivative_interior(Mt, dt)),
    ]
    return sp.vstack(blocks, format="csr")


def h2_norm(values: np.ndarray, grid: InversionGrid) -> float:
    """Discrete H^2 norm of a field on the inversion grid."""
    return float(np.sqrt(grid.dx * grid.dt) * np.linalg.norm(h2_operator(grid) @ np.ravel(values)))
