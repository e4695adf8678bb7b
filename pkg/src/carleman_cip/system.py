"""Weighted linear least-squares problems with eliminated degrees of freedom.

The objective over a full vector q of length ``n_dofs`` is::

    |w * (A q - b)|^2 + reg_weight^2 |R q|^2

where some entries of q are fixed to given values and some are tied to
(equal to) other entries. The remaining free entries z parametrize every
feasible q through the affine map ``q = E z + f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


def _ints(a) -> np.ndarray:
    return np.asarray(a, dtype=np.int64).ravel()


@dataclass(frozen=True, eq=False)
class QuadraticSystem:
    """Weighted residual rows, regularization rows and boundary constraints.

    Parameters
    ----------
    rows, weights, targets
        Data (PDE) residual rows ``A``, their positive weights ``w`` and the
        right-hand side ``b``.
    n_dofs
        Length of the full unknown vector.
    fixed_idx, fixed_values
        Entries of q held at prescribed values.
    tie_dst, tie_src
        ``q[tie_dst] = q[tie_src]``; sources must be free.
    reg_rows, reg_weight
        Regularization operator ``R`` and its common weight.
    grid_shape
        (Mx, Mt) when q lives on an x-major grid; used for fill-reducing
        orderings.
    reg_free, reg_gram
        Optional precomputed ``R E`` and ``(R E)^T (R E)``, shared between
        systems with the same constraint pattern.
    """

    rows: sp.csr_matrix
    weights: np.ndarray
    targets: np.ndarray
    n_dofs: int
    fixed_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tie_dst: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tie_src: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    reg_rows: sp.csr_matrix | None = None
    reg_weight: float = 0.0
    grid_shape: tuple[int, int] | None = None
    reg_free: sp.csr_matrix | None = None
    reg_gram: sp.csr_matrix | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("rows", sp.csr_matrix(self.rows))
        set_("weights", np.asarray(self.weights, dtype=float).ravel())
        set_("targets", np.asarray(self.targets, dtype=float).ravel())
        for k in ("fixed_idx", "tie_dst", "tie_src"):
            set_(k, _ints(getattr(self, k)))
        set_("fixed_values", np.asarray(self.fixed_values, dtype=float).ravel())
        m = self.rows.shape[0]
        if self.rows.shape[1] != self.n_dofs:
            raise ValueError("rows must have one column per DOF")
        if self.weights.shape != (m,) or self.targets.shape != (m,):
            raise ValueError("weights and targets need one entry per row")
        if np.any(self.weights < 0):
            raise ValueError("row weights must be nonnegative")
        if self.fixed_idx.shape != self.fixed_values.shape:
            raise ValueError("fixed_idx and fixed_values differ in length")
        if self.tie_dst.shape != self.tie_src.shape:
            raise ValueError("tie_dst and tie_src differ in length")
        if self.reg_rows is not None:
            set_("reg_rows", sp.csr_matrix(self.reg_rows))
            if self.reg_rows.shape[1] != self.n_dofs:
                raise ValueError("reg_rows must have one column per DOF")
        constrained = np.concatenate([self.fixed_idx, self.tie_dst])
        if len(np.unique(constrained)) != len(constrained):
            raise ValueError("a DOF is constrained twice")
        if np.isin(self.tie_src, constrained).any():
            raise ValueError("tie sources must be free DOFs")
        if self.n_free < 1:
            raise ValueError("system has no free DOFs")

    # --- affine parametrization -------------------------------------------

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, bool)
        mask[self.fixed_idx] = False
        mask[self.tie_dst] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def n_pde(self) -> int:
        return self.rows.shape[0]

    @cached_property
    def E(self) -> sp.csr_matrix:
        pos = np.full(self.n_dofs, -1)
        pos[self.free] = np.arange(self.n_free)
        r = np.concatenate([self.free, self.tie_dst])
        c = np.concatenate([np.arange(self.n_free), pos[self.tie_src]])
        return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.n_dofs, self.n_free))

    @cached_property
    def f(self) -> np.ndarray:
        f = np.zeros(self.n_dofs)
        f[self.fixed_idx] = self.fixed_values
        return f

    def full(self, z) -> np.ndarray:
        """Feasible full vector ``E z + f``."""
        return self.E @ np.asarray(z, dtype=float) + self.f

    def restrict(self, q) -> np.ndarray:
        """Free entries of a full vector."""
        return np.asarray(q, dtype=float).ravel()[self.free]

    def is_feasible(self, q, atol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float).ravel()
        return bool(
            np.allclose(q[self.fixed_idx], self.fixed_values, rtol=0, atol=atol)
            and np.allclose(q[self.tie_dst], q[self.tie_src], rtol=0, atol=atol)
        )

    @cached_property
    def free_coords(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.grid_shape is None:
            return None
        return np.divmod(self.free, self.grid_shape[1])

    # --- reduced operators ---------------------------------------------------

    @cached_property
    def _wA(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(self.weights) @ self.rows)

    @cached_property
    def data_block(self) -> sp.csr_matrix:
        """Weighted data rows acting on free DOFs, ``diag(w) A E``."""
        return sp.csr_matrix(self._wA @ self.E)

    @cached_property
    def data_target(self) -> np.ndarray:
        return self.weights * self.targets - self._wA @ self.f

    @cached_property
    def reg_block(self) -> sp.csr_matrix | None:
        if self.reg_rows is None:
            return None
        if self.reg_free is not None:
            return self.reg_free
        return sp.csr_matrix(self.reg_rows @ self.E)

    def _reg_f(self) -> np.ndarray | None:
        return None if self.reg_rows is None else self.reg_rows @ self.f

    def stacked(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """(B, d) with the objective equal to ``|B z - d|^2``."""
        if self.reg_rows is None:
            return self.data_block, self.data_target
        rw = self.reg_weight
        B = sp.vstack([self.data_block, rw * self.reg_block], format="csr")
        return B, np.concatenate([self.data_target, -rw * self._reg_f()])

    def normal_matrix(self) -> sp.csc_matrix:
        """``B^T B``, symmetric positive semidefinite."""
        D = self.data_block
        N = D.T @ D
        if self.reg_rows is not None:
            G = self.reg_gram if self.reg_gram is not None else self.reg_block.T @ self.reg_block
            N = N + self.reg_weight**2 * G
        return sp.csc_matrix(N)

    def normal_rhs(self) -> np.ndarray:
        rhs = self.data_block.T @ self.data_target
        if self.reg_rows is not None:
            rhs = rhs - self.reg_weight**2 * (self.reg_block.T @ self._reg_f())
        return rhs

    # --- objective ------------------------------------------------------------

    def objective_full(self, q) -> float:
        """Objective of a full vector (constraints not checked)."""
        q = np.asarray(q, dtype=float).ravel()
        r = self.weights * (self.rows @ q - self.targets)
        val = float(r @ r)
        if self.reg_rows is not None:
            s = self.reg_rows @ q
            val += self.reg_weight**2 * float(s @ s)
        return val

    def objective(self, z) -> float:
        return self.objective_full(self.full(z))

    def gradient(self, z) -> np.ndarray:
        """Gradient of :meth:`objective` with respect to the free DOFs."""
        q = self.full(z)
        g = self.data_block.T @ (self.weights * (self.rows @ q - self.targets))
        if self.reg_rows is not None:
            g = g + self.reg_weight**2 * (self.reg_block.T @ (self.reg_rows @ q))
        return 2.0 * g

    def quadratic_part(self, h) -> float:
        """Homogeneous quadratic form ``|B h|^2`` (objective of a perturbation)."""
        h = np.asarray(h, dtype=float)
        v = self.data_block @ h
        val = float(v @ v)
        if self.reg_rows is not None:
            s = self.reg_block @ h
            val += self.reg_weight**2 * float(s @ s)
        return val

    def reg_part(self, h) -> float:
        """Regularization share ``reg_weight^2 |R E h|^2`` of :meth:`quadratic_part`."""
        if self.reg_rows is None:
            return 0.0
        s = self.reg_block @ np.asarray(h, dtype=float)
        return self.reg_weight**2 * float(s @ s)
