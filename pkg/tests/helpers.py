"""Small, well-conditioned quadratic systems for optimizer tests."""

import numpy as np
import scipy.sparse as sp

from carleman_cip.system import QuadraticSystem


def random_system(seed=0, n=120, m=150, n_fixed=10, n_tie=5, reg_weight=0.3, scale=1.0, grid_shape=None, constraints=None):
    rng = np.random.default_rng(seed)
    A = sp.random(m, n, density=0.08, random_state=rng, format="csr") + sp.eye(m, n)
    w = scale * rng.uniform(0.5, 1.5, m)
    b = rng.normal(size=m)
    if constraints is None:
        perm = rng.permutation(n)
        fixed = perm[:n_fixed]
        dst = perm[n_fixed : n_fixed + n_tie]
        src = perm[n_fixed + n_tie : n_fixed + 2 * n_tie]
        constraints = dict(fixed_idx=fixed, fixed_values=rng.normal(size=n_fixed), tie_dst=dst, tie_src=src)
    R = sp.eye(n, format="csr")
    return QuadraticSystem(A, w, b, n, reg_rows=R, reg_weight=scale * reg_weight, grid_shape=grid_shape, **constraints)


def dense_oracle(system):
    """Minimizer by an SVD pseudo-inverse of the stacked dense matrix."""
    B, d = system.stacked()
    U, s, Vt = np.linalg.svd(B.toarray(), full_matrices=False)
    keep = s > s[0] * 1e-14
    return Vt[keep].T @ ((U[:, keep].T @ d) / s[keep])


def well_conditioned_system(seed=0, n=80, scale=1.0, grid_shape=None, constraints=None):
    """Normal matrix eigenvalues roughly in [0.3, 3] (times scale^2)."""
    rng = np.random.default_rng(seed)
    A = sp.eye(n, format="csr") + 0.25 * sp.random(n, n, density=0.05, random_state=rng, data_rvs=rng.standard_normal)
    w = scale * rng.uniform(0.6, 1.0, n)
    b = rng.normal(size=n)
    if constraints is None:
        perm = rng.permutation(n)
        constraints = dict(fixed_idx=perm[:6], fixed_values=rng.normal(size=6), tie_dst=perm[6:9], tie_src=perm[9:12])
    return QuadraticSystem(
        sp.csr_matrix(A), w, b, n, reg_rows=sp.eye(n, format="csr"), reg_weight=scale * 0.5,
        grid_shape=grid_shape, **constraints,
    )
