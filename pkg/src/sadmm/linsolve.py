"""Preconditioned conjugate gradients for sparse SPD systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

_PRECONDITIONERS = ("none", "jacobi")


class CgNonConvergence(RuntimeError):
    """CG hit max_iter before reaching the requested tolerance."""

    def __init__(self, iterations: int, residual: float, target: float):
        super().__init__(
            f"CG did not converge in {iterations} iterations: "
            f"residual {residual:.3e} > target {target:.3e}"
        )
        self.iterations = iterations
        self.residual = residual
        self.target = target


@dataclass(frozen=True)
class CgConfig:
    rel_tol: float = 1e-10
    max_iter: int | None = None  # None -> 10 * n
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.preconditioner not in _PRECONDITIONERS:
            raise ValueError(
                f"unknown preconditioner {self.preconditioner!r}; "
                f"expected one of {_PRECONDITIONERS}"
            )


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def check_spd_structure(A: sp.spmatrix, rtol: float = 1e-12) -> None:
    """Verify stored-entry symmetry and a strictly positive diagonal."""
    A = A.tocsr()
    diff = abs(A - A.T)
    scale = max(abs(A).max(), 1e-300)
    if diff.nnz and diff.max() > rtol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    if np.any(A.diagonal() <= 0.0):
        raise ValueError("matrix diagonal has non-positive entries")


def matvec(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with a shape check."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"shape mismatch: A is {A.shape}, x is {x.shape}")
    return A @ x


def cg_solve(A: sp.spmatrix, b: np.ndarray, cfg: CgConfig = CgConfig()) -> CgResult:
    """Solve A x = b to ||A x - b|| <= rel_tol * ||b|| in the 2-norm."""
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if b.shape != (n,):
        raise ValueError(f"shape mismatch: A is {A.shape}, b is {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite entries")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CgResult(np.zeros(n), 0, 0.0)

    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * n
    target = cfg.rel_tol * b_norm

    if cfg.preconditioner == "jacobi":
        inv_diag = 1.0 / A.diagonal()
    else:
        inv_diag = None

    x = np.zeros(n)
    r = b.copy()
    z = r * inv_diag if inv_diag is not None else r.copy()
    p = z.copy()
    rz = float(np.dot(r, z))

    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / float(np.dot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        r_norm = float(np.linalg.norm(r))
        if r_norm <= target:
            return CgResult(x, it, r_norm)
        z = r * inv_diag if inv_diag is not None else r
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise CgNonConvergence(max_iter, float(np.linalg.norm(A @ x - b)), target)
