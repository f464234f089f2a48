"""Problem instances behind a uniform stochastic first-order oracle contract.

Two instances are provided: the elliptic optimal-control problem (gradient via
an adjoint solve, randomness from the diffusion coefficient) and a synthetic
finite-dimensional regularized least-squares problem with additive Gaussian
gradient noise and a computable reference optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .hilbert import project_box, soft_threshold, wdot, weighted_l1, wnorm
from .linsolve import CgConfig


class EllipticControlProblem:
    """Sparse distributed control of an elliptic PDE with a random coefficient.

    Smooth part: E[ 0.5 ||y(u, xi) - y_d||^2 ] + (alpha/2) ||u||^2 in the
    lumped L2 inner product; nonsmooth part: beta * ||u||_L1, with box
    constraints [u_min, u_max].

    The control is discretized on the interior nodes: under the lumped-load
    quadrature a boundary control value never enters the state equation (its
    lumped load row is eliminated with the Dirichlet condition), so boundary
    dofs would be frozen spectators and are dropped from the control space.
    """

    def __init__(self, mesh: fem.StructuredMesh, alpha: float, beta: float,
                 y_d: np.ndarray | None = None,
                 u_min: float = -6.0, u_max: float = 6.0,
                 solve_method: str = "cg", cg: CgConfig | None = None):
        if alpha < 0.0 or beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")
        if u_min >= u_max:
            raise ValueError(f"u_min={u_min} must be below u_max={u_max}")
        self.mesh = mesh
        self.alpha = alpha
        self.beta = beta
        self.u_min = u_min
        self.u_max = u_max
        self.solve_method = solve_method
        self.cg = cg or CgConfig()
        # mass and lumped weights do not depend on the coefficient sample
        self.state_weights = fem.assemble(mesh, np.zeros(4)).lumped
        self.weights = self.state_weights[mesh.interior]
        self.y_d = fem.checkerboard_target(mesh) if y_d is None else np.asarray(y_d, float)
        if self.y_d.shape != (mesh.n_nodes,):
            raise ValueError("y_d does not match the mesh")

    @property
    def dim(self) -> int:
        return len(self.mesh.interior)

    def _full(self, u: np.ndarray) -> np.ndarray:
        """Scatter an interior control vector onto all mesh nodes."""
        full = np.zeros(self.mesh.n_nodes)
        full[self.mesh.interior] = u
        return full

    def draw_sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=4)

    def operators(self, xi: np.ndarray) -> fem.AssembledOperators:
        return fem.assemble(self.mesh, xi)

    def state(self, u: np.ndarray, xi: np.ndarray,
              ops: fem.AssembledOperators | None = None) -> np.ndarray:
        ops = ops or self.operators(xi)
        return fem.solve_state(ops, self._full(u), cfg=self.cg, method=self.solve_method)

    def grad(self, u: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Per-sample gradient alpha*u + p via the adjoint solve."""
        ops = self.operators(xi)
        y = fem.solve_state(ops, self._full(u), cfg=self.cg, method=self.solve_method)
        p = fem.solve_adjoint(ops, y, self.y_d, cfg=self.cg, method=self.solve_method)
        return self.alpha * u + p[self.mesh.interior]

    def smooth_value(self, u: np.ndarray, xi: np.ndarray) -> float:
        ops = self.operators(xi)
        y = fem.solve_state(ops, self._full(u), cfg=self.cg, method=self.solve_method)
        return (0.5 * wnorm(y - self.y_d, self.state_weights) ** 2
                + 0.5 * self.alpha * wnorm(u, self.weights) ** 2)

    def averaged_grad(self, u: np.ndarray, rng: np.random.Generator, m: int) -> np.ndarray:
        acc = np.zeros(self.dim)
        for _ in range(m):
            acc += self.grad(u, self.draw_sample(rng))
        return acc / m


class QuadraticProblem:
    """Desk-scale surrogate: 0.5||A u - b||^2 + (alpha/2)||u||^2 smooth part,
    beta*||u||_1 nonsmooth part, box constraints, additive Gaussian gradient
    noise of scale sigma (an exactly unbiased, variance-bounded oracle)."""

    def __init__(self, A: np.ndarray, b: np.ndarray, alpha: float, beta: float,
                 u_min: float = -6.0, u_max: float = 6.0, sigma: float = 0.0):
        if sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if u_min >= u_max:
            raise ValueError(f"u_min={u_min} must be below u_max={u_max}")
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b have incompatible shapes")
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.u_min = u_min
        self.u_max = u_max
        self.weights = np.ones(self.A.shape[1])

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def draw_sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sigma * rng.standard_normal(self.dim)

    def exact_grad(self, u: np.ndarray) -> np.ndarray:
        return self.A.T @ (self.A @ u - self.b) + self.alpha * u

    def grad(self, u: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return self.exact_grad(u) + noise

    def smooth_value(self, u: np.ndarray, sample: np.ndarray | None = None) -> float:
        r = self.A @ u - self.b
        return 0.5 * float(r @ r) + 0.5 * self.alpha * float(u @ u)

    def averaged_grad(self, u: np.ndarray, rng: np.random.Generator, m: int) -> np.ndarray:
        noise = self.sigma * rng.standard_normal((m, self.dim)).mean(axis=0)
        return self.exact_grad(u) + noise

    def smooth_lipschitz(self) -> float:
        return float(np.linalg.eigvalsh(self.A.T @ self.A)[-1]) + self.alpha


def nonsmooth_value(problem, u: np.ndarray) -> float:
    """beta * lumped L1 norm of u."""
    return problem.beta * weighted_l1(u, problem.weights)


def empirical_objective(problem, u: np.ndarray, samples) -> float:
    """Average smooth value over a fixed sample list plus the L1 term."""
    samples = list(samples)
    if not samples:
        raise ValueError("sample list must be nonempty")
    mean = sum(problem.smooth_value(u, s) for s in samples) / len(samples)
    return mean + nonsmooth_value(problem, u)


class FrozenEvalSet:
    """A sample set drawn once and reused for every telemetry evaluation.

    For the elliptic problem the per-sample operators are pre-assembled and
    LU-factorized, so repeated objective evaluation costs back-substitutions
    only.
    """

    def __init__(self, problem, n_samples: int, seed):
        if n_samples < 1:
            raise ValueError("eval_samples must be >= 1")
        self.problem = problem
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        self.samples = [problem.draw_sample(rng) for _ in range(n_samples)]
        self._ops = None
        if isinstance(problem, EllipticControlProblem):
            self._ops = [problem.operators(xi) for xi in self.samples]
            for ops in self._ops:
                ops.factorized()

    def objective(self, u: np.ndarray, u_nonsmooth: np.ndarray | None = None) -> float:
        """Mean smooth value at u plus the L1 term, evaluated at u_nonsmooth
        (defaults to u; for splitting methods pass the thresholded iterate)."""
        zu = u if u_nonsmooth is None else u_nonsmooth
        prob = self.problem
        if self._ops is not None:
            total = 0.0
            alpha_term = 0.5 * prob.alpha * wnorm(u, prob.weights) ** 2
            u_full = prob._full(u)
            for ops in self._ops:
                y = fem.solve_state(ops, u_full, method="lu")
                total += 0.5 * wnorm(y - prob.y_d, prob.state_weights) ** 2 + alpha_term
            return total / len(self._ops) + nonsmooth_value(prob, zu)
        mean = sum(prob.smooth_value(u, s) for s in self.samples) / len(self.samples)
        return mean + nonsmooth_value(prob, zu)


@dataclass
class ReferenceOptimum:
    u: np.ndarray
    objective: float
    residual: float
    converged: bool


def reference_optimum(problem: QuadraticProblem, max_iter: int = 10 ** 6,
                      tol: float = 1e-12) -> ReferenceOptimum:
    """Deterministic proximal gradient (prox = clamp o soft-threshold) on the
    noise-free quadratic problem, run to a prox-gradient residual <= tol."""
    L = problem.smooth_lipschitz()
    step = 1.0 / L
    u = np.zeros(problem.dim)
    residual = np.inf
    for _ in range(max_iter):
        g = problem.exact_grad(u)
        u_next = project_box(soft_threshold(u - step * g, step * problem.beta),
                             problem.u_min, problem.u_max)
        residual = float(np.linalg.norm(u - u_next)) / step
        u = u_next
        if residual <= tol:
            break
    obj = problem.smooth_value(u) + nonsmooth_value(problem, u)
    return ReferenceOptimum(u=u, objective=obj, residual=residual,
                            converged=residual <= tol)
