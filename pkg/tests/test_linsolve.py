"""Conjugate-gradient solver checked against dense direct solves."""

import numpy as np
import pytest
import scipy.sparse as sp

from sadmm.linsolve import (CgConfig, CgNonConvergence, cg_solve,
                            check_spd_structure, matvec)


def tridiag(n):
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                    [-1, 0, 1]).tocsr()


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    return sp.csr_matrix(A)


class TestConfig:
    def test_defaults_valid(self):
        cfg = CgConfig()
        assert cfg.preconditioner == "jacobi"

    @pytest.mark.parametrize("kwargs", [
        {"rel_tol": 0.0}, {"rel_tol": 1.5}, {"max_iter": 0},
        {"preconditioner": "ilu"},
    ])
    def test_invalid_config_raises(self, kwargs):
        with pytest.raises(ValueError):
            CgConfig(**kwargs)


class TestStructureChecks:
    def test_spd_structure_accepts_tridiag(self):
        check_spd_structure(tridiag(6))

    def test_rejects_asymmetric(self):
        A = tridiag(4).tolil()
        A[0, 3] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            check_spd_structure(A.tocsr())

    def test_rejects_nonpositive_diagonal(self):
        A = sp.diags([1.0, -1.0, 1.0]).tocsr()
        with pytest.raises(ValueError, match="diagonal"):
            check_spd_structure(A)

    def test_matvec(self):
        A = tridiag(4)
        x = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(matvec(A, x), A.toarray() @ x)
        with pytest.raises(ValueError, match="shape"):
            matvec(A, np.zeros(5))


class TestCgSolve:
    def test_tridiag_known_solution(self):
        # -x_{i-1} + 2 x_i - x_{i+1} = 1 on 5 points: x_i = i (6 - i) / 2
        res = cg_solve(tridiag(5), np.ones(5))
        np.testing.assert_allclose(res.x, [2.5, 4.0, 4.5, 4.0, 2.5],
                                   rtol=1e-9)

    @pytest.mark.parametrize("precond", ["none", "jacobi"])
    def test_matches_dense_solve(self, precond):
        for seed in range(3):
            A = random_spd(30, seed)
            rng = np.random.default_rng(100 + seed)
            b = rng.standard_normal(30)
            res = cg_solve(A, b, CgConfig(preconditioner=precond))
            np.testing.assert_allclose(res.x, np.linalg.solve(A.toarray(), b),
                                       rtol=1e-8, atol=1e-10)

    def test_residual_meets_tolerance(self):
        A = random_spd(40, 3)
        b = np.ones(40)
        cfg = CgConfig(rel_tol=1e-12)
        res = cg_solve(A, b, cfg)
        assert np.linalg.norm(A @ res.x - b) <= 1e-12 * np.linalg.norm(b)
        assert res.residual_norm <= 1e-12 * np.linalg.norm(b)
        assert res.iterations >= 1

    def test_zero_rhs(self):
        res = cg_solve(tridiag(5), np.zeros(5))
        np.testing.assert_array_equal(res.x, np.zeros(5))
        assert res.iterations == 0 and res.residual_norm == 0.0

    def test_nonconvergence_raises(self):
        A = random_spd(50, 4)
        with pytest.raises(CgNonConvergence) as exc:
            cg_solve(A, np.ones(50), CgConfig(max_iter=1, rel_tol=1e-14))
        assert exc.value.iterations == 1
        assert exc.value.residual > exc.value.target

    def test_shape_and_finiteness_checks(self):
        with pytest.raises(ValueError, match="shape"):
            cg_solve(tridiag(5), np.ones(4))
        with pytest.raises(ValueError, match="non-finite"):
            cg_solve(tridiag(3), np.array([1.0, np.nan, 0.0]))
