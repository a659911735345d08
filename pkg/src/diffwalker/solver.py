"""Shared linear solvers for the SPD unmarked-block Laplacian.

The direct path factorizes once (SuperLU with a symmetric-friendly ordering)
and serves any number of right-hand sides; the iterative path runs
preconditioned conjugate gradients per column.  ``make_solver`` picks between
them by problem size unless a method is forced.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._errors import SolverConvergenceError

try:  # optional multigrid preconditioner for the CG path
    import pyamg
except ImportError:  # pragma: no cover
    pyamg = None

__all__ = ["SolverConfig", "SpdSolver", "make_solver"]


@dataclass(frozen=True)
class SolverConfig:
    """Solver selection and tolerances.

    ``method`` is ``"auto"`` (direct up to ``direct_limit`` unknowns, CG
    above), ``"direct"`` or ``"cg"``.  The CG path targets a relative residual
    of ``cg_rtol`` within ``cg_maxiter_factor * n_unknowns`` iterations.
    ``residual_tol`` is the health-check bound applied to direct solves.
    """

    method: str = "auto"
    direct_limit: int = 200_000
    cg_rtol: float = 1e-10
    cg_maxiter_factor: int = 10
    residual_tol: float = 1e-8

    def resolve(self, n_unknowns: int) -> str:
        if self.method == "auto":
            return "direct" if n_unknowns <= self.direct_limit else "cg"
        if self.method not in ("direct", "cg"):
            raise ValueError(f"unknown solver method {self.method!r}")
        return self.method


class SpdSolver:
    """A reusable solve handle for one assembled ``lap_uu`` matrix.

    Instances are safe to share across independent right-hand sides; the
    factorization (direct mode) or preconditioner (CG mode) is read-only
    after construction.
    """

    def __init__(self, lap_uu: sp.spmatrix, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self.n = lap_uu.shape[0]
        self.method = self.config.resolve(self.n)
        self.factor_time = 0.0
        self.last_iterations: list[int] = []
        self._matrix = lap_uu.tocsr()
        t0 = time.perf_counter()
        if self.method == "direct" and self.n > 0:
            self._lu = spla.splu(lap_uu.tocsc(), permc_spec="MMD_AT_PLUS_A")
            self._precond = None
        else:
            self._lu = None
            self._precond = None
            if self.method == "cg" and self.n > 0 and pyamg is not None:
                ml = pyamg.smoothed_aggregation_solver(self._matrix)
                self._precond = ml.aspreconditioner(cycle="V")
        self.factor_time = time.perf_counter() - t0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``lap_uu @ x = rhs`` for a vector or a dense column block."""
        rhs = np.asarray(rhs, dtype=np.float64)
        single = rhs.ndim == 1
        cols = rhs[:, None] if single else rhs
        if self.n == 0:
            out = np.zeros_like(cols)
            return out[:, 0] if single else out
        if self.method == "direct":
            out = self._lu.solve(np.ascontiguousarray(cols))
            self._check_residual(cols, out)
        else:
            out = self._solve_cg(cols)
        return out[:, 0] if single else out

    def _check_residual(self, rhs, x):
        residual = self._matrix @ x - rhs
        scale = np.maximum(np.linalg.norm(rhs, axis=0), 1.0)
        rel = np.linalg.norm(residual, axis=0) / scale
        if np.any(rel > self.config.residual_tol):
            raise SolverConvergenceError(
                f"direct solve residual {rel.max():.3e} exceeds "
                f"{self.config.residual_tol:.1e}",
                residuals=rel,
            )

    def _solve_cg(self, cols: np.ndarray) -> np.ndarray:
        maxiter = max(1, self.config.cg_maxiter_factor * self.n)
        out = np.empty_like(cols)
        self.last_iterations = []
        for k in range(cols.shape[1]):
            count = [0]

            def tick(_xk):
                count[0] += 1

            x, info = spla.cg(
                self._matrix,
                cols[:, k],
                rtol=self.config.cg_rtol,
                atol=0.0,
                maxiter=maxiter,
                M=self._precond,
                callback=tick,
            )
            if info != 0:
                achieved = np.linalg.norm(self._matrix @ x - cols[:, k]) / max(
                    np.linalg.norm(cols[:, k]), 1e-300
                )
                raise SolverConvergenceError(
                    f"conjugate gradients stopped after {maxiter} iterations at "
                    f"relative residual {achieved:.3e} (target {self.config.cg_rtol:.1e})",
                    residuals=np.array([achieved]),
                )
            out[:, k] = x
            self.last_iterations.append(count[0])
        return out

    def residual_norms(self, rhs: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Per-column relative residuals ``|Ax - b| / max(|b|, 1)``."""
        rhs = np.atleast_2d(rhs.T).T
        x = np.atleast_2d(x.T).T
        residual = self._matrix @ x - rhs
        scale = np.maximum(np.linalg.norm(rhs, axis=0), 1.0)
        return np.linalg.norm(residual, axis=0) / scale


def make_solver(lap_uu: sp.spmatrix, config: SolverConfig | None = None) -> SpdSolver:
    return SpdSolver(lap_uu, config)
