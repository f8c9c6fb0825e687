"""Symmetric-definite generalized eigenproblem ``L w = rho R w``.

``solve_gev`` whitens with a Cholesky factor of ``R + sigma I`` and calls a
symmetric eigensolver; ``sigma`` climbs a fixed ladder until the
factorization succeeds, so a singular ``R`` is handled without user
tuning.  ``oracle_gev`` is an independent dense route used by the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

SYMMETRY_RTOL = 1e-8


class GevError(ValueError):
    pass


@dataclass(frozen=True)
class RegularizationPolicy:
    """``sigma = eps * trace(R) / Q`` for ``eps`` in ``initial, initial*growth, ... <= cap``.

    An exact factorization (``sigma = 0``) is always tried first.
    """

    initial: float = 1e-8
    growth: float = 10.0
    cap: float = 1e-2

    def sigmas(self, r: np.ndarray):
        yield 0.0
        q = r.shape[0]
        scale = float(np.trace(r)) / q
        if not scale > 0:
            # zero or indefinite trace carries no scale information
            scale = 1.0
        eps = self.initial
        while eps <= self.cap * (1 + 1e-12):
            yield eps * scale
            eps *= self.growth


@dataclass(frozen=True)
class GevProblem:
    left: np.ndarray
    right: np.ndarray
    policy: RegularizationPolicy = RegularizationPolicy()

    def __post_init__(self):
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        if left.ndim != 2 or left.shape[0] != left.shape[1]:
            raise GevError(f"left matrix must be square, got {left.shape}")
        if right.shape != left.shape:
            raise GevError(f"matrix orders differ: {left.shape} vs {right.shape}")
        for name, m in (("left", left), ("right", right)):
            if not np.all(np.isfinite(m)):
                raise GevError(f"{name} matrix has non-finite entries")
            scale = np.abs(m).max(initial=0.0)
            if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
                raise GevError(f"{name} matrix is not symmetric")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def order(self) -> int:
        return self.left.shape[0]


@dataclass(frozen=True)
class GevSolution:
    """Eigenpairs sorted by descending eigenvalue.

    Eigenvectors are the columns of ``vectors`` and are normalized so that
    ``w.T (R + sigma I) w = 1``; callers that need another convention
    rescale them.
    """

    values: np.ndarray
    vectors: np.ndarray
    sigma: float
    residuals: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _factor(problem: GevProblem):
    r = problem.right
    eye = np.eye(problem.order)
    for sigma in problem.policy.sigmas(r):
        try:
            g = linalg.cholesky(r + sigma * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(g)):
            return sigma, g
    raise GevError(
        f"right matrix not positive definite even with eps={problem.policy.cap:g} regularization"
    )


def solve_gev(problem: GevProblem) -> GevSolution:
    sigma, g = _factor(problem)
    # M = G^-1 L G^-T, formed with two triangular solves
    tmp = linalg.solve_triangular(g, problem.left, lower=True, check_finite=False)
    m = linalg.solve_triangular(g, tmp.T, lower=True, check_finite=False)
    m = 0.5 * (m + m.T)
    vals, v = linalg.eigh(m, check_finite=False)
    order = np.argsort(-vals, kind="stable")
    vals, v = vals[order], v[:, order]
    vectors = linalg.solve_triangular(g.T, v, lower=False, check_finite=False)
    vectors = _fix_signs(vectors)
    res = _residuals(problem.left, problem.right, sigma, vals, vectors)
    return GevSolution(vals, vectors, sigma, res)


def oracle_gev(problem: GevProblem, max_order: int = 100) -> GevSolution:
    """Brute force: eigen-decompose ``(R + sigma I)^-1 L`` as a general matrix."""
    if problem.order > max_order:
        raise GevError(f"oracle limited to order <= {max_order}")
    sigma = None
    eye = np.eye(problem.order)
    for s in problem.policy.sigmas(problem.right):
        r = problem.right + s * eye
        if np.linalg.eigvalsh(r).min() > 0:
            sigma = s
            break
    if sigma is None:
        raise GevError("right matrix not positive definite within the regularization cap")
    r = problem.right + sigma * eye
    prod = np.linalg.solve(r, problem.left)
    vals, vecs = np.linalg.eig(prod)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, r @ vecs))
    vecs = _fix_signs(vecs / norms)
    return GevSolution(vals, vecs, sigma, _residuals(problem.left, problem.right, sigma, vals, vecs))


def _residuals(left, right, sigma, values, vectors) -> np.ndarray:
    r_w = right @ vectors + sigma * vectors
    return np.linalg.norm(left @ vectors - r_w * values, axis=0)


def residuals(problem: GevProblem, solution: GevSolution) -> np.ndarray:
    if solution.vectors.shape[0] != problem.order:
        raise GevError("solution vectors do not match problem order")
    return _residuals(problem.left, problem.right, solution.sigma, solution.values, solution.vectors)


def residual_bound(problem: GevProblem, values: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Per-pair acceptance bound ``rtol * (|L|_F + |rho| |R|_F)``."""
    return rtol * (np.linalg.norm(problem.left) + np.abs(values) * np.linalg.norm(problem.right))
