"""Classical encoders: empirical moments, Black-Litterman mean, sparse factor model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ReturnsMatrix
from .errors import ConditioningError, IterationLimitError, ShapeError, ValidationError

__all__ = [
    "MomentEstimates",
    "ViewSpec",
    "FactorModel",
    "markowitz_moments",
    "black_litterman_mean",
    "black_litterman_objective",
    "soft_threshold",
    "lasso",
    "lasso_objective",
    "factor_model_fit",
    "factor_objective",
]

# reciprocal condition number below which a matrix is treated as singular
RCOND = 1e-12


def _values(X):
    return X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    mean: np.ndarray
    covariance: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}


def markowitz_moments(X) -> MomentEstimates:
    """Column means and the 1/T (not 1/(T-1)) covariance."""
    V = _values(X)
    if V.ndim != 2 or V.shape[0] < 2:
        raise ShapeError(f"need a T x N matrix with T >= 2, got shape {V.shape}")
    mean = V.mean(axis=0)
    D = V - mean
    cov = D.T @ D / V.shape[0]
    return MomentEstimates(mean, 0.5 * (cov + cov.T))


@dataclass(frozen=True, eq=False)
class ViewSpec:
    """Investor views ``P mu ~ q`` with confidence matrix ``Omega``."""

    P: np.ndarray
    q: np.ndarray
    Omega: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        Om = np.atleast_2d(np.asarray(self.Omega, dtype=float))
        if q.shape[0] != P.shape[0] or Om.shape != (P.shape[0], P.shape[0]):
            raise ShapeError(f"P {P.shape}, q {q.shape}, Omega {Om.shape} are inconsistent")
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if not np.allclose(Om, Om.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Om).max())):
            raise ValidationError("Omega must be symmetric")
        try:
            np.linalg.cholesky(Om)
        except np.linalg.LinAlgError:
            raise ConditioningError("Omega is not positive definite") from None
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "Omega", Om)


def _checked_inverse(A, name):
    w = np.linalg.eigvalsh(A)
    if w[0] <= RCOND * max(w[-1], 0.0) or w[-1] <= 0:
        raise ConditioningError(f"{name} is singular or not positive definite (eigenvalues {w[0]:.3e}..{w[-1]:.3e})")
    return np.linalg.inv(A)


def black_litterman_objective(mu, moments: MomentEstimates, views: ViewSpec) -> float:
    d = mu - moments.mean
    e = views.P @ mu - views.q
    return float(d @ np.linalg.solve(moments.covariance, d)
                 + views.lam * e @ np.linalg.solve(views.Omega, e))


def black_litterman_mean(moments: MomentEstimates, views: ViewSpec) -> np.ndarray:
    """Minimizer of ``(mu - m)' S^-1 (mu - m) + lam (P mu - q)' O^-1 (P mu - q)``.

    ``m`` and ``S`` are the sample mean and covariance. Solved in closed form
    as a ridge-type normal equation. A singular covariance raises
    :class:`ConditioningError`; nothing is regularized silently.
    """
    n = moments.mean.shape[0]
    if views.P.shape[1] != n:
        raise ShapeError(f"views address {views.P.shape[1]} assets, moments have {n}")
    S_inv = _checked_inverse(moments.covariance, "covariance")
    if views.lam == 0:
        return moments.mean.copy()
    O_inv = np.linalg.inv(views.Omega)
    A = S_inv + views.lam * views.P.T @ O_inv @ views.P
    b = S_inv @ moments.mean + views.lam * views.P.T @ O_inv @ views.q
    return np.linalg.solve(A, b)


# --------------------------------------------------------------------------
# lasso
# --------------------------------------------------------------------------


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lasso_objective(design, response, w, lam) -> float:
    r = response - design @ w
    return float(r @ r + lam * np.sum(np.abs(w)))


def lasso(design, response, lam: float, w0=None, tol: float = 1e-10,
          max_sweeps: int = 10_000) -> np.ndarray:
    """Minimize ``||response - design @ w||^2 + lam * ||w||_1``.

    Cyclic coordinate descent with soft-thresholding; stops once a full sweep
    changes no coordinate by ``tol`` or more. ``w0`` is a warm start.

    Raises
    ------
    IterationLimitError
        After ``max_sweeps`` sweeps without convergence.
    """
    D = np.asarray(design, dtype=float)
    r = np.asarray(response, dtype=float).reshape(-1)
    if D.ndim != 2 or D.shape[0] != r.shape[0]:
        raise ShapeError(f"design {D.shape} does not match response of length {r.shape[0]}")
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    K = D.shape[1]
    w = np.zeros(K) if w0 is None else np.array(w0, dtype=float)
    col_sq = np.einsum("ij,ij->j", D, D)
    resid = r - D @ w
    half = 0.5 * lam
    delta = np.inf
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(K):
            if col_sq[j] == 0.0:
                if w[j] != 0.0:
                    delta = max(delta, abs(w[j]))
                    w[j] = 0.0
                continue
            old = w[j]
            rho = D[:, j] @ resid + col_sq[j] * old
            new = soft_threshold(rho, half) / col_sq[j]
            if new != old:
                resid -= D[:, j] * (new - old)
                w[j] = new
                delta = max(delta, abs(new - old))
        if delta < tol:
            return w
    raise IterationLimitError(max_sweeps, delta)


# --------------------------------------------------------------------------
# sparse linear factor model
# --------------------------------------------------------------------------


@dataclass
class FactorModel:
    """Loadings ``W`` (N x K) and factors ``F`` (K x T) with ``R ~ (W @ F).T``."""

    W: np.ndarray
    F: np.ndarray
    lam: float
    objective_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "W": self.W.tolist(),
            "F": self.F.tolist(),
            "lambda": self.lam,
            "objective_trace": [float(v) for v in self.objective_trace],
        }


def factor_objective(R, W, F, lam) -> float:
    """``sum_n ||r_n - sum_k W_nk F_k||^2 + lam * sum |W_nk|``."""
    V = _values(R)
    E = V - F.T @ W.T
    return float(np.sum(E * E) + lam * np.sum(np.abs(W)))


def _factor_step(V, W, F):
    """Least-squares factors given loadings, one normal-equation solve per period.

    Factors whose loading column is identically zero do not enter the
    objective and are left as they are.
    """
    active = np.flatnonzero(np.any(W != 0.0, axis=0))
    if active.size == 0:
        return F
    Wa = W[:, active]
    G = Wa.T @ Wa
    w = np.linalg.eigvalsh(G)
    if w[0] <= RCOND * w[-1]:
        raise ConditioningError(
            f"loading Gram matrix is rank deficient (eigenvalues {w[0]:.3e}..{w[-1]:.3e})"
        )
    F = F.copy()
    F[active] = np.linalg.solve(G, Wa.T @ V.T)
    return F


def factor_model_fit(R, K: int, lam: float = 0.0, max_iters: int = 500, seed: int = 0,
                     rtol: float = 1e-8) -> FactorModel:
    """Fit the sparse factor model by alternating lasso and least squares.

    Each iteration runs (a) a warm-started lasso of every asset's return
    series on the current factors, then (b) an exact least-squares update
    of the factors given the loadings. The objective after each full
    iteration is recorded; iteration stops at ``max_iters`` or when the
    relative change falls below ``rtol``.
    """
    V = _values(R)
    T, N = V.shape
    if not 1 <= K <= min(N, T):
        raise ValidationError(f"K={K} must lie in [1, min(N, T)={min(N, T)}]")
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((K, T)) * V.std()
    W = np.zeros((N, K))
    design = F.T
    trace = []
    for _ in range(max_iters):
        design = F.T
        W = np.vstack([lasso(design, V[:, n], lam, w0=W[n]) for n in range(N)])
        F = _factor_step(V, W, F)
        trace.append(factor_objective(V, W, F, lam))
        if not np.any(W):
            break
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) <= rtol * max(abs(trace[-2]), 1e-300):
            break
    return FactorModel(W, F, lam, trace)
