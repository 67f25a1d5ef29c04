"""Dense symmetric linear algebra: eigendecomposition, PSD square root and
sample statistics of signal matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        """Return ``U diag(values) U^T`` (the input matrix by default)."""
        if values is None:
            values = self.eigenvalues
        U = self.eigenvectors
        return (U * values) @ U.T


@dataclass(frozen=True)
class GaussianModel:
    """Sample mean, covariance and covariance square root of a signal set."""

    mean: np.ndarray
    covariance: np.ndarray
    cov_sqrt: np.ndarray
    n_samples: int

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @property
    def mean_sq_norm(self) -> float:
        return float(self.mean @ self.mean)


def check_symmetric(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ValidationError(f"{name} is not symmetric")
    return A


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made nonnegative; argmax
    # returns the lowest index on ties
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[idx, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    return U * signs


def jacobi_eigh(A: np.ndarray, max_sweeps: int | None = None, name: str = "matrix"):
    """Cyclic Jacobi eigenvalue iteration.

    Returns unsorted ``(eigenvalues, eigenvectors)``. Slow in Python for
    large ``n``; intended for small matrices and as an independent check on
    the LAPACK path.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    V = np.eye(n)
    if max_sweeps is None:
        max_sweeps = max(1, 100 * n)
    off_scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= 1e-15 * max(off_scale, 1e-300) or off == 0.0:
            return np.diag(a).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    raise NumericalError(f"Jacobi iteration did not converge for {name} after {max_sweeps} sweeps")


def sym_eig(A, method: str = "lapack", name: str = "matrix") -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Eigenvalues are ascending. Each eigenvector is signed so that its
    largest-magnitude component is nonnegative (lowest index wins ties),
    which makes the output deterministic for a given input.

    ``method`` is ``"lapack"`` (default) or ``"jacobi"``.
    """
    A = check_symmetric(A, name)
    if method == "lapack":
        try:
            lam, U = np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition of {name} failed: {exc}") from exc
    elif method == "jacobi":
        lam, U = jacobi_eigh(A, name=name)
        order = np.argsort(lam, kind="stable")
        lam, U = lam[order], U[:, order]
    else:
        raise ValidationError(f"unknown eigensolver method {method!r}")
    return EigenDecomposition(lam, _fix_signs(U))


def psd_sqrt(A, name: str = "matrix") -> np.ndarray:
    """Symmetric square root of a PSD matrix.

    Slightly negative eigenvalues (down to ``-1e-8 * max(1, lambda_max)``)
    are clamped to zero; anything below raises ``ValidationError``.
    """
    eig = sym_eig(A, name=name)
    lam = eig.eigenvalues
    floor = -1e-8 * max(1.0, float(lam[-1])) if lam.size else 0.0
    if lam.size and lam[0] < floor:
        raise ValidationError(f"{name} not PSD (min eigenvalue {lam[0]:.3e})")
    S = eig.reconstruct(np.sqrt(np.clip(lam, 0.0, None)))
    return 0.5 * (S + S.T)


def sample_stats(X) -> GaussianModel:
    """Mean, covariance (divisor M) and covariance square root of ``X``.

    ``X`` has one observation per row and one node per column. Rows are put
    in a canonical order first, so the result does not depend on the order
    of the observations.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"signal matrix must be 2-D, got shape {X.shape}")
    M = X.shape[0]
    if M < 2:
        raise ValidationError(f"need at least 2 observations, got {M}")
    if np.isnan(X).any():
        raise ValidationError("signal matrix has missing entries")
    if not np.all(np.isfinite(X)):
        raise ValidationError("signal matrix has non-finite entries")
    X = X[np.lexsort(X.T[::-1])]
    mean = X.mean(axis=0)
    Xc = X - mean
    with np.errstate(over="ignore", invalid="ignore"):
        cov = (Xc.T @ Xc) / M
    if not np.all(np.isfinite(cov)):
        raise NumericalError("sample covariance overflowed; rescale the signals")
    cov = 0.5 * (cov + cov.T)
    return GaussianModel(mean=mean, covariance=cov, cov_sqrt=psd_sqrt(cov, "sample covariance"), n_samples=M)
