"""Dense complex matrices: unitaries with cached spectra, Schatten norms, exponentials."""

from __future__ import annotations

import json

import numpy as np
import scipy.linalg

from .circle_fn import CircleFunction

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
CLUSTER_TOL = 1e-8

__all__ = [
    "UnitaryMatrix",
    "expm_hermitian",
    "func_calculus",
    "is_hermitian",
    "make_unitary_from_hermitian",
    "matrix_from_json",
    "matrix_to_json",
    "schatten_norm",
]


def _cluster_angles(eigvals: np.ndarray, tol: float) -> np.ndarray:
    """Label eigenvalues by single-linkage clusters in chordal distance."""
    d = eigvals.size
    order = np.argsort(np.angle(eigvals))
    labels = np.empty(d, dtype=int)
    current = 0
    labels[order[0]] = 0
    for a, b in zip(order[:-1], order[1:]):
        if abs(eigvals[b] - eigvals[a]) > tol:
            current += 1
        labels[b] = current
    # the cut at angle pi may split a cluster
    if d > 1 and current > 0 and abs(eigvals[order[-1]] - eigvals[order[0]]) <= tol:
        labels[labels == current] = 0
        current -= 1
    _, labels = np.unique(labels, return_inverse=True)
    return labels


class UnitaryMatrix:
    """A unitary ``d x d`` matrix together with its spectral decomposition.

    The decomposition comes from a complex Schur factorization, which is
    diagonal for normal matrices and always yields orthonormal eigenvectors.
    Eigenvalues within ``cluster_tol`` (chordal) share one spectral projection
    and one representative value on the circle.
    """

    def __init__(self, matrix, check: bool = True, cluster_tol: float = CLUSTER_TOL):
        u = np.array(matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 1:
            raise ValueError("a unitary must be a nonempty square matrix")
        if not np.all(np.isfinite(u)):
            raise ValueError("matrix has non-finite entries")
        if check:
            err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2)
            if err > UNITARY_TOL:
                raise ValueError(f"matrix is not unitary (||U*U - I|| = {err:.3e})")
        u.setflags(write=False)
        self.matrix = u
        t, z = scipy.linalg.schur(u, output="complex")
        raw = np.diag(t)
        self.labels = _cluster_angles(raw, cluster_tol)
        reps = []
        for c in range(self.labels.max() + 1):
            mean = raw[self.labels == c].mean()
            reps.append(mean / abs(mean))
        self.cluster_values = np.array(reps)
        self.eigvals = self.cluster_values[self.labels]
        self.eigvecs = z

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def projections(self) -> list[np.ndarray]:
        """Spectral projections, one per eigenvalue cluster (same order as ``cluster_values``)."""
        out = []
        for c in range(self.cluster_values.size):
            q = self.eigvecs[:, self.labels == c]
            out.append(q @ q.conj().T)
        return out

    def spectral(self) -> list[tuple[complex, np.ndarray]]:
        return list(zip(self.cluster_values, self.projections))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"UnitaryMatrix(d={self.dim}, clusters={self.cluster_values.size})"


def as_unitary(u) -> UnitaryMatrix:
    return u if isinstance(u, UnitaryMatrix) else UnitaryMatrix(u)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.linalg.norm(a - a.conj().T, 2) <= tol


def _check_hermitian(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise ValueError("generator is not Hermitian")
    return a


def expm_hermitian(a, t: float = 1.0) -> np.ndarray:
    """``exp(i t A)`` for Hermitian ``A`` through its eigendecomposition."""
    a = _check_hermitian(a)
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * np.exp(1j * t * w)) @ v.conj().T


def make_unitary_from_hermitian(a, u0=None) -> UnitaryMatrix:
    """Return ``exp(iA) U0`` with a fresh spectral decomposition."""
    e = expm_hermitian(a)
    if u0 is None:
        return UnitaryMatrix(e)
    return UnitaryMatrix(e @ np.asarray(u0))


def schatten_norm(x, p: float) -> float:
    """``(sum sigma_i^p)^(1/p)``; a quasi-norm for ``0 < p < 1``, the operator norm for ``p = inf``."""
    if not p > 0:
        raise ValueError("Schatten exponent must be positive")
    s = np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    smax = s.max(initial=0.0)
    if smax == 0:
        return 0.0
    # scale out the largest singular value to avoid overflow at large p
    return float(smax * np.sum((s / smax) ** p) ** (1.0 / p))


def func_calculus(f: CircleFunction, u) -> np.ndarray:
    """``f(U) = sum_i f(lambda_i) P_i``."""
    u = as_unitary(u)
    vals = np.asarray(f(u.eigvals), dtype=complex)
    q = u.eigvecs
    return (q * vals) @ q.conj().T


def matrix_to_json(x) -> dict:
    x = np.asarray(x, dtype=complex)
    return {"d": int(x.shape[0]), "re": x.real.tolist(), "im": x.imag.tolist()}


def matrix_from_json(data) -> np.ndarray:
    if isinstance(data, str):
        data = json.loads(data)
    x = np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)
    if x.shape != (data["d"], data["d"]):
        raise ValueError(f"matrix JSON declares d={data['d']} but has shape {x.shape}")
    return x
