"""Cyclic Jacobi eigensolver for small Hermitian matrices.

Each matrix is swept with complex Jacobi rotations until the
off-diagonal Frobenius norm drops below ``1e-13 * max(1, ||A||_F)``.
The kernel is compiled with numba; stacks of matrices (a k-grid of
Bloch Hamiltonians) are processed in parallel, one matrix per task, so
results do not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import config, njit, prange

# the bundled TBB is too old for numba; OpenMP avoids a warning on every run
if config.THREADING_LAYER == "default":
    config.THREADING_LAYER = "omp"

__all__ = [
    "HermitianError",
    "Spectrum",
    "eig_hermitian",
    "eigh_batch",
    "eigvals_fast",
    "eigvalsh_batch",
    "fix_phases",
]

OFF_TOL = 1e-13
MAX_SWEEPS = 60
MAX_DIM = 64


class HermitianError(ValueError):
    """Input is not Hermitian within tolerance."""


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of one Hermitian matrix.

    Attributes
    ----------
    eigenvalues : (k,) float array, ascending.
    eigenvectors : (k, k) complex array, columns are eigenvectors.
    residual : max over columns of ``|M v - lambda v|``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    def gaps(self) -> np.ndarray:
        return np.diff(self.eigenvalues)


@njit(cache=True)
def _jacobi_one(a, v, want_vectors):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j].real ** 2 + a[i, j].imag ** 2
    scale = max(1.0, np.sqrt(scale))
    for _ in range(MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * (a[p, q].real ** 2 + a[p, q].imag ** 2)
        if np.sqrt(off) < OFF_TOL * scale:
            return True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
                gpp = c
                gpq = s
                gqp = -s * np.conj(phase)
                gqq = c * np.conj(phase)
                for r in range(n):
                    x = a[r, p]
                    y = a[r, q]
                    a[r, p] = x * gpp + y * gqp
                    a[r, q] = x * gpq + y * gqq
                for r in range(n):
                    x = a[p, r]
                    y = a[q, r]
                    a[p, r] = np.conj(gpp) * x + np.conj(gqp) * y
                    a[q, r] = np.conj(gpq) * x + np.conj(gqq) * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                if want_vectors:
                    for r in range(n):
                        x = v[r, p]
                        y = v[r, q]
                        v[r, p] = x * gpp + y * gqp
                        v[r, q] = x * gpq + y * gqq
    return False


@njit(cache=True, parallel=True)
def _jacobi_batch(a, v, want_vectors):
    ok = np.ones(a.shape[0], dtype=np.bool_)
    for b in prange(a.shape[0]):
        ok[b] = _jacobi_one(a[b], v[b], want_vectors)
    return ok.all()


def _jacobi_sweeps(a: np.ndarray, want_vectors: bool):
    # a: (B, n, n) complex, overwritten
    batch, n, _ = a.shape
    if want_vectors:
        v = np.zeros((batch, n, n), dtype=complex)
        v[:] = np.eye(n)
    else:
        v = np.empty((batch, 0, 0), dtype=complex)
    if not _jacobi_batch(a, v, want_vectors):
        raise RuntimeError("Jacobi iteration did not converge")
    return np.real(np.diagonal(a, axis1=1, axis2=2)).copy(), (v if want_vectors else None)


def eigvals_fast(m: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of one Hermitian matrix, without input checks.

    Meant for inner loops (optimizer objectives) where the caller builds
    ``m`` Hermitian by construction.
    """
    a = np.array(m, dtype=complex)
    v = np.empty((0, 0), dtype=complex)
    if not _jacobi_one(a, v, False):
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(a).real)


def _check_input(m: np.ndarray, tol: float) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 3 or m.shape[1] != m.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {m.shape}")
    if m.shape[1] > MAX_DIM:
        raise ValueError(f"matrix dimension {m.shape[1]} exceeds Jacobi limit {MAX_DIM}")
    dev = np.max(np.abs(m - np.conj(np.swapaxes(m, 1, 2)))) if m.size else 0.0
    if dev > tol:
        raise HermitianError(f"matrix is not Hermitian: max |M - M^H| = {dev:.3e} > {tol:.1e}")
    return 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each eigenvector so its largest-magnitude component is real positive.

    Works on ``(..., k, k)`` stacks of column eigenvectors.  Ties in
    magnitude (within 1e-9) go to the lowest index.
    """
    mags = np.abs(vectors)
    top = np.max(mags, axis=-2, keepdims=True)
    first = np.argmax(mags >= top - 1e-9, axis=-2)
    pivot = np.take_along_axis(vectors, first[..., None, :], axis=-2)
    ph = pivot / np.where(np.abs(pivot) > 0, np.abs(pivot), 1.0)
    return vectors * np.conj(ph)


def eigh_batch(m: np.ndarray, *, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a ``(B, k, k)`` stack of Hermitian matrices.

    Returns ``(w, v)`` with ``w`` ascending along the last axis and
    ``v[b][:, i]`` the eigenvector of ``w[b, i]`` under the phase
    convention of :func:`fix_phases`.
    """
    a = _check_input(m, tol)
    w, v = _jacobi_sweeps(a.copy(), True)
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, fix_phases(v)


def eigvalsh_batch(m: np.ndarray, *, tol: float = 1e-10) -> np.ndarray:
    """Ascending eigenvalues of a ``(B, k, k)`` Hermitian stack."""
    a = _check_input(m, tol)
    w, _ = _jacobi_sweeps(a.copy(), False)
    return np.sort(w, axis=1)


def eig_hermitian(m: np.ndarray, *, tol: float = 1e-10) -> Spectrum:
    """Diagonalize one Hermitian matrix.

    Raises
    ------
    HermitianError
        If ``max |M - M^H|`` exceeds ``tol``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    w, v = eigh_batch(m[None], tol=tol)
    w, v = w[0], v[0]
    residual = float(np.max(np.abs(m @ v - v * w[None, :]))) if w.size else 0.0
    return Spectrum(eigenvalues=w, eigenvectors=v, residual=residual)
