"""Small dense complex-matrix kernel.

Everything here is backed by the LAPACK singular value decomposition that
ships with numpy. Matrices are plain ``numpy.ndarray`` objects of dtype
complex128; functions validate shape and finiteness and never mutate input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, SingularInput, ZeroMatrix


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance record shared by every module."""

    construction: float = 1e-10
    solve: float = 1e-9
    rank: float = 1e-8
    gram_condition: float = 1e12
    reproject_every: int = 64


TOL = Tolerances()


def as_cmatrix(m, *, square: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def unitarity_defect(u) -> float:
    u = as_cmatrix(u, square=True)
    return operator_norm(dagger(u) @ u - np.eye(u.shape[0]))


def operator_norm(m) -> float:
    a = as_cmatrix(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def polar_unitary(q, tol: float = 1e-12) -> np.ndarray:
    """Unitary factor Q (Q*Q)^(-1/2) of an invertible square matrix."""
    a = as_cmatrix(q, square=True)
    u, s, vh = np.linalg.svd(a)
    if s[-1] <= tol:
        raise SingularInput(f"smallest singular value {s[-1]:.3e} <= {tol:.1e}")
    return u @ vh


def polar_unitary_batch(q: np.ndarray) -> np.ndarray:
    """Nodewise unitary factor for a stack of square matrices (no checks)."""
    u, _, vh = np.linalg.svd(q)
    return u @ vh


def reproject(u: np.ndarray, tol: float = TOL.construction) -> np.ndarray:
    """Return ``u`` itself if it is unitary to ``tol``, else its polar factor."""
    if unitarity_defect(u) <= tol:
        return u
    return polar_unitary(u)


def top_singular_vector(m) -> tuple[np.ndarray, float]:
    """Unit vector z with ||Mz|| maximal, together with that maximum."""
    a = as_cmatrix(m)
    _, s, vh = np.linalg.svd(a)
    if s[0] == 0.0:
        raise ZeroMatrix("matrix is identically zero")
    return np.conj(vh[0]), float(s[0])


def frobenius_gram(basis) -> np.ndarray:
    flat = np.stack([as_cmatrix(b).ravel() for b in basis])
    return np.conj(flat) @ flat.T


def gram_solve(basis, target, *, max_condition: float = TOL.gram_condition) -> np.ndarray:
    """Least-squares coefficients of ``target`` in the Frobenius span of ``basis``.

    Solves the Hermitian Gram system G c = b with G_ij = <B_i, B_j> and
    b_i = <B_i, target>.
    """
    if len(basis) == 0:
        raise IllConditioned("empty basis")
    flat = np.stack([as_cmatrix(b).ravel() for b in basis])
    t = as_cmatrix(target).ravel()
    if t.shape[0] != flat.shape[1]:
        raise ValueError("target shape does not match basis")
    gram = np.conj(flat) @ flat.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond >= max_condition:
        raise IllConditioned(f"Gram condition number {cond:.3e}")
    return np.linalg.solve(gram, np.conj(flat) @ t)


def synthesize(coeffs, basis) -> np.ndarray:
    return np.tensordot(np.asarray(coeffs), np.stack([as_cmatrix(b) for b in basis]), axes=1)


def span_rank(mats, tol: float = TOL.rank) -> int:
    """Numerical rank of the Frobenius span, relative to the largest singular value."""
    if len(mats) == 0:
        return 0
    flat = np.stack([np.asarray(m, dtype=complex).ravel() for m in mats])
    s = np.linalg.svd(flat, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def unitary_product(factors) -> np.ndarray:
    """Ordered product F_{k-1} ... F_1 F_0 of unitary factors.

    The running product is re-projected onto the unitary group after every
    block of ``TOL.reproject_every`` multiplications.
    """
    out = None
    for i, f in enumerate(factors, start=1):
        out = f if out is None else f @ out
        if i % TOL.reproject_every == 0:
            out = polar_unitary(out)
    if out is None:
        raise ValueError("empty factor list")
    return out


def expm_skew(s: np.ndarray) -> np.ndarray:
    """exp(S) for a stack of skew-Hermitian matrices via the Hermitian eigensolver."""
    h = 1j * np.asarray(s, dtype=complex)
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)[..., None, :]) @ dagger(v)


def random_unitary(rng: np.random.Generator, r: int) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))) / np.sqrt(2)
    q, rr = np.linalg.qr(z)
    d = np.diagonal(rr)
    return q * (d / np.abs(d))


def random_skew(rng: np.random.Generator, r: int) -> np.ndarray:
    """Skew-Hermitian matrix with unit operator norm."""
    z = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    k = 0.5 * (z - dagger(z))
    return k / operator_norm(k)
