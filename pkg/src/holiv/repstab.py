"""Near-conjugacy of unitary representations from nearly equal characters.

Given a reference representation ``rep0`` (irreducible) and a second
representation ``rep`` of the same free monoid whose characters agree with
those of ``rep0`` to within ``eps`` on a finite word set, build a unitary
``P`` with ``rep0(g) ~ P rep(g) P*`` and measure the residual.

The construction goes through the linear map A on the span of the
``rep0`` images that sends ``rep0(g_i)`` to ``rep(g_i)`` for a spanning word
family ``g_i``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import matalg
from .errors import DegenerateZ, DimensionMismatch, MissingWord, NotIrreducible, SpanNotSaturated
from .freemonoid import CharTable, FreeWord, build_G0, build_G0_prime, concat, words_of_length

log = logging.getLogger(__name__)


class UnitaryRep:
    """Generator id -> unitary matrix, evaluated multiplicatively on words."""

    def __init__(self, images: Mapping[str, np.ndarray], *, check: bool = True):
        if not images:
            raise ValueError("representation needs at least one generator")
        self.images = {str(g): matalg.as_cmatrix(u, square=True) for g, u in images.items()}
        dims = {u.shape[0] for u in self.images.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"generator images have dimensions {sorted(dims)}")
        self.dim = dims.pop()
        if check:
            for g, u in self.images.items():
                d = matalg.unitarity_defect(u)
                if d > matalg.TOL.construction:
                    raise ValueError(f"image of {g} is not unitary (defect {d:.2e})")

    @property
    def generators(self) -> list[str]:
        return sorted(self.images)

    def __call__(self, w: FreeWord) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for g, k in w.factors:
            out = out @ np.linalg.matrix_power(self.images[g], k)
        return out

    def character(self, w: FreeWord) -> complex:
        return complex(np.trace(self(w)))

    def conjugated(self, u: np.ndarray) -> "UnitaryRep":
        ud = matalg.dagger(u)
        return UnitaryRep({g: u @ m @ ud for g, m in self.images.items()}, check=False)


def random_rep(rng: np.random.Generator, dim: int, gens: Iterable[str] = ("a", "b")) -> UnitaryRep:
    return UnitaryRep({g: matalg.random_unitary(rng, dim) for g in gens})


def perturb_rep(rep: UnitaryRep, delta: float, rng: np.random.Generator) -> UnitaryRep:
    """Left-multiply each generator image by exp(delta K) for a random unit skew K."""
    out = {}
    for g in rep.generators:
        k = matalg.random_skew(rng, rep.dim)
        out[g] = matalg.expm_skew(delta * k) @ rep.images[g]
    return UnitaryRep(out, check=False)


def char_table(rep: UnitaryRep, words: Iterable[FreeWord]) -> CharTable:
    return CharTable({w: rep.character(w) for w in words}, dim=rep.dim)


@dataclass
class SpanBasis:
    words: list[FreeWord]
    images: list[np.ndarray]
    gram: np.ndarray

    @property
    def n0(self) -> int:
        return len(self.words)


def _closed_under_generators(images: list[np.ndarray], gens: list[np.ndarray]) -> bool:
    n = len(images)
    for g in gens:
        for b in images:
            if matalg.span_rank(images + [g @ b]) > n:
                return False
    return True


def select_spanning_words(rep: UnitaryRep, max_len: int = 4) -> SpanBasis:
    """Greedy length-then-lex scan for words whose images span the image algebra.

    The scan stops after the first length level at which the current span is
    closed under left multiplication by every generator image; at that point
    no longer word can enlarge it.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    gens = rep.generators
    gen_images = [rep.images[g] for g in gens]
    words: list[FreeWord] = []
    images: list[np.ndarray] = []
    for length in range(1, max_len + 1):
        for w in words_of_length(gens, length):
            img = rep(w)
            if matalg.span_rank(images + [img]) > len(images):
                words.append(w)
                images.append(img)
        if _closed_under_generators(images, gen_images):
            return SpanBasis(words, images, matalg.frobenius_gram(images))
    raise SpanNotSaturated(f"span rank {len(images)} still growing at length {max_len}")


def char_matrix(rep: UnitaryRep, words: list[FreeWord]) -> np.ndarray:
    return np.array([[rep.character(concat(a, b)) for b in words] for a in words])


def coeffs(basis: SpanBasis, g: FreeWord, rep: UnitaryRep) -> np.ndarray:
    return matalg.gram_solve([rep(w) for w in basis.words], rep(g))


def make_A(basis0: SpanBasis, rep: UnitaryRep) -> Callable[[np.ndarray], np.ndarray]:
    """The linear map rep0(g_i) -> rep(g_i) extended to the span, as a closure."""
    targets = np.stack([rep(w) for w in basis0.words])
    flat = np.stack([b.ravel() for b in basis0.images])
    gram = np.conj(flat) @ flat.T
    cond = np.linalg.cond(gram)
    if cond >= matalg.TOL.gram_condition:
        raise matalg.IllConditioned(f"Gram condition number {cond:.3e}")
    gram_inv = np.linalg.inv(gram)
    proj = gram_inv @ np.conj(flat)

    def A(u: np.ndarray) -> np.ndarray:
        c = proj @ np.asarray(u, dtype=complex).ravel()
        return np.tensordot(c, targets, axes=1)

    return A


def apply_A(basis0: SpanBasis, rep: UnitaryRep, u: np.ndarray) -> np.ndarray:
    c = matalg.gram_solve(basis0.images, u)
    return np.tensordot(c, np.stack([rep(w) for w in basis0.words]), axes=1)


def check_irreducible(rep: UnitaryRep, basis: SpanBasis | None = None, tol: float = matalg.TOL.rank) -> bool:
    """True iff only scalars commute with every basis image (or generator image)."""
    mats = basis.images if basis is not None else [rep.images[g] for g in rep.generators]
    r = rep.dim
    eye = np.eye(r)
    # row-major vec: vec(BX) = (B kron I) x, vec(XB) = (I kron B^T) x
    rows = np.vstack([np.kron(b, eye) - np.kron(eye, b.T) for b in mats])
    s = np.linalg.svd(rows, compute_uv=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return r * r - rank == 1


def char_discrepancy(t0: Mapping[FreeWord, complex], t: Mapping[FreeWord, complex], words: Iterable[FreeWord]) -> float:
    worst = 0.0
    for w in words:
        if w not in t0 or w not in t:
            raise MissingWord(str(w))
        worst = max(worst, abs(t0[w] - t[w]))
    return worst


@dataclass
class ConjugacyReport:
    P: np.ndarray
    residual: float
    epsilon: float
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "residual": float(self.residual),
            "epsilon": float(self.epsilon),
            "dim": int(self.P.shape[0]),
            "P_re": [float(x) for x in self.P.real.ravel()],
            "P_im": [float(x) for x in self.P.imag.ravel()],
        }
        rec.update({k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.diagnostics.items()})
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def fix_phase(p: np.ndarray) -> np.ndarray:
    """Rotate by a global phase so that the trace is real and nonnegative."""
    t = np.trace(p)
    if abs(t) < 1e-12:
        return p
    return p * (np.conj(t) / abs(t))


def near_conjugacy(
    rep0: UnitaryRep,
    rep: UnitaryRep,
    words_for_eps: Iterable[FreeWord] = (),
    *,
    max_len: int = 4,
    basis: SpanBasis | None = None,
) -> ConjugacyReport:
    if rep0.dim != rep.dim:
        raise DimensionMismatch(f"dimensions {rep0.dim} and {rep.dim}")
    if basis is None:
        basis = select_spanning_words(rep0, max_len)
    if not check_irreducible(rep0, basis):
        raise NotIrreducible("reference representation has a nontrivial commutant")
    G0 = build_G0(basis.words)
    G0p = build_G0_prime(G0, basis.words)
    eps_words = set(G0) | set(words_for_eps)
    eps = char_discrepancy(char_table(rep0, eps_words), char_table(rep, eps_words), eps_words)

    r = rep0.dim
    A = make_A(basis, rep)
    e11 = np.zeros((r, r), dtype=complex)
    e11[0, 0] = 1.0
    a_omega = A(e11)
    z, sigma = matalg.top_singular_vector(a_omega)
    if sigma**2 <= 1.0 / (2 * r):
        raise DegenerateZ(f"|A(w w*) z|^2 = {sigma**2:.3e} <= 1/(2r)")
    q = np.empty((r, r), dtype=complex)
    for k in range(r):
        ek1 = np.zeros((r, r), dtype=complex)
        ek1[k, 0] = 1.0
        q[:, k] = A(ek1) @ z
    q *= abs(np.vdot(z, a_omega @ z)) ** -0.5
    P = fix_phase(matalg.dagger(matalg.polar_unitary(q)))

    residual = 0.0
    frob = 0.0
    Pd = matalg.dagger(P)
    for g in G0p:
        d = rep0(g) - P @ rep(g) @ Pd
        residual = max(residual, matalg.operator_norm(d))
        frob = max(frob, float(np.linalg.norm(d)))
    diagnostics = {
        "m0_condition": float(np.linalg.cond(char_matrix(rep0, basis.words))),
        "omega_index": 0,
        "a_omega_z_norm": sigma,
        "frobenius_residual": frob,
        "n0": basis.n0,
    }
    log.debug("near_conjugacy eps=%.3e residual=%.3e frob=%.3e", eps, residual, frob)
    return ConjugacyReport(P, residual, eps, diagnostics)
