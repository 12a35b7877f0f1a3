"""Wilson-loop inverse problems for flat connections on a closed genus-g surface.

The surface group has generators a1, b1, ..., ag, bg and the single relator
[a1, b1] ... [ag, bg]. A hyperbolic structure comes from the regular 4g-gon
with interior angle 2 pi / 4g; its side pairings give real 2 x 2 matrices of
determinant one, and closed geodesics correspond to conjugacy classes with
length 2 arccosh(|tr| / 2).

A flat U(r) connection is a representation of the surface group; its Wilson
loop on a class is the trace of the image of any representative word.

Words are tuples of nonzero integers: generator a_i is 2i - 1, b_i is 2i, and
a negative integer is the inverse letter. They print as "a1b1A1B1" with
upper case for inverses.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.optimize import minimize

from . import matalg
from .cocycle import WilsonRecord
from .errors import DegenerateBasis, NotIrreducible, RankMismatch

Word = tuple[int, ...]

_LETTER = re.compile(r"([aAbB])(\d+)")


# ---------------------------------------------------------------- words


def letter_name(x: int) -> str:
    i = (abs(x) + 1) // 2
    base = "a" if abs(x) % 2 == 1 else "b"
    return (base if x > 0 else base.upper()) + str(i)


def format_word(w: Word) -> str:
    return "".join(letter_name(x) for x in w) or "1"


def parse_word(text: str) -> Word:
    text = text.strip()
    if text in ("", "1"):
        return ()
    out = []
    pos = 0
    for m in _LETTER.finditer(text):
        if m.start() != pos:
            raise ValueError(f"cannot parse {text!r}")
        pos = m.end()
        ch, i = m.group(1), int(m.group(2))
        x = 2 * i - 1 if ch.lower() == "a" else 2 * i
        out.append(x if ch.islower() else -x)
    if pos != len(text):
        raise ValueError(f"cannot parse {text!r}")
    return tuple(out)


def free_reduce(w) -> Word:
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(w) -> Word:
    w = list(free_reduce(w))
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def inverse(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def _key(w: Word) -> tuple:
    # a1 < A1 < b1 < B1 < a2 ...
    return tuple(2 * abs(x) + (x < 0) for x in w)


def min_rotation(w: Word) -> Word:
    if not w:
        return w
    return min((w[i:] + w[:i] for i in range(len(w))), key=_key)


def homology_vector(w, genus: int = 2) -> np.ndarray:
    """Signed exponent sums in the basis (a1, b1, ..., ag, bg)."""
    v = np.zeros(2 * genus, dtype=int)
    for x in w:
        v[abs(x) - 1] += 1 if x > 0 else -1
    return v


def is_proper_power(w: Word) -> bool:
    n = len(w)
    return any(n % k == 0 and w == w[:k] * (n // k) for k in range(1, n))


# ---------------------------------------------------------------- group


@dataclass(frozen=True)
class SurfaceGroup:
    genus: int = 2

    @property
    def generators(self) -> list[int]:
        return list(range(1, 2 * self.genus + 1))

    @property
    def relator(self) -> Word:
        out = []
        for i in range(1, self.genus + 1):
            a, b = 2 * i - 1, 2 * i
            out += [a, b, -a, -b]
        return tuple(out)

    @cached_property
    def _pieces(self) -> dict[Word, Word]:
        """Cyclic subwords s of the relator or its inverse, longer than half, mapped to their shorter equivalent."""
        n = len(self.relator)
        out = {}
        for r in (self.relator, inverse(self.relator)):
            for i in range(n):
                rot = r[i:] + r[:i]
                for k in range(n // 2 + 1, n + 1):
                    out[rot[:k]] = inverse(rot[k:])
        return out

    @cached_property
    def _halves(self) -> dict[Word, Word]:
        n = len(self.relator)
        out = {}
        for r in (self.relator, inverse(self.relator)):
            for i in range(n):
                rot = r[i:] + r[:i]
                out[rot[: n // 2]] = inverse(rot[n // 2 :])
        return out

    def dehn_reduce(self, w) -> Word:
        """Cyclic Dehn reduction: replace more than half of a relator by the complement."""
        w = cyclic_reduce(w)
        changed = True
        while changed and w:
            changed = False
            n = len(w)
            ext = w + w
            for i in range(n):
                for k in range(min(n, len(self.relator)), len(self.relator) // 2, -1):
                    piece = ext[i : i + k]
                    if piece in self._pieces:
                        rest = ext[i + k : i + n]
                        w = cyclic_reduce(self._pieces[piece] + rest)
                        changed = True
                        break
                if changed:
                    break
        return w

    def canonical(self, w) -> Word:
        """Minimal representative over rotations and half-relator swaps of a Dehn-reduced cyclic word."""
        w = self.dehn_reduce(w)
        seen = {min_rotation(w)}
        stack = [w]
        h = len(self.relator) // 2
        while stack:
            u = stack.pop()
            n = len(u)
            if n < h:
                continue
            ext = u + u
            for i in range(n):
                piece = ext[i : i + h]
                if piece in self._halves:
                    v = cyclic_reduce(self._halves[piece] + ext[i + h : i + n])
                    if len(v) == n:
                        key = min_rotation(v)
                        if key not in seen:
                            seen.add(key)
                            stack.append(v)
                    else:
                        v = self.dehn_reduce(v)
                        key = min_rotation(v)
                        if key not in seen:
                            seen.add(key)
                            stack.append(v)
        shortest = min(len(s) for s in seen)
        return min((s for s in seen if len(s) == shortest), key=_key)


# ---------------------------------------------------------------- Fuchsian model


_CAYLEY = np.array([[1, -1j], [1, 1j]])


def _rot(t):
    return np.array([[np.exp(0.5j * t), 0], [0, np.exp(-0.5j * t)]])


def _transl(t):
    return np.array([[np.cosh(t / 2), np.sinh(t / 2)], [np.sinh(t / 2), np.cosh(t / 2)]], dtype=complex)


def _side_pairing(n: int, j: int, k: int, d: float) -> np.ndarray:
    """Orientation-preserving isometry of the disk taking side j of the regular n-gon onto side k, inside to outside."""
    th = 2 * math.pi / n
    return _rot(k * th) @ _transl(2 * d) @ _rot(math.pi - j * th)


@dataclass
class FuchsianModel:
    group: SurfaceGroup
    images: dict[int, np.ndarray]

    @classmethod
    def regular(cls, genus: int = 2) -> "FuchsianModel":
        """Side pairings of the regular 4g-gon with all vertices identified.

        Block i uses sides 4i..4i+3: a_i maps side 4i+2 to 4i, b_i maps side
        4i+1 to 4i+3.
        """
        n = 4 * genus
        d = math.acosh(1.0 / math.tan(math.pi / n))
        kinv = np.linalg.inv(_CAYLEY)
        images = {}
        for i in range(genus):
            s = 4 * i
            for x, (j, k) in ((2 * i + 1, (s + 2, s)), (2 * i + 2, (s + 1, s + 3))):
                m = kinv @ _side_pairing(n, j % n, k % n, d) @ _CAYLEY
                images[x] = m.real.copy()
        model = cls(SurfaceGroup(genus), images)
        if model.relator_defect() > 1e-8:
            raise RuntimeError("side pairings do not satisfy the surface relator")
        return model

    def __call__(self, w) -> np.ndarray:
        out = np.eye(2)
        for x in w:
            m = self.images[abs(x)]
            out = out @ (m if x > 0 else np.linalg.inv(m))
        return out

    def relator_defect(self) -> float:
        R = self(self.group.relator)
        return float(min(np.abs(R - np.eye(2)).max(), np.abs(R + np.eye(2)).max()))

    def trace(self, w) -> float:
        return float(np.trace(self(w)))

    def length(self, w) -> float:
        t = abs(self.trace(w))
        if t <= 2.0:
            raise ValueError(f"{format_word(tuple(w))} is not hyperbolic (|tr| = {t})")
        return 2.0 * math.acosh(t / 2.0)


@dataclass(frozen=True)
class GeodesicClass:
    word: Word
    length: float

    @property
    def name(self) -> str:
        return format_word(self.word)


def enumerate_geodesics(model: FuchsianModel, L_max: float, max_word_length: int = 5) -> list[GeodesicClass]:
    """Primitive conjugacy classes with length <= L_max among words of at most ``max_word_length`` letters."""
    grp = model.group
    letters = [x for g in grp.generators for x in (g, -g)]
    seen: dict[Word, GeodesicClass] = {}
    for n in range(1, max_word_length + 1):
        for w in product(letters, repeat=n):
            if any(w[i] == -w[(i + 1) % n] for i in range(n)) and n > 1:
                continue
            c = grp.canonical(w)
            if not c or c in seen or is_proper_power(c):
                continue
            ell = model.length(c)
            if ell <= L_max:
                seen[c] = GeodesicClass(c, ell)
    return sorted(seen.values(), key=lambda g: (g.length, _key(g.word)))


# ---------------------------------------------------------------- flat connections


@dataclass
class FlatConnection:
    images: dict[int, np.ndarray]
    genus: int = 2

    @property
    def rank(self) -> int:
        return next(iter(self.images.values())).shape[0]

    def __call__(self, w) -> np.ndarray:
        out = np.eye(self.rank, dtype=complex)
        for x in w:
            m = self.images[abs(x)]
            out = out @ (m if x > 0 else matalg.dagger(m))
        return out

    def relator_defect(self) -> float:
        return matalg.operator_norm(self(SurfaceGroup(self.genus).relator) - np.eye(self.rank))

    def conjugated(self, p: np.ndarray) -> "FlatConnection":
        return FlatConnection({k: p @ v @ matalg.dagger(p) for k, v in self.images.items()}, self.genus)

    def to_json(self) -> str:
        rec = {
            "genus": self.genus,
            "images": {letter_name(k): {"re": v.real.tolist(), "im": v.imag.tolist()} for k, v in sorted(self.images.items())},
        }
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FlatConnection":
        rec = json.loads(text)
        imgs = {parse_word(k)[0]: np.array(v["re"]) + 1j * np.array(v["im"]) for k, v in rec["images"].items()}
        return cls(imgs, rec["genus"])


def abelian_connection(theta, genus: int = 2) -> FlatConnection:
    theta = np.asarray(theta, dtype=float)
    return FlatConnection({i + 1: np.array([[np.exp(1j * t)]]) for i, t in enumerate(theta)}, genus)


def random_flat_connection(rng: np.random.Generator, rank: int) -> FlatConnection:
    """Genus-2 connection (a, b, b, a): the relator becomes [a, b][b, a] = I exactly."""
    a = matalg.random_unitary(rng, rank)
    b = matalg.random_unitary(rng, rank)
    return FlatConnection({1: a, 2: b, 3: b.copy(), 4: a.copy()}, 2)


def _skew_basis(r: int) -> list[np.ndarray]:
    out = []
    for i in range(r):
        e = np.zeros((r, r), dtype=complex)
        e[i, i] = 1j
        out.append(e)
    for i in range(r):
        for j in range(i + 1, r):
            e = np.zeros((r, r), dtype=complex)
            e[i, j], e[j, i] = 1, -1
            out.append(e)
            e = np.zeros((r, r), dtype=complex)
            e[i, j], e[j, i] = 1j, 1j
            out.append(e)
    return out


def project_flat(conn: FlatConnection, steps: int = 20, fd: float = 1e-7) -> FlatConnection:
    """Gauss-Newton steps on the relator defect, moving generators by exp(X) on the left."""
    r = conn.rank
    basis = _skew_basis(r)
    keys = sorted(conn.images)
    rel = SurfaceGroup(conn.genus).relator
    cur = dict(conn.images)

    def resid(imgs):
        R = FlatConnection(imgs, conn.genus)(rel) - np.eye(r)
        return np.concatenate([R.real.ravel(), R.imag.ravel()])

    for _ in range(steps):
        f0 = resid(cur)
        if np.max(np.abs(f0)) < 1e-14:
            break
        cols = []
        for k in keys:
            for e in basis:
                trial = dict(cur)
                trial[k] = matalg.expm_skew(fd * e) @ cur[k]
                cols.append((resid(trial) - f0) / fd)
        J = np.stack(cols, axis=1)
        step = np.linalg.lstsq(J, -f0, rcond=1e-6)[0]
        i = 0
        for k in keys:
            X = sum(step[i + t] * e for t, e in enumerate(basis))
            cur[k] = matalg.expm_skew(X) @ cur[k]
            i += len(basis)
    return FlatConnection(cur, conn.genus)


def perturb_flat(conn: FlatConnection, delta: float, rng: np.random.Generator) -> FlatConnection:
    """Move every generator by exp(delta K) and return to the flat variety."""
    if conn.rank == 1:
        theta = np.array([np.angle(conn.images[k][0, 0]) for k in sorted(conn.images)])
        u = rng.standard_normal(len(theta))
        return abelian_connection(theta + delta * u / np.linalg.norm(u), conn.genus)
    imgs = {k: matalg.expm_skew(delta * matalg.random_skew(rng, conn.rank)) @ v for k, v in conn.images.items()}
    return project_flat(FlatConnection(imgs, conn.genus))


def wilson_flat(conn: FlatConnection, model: FuchsianModel, w) -> WilsonRecord:
    w = tuple(w)
    return WilsonRecord(format_word(w), model.length(w), complex(np.trace(conn(w))))


def wilson_discrepancy_flat(c1: FlatConnection, c2: FlatConnection, classes: list[GeodesicClass]) -> float:
    if c1.rank != c2.rank:
        raise RankMismatch(f"ranks {c1.rank} and {c2.rank}")
    return max(abs(np.trace(c1(g.word)) - np.trace(c2(g.word))) / g.length for g in classes)


def check_irreducible_flat(conn: FlatConnection, tol: float = 1e-8) -> bool:
    r = conn.rank
    eye = np.eye(r)
    rows = np.vstack([np.kron(b, eye) - np.kron(eye, b.T) for b in conn.images.values()])
    s = np.linalg.svd(rows, compute_uv=False)
    return r * r - int(np.sum(s > tol * max(1.0, s[0]))) == 1


# ---------------------------------------------------------------- abelian recovery


@dataclass
class AbelianRecovery:
    theta: np.ndarray
    windings: list[int]
    residual: float
    basis: list[str] = field(default_factory=list)


def select_homology_basis(classes: list[GeodesicClass], genus: int = 2) -> list[GeodesicClass]:
    """Shortest classes whose homology vectors form a unimodular basis; DegenerateBasis otherwise."""
    chosen, vecs = [], []
    for g in classes:
        v = homology_vector(g.word, genus)
        if np.linalg.matrix_rank(np.array(vecs + [v])) > len(vecs):
            chosen.append(g)
            vecs.append(v)
        if len(vecs) == 2 * genus:
            break
    if len(vecs) < 2 * genus or round(abs(np.linalg.det(np.array(vecs)))) != 1:
        raise DegenerateBasis(f"available classes span rank {len(vecs)} without a unimodular basis")
    return chosen


def abelian_recover(data: dict[Word, complex], classes: list[GeodesicClass], basis: list[GeodesicClass] | None = None, genus: int = 2) -> AbelianRecovery:
    """Angles of a flat U(1) connection from Wilson traces on classes.

    The basis traces fix theta mod 2 pi through V theta = phi + 2 pi k, with V
    the basis homology matrix; the held-out classes give the residual.
    """
    if basis is None:
        basis = select_homology_basis(classes, genus)
    V = np.array([homology_vector(g.word, genus) for g in basis])
    det = np.linalg.det(V)
    if abs(det) < 0.5 or round(abs(det)) != 1:
        raise DegenerateBasis(f"basis determinant {det:.3f} is not +-1")
    phi = np.array([np.angle(data[g.word]) for g in basis])
    Vinv = np.rint(np.linalg.inv(V)).astype(int)
    theta = np.mod(Vinv @ phi, 2 * math.pi)
    k = np.rint((V @ theta - phi) / (2 * math.pi)).astype(int)
    held = [g for g in classes if g not in basis and g.word in data]
    residual = 0.0
    for g in held:
        pred = np.exp(1j * homology_vector(g.word, genus) @ theta)
        residual = max(residual, abs(data[g.word] - pred) / g.length)
    return AbelianRecovery(theta, [int(x) for x in k], float(residual), [g.name for g in basis])


def angle_error(a, b) -> float:
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, 2 * math.pi) - math.pi
    return float(np.max(np.abs(d)))


# ---------------------------------------------------------------- moduli distance


@dataclass
class ModuliDistance:
    value: float
    converged: bool
    gauge: np.ndarray = field(repr=False)


def _gauge_objective(params, basis, c1, c2, keys):
    U = matalg.expm_skew(np.tensordot(params, basis, axes=1))
    Ud = matalg.dagger(U)
    return sum(float(np.sum(np.abs(c1.images[k] - U @ c2.images[k] @ Ud) ** 2)) for k in keys)


def moduli_distance(c1: FlatConnection, c2: FlatConnection, restarts: int = 6, rng: np.random.Generator | None = None) -> ModuliDistance:
    """Best max generator distance over simultaneous conjugations of c2 (an upper bound on the infimum).

    Each restart runs BFGS on the summed squared Frobenius distance in
    exponential coordinates around a random unitary.
    """
    if c1.rank != c2.rank:
        raise RankMismatch(f"ranks {c1.rank} and {c2.rank}")
    r = c1.rank
    keys = sorted(c1.images)

    def sup_dist(U):
        Ud = matalg.dagger(U)
        return max(matalg.operator_norm(c1.images[k] - U @ c2.images[k] @ Ud) for k in keys)

    if r == 1:
        return ModuliDistance(sup_dist(np.eye(1)), True, np.eye(1, dtype=complex))
    rng = rng if rng is not None else np.random.default_rng(0)
    basis = np.stack(_skew_basis(r))
    best = (sup_dist(np.eye(r)), True, np.eye(r, dtype=complex))
    for i in range(restarts):
        U0 = np.eye(r, dtype=complex) if i == 0 else matalg.random_unitary(rng, r)
        start = FlatConnection({k: U0 @ v @ matalg.dagger(U0) for k, v in c2.images.items()}, c2.genus)
        res = minimize(_gauge_objective, np.zeros(len(basis)), args=(basis, c1, start, keys), method="BFGS", options={"gtol": 1e-12})
        U = matalg.expm_skew(np.tensordot(res.x, basis, axes=1)) @ U0
        val = sup_dist(U)
        if val < best[0]:
            best = (val, bool(res.success), U)
    return ModuliDistance(*best)


# ---------------------------------------------------------------- stability sweep


@dataclass
class SweepRow:
    delta: float
    epsilon: float
    distance: float
    tau_local: float


def stability_sweep(conn0: FlatConnection, deltas, classes: list[GeodesicClass], rng: np.random.Generator) -> tuple[list[SweepRow], float]:
    """Wilson discrepancy and moduli distance along perturbations of growing size.

    The exponent is the least-squares slope of log distance on log epsilon
    over rows with 0 < epsilon < 0.1.
    """
    if not check_irreducible_flat(conn0):
        raise NotIrreducible("reference connection has a nontrivial commutant")
    rows: list[SweepRow] = []
    for d in deltas:
        conn = perturb_flat(conn0, d, rng) if d > 0 else conn0
        eps = wilson_discrepancy_flat(conn0, conn, classes)
        dist = moduli_distance(conn0, conn, rng=rng).value
        tau_local = float("nan")
        if rows and rows[-1].epsilon > 0 and eps > 0 and rows[-1].distance > 0 and dist > 0 and eps != rows[-1].epsilon:
            tau_local = math.log(dist / rows[-1].distance) / math.log(eps / rows[-1].epsilon)
        rows.append(SweepRow(float(d), float(eps), float(dist), tau_local))
    fit = [(r.epsilon, r.distance) for r in rows if 0 < r.epsilon < 0.1 and r.distance > 0]
    tau = float(np.polyfit(np.log([e for e, _ in fit]), np.log([d for _, d in fit]), 1)[0]) if len(fit) >= 2 else float("nan")
    return rows, tau


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "epsilon", "distance", "tau_local"])
    for r in rows:
        w.writerow([repr(r.delta), repr(r.epsilon), repr(r.distance), "" if math.isnan(r.tau_local) else repr(r.tau_local)])
    return buf.getvalue()
