"""Unitary cocycles over a hyperbolic toral automorphism.

A cocycle is a field x -> A(x) in U(r); its transport over n steps is
A(M^{n-1}x) ... A(Mx) A(x). Stable and unstable holonomies are computed as
truncated limits with a certified geometric error bound, and Parry
representations assign to each homoclinic orbit the composition of
unstable holonomy, transport along the trunk, and stable holonomy.

Error constants. With L a Lipschitz bound for A in operator norm and
bridges satisfying |B(x->y) - I| <= L d(x, y), one truncation step changes
a holonomy by at most K d_n, K = L (2 + 1/lam), where d_n = lam^-n d_0 is
the separation of the two orbits at depth n. Summing the tail gives the
certified error K d_0 lam^-n / (1 - 1/lam).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import matalg
from .dynamics import HomoclinicOrbit, HyperbolicMap, PeriodicOrbit, mod1, wrap
from .errors import EmptyOrbitList, NotOnStableLeaf, NotOnUnstableLeaf, RankMismatch, TolUnreachable
from .freemonoid import FreeWord

MIN_DEPTH = 4
MAX_DEPTH = 200
BRIDGE_NODES = 16
_FD_STEP = 1e-6


# ---------------------------------------------------------------- exact orbits


def orbit_points(hmap: HyperbolicMap, xs, n: int) -> np.ndarray:
    """Exact orbits of dyadic roundings of ``xs``: shape (|n|+1, N, 2).

    Negative ``n`` iterates the inverse map. Points are rounded to a common
    power-of-two denominator and iterated in int64 arithmetic.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    mat = hmap.int_matrix if n >= 0 else hmap.inverse.int_matrix
    rowsum = int(np.abs(mat).sum(axis=1).max())
    bits = 62 - max(1, math.ceil(math.log2(rowsum + 1)))
    scale = 1 << bits
    p = np.mod(np.rint(mod1(xs) * scale).astype(np.int64), scale)
    out = np.empty((abs(n) + 1,) + xs.shape)
    out[0] = p / scale
    mask = scale - 1
    for k in range(1, abs(n) + 1):
        p = (p @ mat.T) & mask
        out[k] = p / scale
    return out


# ---------------------------------------------------------------- fields


class CocycleField:
    """Base class: subclasses provide ``values`` and a Lipschitz bound."""

    hmap: HyperbolicMap
    rank: int
    lipschitz: float

    def values(self, pts) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.values(np.atleast_2d(x))[0]

    @property
    def holder(self) -> tuple[float, float]:
        return 1.0, self.lipschitz

    @property
    def error_constant(self) -> float:
        return self.lipschitz * (2.0 + 1.0 / self.hmap.lam) * (1.0 + 1e-6)

    def log_derivative(self, pts, v) -> np.ndarray:
        """A(x)* dA(x)[v], skew-Hermitian, by central differences."""
        pts = np.atleast_2d(pts)
        v = np.broadcast_to(np.asarray(v, dtype=float), pts.shape)
        ap = self.values(pts + _FD_STEP * v)
        am = self.values(pts - _FD_STEP * v)
        a0 = self.values(pts)
        d = matalg.dagger(a0) @ (ap - am) / (2 * _FD_STEP)
        return 0.5 * (d - matalg.dagger(d))

    def bridge(self, xs, ys) -> np.ndarray:
        """Straight-segment transport from x to y (batched), midpoint rule on 16 nodes.

        Integrates the connection form -A* dA along the shortest lift of the
        segment; the result is exp of a skew-Hermitian matrix.
        """
        xs = np.atleast_2d(xs)
        d = wrap(np.atleast_2d(ys) - xs)
        t = (np.arange(BRIDGE_NODES) + 0.5) / BRIDGE_NODES
        nodes = (xs[None, :, :] + t[:, None, None] * d[None, :, :]).reshape(-1, 2)
        om = self.log_derivative(nodes, np.tile(d, (BRIDGE_NODES, 1))).reshape(BRIDGE_NODES, len(xs), self.rank, self.rank)
        return matalg.expm_skew(-om.mean(axis=0))

    def curvature_estimate(self, grid: int = 64) -> float:
        """1.5 x max over a grid of |F_12| for the bridge connection, F = 2 [w_1, w_2]."""
        g = (np.arange(grid) + 0.5) / grid
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        w1 = self.log_derivative(pts, (1.0, 0.0))
        w2 = self.log_derivative(pts, (0.0, 1.0))
        f = 2 * (w1 @ w2 - w2 @ w1)
        return 1.5 * float(np.max(np.linalg.norm(f, ord=2, axis=(1, 2))))


def _skew(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m - matalg.dagger(m))


@dataclass(frozen=True)
class TrigTerm:
    k: tuple[int, int]
    B: np.ndarray = field(repr=False)
    phase: float = 0.0


class TrigCocycle(CocycleField):
    """A(x) = exp(sum_j B_j cos(2 pi k_j.x + phase_j)) with skew-Hermitian B_j."""

    def __init__(self, hmap: HyperbolicMap, rank: int, terms):
        self.hmap = hmap
        self.rank = int(rank)
        ts = []
        for t in terms:
            if not isinstance(t, TrigTerm):
                t = TrigTerm((int(t[0]), int(t[1])), np.asarray(t[2], dtype=complex), float(t[3]) if len(t) > 3 else 0.0)
            B = matalg.as_cmatrix(t.B, square=True)
            if B.shape[0] != self.rank:
                raise RankMismatch(f"term of size {B.shape[0]} in a rank-{self.rank} field")
            if np.max(np.abs(B + matalg.dagger(B))) > 1e-12:
                raise ValueError("term coefficient is not skew-Hermitian")
            ts.append(TrigTerm((int(t.k[0]), int(t.k[1])), _skew(B), float(t.phase)))
        self.terms = tuple(ts)
        self._K = np.array([t.k for t in ts], dtype=float).reshape(-1, 2)
        self._B = np.stack([t.B for t in ts]) if ts else np.zeros((0, rank, rank), dtype=complex)
        self._ph = np.array([t.phase for t in ts])
        self.lipschitz = float(sum(2 * math.pi * math.hypot(*t.k) * matalg.operator_norm(t.B) for t in ts))

    def log_values(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.cos(2 * math.pi * pts @ self._K.T + self._ph)  # (N, J)
        return np.tensordot(c, self._B, axes=1)

    def values(self, pts) -> np.ndarray:
        return matalg.expm_skew(self.log_values(pts))

    def log_derivative(self, pts, v) -> np.ndarray:
        # exact derivative of exp at S applied to dS, via the eigenbasis of S
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = np.broadcast_to(np.asarray(v, dtype=float), pts.shape)
        arg = 2 * math.pi * pts @ self._K.T + self._ph
        ds = np.tensordot(-2 * math.pi * np.sin(arg) * (v @ self._K.T), self._B, axes=1)
        s = np.tensordot(np.cos(arg), self._B, axes=1)
        w, V = np.linalg.eigh(1j * s)
        e = np.exp(-1j * w)
        dsv = matalg.dagger(V) @ ds @ V
        diff = e[..., :, None] - e[..., None, :]
        den = (-1j * w)[..., :, None] - (-1j * w)[..., None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(np.abs(den) > 1e-12, diff / np.where(np.abs(den) > 1e-12, den, 1.0), e[..., :, None])
        dexp = V @ (phi * dsv) @ matalg.dagger(V)
        a = (V * e[..., None, :]) @ matalg.dagger(V)
        out = matalg.dagger(a) @ dexp
        return 0.5 * (out - matalg.dagger(out))

    def to_record(self) -> dict:
        return {
            "rank": self.rank,
            "map": [list(r) for r in self.hmap.matrix],
            "terms": [
                {"k": list(t.k), "re": t.B.real.tolist(), "im": t.B.imag.tolist(), "phase": t.phase}
                for t in self.terms
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict, hmap: HyperbolicMap | None = None) -> "TrigCocycle":
        if hmap is None:
            hmap = HyperbolicMap(tuple(tuple(r) for r in rec["map"]))
        terms = [
            TrigTerm(tuple(t["k"]), np.array(t["re"]) + 1j * np.array(t["im"]), float(t.get("phase", 0.0)))
            for t in rec["terms"]
        ]
        return cls(hmap, rec["rank"], terms)

    @classmethod
    def from_json(cls, text: str, hmap: HyperbolicMap | None = None) -> "TrigCocycle":
        return cls.from_record(json.loads(text), hmap)

    def times_phase(self, sigma: float, k: tuple[int, int], phase: float = 0.0) -> "TrigCocycle":
        """A(x) exp(i sigma cos(2 pi k.x + phase)); the scalar factor commutes with A."""
        extra = TrigTerm(k, 1j * sigma * np.eye(self.rank), phase)
        return TrigCocycle(self.hmap, self.rank, list(self.terms) + [extra])


def constant_cocycle(hmap: HyperbolicMap, U: np.ndarray) -> TrigCocycle:
    """A(x) = U for a unitary U, stored as a single zero-frequency term."""
    w, V = np.linalg.eig(U)
    ang = np.angle(w)
    B = V @ np.diag(1j * ang) @ np.linalg.inv(V)
    return TrigCocycle(hmap, U.shape[0], [TrigTerm((0, 0), _skew(B), 0.0)])


def random_trig_cocycle(
    rng: np.random.Generator, hmap: HyperbolicMap, rank: int, n_terms: int = 4, kmax: int = 2, amplitude: float = 0.6
) -> TrigCocycle:
    terms = []
    for _ in range(n_terms):
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=2))
        terms.append(TrigTerm(k, amplitude * matalg.random_skew(rng, rank), float(rng.uniform(0, 2 * math.pi))))
    return TrigCocycle(hmap, rank, terms)


class TrigGauge:
    """Unitary field p(x) = exp(sum_j B_j cos(2 pi k_j.x + phase_j)) used as a gauge."""

    def __init__(self, rank: int, terms):
        self._field = TrigCocycle(HyperbolicMap.cat(), rank, terms)
        self.rank = rank
        self.lipschitz = self._field.lipschitz

    def values(self, pts) -> np.ndarray:
        return self._field.values(pts)

    def __call__(self, x) -> np.ndarray:
        return self._field(x)


def random_gauge(rng: np.random.Generator, rank: int, n_terms: int = 3, kmax: int = 2, amplitude: float = 0.5) -> TrigGauge:
    terms = []
    for _ in range(n_terms):
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=2))
        terms.append(TrigTerm(k, amplitude * matalg.random_skew(rng, rank), float(rng.uniform(0, 2 * math.pi))))
    return TrigGauge(rank, terms)


class GaugedCocycle(CocycleField):
    """A'(x) = p(Mx) A(x) p(x)*."""

    def __init__(self, base: CocycleField, gauge):
        if gauge.rank != base.rank:
            raise RankMismatch(f"gauge rank {gauge.rank} vs field rank {base.rank}")
        self.base = base
        self.gauge = gauge
        self.hmap = base.hmap
        self.rank = base.rank
        mnorm = float(np.linalg.norm(base.hmap.M, 2))
        self.lipschitz = base.lipschitz + gauge.lipschitz * (1.0 + mnorm)

    def values(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        p0 = self.gauge.values(pts)
        p1 = self.gauge.values(self.hmap(pts))
        return p1 @ self.base.values(pts) @ matalg.dagger(p0)


def gauge(c: CocycleField, p) -> GaugedCocycle:
    return GaugedCocycle(c, p)


# ---------------------------------------------------------------- transport


def _chain(mats: np.ndarray) -> np.ndarray:
    """Batched ordered product mats[n-1] ... mats[0], re-projected every 64 factors."""
    out = np.broadcast_to(np.eye(mats.shape[-1], dtype=complex), mats.shape[1:]).copy()
    for k in range(len(mats)):
        out = mats[k] @ out
        if (k + 1) % matalg.TOL.reproject_every == 0:
            out = matalg.polar_unitary_batch(out)
    return out


def transport_batch(c: CocycleField, xs, n: int) -> np.ndarray:
    xs = np.atleast_2d(xs)
    r = c.rank
    if n == 0:
        return np.broadcast_to(np.eye(r, dtype=complex), (len(xs), r, r)).copy()
    if n > 0:
        orb = orbit_points(c.hmap, xs, n)[:-1]
        vals = c.values(orb.reshape(-1, 2)).reshape(n, len(xs), r, r)
        return _chain(vals)
    orb = orbit_points(c.hmap, xs, n)[1:]  # x_{-1}, ..., x_{-|n|}
    vals = c.values(orb.reshape(-1, 2)).reshape(-n, len(xs), r, r)
    # T(x, -m) = A(x_{-m})* ... A(x_{-1})*
    return _chain(matalg.dagger(vals))


def transport(c: CocycleField, x, n: int) -> np.ndarray:
    return transport_batch(c, np.atleast_2d(x), int(n))[0]


def transport_along(c: CocycleField, pts: np.ndarray) -> np.ndarray:
    """Product A(p_{k-1}) ... A(p_0) over explicitly supplied orbit points."""
    return _chain(c.values(pts)[:, None])[0]


# ---------------------------------------------------------------- holonomies


@dataclass
class HolonomyResult:
    U: np.ndarray
    depth: int
    certified_error: float
    constants: dict = field(default_factory=dict)


def depth_for(K: float, C: float, lam: float, tol: float) -> int:
    """Smallest n in [4, 200] with K C lam^-n <= tol; TolUnreachable past 200."""
    if K * C <= tol or K * C == 0.0:
        return MIN_DEPTH
    n = math.ceil(math.log(K * C / tol) / math.log(lam))
    if n > MAX_DEPTH:
        raise TolUnreachable(f"tolerance {tol:.1e} needs depth {n} > {MAX_DEPTH}")
    return max(MIN_DEPTH, n)


def _leaf_coordinate(hmap: HyperbolicMap, x, y, which: str, tol: float = 1e-9) -> np.ndarray:
    d = wrap(np.atleast_2d(y) - np.atleast_2d(x))
    a, b = hmap.coords(d).T
    off, along = (a, b) if which == "s" else (b, a)
    if np.any(np.abs(off) > tol * np.maximum(1.0, np.abs(along))):
        err = NotOnStableLeaf if which == "s" else NotOnUnstableLeaf
        raise err(f"transverse offset {np.max(np.abs(off)):.2e}")
    return along


def holonomy_batch(c: CocycleField, xs, s, depth: int, which: str = "s", depths=None) -> np.ndarray | list:
    """Holonomy from x to x + s v (v = v_s or v_u) along the leaf, batched over x.

    With ``depths`` given, returns the truncations at each listed depth
    (all <= depth) instead of the single one at ``depth``.
    """
    hmap = c.hmap
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=float), (len(xs),))
    r = c.rank
    n = int(depth)
    if which == "s":
        orb = orbit_points(hmap, xs, n)
        scale = hmap.lam_s ** np.arange(n + 1)
        v = hmap.v_s
    else:
        orb = orbit_points(hmap, xs, -n)
        scale = (1.0 / hmap.lam_u) ** np.arange(n + 1)
        v = hmap.v_u
    yorb = mod1(orb + (scale[:, None] * s[None, :])[:, :, None] * v)
    if which == "s":
        ax = c.values(orb[:-1].reshape(-1, 2)).reshape(n, len(xs), r, r)
        ay = c.values(yorb[:-1].reshape(-1, 2)).reshape(n, len(xs), r, r)
    else:
        ax = matalg.dagger(c.values(orb[1:].reshape(-1, 2)).reshape(n, len(xs), r, r))
        ay = matalg.dagger(c.values(yorb[1:].reshape(-1, 2)).reshape(n, len(xs), r, r))
    want = sorted(set(depths)) if depths is not None else [n]
    eye = np.broadcast_to(np.eye(r, dtype=complex), (len(xs), r, r))
    tx, ty = eye.copy(), eye.copy()
    results = {}
    for k in range(n + 1):
        if k in want:
            B = c.bridge(orb[k], yorb[k])
            results[k] = matalg.dagger(ty) @ B @ tx
        if k < n:
            tx = ax[k] @ tx
            ty = ay[k] @ ty
            if (k + 1) % matalg.TOL.reproject_every == 0:
                tx = matalg.polar_unitary_batch(tx)
                ty = matalg.polar_unitary_batch(ty)
    if depths is None:
        return results[n]
    return [results[k] for k in depths]


def holonomy_bound(c: CocycleField, dist: float, depth: int) -> float:
    lam = c.hmap.lam
    return c.error_constant * dist * lam**-depth / (1.0 - 1.0 / lam)


def _holonomy(c: CocycleField, x, y, tol: float, which: str) -> HolonomyResult:
    s = _leaf_coordinate(c.hmap, x, y, which)
    lam = c.hmap.lam
    C = abs(float(s[0])) / (1.0 - 1.0 / lam)
    n = depth_for(c.error_constant, C, lam, tol)
    U = holonomy_batch(c, np.atleast_2d(x), s, n, which)[0]
    return HolonomyResult(U, n, holonomy_bound(c, abs(float(s[0])), n), {"K": c.error_constant, "C": C, "lam": lam})


def stable_holonomy(c: CocycleField, x, y, tol: float = 1e-10) -> HolonomyResult:
    """H^s_{x->y} for y on the stable line through x."""
    return _holonomy(c, x, y, tol, "s")


def unstable_holonomy(c: CocycleField, x, y, tol: float = 1e-10) -> HolonomyResult:
    """H^u_{x->y} for y on the unstable line through x."""
    return _holonomy(c, x, y, tol, "u")


# ---------------------------------------------------------------- Parry representation


def _cumulative(vals: np.ndarray) -> np.ndarray:
    """L[i] = vals[i-1] ... vals[0] for i = 0..len(vals), re-projected periodically."""
    r = vals.shape[-1]
    out = np.empty((len(vals) + 1, r, r), dtype=complex)
    out[0] = np.eye(r)
    for i, v in enumerate(vals):
        out[i + 1] = v @ out[i]
        if (i + 1) % matalg.TOL.reproject_every == 0:
            out[i + 1] = matalg.polar_unitary(out[i + 1])
    return out


def fixed_point_holonomies(c: CocycleField, h: HomoclinicOrbit, m: int, n: int, ks=None):
    """Truncated holonomies between the fixed point 0 and trunk points x_k = M^k x_u.

    Returns ``(U, S, err_u, err_s)`` where ``U[i]`` approximates H^u_{0 -> x_k}
    (built from depth m behind x_u) and ``S[i]`` approximates H^s_{x_k -> 0}
    (built from depth n past x_s), for k in ``ks`` (default 0..T).
    """
    T = h.T
    ks = np.arange(T + 1) if ks is None else np.asarray(ks, dtype=int)
    idx = np.arange(-m, T + n + 1)
    pts = h.point(idx)
    L = _cumulative(c.values(pts[:-1]))  # L[i]: transport from x_{-m} over i steps
    a0d = matalg.dagger(c(np.zeros(2)))
    zero = np.zeros((1, 2))
    b_in = c.bridge(zero, pts[:1])[0] @ np.linalg.matrix_power(a0d, m)
    end = len(idx) - 1
    bo = c.bridge(pts[-1:], zero)[0]
    U = L[m + ks] @ b_in
    # S_k = A0^{-(T+n-k)} B(x_{T+n} -> 0) L[end] L[m+k]^*
    S = np.stack([np.linalg.matrix_power(a0d, T + n - k) @ bo @ L[end] @ matalg.dagger(L[m + k]) for k in ks])
    lam = c.hmap.lam
    K = c.error_constant
    err_u = K * abs(h.a_u) * lam**-m / (1.0 - 1.0 / lam)
    err_s = K * abs(h.b_u) * lam ** -(T + n) / (1.0 - 1.0 / lam)
    return U, S, float(err_u), float(err_s)


def parry_approx(c: CocycleField, h: HomoclinicOrbit, m: int, n: int) -> tuple[np.ndarray, float]:
    """Finite approximant through the translates x_u(h; m) and x_s(h; n), with its error bound."""
    if m < 0 or n < 0:
        raise ValueError("depths must be nonnegative")
    U, S, eu, es = fixed_point_holonomies(c, h, m, n, ks=[0])
    # S[0] carries x_u straight back to 0; the central piece over the trunk
    # returns as T extra steps at the fixed point
    a0T = np.linalg.matrix_power(c(np.zeros(2)), h.T)
    return a0T @ S[0] @ U[0], eu + es


def parry_depth(c: CocycleField, h: HomoclinicOrbit, tol: float) -> int:
    lam = c.hmap.lam
    C = (abs(h.a_u) + abs(h.b_u) * lam**-h.T) / (1.0 - 1.0 / lam)
    return depth_for(c.error_constant, C, lam, tol)


def parry_eval(c: CocycleField, g, tol: float = 1e-10, generators: dict | None = None) -> np.ndarray:
    """Parry representation on a homoclinic orbit, or on a word over ``generators``."""
    if isinstance(g, HomoclinicOrbit):
        n = parry_depth(c, g, tol)
        return parry_approx(c, g, n, n)[0]
    if isinstance(g, FreeWord):
        if generators is None:
            raise ValueError("words need a generator table")
        out = np.eye(c.rank, dtype=complex)
        cache: dict[str, np.ndarray] = {}
        for gid, k in g.factors:
            if gid not in cache:
                cache[gid] = parry_eval(c, generators[gid], tol)
            out = out @ np.linalg.matrix_power(cache[gid], k)
        return out
    raise TypeError(f"cannot evaluate {type(g).__name__}")


def parry_rep(c: CocycleField, generators: dict, tol: float = 1e-10):
    from .repstab import UnitaryRep

    return UnitaryRep({gid: parry_eval(c, h, tol) for gid, h in generators.items()}, check=False)


# ---------------------------------------------------------------- Wilson loops


@dataclass(frozen=True)
class WilsonRecord:
    orbit_id: str
    length: float
    trace: complex


def wilson(c: CocycleField, orbit: PeriodicOrbit, base: int = 0) -> WilsonRecord:
    pts = np.roll(orbit.float_points, -base, axis=0)
    tr = complex(np.trace(transport_along(c, pts)))
    return WilsonRecord(orbit.orbit_id, orbit.period, tr)


def wilson_batch(c: CocycleField, orbits: list[PeriodicOrbit]) -> list[WilsonRecord]:
    """Wilson records for many orbits, grouped by period for vectorized evaluation."""
    out: dict[int, WilsonRecord] = {}
    by_period: dict[int, list[int]] = {}
    for i, o in enumerate(orbits):
        by_period.setdefault(o.period, []).append(i)
    for n, idx in by_period.items():
        pts = np.stack([orbits[i].float_points for i in idx], axis=1)  # (n, N, 2)
        vals = c.values(pts.reshape(-1, 2)).reshape(n, len(idx), c.rank, c.rank)
        tr = np.trace(_chain(vals), axis1=1, axis2=2)
        for j, i in enumerate(idx):
            out[i] = WilsonRecord(orbits[i].orbit_id, n, complex(tr[j]))
    return [out[i] for i in range(len(orbits))]


def wilson_to_csv(records: list[WilsonRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["orbit_id", "length", "re_trace", "im_trace"])
    for r in records:
        w.writerow([r.orbit_id, r.length, repr(r.trace.real), repr(r.trace.imag)])
    return buf.getvalue()


def wilson_discrepancy(c1: CocycleField, c2: CocycleField, orbits: list[PeriodicOrbit]) -> float:
    if not orbits:
        raise EmptyOrbitList("no orbits supplied")
    w1 = wilson_batch(c1, orbits)
    w2 = wilson_batch(c2, orbits)
    return max(abs(a.trace - b.trace) / a.length for a, b in zip(w1, w2))


# ---------------------------------------------------------------- Hom cocycle


class HomCocycle:
    """Action H -> A2(x) H A1(x)* on r x r matrices, for a pair of equal-rank fields."""

    def __init__(self, c1: CocycleField, c2: CocycleField):
        if c1.rank != c2.rank:
            raise RankMismatch(f"ranks {c1.rank} and {c2.rank}")
        self.c1, self.c2 = c1, c2
        self.hmap = c1.hmap
        self.rank = c1.rank

    def act(self, x, H) -> np.ndarray:
        return self.c2(x) @ H @ matalg.dagger(self.c1(x))

    def transport(self, x, n: int, H) -> np.ndarray:
        return transport(self.c2, x, n) @ H @ matalg.dagger(transport(self.c1, x, n))

    def defect(self, p, pts) -> np.ndarray:
        """p(Mx) - A2(x) p(x) A1(x)* for a section given as a callable on point arrays."""
        pts = np.atleast_2d(pts)
        return p(self.hmap(pts)) - self.c2.values(pts) @ p(pts) @ matalg.dagger(self.c1.values(pts))


def hom_cocycle(c1: CocycleField, c2: CocycleField) -> HomCocycle:
    return HomCocycle(c1, c2)
