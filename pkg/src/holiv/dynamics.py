"""Hyperbolic toral automorphisms of the 2-torus.

The base system is x -> Mx mod 1 for an integer matrix M with determinant
+-1 and |trace| > 2. The fixed point 0 serves as the reference periodic
point (period 1). Points on the torus are float pairs in [0, 1) unless they
come from periodic-orbit enumeration, which is exact.

Homoclinic orbits to 0 are indexed by nonzero integer vectors m: the unique
pair (a, b) with a v_u - b v_s = m gives the point a v_u = b v_s (mod 1),
which lies on both the unstable and the stable line through 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import mpmath
import numpy as np

from .errors import BudgetExceeded, JumpTooLarge, NotHyperbolic, TooFar


def wrap(d):
    """Nearest-representative lift of a torus displacement, in [-1/2, 1/2)."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


def torus_distance(x, y) -> np.ndarray:
    return np.linalg.norm(wrap(np.asarray(x) - np.asarray(y)), axis=-1)


def mod1(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = x - np.floor(x)
    return np.where(out >= 1.0, 0.0, out)


@dataclass(frozen=True)
class HyperbolicMap:
    matrix: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        m = tuple(tuple(int(v) for v in row) for row in self.matrix)
        object.__setattr__(self, "matrix", m)
        if abs(self.det) != 1:
            raise NotHyperbolic(f"determinant {self.det} is not +-1")
        if abs(self.trace) <= 2:
            raise NotHyperbolic(f"|trace| = {abs(self.trace)} <= 2")

    @classmethod
    def cat(cls) -> "HyperbolicMap":
        return cls(((2, 1), (1, 1)))

    @classmethod
    def from_entries(cls, a, b, c, d) -> "HyperbolicMap":
        return cls(((a, b), (c, d)))

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    @property
    def trace(self) -> int:
        return self.matrix[0][0] + self.matrix[1][1]

    @cached_property
    def M(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @cached_property
    def int_matrix(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64)

    @cached_property
    def inverse(self) -> "HyperbolicMap":
        (a, b), (c, d) = self.matrix
        s = self.det
        return HyperbolicMap(((d * s, -b * s), (-c * s, a * s)))

    @cached_property
    def _eig(self):
        t, dt = self.trace, self.det
        disc = math.sqrt(t * t - 4 * dt)
        lam_u = (t + math.copysign(disc, t)) / 2
        lam_s = dt / lam_u
        (a, b), (c, d) = self.matrix

        def vec(mu):
            # (M - mu I) v = 0; pick the better-conditioned row
            if abs(b) + abs(a - mu) >= abs(c) + abs(d - mu):
                v = np.array([b, mu - a], dtype=float)
            else:
                v = np.array([mu - d, c], dtype=float)
            v /= np.linalg.norm(v)
            if v[0] < 0 or (v[0] == 0 and v[1] < 0):
                v = -v
            return v

        return lam_u, lam_s, vec(lam_u), vec(lam_s)

    @property
    def lam(self) -> float:
        return abs(self._eig[0])

    @property
    def lam_u(self) -> float:
        return self._eig[0]

    @property
    def lam_s(self) -> float:
        return self._eig[1]

    @property
    def v_u(self) -> np.ndarray:
        return self._eig[2]

    @property
    def v_s(self) -> np.ndarray:
        return self._eig[3]

    @cached_property
    def eigenbasis_inverse(self) -> np.ndarray:
        """Rows are the dual covectors: coords(x) = (a, b) with x = a v_u + b v_s."""
        return np.linalg.inv(np.column_stack([self.v_u, self.v_s]))

    def coords(self, d) -> np.ndarray:
        return np.asarray(d, dtype=float) @ self.eigenbasis_inverse.T

    def __call__(self, x) -> np.ndarray:
        return mod1(np.asarray(x, dtype=float) @ self.M.T)

    def iterate(self, x, n: int) -> np.ndarray:
        """Orbit x, Mx, ..., M^n x (n >= 0) or backwards for n < 0, shape (|n|+1, 2).

        The input is rounded to a dyadic rational and iterated exactly in
        integer arithmetic, so long orbits do not accumulate rounding error.
        """
        scale = 1 << 60
        p = [int(round(float(v) * scale)) % scale for v in np.asarray(x, dtype=float)]
        mat = self.matrix if n >= 0 else self.inverse.matrix
        out = [p]
        for _ in range(abs(n)):
            q = out[-1]
            out.append([(mat[0][0] * q[0] + mat[0][1] * q[1]) % scale, (mat[1][0] * q[0] + mat[1][1] * q[1]) % scale])
        return np.array(out, dtype=float) / scale

    def power_matrix(self, n: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """M^n as exact Python integers (n may be negative)."""
        return _int_power(self.matrix if n >= 0 else self.inverse.matrix, abs(int(n)))


@lru_cache(maxsize=4096)
def _int_power(base, n: int):
    if n == 0:
        return ((1, 0), (0, 1))
    p = _int_power(base, n - 1) if n < 64 or n % 32 else _int_power(base, n - 32)
    if n < 64 or n % 32:
        (a, b), (c, d) = base
    else:
        (a, b), (c, d) = _int_power(base, 32)
    (e, f), (g, h) = p
    return ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))


def stable_unstable_lines(hmap: HyperbolicMap) -> tuple[np.ndarray, np.ndarray, float]:
    return hmap.v_u, hmap.v_s, hmap.lam


# ---------------------------------------------------------------- periodic orbits


def smith_normal_form(a) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
    """Return (U, D, V) with U a V = D diagonal, U and V unimodular, d_i | d_{i+1}."""
    A = [[int(v) for v in row] for row in a]
    n, m = len(A), len(A[0])
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    V = [[int(i == j) for j in range(m)] for i in range(m)]

    def swap_rows(M, i, j):
        M[i], M[j] = M[j], M[i]

    def swap_cols(M, i, j):
        for row in M:
            row[i], row[j] = row[j], row[i]

    def add_row(M, src, dst, k):
        M[dst] = [x + k * y for x, y in zip(M[dst], M[src])]

    def add_col(M, src, dst, k):
        for row in M:
            row[dst] += k * row[src]

    for t in range(min(n, m)):
        while True:
            nz = [(abs(A[i][j]), i, j) for i in range(t, n) for j in range(t, m) if A[i][j] != 0]
            if not nz:
                return U, A, V
            _, pi, pj = min(nz)
            swap_rows(A, t, pi)
            swap_rows(U, t, pi)
            swap_cols(A, t, pj)
            swap_cols(V, t, pj)
            done = True
            for i in range(t + 1, n):
                q = A[i][t] // A[t][t]
                add_row(A, t, i, -q)
                add_row(U, t, i, -q)
                if A[i][t] != 0:
                    done = False
            for j in range(t + 1, m):
                q = A[t][j] // A[t][t]
                add_col(A, t, j, -q)
                add_col(V, t, j, -q)
                if A[t][j] != 0:
                    done = False
            if not done:
                continue
            bad = [(i, j) for i in range(t + 1, n) for j in range(t + 1, m) if A[i][j] % A[t][t] != 0]
            if bad:
                i, _ = bad[0]
                add_row(A, i, t, 1)
                add_row(U, i, t, 1)
                continue
            break
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            U[t] = [-x for x in U[t]]
    return U, A, V


@dataclass(frozen=True)
class PeriodicOrbit:
    """Orbit of exact rational points numerators/denom, listed from the smallest point."""

    period: int
    denom: int
    numerators: tuple[tuple[int, int], ...]
    primitive: bool = True

    @property
    def points(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(p, self.denom), Fraction(q, self.denom)) for p, q in self.numerators]

    @property
    def float_points(self) -> np.ndarray:
        return np.array(self.numerators, dtype=float) / self.denom

    @property
    def orbit_id(self) -> str:
        p, q = self.numerators[0]
        return f"p{self.period}:{p}/{self.denom}:{q}/{self.denom}"


def fixed_points_of_power(hmap: HyperbolicMap, n: int) -> tuple[int, np.ndarray]:
    """All x with M^n x = x (mod 1) as integer numerators over a common denominator."""
    P = hmap.power_matrix(n)
    N = [[P[0][0] - 1, P[0][1]], [P[1][0], P[1][1] - 1]]
    _, D, V = smith_normal_form(N)
    d1, d2 = D[0][0], D[1][1]
    # x = V y with y = (k1/d1, k2/d2); over the common denominator d2
    k1, k2 = np.meshgrid(np.arange(d1, dtype=np.int64), np.arange(d2, dtype=np.int64), indexing="ij")
    y1 = (k1 * (d2 // d1)).ravel()
    y2 = k2.ravel()
    Vi = np.array(V, dtype=np.int64)
    x1 = (Vi[0, 0] * y1 + Vi[0, 1] * y2) % d2
    x2 = (Vi[1, 0] * y1 + Vi[1, 1] * y2) % d2
    return d2, np.stack([x1, x2], axis=1)


def enumerate_periodic_orbits(hmap: HyperbolicMap, n_max: int) -> list[PeriodicOrbit]:
    """Every primitive periodic orbit of period <= n_max, each listed once."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    M = hmap.int_matrix
    out: list[PeriodicOrbit] = []
    for n in range(1, n_max + 1):
        d, pts = fixed_points_of_power(hmap, n)
        orbit = [pts]
        for _ in range(n - 1):
            orbit.append((orbit[-1] @ M.T) % d)
        stack = np.stack(orbit)  # (n, N, 2)
        keys = stack[..., 0] * d + stack[..., 1]
        returns = np.all(stack == stack[0][None], axis=2)
        returns[0] = False
        primitive = ~np.any(returns, axis=0)
        first = keys[0] == keys.min(axis=0)
        for idx in np.nonzero(primitive & first)[0]:
            nums = tuple((int(stack[k, idx, 0]), int(stack[k, idx, 1])) for k in range(n))
            out.append(PeriodicOrbit(n, int(d), nums, True))
    return out


def count_points_of_period_dividing(hmap: HyperbolicMap, n: int) -> int:
    P = hmap.power_matrix(n)
    return abs((P[0][0] - 1) * (P[1][1] - 1) - P[0][1] * P[1][0])


def orbits_to_csv(orbits: list[PeriodicOrbit]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["period", "points", "primitive"])
    for o in orbits:
        pts = ";".join(f"{p}/{o.denom}:{q}/{o.denom}" for p, q in o.numerators)
        w.writerow([o.period, pts, int(o.primitive)])
    return buf.getvalue()


# ---------------------------------------------------------------- local geometry


def bowen_bracket(hmap: HyperbolicMap, x, y, eps_box: float = 0.25) -> tuple[np.ndarray, float]:
    """Point z with z - x along v_u and z - y along v_s, on the local cover.

    Returns (z, 0.0): the discrete-time model has no flow direction, so the
    time shift is always zero.
    """
    d = wrap(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    if np.linalg.norm(d) >= eps_box:
        raise TooFar(f"distance {np.linalg.norm(d):.3f} >= bracket box {eps_box}")
    a, _ = hmap.coords(d)
    return mod1(np.asarray(x, dtype=float) + a * hmap.v_u), 0.0


@dataclass(frozen=True)
class FundamentalDomains:
    """D = {s : delta/lam < |s| <= delta} along each of W^s(0), W^u(0)."""

    delta: float
    lam: float

    @property
    def inner(self) -> float:
        return self.delta / self.lam

    def contains(self, s: float) -> bool:
        return self.inner < abs(s) <= self.delta

    def step_into(self, s: float) -> int:
        """Integer k with |s| lam^k in (delta/lam, delta]."""
        k = math.floor(math.log(self.delta / abs(s)) / math.log(self.lam))
        for kk in (k - 1, k, k + 1):
            if self.contains(abs(s) * self.lam**kk):
                return kk
        return k


DEFAULT_DELTA = 0.25


def fundamental_domains(hmap: HyperbolicMap, delta: float = DEFAULT_DELTA) -> FundamentalDomains:
    """Domains of half-width ``delta``, shrunk by whole map steps until T >= 1 is forced.

    Two local leaf pieces of half-width delta through 0 meet only at 0 when
    delta (|v_u| + |v_s|) sup-norm stays below 1, which rules out T <= 0.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    reach = np.abs(hmap.v_u).max() + np.abs(hmap.v_s).max()
    while delta * reach >= 1.0:
        delta /= hmap.lam
    return FundamentalDomains(delta, hmap.lam)


# ---------------------------------------------------------------- homoclinic orbits


@lru_cache(maxsize=256)
def _hp_eigen(matrix, dps: int):
    """Unit eigenvectors and the inverse eigenbasis of M at ``dps`` digits."""
    with mpmath.workdps(dps):
        (a, b), (c, d) = matrix
        t, dt = a + d, a * d - b * c
        lam_u = (t + mpmath.sign(t) * mpmath.sqrt(t * t - 4 * dt)) / 2
        lam_s = dt / lam_u

        def vec(mu):
            if abs(b) + abs(a - mu) >= abs(c) + abs(d - mu):
                v = [mpmath.mpf(b), mu - a]
            else:
                v = [mu - d, mpmath.mpf(c)]
            n = mpmath.sqrt(v[0] ** 2 + v[1] ** 2)
            v = [v[0] / n, v[1] / n]
            if v[0] < 0 or (v[0] == 0 and v[1] < 0):
                v = [-v[0], -v[1]]
            return v

        vu, vs = vec(lam_u), vec(lam_s)
        W = mpmath.matrix([[vu[0], vs[0]], [vu[1], vs[1]]]) ** -1
        return vu, vs, W


def _dps_for(m) -> int:
    return 25 + len(str(max(abs(m[0]), abs(m[1]), 1)))


def lattice_coords(hmap: HyperbolicMap, m) -> tuple[float, float]:
    """(a, b) with a v_u - b v_s = m, accurate to relative precision."""
    dps = _dps_for(m)
    _, _, W = _hp_eigen(hmap.matrix, dps)
    with mpmath.workdps(dps):
        a = W[0, 0] * m[0] + W[0, 1] * m[1]
        b = -(W[1, 0] * m[0] + W[1, 1] * m[1])
        return float(a), float(b)


def lattice_point(hmap: HyperbolicMap, m) -> np.ndarray:
    """Torus position a v_u = b v_s (mod 1) of the homoclinic point of ``m``."""
    dps = _dps_for(m)
    vu, vs, W = _hp_eigen(hmap.matrix, dps)
    with mpmath.workdps(dps):
        a = W[0, 0] * m[0] + W[0, 1] * m[1]
        b = -(W[1, 0] * m[0] + W[1, 1] * m[1])
        p = [a * vu[0], a * vu[1]] if abs(a) <= abs(b) else [b * vs[0], b * vs[1]]
        return mod1(np.array([float(x - mpmath.floor(x)) for x in p]))


def _mat_vec(P, v):
    return (P[0][0] * v[0] + P[0][1] * v[1], P[1][0] * v[0] + P[1][1] * v[1])


@dataclass(frozen=True)
class HomoclinicOrbit:
    """Homoclinic orbit to 0, indexed so that time 0 is the point x_u in D_u.

    ``m`` is the lattice vector of x_u; every orbit point M^k x_u is evaluated
    from the exact lattice vector M^k m, so long trunks stay accurate.
    """

    hmap: HyperbolicMap = field(repr=False, compare=False)
    domains: FundamentalDomains = field(repr=False, compare=False)
    m: tuple[int, int]
    T: int
    a_u: float = field(compare=False)
    b_u: float = field(compare=False)

    @property
    def gen_id(self) -> str:
        return f"h{self.m[0]}_{self.m[1]}"

    def lattice_at(self, k: int) -> tuple[int, int]:
        return _mat_vec(self.hmap.power_matrix(int(k)), self.m)

    def coords_at(self, k):
        k = np.asarray(k, dtype=float)
        return self.a_u * self.hmap.lam_u**k, self.b_u * self.hmap.lam_s**k

    def point(self, k) -> np.ndarray:
        """M^k x_u for an integer k or an array of integers."""
        if np.ndim(k) == 0:
            return lattice_point(self.hmap, self.lattice_at(int(k)))
        return np.array([lattice_point(self.hmap, self.lattice_at(int(j))) for j in np.asarray(k).ravel()])

    @property
    def x_u(self) -> np.ndarray:
        return self.point(0)

    @property
    def x_s(self) -> np.ndarray:
        return self.point(self.T)

    @cached_property
    def trunk(self) -> np.ndarray:
        return self.point(np.arange(self.T + 1))

    def x_u_translate(self, n: int) -> np.ndarray:
        return self.point(-n)

    def x_s_translate(self, n: int) -> np.ndarray:
        return self.point(self.T + n)

    def crossings(self, kmin: int = -60, kmax: int = 60) -> tuple[int, int]:
        """Number of orbit points in D_u (unstable coordinate) and in D_s (stable coordinate)."""
        ks = np.arange(kmin, self.T + kmax)
        a, b = self.coords_at(ks)
        d = self.domains
        cu = int(np.sum((np.abs(a) > d.inner) & (np.abs(a) <= d.delta)))
        cs = int(np.sum((np.abs(b) > d.inner) & (np.abs(b) <= d.delta)))
        return cu, cs


def homoclinic_from_lattice(hmap: HyperbolicMap, domains: FundamentalDomains, m) -> HomoclinicOrbit:
    """Normalize the homoclinic orbit of lattice vector ``m`` (at any time index)."""
    m = (int(m[0]), int(m[1]))
    if m == (0, 0):
        raise ValueError("the zero vector gives the fixed point, not a homoclinic orbit")
    for _ in range(3):
        a, b = lattice_coords(hmap, m)
        k = domains.step_into(a)
        if k == 0:
            break
        m = _mat_vec(hmap.power_matrix(k), m)
    T = -domains.step_into(b)
    if T < 1:
        raise ValueError(f"trunk length {T} < 1; fundamental domains too wide")
    return HomoclinicOrbit(hmap, domains, m, int(T), a, b)


def homoclinic_points(hmap: HyperbolicMap, domains: FundamentalDomains, complexity_bound: int) -> list[HomoclinicOrbit]:
    """Distinct homoclinic orbits from lattice vectors with max|m_i| <= complexity_bound."""
    seen: dict[tuple[int, int], HomoclinicOrbit] = {}
    B = int(complexity_bound)
    for i in range(-B, B + 1):
        for j in range(-B, B + 1):
            if (i, j) == (0, 0):
                continue
            h = homoclinic_from_lattice(hmap, domains, (i, j))
            seen.setdefault(h.m, h)
    return sorted(seen.values(), key=lambda h: (h.T, abs(h.m[0]) + abs(h.m[1]), h.m))

# ---------------------------------------------------------------- shadowing


def shadowing_constant(hmap: HyperbolicMap) -> float:
    return hmap.lam / (hmap.lam - 1.0) + 1.0


def shadow(hmap: HyperbolicMap, pseudo_orbit, jump_tolerance: float, *, periodic: bool = False) -> np.ndarray:
    """Exact orbit near a pseudo-orbit, by geometric-series corrections.

    Writing y_k = x_k + c_k, the correction solves c_{k+1} = M c_k - e_k with
    e_k the k-th jump. Its unstable part is summed backwards from the end and
    its stable part forwards from the start (cyclically when ``periodic``).
    """
    x = np.asarray(pseudo_orbit, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2 or len(x) == 0:
        raise ValueError("pseudo-orbit must have shape (N, 2)")
    if jump_tolerance >= 0.25:
        raise JumpTooLarge(f"jump tolerance {jump_tolerance} beyond the shadowing radius")
    nxt = np.roll(x, -1, axis=0) if periodic else x[1:]
    img = x @ hmap.M.T if periodic else x[:-1] @ hmap.M.T
    e = wrap(nxt - img)
    if len(e) and np.max(np.linalg.norm(e, axis=1)) > jump_tolerance:
        raise JumpTooLarge(f"max jump {np.max(np.linalg.norm(e, axis=1)):.3e} > {jump_tolerance:.3e}")
    if len(e) == 0:
        return mod1(x)
    eu, es = hmap.coords(e).T
    lu, ls = hmap.lam_u, hmap.lam_s
    N = len(x)
    cu = np.zeros(N)
    cs = np.zeros(N)
    if periodic:
        n = N
        ju = lu ** -(np.arange(n) + 1.0)
        js = ls ** np.arange(n, dtype=float)
        for k in range(n):
            cu[k] = np.dot(ju, np.roll(eu, -k)) / (1.0 - lu**-n)
            cs[k] = -np.dot(js, np.roll(es[::-1], k)) / (1.0 - ls**n)
    else:
        for k in range(N - 2, -1, -1):
            cu[k] = (cu[k + 1] + eu[k]) / lu
        for k in range(1, N):
            cs[k] = ls * cs[k - 1] - es[k - 1]
    corr = cu[:, None] * hmap.v_u + cs[:, None] * hmap.v_s
    return mod1(x + corr)


def lattice_of_shadow(hmap: HyperbolicMap, y: np.ndarray, a0: float, b_end: float) -> tuple[int, int]:
    """Lattice vector of a homoclinic orbit given as wrapped points y_0..y_{N-1}.

    y_0 = a0 v_u and y_{N-1} = b_end v_s modulo 1; the integer wraps of the
    lift accumulate exactly into the lattice vector at time N-1.
    """
    M = hmap.int_matrix
    Z = (0, 0)
    prev = a0 * hmap.v_u
    for k in range(1, len(y)):
        nk = np.rint(prev @ hmap.M.T - y[k]).astype(np.int64)
        Z = (int(M[0, 0]) * Z[0] + int(M[0, 1]) * Z[1] + int(nk[0]), int(M[1, 0]) * Z[0] + int(M[1, 1]) * Z[1] + int(nk[1]))
        prev = y[k]
    tail = np.rint(y[-1] - b_end * hmap.v_s).astype(np.int64)
    return (Z[0] + int(tail[0]), Z[1] + int(tail[1]))


# ---------------------------------------------------------------- good orbits


def density_radius(points: np.ndarray, resolution: int = 32) -> float:
    """Max over a regular evaluation lattice of the distance to the nearest point."""
    g = (np.arange(resolution) + 0.5) / resolution
    ev = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    d = torus_distance(ev[:, None, :], np.asarray(points)[None, :, :])
    return float(d.min(axis=1).max())


def separation_radius(points: np.ndarray) -> float:
    p = np.asarray(points)
    if len(p) < 2:
        return float("inf")
    d = torus_distance(p[:, None, :], p[None, :, :])
    d[np.diag_indices(len(p))] = np.inf
    return float(d.min())


def net_coverage(points: np.ndarray, k: int) -> float:
    cells = {(int(i), int(j)) for i, j in np.floor(mod1(points) * k).astype(int)}
    return len(cells) / (k * k)


@dataclass(frozen=True)
class GoodOrbit:
    orbit: HomoclinicOrbit
    density_radius: float
    separation_radius: float
    eps: float
    excursions: int

    @property
    def beta_d(self) -> float:
        return math.log(self.density_radius) / math.log(self.eps)

    @property
    def beta_s(self) -> float:
        return math.log(self.separation_radius) / math.log(self.eps)


def _excursion(h: HomoclinicOrbit, eta: float) -> np.ndarray:
    """Orbit piece from the last point within eta on W^u(0) to the first within eta on W^s(0)."""
    lam = h.hmap.lam
    s0 = math.floor(math.log(eta / abs(h.a_u)) / math.log(lam))
    e0 = math.ceil(math.log(abs(h.b_u) / eta) / math.log(lam))
    return h.point(np.arange(s0, e0 + 1))


@lru_cache(maxsize=16)
def _candidates(hmap: HyperbolicMap, domains: FundamentalDomains, pool_bound: int, scan_bound: int, eta: float, net: int, chain_cap: int):
    """(T, density radius, lattice vector, excursion count) for good-orbit candidates.

    Candidates are every single orbit found by a lattice scan plus the shadows
    of every prefix of a greedy excursion chain over the cells of a net x net
    lattice. Nothing here depends on the target eps, so the admissible set
    only grows as eps shrinks.
    """
    pool = homoclinic_points(hmap, domains, pool_bound)
    cands = [(T, rad, m, 1) for T, rad, m in _single_orbit_scan(hmap, domains, scan_bound)]

    excursions = [_excursion(h, eta) for h in pool]
    covered: set[tuple[int, int]] = set()
    chain: list[int] = []
    length = 0
    while len(covered) < net * net and length < chain_cap:
        best, best_gain = None, 0.0
        for i, ex in enumerate(excursions):
            cells = {(int(a), int(b)) for a, b in np.floor(ex * net).astype(int)} - covered
            gain = len(cells) / len(ex)
            if gain > best_gain:
                best, best_gain = i, gain
        if best is None:
            break
        chain.append(best)
        covered |= {(int(a), int(b)) for a, b in np.floor(excursions[best] * net).astype(int)}
        length += len(excursions[best])

    jump = (hmap.lam + 2.0) * eta
    for n in range(2, len(chain) + 1):
        pieces = [np.zeros((2, 2))] + [excursions[i] for i in chain[:n]] + [np.zeros((2, 2))]
        pseudo = np.concatenate(pieces)
        y = shadow(hmap, pseudo, jump)
        # recover the exact coordinates at both ends from the correction itself
        a0 = hmap.coords(wrap(y[0]))[0]
        b_end = hmap.coords(wrap(y[-1]))[1]
        m = lattice_of_shadow(hmap, y, a0, b_end)
        h = homoclinic_from_lattice(hmap, domains, m)
        cands.append((h.T, density_radius(h.trunk), h.m, n))
    cands.sort(key=lambda c: (c[0], c[1]))
    return tuple(cands)


def _single_orbit_scan(hmap: HyperbolicMap, domains: FundamentalDomains, bound: int):
    """(T, density radius, normalized m) for every orbit with a lattice vector in the box.

    Float arithmetic is adequate here because the box is small; the winning
    orbit is rebuilt exactly by the caller.
    """
    r = np.arange(-bound, bound + 1)
    m = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
    m = m[np.any(m != 0, axis=1)]
    ab = m @ hmap.eigenbasis_inverse.T
    a, b = ab[:, 0], -ab[:, 1]
    lam = hmap.lam
    k = np.floor(np.log(domains.delta / np.abs(a)) / np.log(lam)).astype(int)
    a_u = a * hmap.lam_u ** k.astype(float)
    b_u = b * hmap.lam_s ** k.astype(float)
    T = np.ceil(np.log(np.abs(b_u) / domains.delta) / np.log(lam) - 1e-12).astype(int)
    out = {}
    for i in np.argsort(np.abs(m).sum(axis=1), kind="stable"):
        if T[i] < 1:
            continue
        mu = _mat_vec(hmap.power_matrix(int(k[i])), (int(m[i, 0]), int(m[i, 1])))
        if mu in out:
            continue
        ks = np.arange(T[i] + 1, dtype=float)
        au = a_u[i] * hmap.lam_u**ks
        bs = b_u[i] * hmap.lam_s**ks
        use_u = np.abs(au) <= np.abs(bs)
        pts = mod1(np.where(use_u[:, None], au[:, None] * hmap.v_u, bs[:, None] * hmap.v_s))
        out[mu] = (int(T[i]), density_radius(pts), mu)
    return list(out.values())


def good_orbit(
    hmap: HyperbolicMap,
    domains: FundamentalDomains,
    eps: float,
    *,
    pool_bound: int = 4,
    scan_bound: int = 40,
    eta: float | None = None,
    net: int = 8,
    chain_cap: int = 400,
) -> GoodOrbit:
    """Densest homoclinic candidate whose trunk length fits the budget eps^(-1/2)."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    budget = math.floor(eps**-0.5 + 1e-12)
    if eta is None:
        eta = domains.inner / hmap.lam
    cands = _candidates(hmap, domains, pool_bound, scan_bound, float(eta), net, chain_cap)
    fits = [c for c in cands if c[0] <= budget]
    if not fits:
        raise BudgetExceeded(f"no homoclinic orbit with T <= {budget}")
    _, _, m, n = min(fits, key=lambda c: (c[1], c[0], c[2]))
    h = homoclinic_from_lattice(hmap, domains, m)
    return GoodOrbit(h, density_radius(h.trunk), separation_radius(h.trunk), eps, n)
