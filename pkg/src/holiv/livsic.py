"""Approximate non-Abelian Livsic solver.

Given a reference cocycle ``c0`` and an observed cocycle ``c`` over the same
hyperbolic map whose Wilson loops nearly agree, build a unitary section
x -> p(x) : E(x) -> E0(x) with small transport defect

    p(Mx) - A0(x) p(x) A(x)*.

Pipeline: choose a dense homoclinic orbit, recover p(0) by near-conjugacy of
the two Parry representations, propagate p(0) along the orbit's trunk by
unstable and stable holonomies, extend chart by chart with a McShane-type
formula, blend with a partition of unity, and project onto the unitary group.

Chart bridges move fibers along the dynamical leaves: from x along its
unstable line to the bracket point z, then along the stable line of z to the
chart center. For a true conjugacy these bridges commute with p, so the
pipeline is exact when c is a gauge transform of c0.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import matalg
from .cocycle import (
    CocycleField,
    HomCocycle,
    depth_for,
    fixed_point_holonomies,
    holonomy_batch,
    parry_approx,
    parry_depth,
    wilson_discrepancy,
)
from .dynamics import (
    DEFAULT_DELTA,
    GoodOrbit,
    HomoclinicOrbit,
    enumerate_periodic_orbits,
    fundamental_domains,
    good_orbit,
    homoclinic_points,
    mod1,
    torus_distance,
    wrap,
)
from .errors import (
    CoverGap,
    EmptyChart,
    HolivError,
    InsufficientPowers,
    NearSingularNode,
    NotIrreducible,
    RankMismatch,
    StageError,
)
from .freemonoid import CharTable, FreeWord
from .repstab import UnitaryRep, check_irreducible, near_conjugacy, select_spanning_words

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LivsicConfig:
    alpha: float = 0.5
    grid: int = 24
    charts: int = 8
    tol: float = 1e-10
    eps_floor: float = 1e-4
    eps_ceiling: float = 0.05
    period_max: int = 8
    n_generators: int = 3
    generator_pool: int = 2
    delta: float = DEFAULT_DELTA
    span_max_len: int = 4


# ---------------------------------------------------------------- characters


@dataclass
class HarvestedTable:
    table: CharTable
    errors: dict
    images: dict


def harvest_characters(c: CocycleField, words, generators: dict[str, HomoclinicOrbit], depth: int) -> HarvestedTable:
    """Characters of the truncated Parry representation on ``words``, with certified errors.

    Each generator is approximated at depths (m, n) = (depth, depth). A product
    of unitaries moves by at most the sum of the factor errors, and a trace by
    r times that.
    """
    imgs, errs = {}, {}
    needed = set()
    for w in words:
        needed |= w.generators()
    for gid in sorted(needed):
        imgs[gid], errs[gid] = parry_approx(c, generators[gid], depth, depth)
    rep = UnitaryRep(imgs, check=False) if imgs else None
    table = CharTable(dim=c.rank)
    werr = {}
    for w in words:
        table[w] = rep.character(w) if w.factors else complex(c.rank)
        werr[w] = c.rank * sum(k * errs[g] for g, k in w.factors)
    return HarvestedTable(table, werr, imgs)


def check_rank_agreement(t0, t, r0: int, r_max: int, word: FreeWord | None = None, eta: float = 0.25) -> bool:
    """Pigeonhole rank test on the powers of one word present in both tables.

    At an exponent j where the reference image of w^j is within ``eta`` of the
    identity (real character >= r0 - eta), the largest real character of the
    second table over such j estimates its rank.
    """
    if word is None:
        bases = {}
        for w in t0:
            if len(w.factors) == 1:
                g, k = w.factors[0]
                bases.setdefault(g, set()).add(k)
        if not bases:
            raise InsufficientPowers("no single-generator powers in the tables")
        g = max(sorted(bases), key=lambda g: len(bases[g]))
        word = FreeWord.gen(g)
    powers = []
    j = 1
    while word.power(j) in t0 and word.power(j) in t:
        powers.append(j)
        j += 1
    near = [j for j in powers if t0[word.power(j)].real >= r0 - eta]
    if not near:
        raise InsufficientPowers(f"no power of {word} up to {len(powers)} is near the identity")
    r_hat = max(t[word.power(j)].real for j in near)
    if r_hat > r_max + eta:
        return False
    return abs(r_hat - r0) < 0.5


# ---------------------------------------------------------------- leaf bridges


def leaf_bridge(c0: CocycleField, c: CocycleField, xs, targets, tol: float):
    """Holonomy pairs (G0, G) carrying fibers at x to fibers at the target.

    The path runs along the unstable line of x to the bracket point, then
    along the stable line to the target. A section value H at x maps to
    G0 H G* at the target.
    """
    hmap = c0.hmap
    xs = np.atleast_2d(xs)
    targets = np.broadcast_to(np.atleast_2d(targets), xs.shape)
    a, b = hmap.coords(wrap(targets - xs)).T
    z = mod1(xs + a[:, None] * hmap.v_u)
    lam = hmap.lam
    K = max(c0.error_constant, c.error_constant)
    n_u = depth_for(K, float(np.max(np.abs(a), initial=0.0)) / (1 - 1 / lam), lam, tol)
    n_s = depth_for(K, float(np.max(np.abs(b), initial=0.0)) / (1 - 1 / lam), lam, tol)
    hu0 = holonomy_batch(c0, xs, a, n_u, "u")
    hu = holonomy_batch(c, xs, a, n_u, "u")
    hs0 = holonomy_batch(c0, z, b, n_s, "s")
    hs = holonomy_batch(c, z, b, n_s, "s")
    return hs0 @ hu0, hs @ hu


def _apply(g0, g, H):
    return g0 @ H @ matalg.dagger(g)


def _apply_inverse(g0, g, H):
    return matalg.dagger(g0) @ H @ g


# ---------------------------------------------------------------- trunk


@dataclass
class TrunkSection:
    points: np.ndarray
    p_minus: np.ndarray
    p_plus: np.ndarray
    certified_error: float

    @property
    def mismatch(self) -> float:
        return float(np.max(np.linalg.norm(self.p_minus - self.p_plus, ord=2, axis=(1, 2))))


def trunk_sections(c0: CocycleField, c: CocycleField, P_star: np.ndarray, good: GoodOrbit | HomoclinicOrbit, tol: float) -> TrunkSection:
    """Propagate P_star from 0 to the trunk by unstable (p_-) and by stable (p_+) holonomies."""
    h = good.orbit if isinstance(good, GoodOrbit) else good
    depth = max(parry_depth(c0, h, tol), parry_depth(c, h, tol))
    U0, S0, eu0, es0 = fixed_point_holonomies(c0, h, depth, depth)
    U, S, eu, es = fixed_point_holonomies(c, h, depth, depth)
    p_minus = U0 @ P_star @ matalg.dagger(U)
    p_plus = matalg.dagger(S0) @ P_star @ S
    return TrunkSection(h.trunk.copy(), p_minus, p_plus, eu0 + es0 + eu + es)


# ---------------------------------------------------------------- charts


@dataclass(frozen=True)
class ChartCover:
    """Periodic n x n grid of charts with cos^2 bump weights summing to one."""

    n: int = 8

    @property
    def width(self) -> float:
        return 1.0 / self.n

    @property
    def centers(self) -> np.ndarray:
        g = np.arange(self.n) / self.n
        return np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)

    @property
    def overlap(self) -> int:
        return 4

    def _bump(self, t):
        u = np.abs(t) / self.width
        return np.where(u < 1.0, np.cos(0.5 * math.pi * u) ** 2, 0.0)

    def weights(self, pts) -> np.ndarray:
        """(N, n*n) matrix of chart weights at the given points."""
        d = wrap(np.atleast_2d(pts)[:, None, :] - self.centers[None, :, :])
        return self._bump(d[..., 0]) * self._bump(d[..., 1])

    def in_support(self, pts, j: int) -> np.ndarray:
        d = wrap(np.atleast_2d(pts) - self.centers[j])
        return np.max(np.abs(d), axis=1) < self.width


@dataclass
class ChartData:
    center: np.ndarray
    points: np.ndarray
    values: np.ndarray  # section values bridged to the center, (k, r, r)
    seminorm_re: np.ndarray
    seminorm_im: np.ndarray
    alpha: float
    borrowed: bool = False

    def extend(self, xs) -> np.ndarray:
        """McShane-type extension min_y (a(y) + 2 s d(x, y)^alpha), real and imaginary parts apart."""
        d = torus_distance(np.atleast_2d(xs)[:, None, :], self.points[None, :, :]) ** self.alpha  # (N, k)
        re = np.min(self.values.real[None] + 2 * self.seminorm_re[None, None] * d[..., None, None], axis=1)
        im = np.min(self.values.imag[None] + 2 * self.seminorm_im[None, None] * d[..., None, None], axis=1)
        return re + 1j * im


def _seminorms(points, values, alpha):
    r = values.shape[-1]
    if len(points) < 2:
        return np.zeros((r, r)), np.zeros((r, r))
    d = torus_distance(points[:, None, :], points[None, :, :]) ** alpha
    np.fill_diagonal(d, np.inf)
    dre = np.abs(values.real[:, None] - values.real[None, :]) / d[..., None, None]
    dim = np.abs(values.imag[:, None] - values.imag[None, :]) / d[..., None, None]
    return dre.max(axis=(0, 1)), dim.max(axis=(0, 1))


def holder_extend(c0: CocycleField, c: CocycleField, trunk: TrunkSection, cover: ChartCover, alpha: float, tol: float, *, strict: bool = False) -> list[ChartData]:
    """Per-chart frame coefficients bridged to the chart centers.

    Charts that meet no trunk point borrow the trunk point nearest to their
    center (EmptyChart is raised instead when ``strict``).
    """
    out = []
    for j, center in enumerate(cover.centers):
        mask = cover.in_support(trunk.points, j)
        borrowed = False
        if not mask.any():
            if strict:
                raise EmptyChart(f"chart {j} at {center.tolist()} meets no trunk point")
            mask = np.zeros(len(trunk.points), dtype=bool)
            mask[int(np.argmin(torus_distance(trunk.points, center)))] = True
            borrowed = True
        pts = trunk.points[mask]
        g0, g = leaf_bridge(c0, c, pts, center, tol)
        vals = _apply(g0, g, trunk.p_minus[mask])
        sre, sim = _seminorms(pts, vals, alpha)
        out.append(ChartData(center, pts, vals, sre, sim, alpha, borrowed))
    return out


@dataclass
class ExtendedSection:
    """Blended section p~ as a callable, with its values on a regular grid."""

    c0: CocycleField
    c: CocycleField
    cover: ChartCover
    charts: list
    tol: float
    grid: int
    values: np.ndarray = field(default=None, repr=False)

    @property
    def grid_points(self) -> np.ndarray:
        g = np.arange(self.grid) / self.grid
        return np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)

    def __call__(self, xs) -> np.ndarray:
        xs = np.atleast_2d(xs)
        w = self.cover.weights(xs)
        total = w.sum(axis=1)
        if np.any(np.abs(total - 1.0) > 1e-10):
            raise CoverGap(f"partition of unity sums to {total.min():.3e}..{total.max():.3e}")
        r = self.c0.rank
        out = np.zeros((len(xs), r, r), dtype=complex)
        for j, ch in enumerate(self.charts):
            idx = np.nonzero(w[:, j] > 0)[0]
            if idx.size == 0:
                continue
            F = ch.extend(xs[idx])
            g0, g = leaf_bridge(self.c0, self.c, xs[idx], ch.center, self.tol)
            out[idx] += w[idx, j, None, None] * _apply_inverse(g0, g, F)
        return out


def blend(c0: CocycleField, c: CocycleField, charts: list[ChartData], cover: ChartCover, grid: int, tol: float) -> ExtendedSection:
    ext = ExtendedSection(c0, c, cover, charts, tol, grid)
    ext.values = ext(ext.grid_points)
    return ext


def unitarize_section(values: np.ndarray, min_singular: float = 0.1) -> tuple[np.ndarray, float]:
    """Nodewise unitary polar factor, with the largest distance of the radial part to I."""
    u, s, vh = np.linalg.svd(values)
    if np.min(s) <= min_singular:
        raise NearSingularNode(f"smallest singular value {np.min(s):.3e} <= {min_singular}")
    radial = float(np.max(np.abs(s - 1.0)))
    return u @ vh, radial


def holder_seminorm(values: np.ndarray, points: np.ndarray, alpha: float, radius: float = 0.25) -> float:
    """max ||v(x) - v(y)|| / d(x, y)^alpha over sampled pairs with 0 < d <= radius."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    values = np.asarray(values)
    flat = values.reshape(len(values), -1)
    best = 0.0
    for i in range(len(points)):
        d = torus_distance(points[i + 1 :], points[i])
        sel = (d > 0) & (d <= radius)
        if not sel.any():
            continue
        diff = values[i + 1 :][sel] - values[i]
        if values.ndim == 3:
            num = np.linalg.norm(diff, ord=2, axis=(1, 2))
        else:
            num = np.abs(diff.reshape(diff.shape[0], -1)).max(axis=1) if flat.shape[1] > 1 else np.abs(diff).ravel()
        best = max(best, float(np.max(num / d[sel] ** alpha)))
    return best


def procrustes_distance(p: np.ndarray, truth: np.ndarray, anchor: int) -> float:
    """Sup distance after aligning p to ``truth`` by one global unitary fitted at node ``anchor``."""
    W = matalg.polar_unitary(truth[anchor] @ matalg.dagger(p[anchor]))
    return float(np.max(np.linalg.norm(W @ p - truth, ord=2, axis=(1, 2))))


# ---------------------------------------------------------------- report


@dataclass
class LivsicReport:
    grid: int
    rank: int
    p: np.ndarray = field(repr=False)
    sup_defect: float
    defect_holder: float
    epsilon: float
    alpha: float
    trunk_mismatch: float
    blend_defect: float
    radial_distance: float
    tau_hat: float | None = None
    diagnostics: dict = field(default_factory=dict)
    section: object = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {
            "grid": self.grid,
            "rank": self.rank,
            "sup_defect": self.sup_defect,
            "defect_holder": self.defect_holder,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "trunk_mismatch": self.trunk_mismatch,
            "blend_defect": self.blend_defect,
            "radial_distance": self.radial_distance,
            "tau_hat": self.tau_hat,
        }
        rec.update(self.diagnostics)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def grid_bytes(self) -> bytes:
        """Row-major nodes, r^2 complex entries each, as little-endian float64 (re, im) pairs."""
        flat = np.ascontiguousarray(self.p.reshape(-1, self.rank * self.rank))
        return np.stack([flat.real, flat.imag], axis=-1).astype("<f8").tobytes()


def read_grid(data: bytes, grid: int, rank: int) -> np.ndarray:
    a = np.frombuffer(data, dtype="<f8").reshape(grid * grid, rank * rank, 2)
    return (a[..., 0] + 1j * a[..., 1]).reshape(grid * grid, rank, rank)


def defect(hom: HomCocycle, p, pts) -> np.ndarray:
    """p(Mx) - A0(x) p(x) A(x)* for the hom cocycle H -> A0 H A*."""
    return hom.defect(p, pts)


# ---------------------------------------------------------------- solver


def _stage(name):
    def wrap_stage(fn):
        def run(*a, **k):
            try:
                return fn(*a, **k)
            except StageError:
                raise
            except HolivError as e:
                raise StageError(name, e) from e

        return run

    return wrap_stage


def select_generators(c0: CocycleField, budget: int, cfg: LivsicConfig) -> dict[str, HomoclinicOrbit]:
    domains = fundamental_domains(c0.hmap, cfg.delta)
    pool = [h for h in homoclinic_points(c0.hmap, domains, cfg.generator_pool) if h.T <= budget]
    return {h.gen_id: h for h in pool[: cfg.n_generators]}


def livsic_solve(c0: CocycleField, c: CocycleField, eps_budget: float | None = None, config: LivsicConfig | None = None, stages: dict | None = None) -> LivsicReport:
    """Full pipeline; ``stages``, when a dict, collects intermediate artifacts."""
    cfg = config or LivsicConfig()
    stages = {} if stages is None else stages
    if c0.rank != c.rank:
        raise StageError("precheck", RankMismatch(f"ranks {c0.rank} and {c.rank}"))
    hmap = c0.hmap
    hom = HomCocycle(c, c0)

    eps = _stage("wilson")(lambda: wilson_discrepancy(c0, c, enumerate_periodic_orbits(hmap, cfg.period_max)))()
    if eps_budget is not None and eps > eps_budget:
        raise StageError("wilson", HolivError(f"Wilson discrepancy {eps:.3e} exceeds budget {eps_budget:.3e}"))
    eps_orbit = min(max(eps, cfg.eps_floor), cfg.eps_ceiling)
    budget = int(math.floor(eps_orbit**-0.5))

    domains = fundamental_domains(hmap, cfg.delta)
    good = _stage("good_orbit")(good_orbit)(hmap, domains, eps_orbit)
    stages["good_orbit"] = good

    gens = _stage("harvest")(select_generators)(c0, budget, cfg)
    depth = max(max(parry_depth(c0, h, cfg.tol), parry_depth(c, h, cfg.tol)) for h in gens.values())
    words = [FreeWord.gen(g) for g in gens]
    h0 = _stage("harvest")(harvest_characters)(c0, words, gens, depth)
    h1 = _stage("harvest")(harvest_characters)(c, words, gens, depth)
    rep0 = UnitaryRep(h0.images, check=False)
    rep = UnitaryRep(h1.images, check=False)
    basis = _stage("near_conjugacy")(select_spanning_words)(rep0, cfg.span_max_len)
    if not check_irreducible(rep0, basis):
        raise StageError("near_conjugacy", NotIrreducible("reference Parry representation is reducible"))
    conj = _stage("near_conjugacy")(near_conjugacy)(rep0, rep, basis=basis)
    stages["near_conjugacy"] = conj

    trunk = _stage("trunk")(trunk_sections)(c0, c, conj.P, good, cfg.tol)
    stages["trunk"] = trunk
    cover = ChartCover(cfg.charts)
    charts = _stage("extend")(holder_extend)(c0, c, trunk, cover, cfg.alpha, cfg.tol)
    stages["charts"] = charts
    ext = _stage("blend")(blend)(c0, c, charts, cover, cfg.grid, cfg.tol)
    stages["blend"] = ext
    pts = ext.grid_points
    blend_def = hom.defect(ext, pts)
    p_grid, radial = _stage("unitarize")(unitarize_section)(ext.values)

    def p_fn(xs):
        return unitarize_section(ext(xs))[0]

    img_vals = p_fn(hmap(pts))
    d = img_vals - c0.values(pts) @ p_grid @ matalg.dagger(c.values(pts))
    dn = np.linalg.norm(d, ord=2, axis=(1, 2))
    report = LivsicReport(
        grid=cfg.grid,
        rank=c0.rank,
        p=p_grid,
        sup_defect=float(dn.max()),
        defect_holder=holder_seminorm(d, pts, cfg.alpha),
        epsilon=float(eps),
        alpha=cfg.alpha,
        trunk_mismatch=trunk.mismatch,
        blend_defect=float(np.max(np.linalg.norm(blend_def, ord=2, axis=(1, 2)))),
        radial_distance=radial,
        diagnostics={
            "orbit": good.orbit.gen_id,
            "trunk_length": good.orbit.T,
            "density_radius": good.density_radius,
            "generators": sorted(gens),
            "harvest_depth": depth,
            "conjugacy_residual": conj.residual,
            "character_epsilon": conj.epsilon,
            "borrowed_charts": sum(ch.borrowed for ch in charts),
            "trunk_certified_error": trunk.certified_error,
        },
        section=p_fn,
    )
    log.info("livsic eps=%.3e defect=%.3e", eps, report.sup_defect)
    return report


@dataclass
class SweepRow:
    sigma: float
    epsilon: float
    defect: float
    trunk_mismatch: float


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log y against log x (positive entries only)."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = (xs > 0) & (ys > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def livsic_sweep(c0: CocycleField, perturb, sigmas, config: LivsicConfig | None = None) -> tuple[list[SweepRow], float]:
    """Solve for each perturbation ``perturb(sigma)``; fit defect ~ eps^tau."""
    rows = []
    for s in sigmas:
        rep = livsic_solve(c0, perturb(s), None, config)
        rows.append(SweepRow(float(s), rep.epsilon, rep.sup_defect, rep.trunk_mismatch))
    tau = fit_exponent([r.epsilon for r in rows], [r.defect for r in rows])
    return rows, tau
