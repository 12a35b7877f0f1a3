"""Ten end-to-end acceptance criteria, each reporting one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from holiv import cli, cocycle, dynamics, livsic, matalg, repstab, surface


def test_character_exactness(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        dim = 2 + i % 2
        rep0 = repstab.random_rep(rng, dim)
        rep = rep0.conjugated(matalg.random_unitary(rng, dim))
        worst = max(worst, repstab.near_conjugacy(rep0, rep).residual)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 5
    report(1, ok, f"max residual {worst:.2e} over 50 conjugate pairs in {elapsed:.1f}s")
    assert ok


def test_representation_linear_stability(report):
    deltas = [1e-2, 1e-3, 1e-4, 1e-5]
    t0 = time.perf_counter()
    eps, res, medians = [], [], []
    for delta in deltas:
        level = []
        for seed in range(20):
            rng = np.random.default_rng([2, seed])
            rep0 = repstab.random_rep(rng, 2)
            rep = repstab.perturb_rep(rep0, delta, rng).conjugated(matalg.random_unitary(rng, 2))
            r = repstab.near_conjugacy(rep0, rep)
            eps.append(r.epsilon)
            res.append(r.residual)
            level.append(r.residual)
        medians.append(float(np.median(level)))
    slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    elapsed = time.perf_counter() - t0
    monotone = all(a > b for a, b in zip(medians, medians[1:]))
    ok = 0.8 <= slope <= 1.2 and monotone and elapsed < 30
    report(2, ok, f"slope {slope:.3f}, medians {['%.1e' % m for m in medians]}, {elapsed:.1f}s")
    assert ok


def _lattice_count(M: np.ndarray, n: int) -> int:
    """Brute force: grid points k/D (D = |det(M^n - I)|) fixed by M^n."""
    P = np.linalg.matrix_power(M.astype(object), n)
    D = abs(int((P[0, 0] - 1) * (P[1, 1] - 1) - P[0, 1] * P[1, 0]))
    k = np.arange(D, dtype=np.int64)
    a, b = np.meshgrid(k, k, indexing="ij")
    Pi = np.array(P, dtype=np.int64) % D
    img_a = (Pi[0, 0] * a + Pi[0, 1] * b) % D
    img_b = (Pi[1, 0] * a + Pi[1, 1] * b) % D
    return int(np.sum((img_a == a) & (img_b == b)))


def test_periodic_orbit_counts(report, cat):
    t0 = time.perf_counter()
    orbits = dynamics.enumerate_periodic_orbits(cat, 10)
    M = cat.int_matrix
    bad = []
    for n in range(1, 11):
        fixed = sum(o.period for o in orbits if n % o.period == 0)
        trace = int(np.trace(np.linalg.matrix_power(M.astype(object), n)))
        if fixed != trace - 2:
            bad.append(n)
        if n <= 6 and _lattice_count(M, n) != trace - 2:
            bad.append(f"lattice {n}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    report(3, ok, f"{len(orbits)} primitive orbits, mismatches {bad}, {elapsed:.1f}s")
    assert ok


def test_holonomy_convergence(report, cat):
    rng = np.random.default_rng(4)
    c = cocycle.random_trig_cocycle(rng, cat, 2)
    lam = cat.lam
    depths = list(range(4, 25))
    t0 = time.perf_counter()
    xs = rng.uniform(0, 1, (20, 2))
    s = rng.uniform(0.05, 0.2, 20) * rng.choice([-1, 1], 20)
    ref = cocycle.holonomy_batch(c, xs, s, 60, "s")
    trunc = cocycle.holonomy_batch(c, xs, s, depths[-1], "s", depths=depths)
    errs = np.array([np.linalg.norm(t - ref, ord=2, axis=(1, 2)) for t in trunc])  # (depth, pair)
    bounds = np.array([[cocycle.holonomy_bound(c, abs(si), n) for si in s] for n in depths])
    violated = int(np.sum(errs > bounds))
    rates = np.exp(np.polyfit(np.array(depths, dtype=float), np.log(errs), 1)[0])
    step = np.max(errs[1:] / errs[:-1])
    elapsed = time.perf_counter() - t0
    worst = float(rates.max() * lam)
    ok = worst <= 1.2 and violated == 0 and elapsed < 20
    report(
        4,
        ok,
        f"fitted ratio <= {worst:.3f}/lambda (largest single step {step * lam:.2f}/lambda), "
        f"{violated} bound violations, {elapsed:.1f}s",
    )
    assert ok


def _gauge_pair(rank: int, seed: int, cat):
    rng = np.random.default_rng(seed)
    c0 = cocycle.random_trig_cocycle(rng, cat, rank)
    q = cocycle.random_gauge(rng, rank)
    return c0, cocycle.gauge(c0, q), q


@pytest.mark.slow
def test_livsic_exactness(report, cat):
    t0 = time.perf_counter()
    orbits = dynamics.enumerate_periodic_orbits(cat, 12)
    lines, ok = [], True
    for rank, seed in ((1, 51), (2, 52)):
        c0, c, q = _gauge_pair(rank, seed, cat)
        wd = cocycle.wilson_discrepancy(c0, c, orbits)
        stages = {}
        rep = livsic.livsic_solve(c0, c, stages=stages)
        pts = stages["blend"].grid_points
        truth = matalg.dagger(q.values(pts))
        err = livsic.procrustes_distance(rep.p, truth, 0)
        ok &= wd < 1e-10 and rep.sup_defect < 1e-5 and err < 1e-3
        lines.append(f"rank {rank}: wilson {wd:.1e}, defect {rep.sup_defect:.1e}, p error {err:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    report(5, ok, "; ".join(lines) + f"; {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_livsic_stability_trend(report, cat):
    rng = np.random.default_rng(6)
    c0 = cocycle.random_trig_cocycle(rng, cat, 2)
    sigmas = [1e-1, 1e-2, 1e-3, 1e-4]
    t0 = time.perf_counter()
    rows, tau = livsic.livsic_sweep(c0, lambda s: c0.times_phase(s, (1, 0)), sigmas)
    elapsed = time.perf_counter() - t0
    defects = [r.defect for r in rows]
    monotone = all(a >= b for a, b in zip(defects, defects[1:]))
    ok = monotone and tau > 0.3 and elapsed < 600
    report(6, ok, f"defects {['%.2e' % d for d in defects]}, tau {tau:.2f}, {elapsed:.0f}s")
    assert ok


def test_abelian_wilson_inversion(report):
    t0 = time.perf_counter()
    model = surface.FuchsianModel.regular()
    classes = surface.enumerate_geodesics(model, 8.0, 5)
    basis = surface.select_homology_basis(classes)
    V = np.array([surface.homology_vector(g.word) for g in basis])
    rng = np.random.default_rng(7)
    worst, winding_bad = 0.0, 0
    for _ in range(100):
        theta = rng.uniform(0, 2 * math.pi, 4)
        conn = surface.abelian_connection(theta)
        data = {g.word: conn(g.word)[0, 0] for g in classes}
        rec = surface.abelian_recover(data, classes, basis)
        worst = max(worst, surface.angle_error(rec.theta, theta))
        # V theta = phi + 2 pi k with phi in (-pi, pi] taken from the traces
        phi = np.angle([data[g.word] for g in basis])
        expected = np.rint((V @ np.mod(theta, 2 * math.pi) - phi) / (2 * math.pi)).astype(int)
        winding_bad += int(list(expected) != rec.windings)

    levels = [1e-6, 1e-5, 1e-4, 1e-3]
    eps_med, err_med = [], []
    for level in levels:
        eps, err = [], []
        for _ in range(20):
            theta = rng.uniform(0, 2 * math.pi, 4)
            conn = surface.abelian_connection(theta)
            data = {g.word: conn(g.word)[0, 0] * np.exp(1j * level * rng.uniform(-1, 1)) for g in classes}
            eps.append(max(abs(data[g.word] - conn(g.word)[0, 0]) / g.length for g in classes))
            err.append(surface.angle_error(surface.abelian_recover(data, classes, basis).theta, theta))
        eps_med.append(np.median(eps))
        err_med.append(np.median(err))
    slope = float(np.polyfit(np.log(eps_med), np.log(err_med), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and winding_bad == 0 and 0.8 <= slope <= 1.2 and elapsed < 60
    report(7, ok, f"exact error {worst:.1e}, winding mismatches {winding_bad}, perturbed slope {slope:.3f}, {elapsed:.1f}s")
    assert ok


def test_good_orbit_certificates(report, cat):
    t0 = time.perf_counter()
    domains = dynamics.fundamental_domains(cat)
    found = [dynamics.good_orbit(cat, domains, eps) for eps in (0.05, 0.02, 0.01)]
    elapsed = time.perf_counter() - t0
    fits = all(g.orbit.T <= math.floor(g.eps**-0.5 + 1e-12) for g in found)
    radii = [g.density_radius for g in found]
    decreasing = all(a > b for a, b in zip(radii, radii[1:]))
    separated = all(g.separation_radius > 0 for g in found)
    ok = fits and decreasing and separated and elapsed < 60
    detail = ", ".join(f"eps {g.eps}: T {g.orbit.T} radius {g.density_radius:.3f} sep {g.separation_radius:.1e}" for g in found)
    report(8, ok, f"{detail}, {elapsed:.1f}s")
    assert ok


def test_gauge_class_function_invariants(report, cat):
    rng = np.random.default_rng(9)
    t0 = time.perf_counter()
    orbits = [o for o in dynamics.enumerate_periodic_orbits(cat, 9) if o.period >= 2]
    fields = [cocycle.random_trig_cocycle(rng, cat, r) for r in (1, 2, 3)]
    gauged = [cocycle.gauge(c, cocycle.random_gauge(rng, c.rank)) for c in fields]
    grp = surface.SurfaceGroup(2)
    letters = [x for g in grp.generators for x in (g, -g)]
    worst = {"basepoint": 0.0, "rotation": 0.0, "gauge": 0.0}
    for i in range(1000):
        kind = ("basepoint", "rotation", "gauge")[i % 3]
        if kind == "basepoint":
            c = fields[i % 3]
            o = orbits[rng.integers(len(orbits))]
            a = cocycle.wilson(c, o).trace
            b = cocycle.wilson(c, o, base=int(rng.integers(1, o.period))).trace
        elif kind == "rotation":
            conn = surface.random_flat_connection(rng, int(rng.integers(1, 4)))
            w = tuple(int(x) for x in rng.choice(letters, int(rng.integers(2, 12))))
            k = int(rng.integers(1, len(w)))
            a = np.trace(conn(w))
            b = np.trace(conn(w[k:] + w[:k]))
        else:
            j = i % 3
            o = orbits[rng.integers(len(orbits))]
            if i % 2:
                a, b = cocycle.wilson(fields[j], o).trace, cocycle.wilson(gauged[j], o).trace
            else:
                conn = surface.random_flat_connection(rng, j + 1)
                w = tuple(int(x) for x in rng.choice(letters, 8))
                u = matalg.random_unitary(rng, j + 1)
                a, b = np.trace(conn(w)), np.trace(conn.conjugated(u)(w))
        worst[kind] = max(worst[kind], abs(a - b))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-10 and elapsed < 30
    report(9, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" over 1000 cases, {elapsed:.1f}s")
    assert ok


RUNS = [
    ("orbits", "period_max = 5\n"),
    ("wilson", "period_max = 6\nrank = 2\n"),
    ("repstab-sweep", "trials = 4\nsweep = 1e-2 1e-3\n"),
    ("surface-sweep", "rank = 2\ngeodesic_length = 6.0\nmax_word_length = 4\nsweep = 0 1e-3 1e-2\n"),
    ("livsic", "rank = 1\nmode = gauge\ngrid = 8\nperiod_max = 5\n"),
]


def _snapshot(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "timing.json"
    }


@pytest.mark.slow
def test_cli_reproducibility(report, tmp_path):
    mismatched, statuses = [], []
    for sub, conf in RUNS:
        cfg_path = tmp_path / f"{sub}.cfg"
        cfg_path.write_text(conf)
        snaps = []
        for rep in range(2):
            out = tmp_path / f"{sub}-{rep}"
            extra = ["--threads", "2"] if sub == "repstab-sweep" else []
            extra += ["--dump-stages"] if sub == "livsic" else []
            statuses.append(cli.main([sub, "--config", str(cfg_path), "--seed", "11", "--out", str(out), *extra]))
            snaps.append(_snapshot(out))
        if snaps[0] != snaps[1] or not snaps[0]:
            mismatched.append(sub)
        manifest = json.loads(snaps[0]["manifest.json"])
        assert manifest["config"]["seed"] == 11
    # the worker count must not leak into the tables
    single = tmp_path / "repstab-single"
    statuses.append(cli.main(["repstab-sweep", "--config", str(tmp_path / "repstab-sweep.cfg"), "--seed", "11", "--out", str(single)]))
    threaded = _snapshot(tmp_path / "repstab-sweep-0")
    for name, data in _snapshot(single).items():
        if name != "manifest.json" and threaded[name] != data:
            mismatched.append(f"repstab threads:{name}")
    ok = not mismatched and not any(statuses)
    report(10, ok, f"{len(RUNS)} subcommands run twice, differing outputs: {mismatched or 'none'}")
    assert ok
