import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holiv import matalg, surface
from holiv.errors import DegenerateBasis, RankMismatch
from holiv.surface import FlatConnection, FuchsianModel, SurfaceGroup, parse_word

GRP = SurfaceGroup(2)
SHORT = surface.enumerate_geodesics(FuchsianModel.regular(), 3.1)


@pytest.fixture(scope="module")
def model():
    return FuchsianModel.regular()


@pytest.fixture(scope="module")
def classes(model):
    return surface.enumerate_geodesics(model, 4.0)


# ---------------------------------------------------------------- words and group


def test_word_round_trip():
    for text in ("a1b1A1B1", "B2a2a2", "1"):
        assert surface.format_word(parse_word(text)) == text
    with pytest.raises(ValueError):
        parse_word("a1 c2")


def test_relator_spelling():
    assert surface.format_word(GRP.relator) == "a1b1A1B1a2b2A2B2"


def test_homology_vectors():
    assert not surface.homology_vector(parse_word("a1b1A1B1")).any()
    assert surface.homology_vector(parse_word("a1a1B2")).tolist() == [2, 0, 0, -1]
    assert not surface.homology_vector(GRP.relator).any()


def test_reductions():
    assert surface.free_reduce(parse_word("a1A1b1")) == parse_word("b1")
    assert surface.cyclic_reduce(parse_word("b2a1b1B2")) == parse_word("a1b1")
    assert surface.is_proper_power(parse_word("a1b1a1b1"))
    assert not surface.is_proper_power(parse_word("a1b1a1"))


words = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3, 4, -4]), min_size=1, max_size=7).map(tuple)


@given(words, st.integers(0, 6))
def test_canonical_is_rotation_invariant(w, k):
    k %= len(w)
    assert GRP.canonical(w) == GRP.canonical(w[k:] + w[:k])


@given(words)
def test_canonical_ignores_inserted_relator(w):
    assert GRP.canonical(w + GRP.relator) == GRP.canonical(w)


@given(words)
def test_canonical_preserves_homology(w):
    assert (surface.homology_vector(GRP.canonical(w)) == surface.homology_vector(w)).all()


# ---------------------------------------------------------------- hyperbolic model


def test_relator_is_identity(model):
    assert model.relator_defect() < 1e-12
    for g in GRP.generators:
        assert np.linalg.det(model((g,))) == pytest.approx(1.0, abs=1e-12)


def test_generators_pair_octagon_sides(model):
    # vertices of the regular octagon with angle pi/4, carried to the upper half-plane
    r = math.tanh(math.acosh((1 + math.sqrt(2)) ** 2) / 2)
    verts = [1j * (1 + z) / (1 - z) for z in r * np.exp(1j * (math.pi / 8 + np.arange(8) * math.pi / 4))]
    for g in GRP.generators:
        a, b, c, d = model((g,)).ravel()
        hits = [v for v in verts if min(abs((a * v + b) / (c * v + d) - w) for w in verts) < 1e-9]
        assert len(hits) == 2


def test_generator_lengths(model):
    for g in GRP.generators:
        assert abs(model.trace((g,))) == pytest.approx(2 + math.sqrt(2), rel=1e-12)
        assert model.length((g,)) == pytest.approx(2 * math.acosh(1 + 1 / math.sqrt(2)), rel=1e-12)


def test_elliptic_or_trivial_word_has_no_length(model):
    with pytest.raises(ValueError):
        model.length(())


def test_enumeration_below_systole_is_empty(model, classes):
    shortest = min(g.length for g in classes)
    assert shortest == pytest.approx(2.2568, abs=1e-4)
    assert surface.enumerate_geodesics(model, shortest - 1e-6) == []


def test_enumeration_is_sorted_and_deduplicated(classes):
    lengths = [g.length for g in classes]
    assert lengths == sorted(lengths)
    assert len({g.word for g in classes}) == len(classes)
    assert len({GRP.canonical(g.word) for g in classes}) == len(classes)
    names = {g.name for g in classes}
    assert "a1" in names and "b1a1" not in names


def test_enumeration_excludes_proper_powers(model):
    assert all(not surface.is_proper_power(g.word) for g in surface.enumerate_geodesics(model, 7.0, 4))


# ---------------------------------------------------------------- flat connections


def test_random_connection_is_flat(rng):
    for r in (1, 2, 3):
        assert surface.random_flat_connection(rng, r).relator_defect() < 1e-12


def test_wilson_of_trivial_connection(model, classes):
    triv = FlatConnection({k: np.eye(2, dtype=complex) for k in (1, 2, 3, 4)})
    for g in classes[:10]:
        assert surface.wilson_flat(triv, model, g.word).trace == pytest.approx(2)


def test_wilson_invariant_under_conjugation(rng, classes):
    c = surface.random_flat_connection(rng, 3)
    c2 = c.conjugated(matalg.random_unitary(rng, 3))
    assert surface.wilson_discrepancy_flat(c, c2, classes) < 1e-12
    with pytest.raises(RankMismatch):
        surface.wilson_discrepancy_flat(c, surface.random_flat_connection(rng, 2), classes)


def test_abelian_wilson_is_character_of_homology(rng, model, classes):
    theta = rng.uniform(0, 2 * math.pi, 4)
    c = surface.abelian_connection(theta)
    for g in classes:
        expect = np.exp(1j * surface.homology_vector(g.word) @ theta)
        assert abs(surface.wilson_flat(c, model, g.word).trace - expect) < 1e-12


def test_json_round_trip(rng):
    c = surface.random_flat_connection(rng, 2)
    back = FlatConnection.from_json(c.to_json())
    assert all(np.array_equal(back.images[k], c.images[k]) for k in c.images)


def test_project_flat_restores_relator(rng):
    c = surface.random_flat_connection(rng, 2)
    moved = FlatConnection({k: matalg.expm_skew(1e-2 * matalg.random_skew(rng, 2)) @ v for k, v in c.images.items()})
    assert moved.relator_defect() > 1e-4
    fixed = surface.project_flat(moved)
    assert fixed.relator_defect() < 1e-10
    assert max(matalg.operator_norm(fixed.images[k] - moved.images[k]) for k in c.images) < 0.05


def test_perturb_flat_stays_flat_and_close(rng):
    c = surface.random_flat_connection(rng, 2)
    p = surface.perturb_flat(c, 1e-3, rng)
    assert p.relator_defect() < 1e-10
    assert max(matalg.operator_norm(p.images[k] - c.images[k]) for k in c.images) < 1e-2


def test_irreducibility(rng):
    assert surface.check_irreducible_flat(surface.random_flat_connection(rng, 2))
    assert not surface.check_irreducible_flat(FlatConnection({k: np.eye(2, dtype=complex) for k in (1, 2, 3, 4)}))


# ---------------------------------------------------------------- abelian recovery


def _traces(c, classes):
    return {g.word: complex(np.trace(c(g.word))) for g in classes}


def test_recover_zero_angles(classes):
    rec = surface.abelian_recover(_traces(surface.abelian_connection(np.zeros(4)), classes), classes)
    assert surface.angle_error(rec.theta, np.zeros(4)) < 1e-12
    assert rec.residual < 1e-12


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_recover_random_angles(theta):
    rec = surface.abelian_recover(_traces(surface.abelian_connection(theta), SHORT), SHORT)
    assert surface.angle_error(rec.theta, theta) < 1e-9
    assert rec.residual < 1e-9


def test_recover_reports_windings(classes):
    theta = np.array([3.0, 3.1, -3.0, 2.9])
    rec = surface.abelian_recover(_traces(surface.abelian_connection(theta), classes), classes)
    basis = [g for g in classes if g.name in rec.basis]
    phi = np.array([np.angle(np.exp(1j * surface.homology_vector(g.word) @ theta)) for g in basis])
    V = np.array([surface.homology_vector(g.word) for g in basis])
    assert np.allclose(V @ rec.theta - phi, 2 * math.pi * np.array(rec.windings), atol=1e-9)


def test_degenerate_basis(model):
    only_a = [g for g in surface.enumerate_geodesics(model, 4.0) if set(map(abs, g.word)) <= {1, 3}]
    with pytest.raises(DegenerateBasis):
        surface.select_homology_basis(only_a)


# ---------------------------------------------------------------- moduli distance and sweep


def test_moduli_distance_identical_and_gauge(rng):
    c = surface.random_flat_connection(rng, 2)
    assert surface.moduli_distance(c, c).value < 1e-12
    assert surface.moduli_distance(c, c.conjugated(matalg.random_unitary(rng, 2)), rng=rng).value < 1e-5


def test_moduli_distance_rank_one_is_angle_offset(rng):
    theta = rng.uniform(0, 6, 4)
    shift = np.array([0.0, 0.3, 0.0, 0.0])
    d = surface.moduli_distance(surface.abelian_connection(theta), surface.abelian_connection(theta + shift)).value
    assert d == pytest.approx(abs(np.exp(0.3j) - 1), rel=1e-12)


def test_moduli_distance_bounded_by_wilson_on_generators(rng, model):
    # |tr X - tr Y| <= r ||X - Y||, so the gauge-free generator discrepancy bounds the distance from below
    c1, c2 = surface.random_flat_connection(rng, 2), surface.random_flat_connection(rng, 2)
    d = surface.moduli_distance(c1, c2, rng=rng).value
    gap = max(abs(np.trace(c1((k,))) - np.trace(c2((k,)))) for k in (1, 2, 3, 4))
    assert d >= gap / 2 - 1e-12


def test_sweep_rank_one(rng, classes):
    conn = surface.abelian_connection(rng.uniform(0, 6, 4))
    rows, tau = surface.stability_sweep(conn, [0, 1e-4, 1e-3, 1e-2], classes, rng)
    assert rows[0].epsilon == 0 and rows[0].distance == 0
    assert 0.8 <= tau <= 1.2
    assert surface.sweep_to_csv(rows).splitlines()[0] == "delta,epsilon,distance,tau_local"
