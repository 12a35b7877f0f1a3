from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from holiv.freemonoid import IDENTITY, CharTable, FreeWord, build_G0, build_G0_prime, concat, words_of_length

g = FreeWord.gen
letters = st.lists(st.sampled_from("abc"), max_size=8)


def test_identity_is_neutral():
    w = FreeWord.parse("a^2.b")
    assert concat(IDENTITY, w) == w == concat(w, IDENTITY)


def test_exponents_merge():
    assert concat(g("x"), g("x", 2)) == g("x", 3)


def test_normalization_across_the_seam():
    w = concat(FreeWord.parse("p.q"), FreeWord.parse("q.p"))
    assert w.factors == (("p", 1), ("q", 2), ("p", 1))


def test_parse_and_render_round_trip():
    for text in ("1", "g3^2.g1.g7^4", "a"):
        assert str(FreeWord.parse(text)) == text


def test_invalid_factors():
    with pytest.raises(ValueError):
        FreeWord((("a", -1),))
    with pytest.raises(ValueError):
        FreeWord((("a.b", 1),))
    with pytest.raises(ValueError):
        g("a").power(-1)


@given(letters, letters, letters)
def test_concat_is_associative(a, b, c):
    x, y, z = (FreeWord.from_letters(t) for t in (a, b, c))
    assert concat(concat(x, y), z) == concat(x, concat(y, z))


@given(letters)
def test_normal_form_invariants(t):
    w = FreeWord.from_letters(t)
    assert all(k >= 1 for _, k in w.factors)
    assert all(a[0] != b[0] for a, b in zip(w.factors, w.factors[1:]))
    assert w.letters() == t
    assert len(w) == len(t)


@given(letters)
def test_rotations_are_cyclic_shifts(t):
    w = FreeWord.from_letters(t)
    rots = w.rotations()
    assert len(rots) == max(1, len(t))
    assert all(sorted(r.letters()) == sorted(t) for r in rots)


def test_G0_single_generator():
    assert build_G0([g("x")]) == {g("x"), g("x", 2), g("x", 3)}


def test_G0_contains_triple_products():
    a, b = g("a"), g("b")
    assert FreeWord.parse("a.b.a") in build_G0([a, b])


@pytest.mark.parametrize("n0", [1, 2, 3, 4])
def test_G0_cardinality(n0):
    gens = [g(f"g{i}") for i in range(n0)]
    # set oracle over letter tuples
    expected = {t for k in (1, 2, 3) for t in product(range(n0), repeat=k)}
    assert len(build_G0(gens)) == len(expected) == n0 + n0**2 + n0**3


def test_G0_prime_single_generator():
    G0 = build_G0([g("x")])
    assert build_G0_prime(G0, [g("x")]) == {g("x"), g("x", 2)}


@given(st.lists(st.sampled_from(["a", "b", "c", "a.b", "b^2", "c.a"]), min_size=1, max_size=3, unique=True))
def test_G0_prime_properties(texts):
    gens = [FreeWord.parse(t) for t in texts]
    G0 = build_G0(gens)
    G0p = build_G0_prime(G0, gens)
    assert G0p <= G0
    for a in gens:
        assert a in G0p
        for b in gens:
            assert concat(a, b) in G0p


def test_words_of_length_count():
    assert len(words_of_length("ab", 3)) == 8
    assert len(set(words_of_length("abc", 2))) == 9


def test_char_table_checks_empty_word():
    t = CharTable(dim=2)
    t[IDENTITY] = 2.0
    with pytest.raises(ValueError):
        t[IDENTITY] = 1.0
    with pytest.raises(TypeError):
        t["a"] = 1.0
