import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from holiv import matalg
from holiv.errors import IllConditioned, SingularInput, ZeroMatrix


def ginibre(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


seeds = st.integers(0, 2**32 - 1)


def projected_gradient_polar(q, steps=4000, lr=0.05):
    """Minimize ||Q - W||_F over unitaries by Riemannian gradient steps."""
    w = np.eye(len(q), dtype=complex)
    for _ in range(steps):
        g = w - q
        skew = 0.5 * (matalg.dagger(w) @ g - matalg.dagger(g) @ w)
        w = w @ scipy.linalg.expm(-lr * skew)
    return w


def test_polar_identity():
    assert np.allclose(matalg.polar_unitary(np.eye(3)), np.eye(3), atol=1e-14)


def test_polar_of_scaled_unitary(rng):
    u = matalg.random_unitary(rng, 3)
    assert np.allclose(matalg.polar_unitary(2 * u), u, atol=1e-13)


def test_polar_matches_gradient_descent(rng):
    q = ginibre(rng, 3)
    assert np.allclose(matalg.polar_unitary(q), projected_gradient_polar(q), atol=1e-8)


def test_polar_matches_scipy(rng):
    q = ginibre(rng, 4)
    u, _ = scipy.linalg.polar(q)
    assert np.allclose(matalg.polar_unitary(q), u, atol=1e-12)


def test_polar_rejects_singular():
    with pytest.raises(SingularInput):
        matalg.polar_unitary(np.diag([1.0, 0.0]))


@given(seeds, st.integers(1, 5))
def test_polar_is_unitary(seed, n):
    q = ginibre(np.random.default_rng(seed), n)
    assert matalg.unitarity_defect(matalg.polar_unitary(q)) < 1e-12


def test_operator_norm_trivial_cases():
    assert matalg.operator_norm(np.zeros((3, 3))) == 0.0
    assert matalg.operator_norm(np.diag([3, 4j])) == pytest.approx(4.0, rel=1e-12)


def test_operator_norm_power_iteration(rng):
    m = ginibre(rng, 4)
    v = ginibre(rng, 4, 1)[:, 0]
    g = matalg.dagger(m) @ m
    for _ in range(2000):
        v = g @ v
        v /= np.linalg.norm(v)
    sigma = np.sqrt(np.real(np.vdot(v, g @ v)))
    assert matalg.operator_norm(m) == pytest.approx(sigma, rel=1e-10)


def test_top_singular_vector_diagonal():
    z, s = matalg.top_singular_vector(np.diag([2.0, 1.0]))
    assert s == pytest.approx(2.0)
    assert abs(abs(z[0]) - 1) < 1e-14


def test_top_singular_vector_projector(rng):
    w = ginibre(rng, 3, 1)[:, 0]
    w /= np.linalg.norm(w)
    z, s = matalg.top_singular_vector(np.outer(w, w.conj()))
    assert s == pytest.approx(1.0)
    assert abs(abs(np.vdot(w, z)) - 1) < 1e-12


def test_top_singular_vector_beats_random_directions(rng):
    m = ginibre(rng, 3)
    z, s = matalg.top_singular_vector(m)
    w = ginibre(rng, 3, 10_000)
    w /= np.linalg.norm(w, axis=0)
    assert np.linalg.norm(m @ z) == pytest.approx(s, rel=1e-12)
    assert np.all(np.linalg.norm(m @ w, axis=0) <= s * (1 + 1e-12))


def test_top_singular_vector_zero():
    with pytest.raises(ZeroMatrix):
        matalg.top_singular_vector(np.zeros((2, 2)))


def test_gram_solve_identity():
    assert np.allclose(matalg.gram_solve([np.eye(2)], 3 * np.eye(2)), [3])


def test_gram_solve_pauli_expansion():
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    c = np.array([0.5, -1 + 2j, 0.25j, 3.0])
    assert np.allclose(matalg.gram_solve(paulis, matalg.synthesize(c, paulis)), c, atol=1e-13)


@given(seeds)
def test_gram_solve_in_span(seed):
    rng = np.random.default_rng(seed)
    basis = [ginibre(rng, 3) for _ in range(2)]
    c = ginibre(rng, 2, 1)[:, 0]
    target = matalg.synthesize(c, basis)
    assert np.linalg.norm(matalg.synthesize(matalg.gram_solve(basis, target), basis) - target) < 1e-9


def test_gram_solve_least_squares_matches_lstsq(rng):
    basis = [ginibre(rng, 3) for _ in range(3)]
    target = ginibre(rng, 3)
    flat = np.stack([b.ravel() for b in basis], axis=1)
    ref = np.linalg.lstsq(flat, target.ravel(), rcond=None)[0]
    assert np.allclose(matalg.gram_solve(basis, target), ref, atol=1e-10)


def test_gram_solve_dependent_basis():
    with pytest.raises(IllConditioned):
        matalg.gram_solve([np.eye(2), 2 * np.eye(2)], np.eye(2))


def test_expm_skew_matches_scipy(rng):
    s = np.stack([matalg.random_skew(rng, 3) * 2.5 for _ in range(4)])
    ref = np.stack([scipy.linalg.expm(x) for x in s])
    assert np.allclose(matalg.expm_skew(s), ref, atol=1e-12)


def test_span_rank(rng):
    a, b = ginibre(rng, 2), ginibre(rng, 2)
    assert matalg.span_rank([a, b, a + 2 * b]) == 2
    assert matalg.span_rank([]) == 0


def test_unitary_product_reprojects(rng):
    factors = [matalg.random_unitary(rng, 3) for _ in range(300)]
    out = matalg.unitary_product(factors)
    ref = np.eye(3)
    for f in factors:
        ref = f @ ref
    assert matalg.unitarity_defect(out) < 1e-12
    assert np.allclose(out, ref, atol=1e-10)


def test_reproject_leaves_unitaries_alone(rng):
    u = matalg.random_unitary(rng, 3)
    assert matalg.reproject(u) is u
    assert matalg.unitarity_defect(matalg.reproject(u * 1.01)) < 1e-12


def test_as_cmatrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        matalg.as_cmatrix([[np.nan, 0], [0, 1]])
