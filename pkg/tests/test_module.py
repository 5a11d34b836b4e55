import numpy as np
import pytest
from hypothesis import given, strategies as st

from vhdilation.algebra import AlgebraElement, Seminorm, involution, is_positive, multiply, random_element
from vhdilation.errors import ShapeMismatch
from vhdilation.module import (AdjointableOp, ModuleVector, gramian, matrix_seminorm, op_adjoint,
                               op_apply, op_is_positive, op_seminorm, quotient_op, random_op,
                               random_positive_op, random_vector, vector_seminorm)

SHAPES = [[1], [2], [2, 3], [1, 2, 2]]
seeds = st.integers(0, 2**32 - 1)
cases = st.tuples(st.sampled_from(SHAPES), st.integers(1, 3), seeds)


def supports(shape):
    s = len(shape)
    return [Seminorm(tuple(j for j in range(s) if mask >> j & 1)) for mask in range(1, 2 ** s)]


def gram_oracle(h, g):
    """Sum over module entries of ``h_k^* g_k``, computed on the tuple-of-elements view."""
    total = AlgebraElement.zeros(h.shape)
    for a, b in zip(h.entries(), g.entries()):
        total = total + multiply(involution(a), b)
    return total


def test_layout_round_trip(rng):
    h = random_vector([2, 3], 3, rng)
    assert ModuleVector.from_entries(h.entries()).blocks[1].tobytes() == h.blocks[1].tobytes()


def test_gramian_examples():
    e = ModuleVector.unit([2, 1], 1)
    assert gramian(e, e).allclose(AlgebraElement.identity(e.shape), atol=0)
    e1, e2 = ModuleVector.unit([2], 2, 0), ModuleVector.unit([2], 2, 1)
    assert gramian(e1, e2).allclose(AlgebraElement.zeros(e1.shape), atol=0)


def test_gramian_shape_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        gramian(random_vector([2], 1, rng), random_vector([2], 2, rng))


@given(cases)
def test_gramian_matches_entrywise_oracle(case):
    shape, m, seed = case
    rng = np.random.default_rng(seed)
    h, g = random_vector(shape, m, rng), random_vector(shape, m, rng)
    assert gramian(h, g).allclose(gram_oracle(h, g), atol=1e-12)


@given(cases)
def test_gramian_axioms(case):
    shape, m, seed = case
    rng = np.random.default_rng(seed)
    h, g, f = (random_vector(shape, m, rng) for _ in range(3))
    a = random_element(shape, rng)
    assert is_positive(gramian(h, h))
    assert gramian(h, g).allclose(involution(gramian(g, h)), atol=1e-12)
    lin = gramian(h, g * (2 - 1j) + f)
    assert lin.allclose(gramian(h, g) * (2 - 1j) + gramian(h, f), atol=1e-10)
    assert gramian(h, g.right_mul(a)).allclose(multiply(gramian(h, g), a), atol=1e-10)


@given(cases)
def test_polarisation(case):
    shape, m, seed = case
    rng = np.random.default_rng(seed)
    x, y = random_vector(shape, m, rng), random_vector(shape, m, rng)
    rhs = AlgebraElement.zeros(x.shape)
    for k in range(4):
        z = x + y * (1j ** k)
        rhs = rhs + gramian(z, z) * (1j ** -k)  # gramian is linear in its second slot
    assert (gramian(x, y) * 4).allclose(rhs, atol=1e-10)


def test_vector_seminorm_examples():
    z = ModuleVector.zeros([2, 3], 2)
    assert vector_seminorm(z, Seminorm((0, 1))) == 0.0
    e = ModuleVector.unit([2, 3], 2)
    assert vector_seminorm(e, Seminorm((0, 1))) == pytest.approx(1.0)


def test_vector_seminorm_triangle(rng):
    for _ in range(1000):
        h, g = random_vector([2, 1], 2, rng), random_vector([2, 1], 2, rng)
        for p in supports([2, 1]):
            assert vector_seminorm(h + g, p) <= vector_seminorm(h, p) + vector_seminorm(g, p) + 1e-10


def test_op_apply_examples(rng):
    h = random_vector([2, 3], 2, rng)
    assert np.allclose(op_apply(AdjointableOp.identity([2, 3], 2), h).blocks[0], h.blocks[0])
    T = random_op([2, 3], 2, rng)
    Th = op_apply(T, h)
    for i in range(2):
        assert np.allclose(Th.blocks[i], T.blocks[i] @ h.blocks[i])


def test_op_apply_matches_matrix_over_algebra(rng):
    T, h = random_op([2, 1], 2, rng), random_vector([2, 1], 2, rng)
    Th = op_apply(T, h).entries()
    for r in range(2):
        expected = AlgebraElement.zeros(h.shape)
        for c in range(2):
            expected = expected + multiply(T.entry(r, c), h.entries()[c])
        assert Th[r].allclose(expected, atol=1e-12)


@given(cases)
def test_adjoint_identity(case):
    shape, m, seed = case
    rng = np.random.default_rng(seed)
    T = random_op(shape, m, rng)
    h, g = random_vector(shape, m, rng), random_vector(shape, m, rng)
    lhs = gramian(op_apply(T, h), g)
    rhs = gramian(h, op_apply(op_adjoint(T), g))
    assert lhs.allclose(rhs, atol=1e-10)


def test_op_seminorm_examples():
    I = AdjointableOp.identity([2, 3], 2)
    p = Seminorm((0, 1))
    assert op_seminorm(I, p) == pytest.approx(1.0)
    assert op_seminorm(I * 2, p) == pytest.approx(2.0)


def test_op_seminorm_monte_carlo(rng):
    T = random_op([2, 1], 2, rng)
    for p in supports([2, 1]):
        bound = op_seminorm(T, p)
        best = 0.0
        for _ in range(10_000 // 3):
            h = random_vector([2, 1], 2, rng)
            r = vector_seminorm(op_apply(T, h), p) / vector_seminorm(h, p)
            assert r <= bound * (1 + 1e-8)
            best = max(best, r)
        assert best >= 0.6 * bound


def test_op_seminorm_attained_by_top_singular_vector(rng):
    T = random_op([3], 2, rng)
    p = Seminorm((0,))
    _, _, vh = np.linalg.svd(T.blocks[0])
    h = ModuleVector(T.shape, 2, (np.repeat(vh[:1].conj().T, 3, axis=1),))
    assert vector_seminorm(op_apply(T, h), p) / vector_seminorm(h, p) == pytest.approx(op_seminorm(T, p))


def test_op_is_positive_examples(rng):
    assert op_is_positive(AdjointableOp.identity([2], 1))
    assert op_is_positive(random_positive_op([2, 3], 2, rng))
    D = AdjointableOp([1], 2, (np.diag([1.0, -1.0]).astype(complex),))
    assert not op_is_positive(D)


def test_op_positivity_vs_quadratic_form(rng):
    for trial in range(20):
        S = random_op([2, 1], 2, rng)
        T = S.H @ S if trial % 2 else S + S.H
        forms_ok = all(is_positive(gramian(op_apply(T, h), h), 1e-9)
                       for h in (random_vector([2, 1], 2, rng) for _ in range(100)))
        if op_is_positive(T):
            assert forms_ok
        else:
            # the eigenvector of a negative eigenvalue is a witness
            i = next(i for i, b in enumerate(T.blocks) if np.linalg.eigvalsh(b)[0] < 0)
            w, v = np.linalg.eigh(T.blocks[i])
            blocks = [np.zeros_like(h) for h in random_vector([2, 1], 2, rng).blocks]
            blocks[i][:, 0] = v[:, 0]
            h = ModuleVector(T.shape, 2, tuple(blocks))
            assert not is_positive(gramian(op_apply(T, h), h))


def test_quotient_op(rng):
    T, S = random_op([2, 3], 2, rng), random_op([2, 3], 2, rng)
    full = Seminorm((0, 1))
    assert np.array_equal(quotient_op(T, full).blocks[1], T.blocks[1])
    p = Seminorm((1,))
    I = quotient_op(AdjointableOp.identity([2, 3], 2), p)
    assert np.array_equal(I.blocks[0], np.eye(6))
    lhs, rhs = quotient_op(S @ T, p), quotient_op(S, p) @ quotient_op(T, p)
    assert np.array_equal(lhs.blocks[0], rhs.blocks[0])
    assert np.array_equal(quotient_op(T.H, p).blocks[0], quotient_op(T, p).H.blocks[0])


def test_haagerup_type_inequality(rng):
    for _ in range(200):
        h, k = random_vector([2, 2], 2, rng), random_vector([2, 2], 2, rng)
        lhs = gramian(h, k) + gramian(k, h)
        rhs = gramian(h, h) + gramian(k, k)
        assert is_positive(rhs - lhs)


def test_schwarz_constants(rng):
    for _ in range(1000):
        e, f = random_vector([2, 1], 2, rng), random_vector([2, 1], 2, rng)
        for p in supports([2, 1]):
            rhs = np.sqrt(p(gramian(e, e)) * p(gramian(f, f)))
            assert p(gramian(e, f)) <= rhs + 1e-10
            assert p(gramian(e, f)) <= 4 * rhs + 1e-10


def test_krld_tight_form(rng):
    for _ in range(200):
        T = random_positive_op([2, 3], 1, rng)
        h = random_vector([2, 3], 1, rng)
        for p in supports([2, 3]):
            assert p(gramian(op_apply(T, h), h)) <= op_seminorm(T, p) * p(gramian(h, h)) + 1e-10


def test_matrix_seminorm_consistency(rng):
    T = random_op([2, 3], 3, rng)
    entries = [[T.entry(r, c) for c in range(3)] for r in range(3)]
    for p in supports([2, 3]):
        assert matrix_seminorm(entries, p) == pytest.approx(op_seminorm(T, p), rel=1e-12)
