import numpy as np
import pytest

from vhdilation.algebra import AlgebraElement, Seminorm, random_element, spectral_norm
from vhdilation.errors import MalformedNet, NotCP, NotEquivalent
from vhdilation.kernel import is_positive_semidefinite
from vhdilation.module import op_apply, op_seminorm, random_vector, vector_seminorm
from vhdilation.stinespring import (CPMap, amplification_oracle, choi_is_psd, choi_matrices,
                                    choi_ranks, continuity_constants, depolarizing_map,
                                    dilation_equivalence, dilation_residual_on, dilation_residuals,
                                    expected_dilation_dims, identity_map, is_completely_positive,
                                    kernel_of_map, multiplicities, random_cp_map,
                                    representation_quotient, scalar_net,
                                    stinespring_dilate, strictness_check, transpose_map,
                                    validate_net)


def vector_state_map(v):
    """``b -> v^* b v`` from ``M_n`` to ``M_1``."""
    n = v.shape[0]
    return CPMap.from_kraus([n], [1], 1, {(0, 0): [v.reshape(n, 1)]})


def zero_map(n):
    return CPMap([n], [n], 1, (np.zeros((n * n, n, n)),))


# --- kernel of a map -------------------------------------------------------------

def test_identity_kernel_values():
    phi = identity_map(2)
    k = kernel_of_map(phi)
    units = phi.domain.matrix_units()
    for x, (_, i, j) in enumerate(units):
        for y, (_, kk, l) in enumerate(units):
            Eji = np.zeros((2, 2)); Eji[j, i] = 1
            Ekl = np.zeros((2, 2)); Ekl[kk, l] = 1
            assert np.array_equal(k(x, y).blocks[0], Eji @ Ekl)


def test_zero_map_zero_kernel():
    k = kernel_of_map(zero_map(2))
    assert all(not v.any() for v in k.values)


def test_random_cp_kernel_psd(rng):
    phi = random_cp_map([2, 1], [2], 1, rng)
    assert is_positive_semidefinite(kernel_of_map(phi))
    assert choi_is_psd(phi)


# --- complete positivity -----------------------------------------------------------

def test_cp_examples(rng):
    assert is_completely_positive(identity_map(3))
    assert not is_completely_positive(transpose_map(2))
    V = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    assert is_completely_positive(CPMap.from_kraus([3], [2], 1, {(0, 0): [V]}))


def test_transpose_choi_eigenvalue():
    C = choi_matrices(transpose_map(2))[(0, 0)]
    lam = np.linalg.eigvalsh(C)
    assert lam[0] == pytest.approx(-1.0)
    assert not choi_is_psd(transpose_map(2))
    assert not amplification_oracle(transpose_map(2), np.random.default_rng(0))


def test_transpose_is_positive_but_not_cp(rng):
    phi = transpose_map(2)
    for _ in range(50):
        b = random_element([2], rng)
        pos = AlgebraElement(b.shape, (b.components[0].conj().T @ b.components[0],))
        assert np.linalg.eigvalsh(phi(pos).blocks[0])[0] >= -1e-12


def test_three_oracles_agree(rng):
    maps = [random_cp_map([2], [2, 1], 1, rng) for _ in range(5)] + [transpose_map(2), transpose_map(3)]
    maps.append(random_cp_map([1, 2], [2], 2, rng))
    # a CP map plus a small multiple of the transpose stays CP; a large multiple does not
    base = depolarizing_map(2)
    for t in (0.2, 0.9):
        maps.append(CPMap(base.domain, base.codomain, 1, (base.values[0] + t * transpose_map(2).values[0],)))
    for phi in maps:
        a = is_completely_positive(phi)
        assert a == choi_is_psd(phi) == amplification_oracle(phi, rng)


# --- dilation ----------------------------------------------------------------

def test_identity_dilation():
    phi = identity_map(2)
    dil = stinespring_dilate(phi)
    assert dil.dims == [2]
    rep = dilation_residuals(dil)
    assert rep.spanning_residual <= 1e-10
    assert rep.unital_residual <= 1e-10
    W = dil.W[0]
    assert spectral_norm(W.conj().T @ W - np.eye(2)) <= 1e-10


def test_vector_state_dilation(rng):
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v /= np.linalg.norm(v)
    phi = vector_state_map(v)
    assert choi_ranks(phi) == {(0, 0): 1}
    dil = stinespring_dilate(phi)
    assert multiplicities(dil) == {(0, 0): 1}
    assert dil.dims == [3]
    W = dil.W[0]
    assert abs((W.conj().T @ W)[0, 0] - np.vdot(v, v)) <= 1e-10


def test_depolarizing_dilation():
    phi = depolarizing_map(2)
    assert choi_ranks(phi) == {(0, 0): 4}
    dil = stinespring_dilate(phi)
    assert multiplicities(dil) == {(0, 0): 4}
    assert dil.dims == expected_dilation_dims(phi) == [8]
    assert dilation_residuals(dil).spanning_residual <= 1e-10


def test_dilation_random_elements(rng):
    phi = random_cp_map([2, 1], [2, 1], 2, rng)
    dil = stinespring_dilate(phi)
    for _ in range(100):
        assert dilation_residual_on(dil, random_element(phi.domain, rng)) <= 1e-8
    rep = dilation_residuals(dil)
    assert rep.isometry_residual <= 1e-10 and rep.star_residual <= 1e-8


def test_dilation_minimal(rng):
    phi = random_cp_map([2], [2], 1, rng, n_kraus=2)
    dil = stinespring_dilate(phi)
    # span of pi(B) W H is all of K
    for i, W in enumerate(dil.W):
        cols = np.hstack([dil.pi.images[s][i] @ W for s in range(phi.domain.dim)])
        assert np.linalg.matrix_rank(cols, tol=1e-8) == dil.dims[i]


def test_not_cp_rejected():
    with pytest.raises(NotCP):
        stinespring_dilate(transpose_map(2))


def test_two_dilations_equivalent(rng):
    phi = random_cp_map([2], [1, 2], 1, rng)
    d1, d2 = stinespring_dilate(phi), stinespring_dilate(phi, route="cholesky")
    assert dilation_equivalence(d1, d2) <= 1e-8
    d3 = stinespring_dilate(2 * phi)
    with pytest.raises(NotEquivalent):
        dilation_equivalence(d1, d3)


# --- nets and strictness ---------------------------------------------------------

def test_constant_net():
    phi = identity_map(2)
    rep = strictness_check(phi, scalar_net([2], [1.0]), Seminorm((0,)), [random_vector([2], 1, np.random.default_rng(1))])
    assert rep.gaps == [] and rep.tail_index == 1
    assert rep.note == "strictness: trivially satisfied"


def test_scalar_staircase_net(rng):
    phi = random_cp_map([2], [2], 1, rng)
    p = Seminorm((0,))
    xs = [random_vector([2], 1, rng) for _ in range(4)]
    rep = strictness_check(phi, scalar_net([2], [0.5, 0.75, 1.0, 1.0]), p, xs)
    one = phi(AlgebraElement.identity(phi.domain))
    scale = max(vector_seminorm(op_apply(one, x), p) for x in xs)
    assert rep.gaps[0] == pytest.approx(0.25 * scale)
    assert rep.gaps[1] == pytest.approx(0.25 * scale)
    assert rep.gaps[2] == 0.0
    assert rep.tail_index == 3


def test_gaps_monotone_for_staircase(rng):
    phi = random_cp_map([2, 1], [2], 1, rng)
    xs = [random_vector([2], 1, rng) for _ in range(3)]
    rep = strictness_check(phi, scalar_net([2, 1], [0.2, 0.5, 0.7, 0.85, 1.0]), Seminorm((0,)), xs)
    assert all(a >= b - 1e-12 for a, b in zip(rep.gaps, rep.gaps[1:]))


def test_malformed_nets():
    with pytest.raises(MalformedNet):
        validate_net(scalar_net([2], [1.0, 0.5]))
    with pytest.raises(MalformedNet):
        validate_net(scalar_net([2], [0.5, 0.9]))
    with pytest.raises(MalformedNet):
        validate_net(scalar_net([2], [0.5, 1.5, 1.5]))
    with pytest.raises(MalformedNet):
        validate_net([])


# --- continuity constants -----------------------------------------------------------

def test_continuity_examples(rng):
    p = Seminorm((0,))
    r, d, tight = continuity_constants(identity_map(3), p)
    assert d == pytest.approx(1.0) and tight
    r, d, tight = continuity_constants(2 * identity_map(3), p)
    assert d == pytest.approx(2.0)


def test_continuity_sweep(rng):
    phi = random_cp_map([2, 1], [2, 3], 1, rng)
    for p in (Seminorm((0,)), Seminorm((1,)), Seminorm((0, 1))):
        r, d, tight = continuity_constants(phi, p)
        assert tight
        for _ in range(500):
            b = random_element(phi.domain, rng)
            assert op_seminorm(phi(b), p) <= d * r(b) * (1 + 1e-8) + 1e-10
        assert op_seminorm(phi(AlgebraElement.identity(phi.domain)), p) == pytest.approx(d)


def test_continuity_non_cp_is_upper_bound(rng):
    phi = transpose_map(3)
    r, d, tight = continuity_constants(phi, Seminorm((0,)))
    assert not tight
    for _ in range(200):
        b = random_element(phi.domain, rng)
        assert op_seminorm(phi(b), Seminorm((0,))) <= d * r(b) + 1e-10


# --- quotient representation ---------------------------------------------------

def test_representation_quotient(rng):
    phi = random_cp_map([2], [2, 1], 1, rng)
    dil = stinespring_dilate(phi)
    full = representation_quotient(dil.pi, Seminorm((0, 1)))
    assert all(np.array_equal(a, b) for img, q in zip(dil.pi.images, full.images) for a, b in zip(img, q))
    part = representation_quotient(dil.pi, Seminorm((1,)))
    assert part.star_residual <= 1e-8
    for _ in range(20):
        b = random_element(phi.domain, rng)
        lhs = max(spectral_norm(x) for x in (dil.pi(b)[1],))
        assert lhs <= part.norm * phi.domain.full_support()(b) + 1e-8


def test_quotient_maps_stay_cp(rng):
    phi = random_cp_map([2], [2, 1], 1, rng)
    for keep in ((0,), (1,)):
        sub = CPMap(phi.domain, phi.codomain.sub(keep), 1, tuple(phi.values[i] for i in keep))
        assert is_completely_positive(sub) and choi_is_psd(sub)
