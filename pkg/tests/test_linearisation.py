import numpy as np
import pytest
from hypothesis import given, strategies as st

from vhdilation.algebra import Seminorm, spectral_norm
from vhdilation.errors import NonInvariantKernel, NotEquivalent, NotPSD, PartialActionError
from vhdilation.generators import (circulant_fixture, invariant_fixture, kms_fixture,
                                   random_psd_kernel, weighted_window_kernel)
from vhdilation.kernel import OperatorKernel, gram_block, is_invariant
from vhdilation.linearisation import (Representation, b1_constant_exact, b1_ratio_sweep,
                                      cholesky_factor, eig_factor, induce_representation,
                                      intertwining_residual, kolmogorov, kolmogorov_ok,
                                      pivoted_cholesky, reconstruction_residual, reproducing_space,
                                      shifted_b1_constant, unitary_equivalence, verify_star_rep)
from vhdilation.module import AdjointableOp, random_vector
from vhdilation.semigroup import (cyclic_group, left_regular_action, naturals_window,
                                  trivial_group)

seeds = st.integers(0, 2**32 - 1)


def numeric_rank(G, tol=1e-10):
    lam = np.linalg.eigvalsh(G)
    return int((lam >= tol * lam[-1]).sum()) if lam[-1] > 0 else 0


# --- factorisation ------------------------------------------------------------

def test_scalar_square_root():
    lin = kolmogorov(OperatorKernel.scalar([[4.0]]))
    assert lin.dims == [1]
    assert lin.factors[0][0, 0] == pytest.approx(2.0)
    V = lin.v_of(0)[0]
    assert (V.conj().T @ V)[0, 0] == pytest.approx(4.0)


def test_all_ones_rank_one():
    lin = kolmogorov(OperatorKernel.scalar(np.ones((3, 3))))
    assert lin.dims == [1]
    for x in range(3):
        assert lin.v_of(x)[0][0, 0] == pytest.approx(1.0)


def test_kms_nonsingular():
    N, a = 5, 0.5
    K = kms_fixture(N, a).kernel
    det = np.linalg.det(K.values[0][:, :, 0, 0].real)
    assert det == pytest.approx((1 - a * a) ** (N - 1), rel=1e-12)
    assert det > 0
    assert kolmogorov(K).dims == [N]


def test_identity_kernel_isometric_columns():
    I = AdjointableOp.identity([2], 1)
    k = OperatorKernel.from_ops([[I]])
    V = kolmogorov(k).v_of(0)[0]
    assert np.allclose(V.conj().T @ V, np.eye(2))


def test_not_psd():
    with pytest.raises(NotPSD):
        kolmogorov(OperatorKernel.scalar([[1, 2], [2, 1]]))


def test_zero_kernel_degenerate():
    k = OperatorKernel([2, 1], 1, (np.zeros((3, 3, 2, 2)), np.zeros((3, 3, 1, 1))))
    lin = kolmogorov(k)
    assert lin.dims == [0, 0]
    assert reconstruction_residual(lin, k) == 0.0
    sg = cyclic_group(3)
    rep = induce_representation(lin, sg, left_regular_action(sg))
    assert rep(1)[0].shape == (0, 0)
    assert verify_star_rep(rep).ok(1e-8)


@given(seeds)
def test_reconstruction_and_rank(seed):
    rng = np.random.default_rng(seed)
    k, ranks = random_psd_kernel([2, 1], 2, 3, rng, rank=int(rng.integers(1, 8)))
    lin = kolmogorov(k)
    assert kolmogorov_ok(lin, k)
    assert lin.dims == [numeric_rank(G) for G in gram_block(k)]
    assert lin.dims == ranks
    for x in range(3):
        for y in range(3):
            for vy, vx, kv in zip(lin.v_of(y), lin.v_of(x), k.values):
                assert np.abs(vy.conj().T @ vx - kv[y, x]).max() <= 1e-10


def test_eig_factor_is_deterministic_and_phase_normalised(rng):
    k, _ = random_psd_kernel([3], 1, 2, rng, rank=3)
    G = gram_block(k)[0]
    F1, F2 = eig_factor(G, 1e-10), eig_factor(G.copy(), 1e-10)
    assert np.array_equal(F1, F2)
    for row in F1:
        j = np.flatnonzero(np.abs(row) > 1e-10 * np.abs(row).max())[0]
        assert abs(row[j].imag) <= 1e-12 and row[j].real > 0


def test_pivoted_cholesky(rng):
    k, _ = random_psd_kernel([2], 1, 4, rng, rank=5)
    G = gram_block(k)[0]
    L, piv = pivoted_cholesky(G, 1e-12)
    assert L.shape[1] == 5
    assert np.abs(G[np.ix_(piv, piv)] - L @ L.conj().T).max() <= 1e-10
    F = cholesky_factor(G, 1e-12)
    assert np.abs(F.conj().T @ F - G).max() <= 1e-10


# --- representation -----------------------------------------------------------

def test_trivial_semigroup_gives_identity(rng):
    k, _ = random_psd_kernel([2], 1, 1, rng)
    sg = trivial_group()
    lin = kolmogorov(k)
    rep = induce_representation(lin, sg, left_regular_action(sg))
    assert np.allclose(rep(0)[0], np.eye(lin.dims[0]))
    chk = verify_star_rep(rep)
    assert chk.multiplicative <= 1e-12 and chk.adjoint <= 1e-12


def test_circulant_gives_unitary(rng):
    fx = circulant_fixture(5, [1, 2], 1, rng)
    lin = kolmogorov(fx.kernel)
    rep = induce_representation(lin, fx.sg, fx.act)
    for U in rep(1):
        assert spectral_norm(U.conj().T @ U - np.eye(U.shape[0])) <= 1e-8
    assert verify_star_rep(rep).ok(1e-8)
    assert intertwining_residual(lin, rep, fx.act) <= 1e-8


def test_matrix_unit_monoid_non_unitary(rng):
    fx = invariant_fixture("matrix_units", [2], 1, rng, rep_dim=4)
    lin = kolmogorov(fx.kernel)
    rep = induce_representation(lin, fx.sg, fx.act)
    assert verify_star_rep(rep).ok(1e-8)
    E21 = rep(3)[0]
    assert spectral_norm(E21 @ E21) <= 1e-8  # truncated shift squares to zero
    assert spectral_norm(E21.conj().T @ E21 - np.eye(E21.shape[0])) > 0.5
    assert spectral_norm(E21) <= 1 + 1e-8


def test_corrupted_representation_reports_pair(rng):
    fx = circulant_fixture(4, [2], 1, rng)
    rep = induce_representation(kolmogorov(fx.kernel), fx.sg, fx.act)
    images = list(rep.images)
    images[2] = tuple(1.5 * a for a in images[2])
    chk = verify_star_rep(Representation(fx.sg, images))
    assert not chk.ok(1e-8)
    a, b = chk.worst_product
    assert 2 in (a, b, fx.sg.mult[a, b])


def test_non_invariant_raises_with_triple(rng):
    fx = circulant_fixture(4, [1], 1, rng)
    vals = fx.kernel.values[0].copy()
    vals[0, 1] += 0.3
    vals[1, 0] += 0.3
    k = OperatorKernel([1], 1, (vals,))
    assert not is_invariant(k, fx.sg, fx.act)
    with pytest.raises(NonInvariantKernel) as err:
        induce_representation(kolmogorov(k), fx.sg, fx.act)
    assert err.value.triple is not None and len(err.value.triple) == 3


def test_partial_action_rejected():
    fx = kms_fixture(4, 0.5)
    with pytest.raises(PartialActionError):
        induce_representation(kolmogorov(fx.kernel), fx.sg, fx.act)


# --- (b1) -------------------------------------------------------------------

def test_b1_trivial_and_group(rng):
    k, _ = random_psd_kernel([2], 1, 1, rng)
    sg = trivial_group()
    lin = kolmogorov(k)
    rep = induce_representation(lin, sg, left_regular_action(sg))
    assert b1_constant_exact(lin, rep, 0, Seminorm((0,))) == pytest.approx(1.0, abs=1e-10)
    fx = circulant_fixture(5, [2, 1], 1, rng)
    lin = kolmogorov(fx.kernel)
    rep = induce_representation(lin, fx.sg, fx.act)
    for xi in range(5):
        for p in (Seminorm((0,)), Seminorm((1,)), Seminorm((0, 1))):
            assert abs(b1_constant_exact(lin, rep, xi, p) - 1.0) <= 1e-10


def test_b1_exact_matches_gram_route(rng):
    fx = invariant_fixture("matrix_units", [2, 1], 1, rng, rep_dim=4)
    lin = kolmogorov(fx.kernel)
    rep = induce_representation(lin, fx.sg, fx.act)
    for xi in range(fx.sg.order):
        for p in (Seminorm((0,)), Seminorm((1,))):
            exact = b1_constant_exact(lin, rep, xi, p)
            assert shifted_b1_constant(fx.kernel, fx.act, xi, p) == pytest.approx(exact, abs=1e-8)
            assert b1_ratio_sweep(fx.kernel, fx.act, xi, p, rng, 2000) <= exact + 1e-8


def test_b1_weighted_window_exceeds_one(rng):
    N, a, r = 5, 0.5, 0.6
    k = weighted_window_kernel(N, a, r)
    sg, act = naturals_window(N)
    p = Seminorm((0,))
    c = shifted_b1_constant(k, act, 1, p)
    assert c > 1
    assert c == pytest.approx(r ** -2, rel=1e-10)
    assert b1_ratio_sweep(k, act, 1, p, rng, 10_000) <= c + 1e-8


# --- equivalence ------------------------------------------------------------

def test_self_equivalence_identity(rng):
    k, _ = random_psd_kernel([2], 2, 3, rng)
    lin = kolmogorov(k)
    U = unitary_equivalence(lin, lin)
    for b in U.blocks:
        assert np.allclose(b, np.eye(b.shape[0]), atol=1e-10)


@given(seeds)
def test_eig_vs_cholesky(seed):
    rng = np.random.default_rng(seed)
    k, _ = random_psd_kernel([2, 1], 2, 3, rng, rank=int(rng.integers(1, 9)))
    U = unitary_equivalence(kolmogorov(k), kolmogorov(k, route="cholesky"))
    assert max(U.isometry, U.coisometry, U.intertwining) <= 1e-8


def test_equivalence_with_representations(rng):
    fx = circulant_fixture(4, [2], 1, rng)
    l1, l2 = kolmogorov(fx.kernel), kolmogorov(fx.kernel, route="cholesky")
    r1, r2 = (induce_representation(l, fx.sg, fx.act) for l in (l1, l2))
    assert unitary_equivalence(l1, l2, rep1=r1, rep2=r2).representation <= 1e-8


def test_scaled_kernel_not_equivalent(rng):
    k, _ = random_psd_kernel([2], 1, 3, rng)
    with pytest.raises(NotEquivalent):
        unitary_equivalence(kolmogorov(k), kolmogorov(2 * k))


# --- reproducing kernel view ---------------------------------------------------

def random_function(R, lin, rng):
    u = [rng.standard_normal((d, n)) + 1j * rng.standard_normal((d, n))
         for d, n in zip(lin.dims, lin.shape.component_dims)]
    return R.from_k(u)


def test_rk_identity_kernel(rng):
    I = AdjointableOp.identity([2], 1)
    zero = AdjointableOp.zeros([2], 1)
    k = OperatorKernel.from_ops([[I, zero], [zero, I]])
    lin = kolmogorov(k)
    R = reproducing_space(lin)
    assert lin.dims == [4]
    f = random_function(R, lin, rng)
    h = random_vector([2], 1, rng).blocks
    assert R.reproducing_residual(f, 1, h) <= 1e-12


def test_rk_all_ones_constant_functions(rng):
    lin = kolmogorov(OperatorKernel.scalar(np.ones((3, 3))))
    R = reproducing_space(lin)
    f = random_function(R, lin, rng)[0]
    assert np.allclose(f, f[0])


def test_rk_random(rng):
    k, _ = random_psd_kernel([2, 1], 2, 3, rng)
    lin = kolmogorov(k)
    R = reproducing_space(lin)
    for _ in range(100):
        f = random_function(R, lin, rng)
        x = int(rng.integers(0, 3))
        h = random_vector(k.shape, 2, rng).blocks
        assert R.reproducing_residual(f, x, h) <= 1e-10
        assert R.evaluation_adjoint_residual(x, h) <= 1e-10


def test_rho_intertwining(rng):
    fx = invariant_fixture("cyclic_semilattice", [2], 1, rng)
    lin = kolmogorov(fx.kernel)
    R = reproducing_space(lin)
    for xi in range(fx.sg.order):
        for x in range(fx.act.n_points):
            h = random_vector([2], 1, rng).blocks
            assert R.rho_intertwining_residual(fx.sg, fx.act, xi, x, h) <= 1e-8
