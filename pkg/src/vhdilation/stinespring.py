"""Completely positive maps between multi-matrix structures and their dilations.

A map ``phi: B -> L*(A^m)`` is fixed by its values on the matrix units of
``B``.  Complete positivity is decided through the kernel ``k(a, b) = phi(a^* b)``
on the spanning set ``X = S u {1}``; the minimal dilation
``phi(b) = W^* pi(b) W`` comes from the Kolmogorov factor of that kernel with
``W = V(1)`` and ``pi(b) V(a) = V(ba)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebra import (AlgebraElement, AlgebraShape, Seminorm, as_shape, is_positive,
                      involution, leq, matrix_is_positive, multiply, spectral_norm)
from .errors import MalformedNet, NotCP, NotEquivalent, ShapeMismatch
from .kernel import OperatorKernel, is_positive_semidefinite
from .linearisation import Linearisation, kolmogorov, unitary_equivalence
from .module import AdjointableOp, ModuleVector, op_apply, op_seminorm, vector_seminorm


@dataclass(eq=False)
class CPMap:
    """Linear map ``B -> L*(A^m)`` given on the matrix units of ``B``.

    ``values[i]`` has shape ``(dim B, m a_i, m a_i)``; row ``s`` is component
    ``i`` of ``phi`` at the ``s``-th matrix unit of ``domain.matrix_units()``.
    """

    domain: AlgebraShape
    codomain: AlgebraShape
    m: int
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.domain = as_shape(self.domain)
        self.codomain = as_shape(self.codomain)
        self.values = tuple(np.asarray(v, complex) for v in self.values)
        if len(self.values) != self.codomain.s:
            raise ShapeMismatch("one value array per codomain component expected")
        for v, a in zip(self.values, self.codomain.component_dims):
            if v.shape != (self.domain.dim, self.m * a, self.m * a):
                raise ShapeMismatch(f"value array of shape {v.shape}")

    @classmethod
    def from_function(cls, domain, codomain, m: int, fn) -> "CPMap":
        domain, codomain = as_shape(domain), as_shape(codomain)
        ops = [fn(AlgebraElement.matrix_unit(domain, *u)) for u in domain.matrix_units()]
        return cls(domain, codomain, m, tuple(np.array([op.blocks[i] for op in ops])
                                              for i in range(codomain.s)))

    @classmethod
    def from_kraus(cls, domain, codomain, m: int,
                   kraus: Mapping[tuple[int, int], Sequence[np.ndarray]]) -> "CPMap":
        """``phi(b)_i = sum_c sum_l A_l^* b_c A_l`` with ``A_l`` of size ``n_c x (m a_i)``."""
        domain, codomain = as_shape(domain), as_shape(codomain)

        def fn(b):
            blocks = []
            for i, a in enumerate(codomain.component_dims):
                acc = np.zeros((m * a, m * a), complex)
                for c in range(domain.s):
                    for A in kraus.get((c, i), ()):
                        acc += A.conj().T @ b.components[c] @ A
                blocks.append(acc)
            return AdjointableOp(codomain, m, tuple(blocks))

        return cls.from_function(domain, codomain, m, fn)

    def op_at(self, s: int) -> AdjointableOp:
        return AdjointableOp(self.codomain, self.m, tuple(v[s] for v in self.values))

    def __call__(self, b: AlgebraElement) -> AdjointableOp:
        if b.shape != self.domain:
            raise ShapeMismatch("element outside the domain algebra")
        coords = b.coordinates()
        return AdjointableOp(self.codomain, self.m, tuple(np.tensordot(coords, v, axes=1) for v in self.values))

    def __mul__(self, scalar):
        return CPMap(self.domain, self.codomain, self.m, tuple(scalar * v for v in self.values))

    __rmul__ = __mul__


def identity_map(n: int, m: int = 1) -> CPMap:
    """``b -> diag(b, ..., b)`` from ``M_n`` into ``M_m(M_n) = L*(M_n^m)``."""
    if m == 1:
        return CPMap.from_function([n], [n], 1, lambda b: AdjointableOp(b.shape, 1, b.components))
    slots = [np.eye(n, m * n, l * n, dtype=complex) for l in range(m)]
    return CPMap.from_kraus([n], [n], m, {(0, 0): slots})


def transpose_map(n: int) -> CPMap:
    return CPMap.from_function([n], [n], 1, lambda b: AdjointableOp(b.shape, 1, (b.components[0].T,)))


def depolarizing_map(n: int) -> CPMap:
    return CPMap.from_function(
        [n], [n], 1, lambda b: AdjointableOp(b.shape, 1, (np.trace(b.components[0]) / n * np.eye(n),)))


def random_cp_map(domain, codomain, m: int, rng: np.random.Generator, n_kraus: int = 3) -> CPMap:
    domain, codomain = as_shape(domain), as_shape(codomain)
    kraus = {}
    for c, n in enumerate(domain.component_dims):
        for i, a in enumerate(codomain.component_dims):
            kraus[(c, i)] = [(rng.standard_normal((n, m * a)) + 1j * rng.standard_normal((n, m * a))) / np.sqrt(2 * n)
                             for _ in range(n_kraus)]
    return CPMap.from_kraus(domain, codomain, m, kraus)


# --- kernel and CP tests ---------------------------------------------------------

def spanning_set(shape: AlgebraShape) -> list[AlgebraElement]:
    """Matrix units of every component followed by the unit."""
    return [AlgebraElement.matrix_unit(shape, *u) for u in shape.matrix_units()] + [AlgebraElement.identity(shape)]


def kernel_of_map(phi: CPMap) -> OperatorKernel:
    """``k(a, b) = phi(a^* b)`` on ``X = S u {1}``."""
    X = spanning_set(phi.domain)
    coords = np.array([[multiply(involution(a), b).coordinates() for b in X] for a in X])
    vals = tuple(np.einsum("xys,sab->xyab", coords, v) for v in phi.values)
    return OperatorKernel(phi.codomain, phi.m, vals)


def is_completely_positive(phi: CPMap, tol: float = 1e-10) -> bool:
    return is_positive_semidefinite(kernel_of_map(phi), tol)


def choi_matrices(phi: CPMap) -> dict[tuple[int, int], np.ndarray]:
    """``C_{c,i} = sum_{j,k} E_jk (x) phi(E^c_jk)_i`` for every domain/codomain component pair."""
    out = {}
    units = phi.domain.matrix_units()
    for c, n in enumerate(phi.domain.component_dims):
        for i in range(phi.codomain.s):
            d = phi.values[i].shape[1]
            C = np.zeros((n * d, n * d), complex)
            for s, (cc, j, k) in enumerate(units):
                if cc == c:
                    C[j * d:(j + 1) * d, k * d:(k + 1) * d] = phi.values[i][s]
            out[(c, i)] = C
    return out


def choi_is_psd(phi: CPMap, tol: float = 1e-10) -> bool:
    return all(matrix_is_positive(C, tol) for C in choi_matrices(phi).values())


def choi_ranks(phi: CPMap, tol: float = 1e-10) -> dict[tuple[int, int], int]:
    ranks = {}
    for key, C in choi_matrices(phi).items():
        lam = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
        ranks[key] = int((lam > tol * max(lam.max(), 0.0)).sum()) if lam.max() > 0 else 0
    return ranks


def expected_dilation_dims(phi: CPMap, tol: float = 1e-10) -> list[int]:
    """``d_i = sum_c n_c rank(C_{c,i})``: ``pi`` restricted to component ``c`` has multiplicity ``rank C_{c,i}``."""
    ranks = choi_ranks(phi, tol)
    return [sum(n * ranks[(c, i)] for c, n in enumerate(phi.domain.component_dims))
            for i in range(phi.codomain.s)]


def amplification_oracle(phi: CPMap, rng: np.random.Generator, n_max: int = 2, draws: int = 50,
                         tol: float = 1e-9) -> bool:
    """Brute-force test of ``phi^{(n)}`` on random rank-one positive elements of ``M_n(B)``."""
    for n in range(1, n_max + 1):
        for _ in range(draws):
            P = []
            for nc in phi.domain.component_dims:
                v = rng.standard_normal((n * nc, 1)) + 1j * rng.standard_normal((n * nc, 1))
                P.append(v @ v.conj().T)
            for i in range(phi.codomain.s):
                rows = []
                for r in range(n):
                    row = []
                    for s in range(n):
                        entry = AlgebraElement(phi.domain, tuple(
                            Pc[r * nc:(r + 1) * nc, s * nc:(s + 1) * nc]
                            for Pc, nc in zip(P, phi.domain.component_dims)))
                        row.append(phi(entry).blocks[i])
                    rows.append(row)
                if not matrix_is_positive(np.block(rows), tol):
                    return False
    return True


# --- dilation ---------------------------------------------------------------------

@dataclass(eq=False)
class AlgebraRepresentation:
    """``images[s][i]``: component ``i`` of ``pi`` at the ``s``-th matrix unit."""

    domain: AlgebraShape
    images: list[tuple[np.ndarray, ...]]

    def __call__(self, b: AlgebraElement) -> tuple[np.ndarray, ...]:
        coords = b.coordinates()
        n_comp = len(self.images[0])
        return tuple(sum(c * self.images[s][i] for s, c in enumerate(coords)) for i in range(n_comp))


@dataclass(eq=False)
class StinespringDilation:
    phi: CPMap
    lin: Linearisation
    pi: AlgebraRepresentation
    W: tuple[np.ndarray, ...]
    consistency: float = 0.0

    @property
    def dims(self) -> list[int]:
        return self.lin.dims

    def compress(self, b: AlgebraElement) -> AdjointableOp:
        """``W^* pi(b) W``."""
        return AdjointableOp(self.phi.codomain, self.phi.m,
                             tuple(w.conj().T @ p @ w for w, p in zip(self.W, self.pi(b))))


def stinespring_dilate(phi: CPMap, tol: float = 1e-10, route: str = "eig",
                       rep_tol: float = 1e-8) -> StinespringDilation:
    k = kernel_of_map(phi)
    if not is_positive_semidefinite(k, max(tol, 1e-10)):
        raise NotCP("map is not completely positive")
    lin = kolmogorov(k, tol, route)
    X = spanning_set(phi.domain)
    S = X[:-1]
    n_pts = len(X)
    pinvs = lin.pinvs()
    images = []
    worst = 0.0
    for e in S:
        coords = np.array([multiply(e, a).coordinates() for a in X])
        img = []
        for f, fp, d in zip(lin.factors, pinvs, lin.block_dims()):
            blocks = f.reshape(f.shape[0], n_pts, d)
            moved = np.einsum("as,rsd->rad", coords, blocks[:, :-1, :]).reshape(f.shape[0], n_pts * d)
            pi = moved @ fp
            worst = max(worst, spectral_norm(moved - pi @ f) / max(spectral_norm(f), 1e-300))
            img.append(pi)
        images.append(tuple(img))
    if worst > rep_tol:
        raise NotCP(f"left multiplication is not well defined on the dilation space (residual {worst:.3e})")
    W = lin.v_of(n_pts - 1)
    return StinespringDilation(phi, lin, AlgebraRepresentation(phi.domain, images), W, worst)


def multiplicities(dil: StinespringDilation) -> dict[tuple[int, int], int]:
    """Multiplicity of domain component ``c`` in codomain component ``i`` of ``pi``.

    ``pi(E^c_11)_i`` is a projection whose rank is that multiplicity.
    """
    out = {}
    units = dil.phi.domain.matrix_units()
    for c in range(dil.phi.domain.s):
        s = units.index((c, 0, 0))
        for i, P in enumerate(dil.pi.images[s]):
            out[(c, i)] = int(round(np.trace(P).real)) if P.size else 0
    return out


@dataclass
class DilationReport:
    spanning_residual: float
    isometry_residual: float
    unital_residual: float
    star_residual: float
    dims: list[int]


def dilation_residuals(dil: StinespringDilation) -> DilationReport:
    phi = dil.phi
    span = 0.0
    for s, u in enumerate(phi.domain.matrix_units()):
        b = AlgebraElement.matrix_unit(phi.domain, *u)
        span = max(span, max(spectral_norm(a - b_) for a, b_ in
                             zip(phi.op_at(s).blocks, dil.compress(b).blocks)))
    one = AlgebraElement.identity(phi.domain)
    ww = max(spectral_norm(w.conj().T @ w - v) for w, v in zip(dil.W, phi(one).blocks))
    unital = max((spectral_norm(p - np.eye(p.shape[0])) for p in dil.pi(one)), default=0.0)
    star = 0.0
    for u in phi.domain.matrix_units():
        e = AlgebraElement.matrix_unit(phi.domain, *u)
        for a, b in zip(dil.pi(involution(e)), dil.pi(e)):
            star = max(star, spectral_norm(a - b.conj().T))
        for u2 in phi.domain.matrix_units():
            f = AlgebraElement.matrix_unit(phi.domain, *u2)
            for a, b, c in zip(dil.pi(multiply(e, f)), dil.pi(e), dil.pi(f)):
                star = max(star, spectral_norm(a - b @ c))
    return DilationReport(span, ww, unital, star, dil.dims)


def dilation_residual_on(dil: StinespringDilation, b: AlgebraElement) -> float:
    return max(spectral_norm(a - c) for a, c in zip(dil.phi(b).blocks, dil.compress(b).blocks))


def dilation_equivalence(d1: StinespringDilation, d2: StinespringDilation, tol: float = 1e-8) -> float:
    """Largest residual of ``U`` intertwining ``(pi_1, W_1)`` with ``(pi_2, W_2)``."""
    U = unitary_equivalence(d1.lin, d2.lin, tol)
    worst = max(U.isometry, U.coisometry, U.intertwining)
    for w1, w2, u in zip(d1.W, d2.W, U.blocks):
        worst = max(worst, spectral_norm(u @ w1 - w2))
    for s in range(d1.phi.domain.dim):
        for u, a, b in zip(U.blocks, d1.pi.images[s], d2.pi.images[s]):
            worst = max(worst, spectral_norm(u @ a - b @ u))
    if worst > tol:
        raise NotEquivalent(f"dilations are not unitarily equivalent (residual {worst:.3e})")
    return worst


# --- approximate units and strictness ----------------------------------------------

def scalar_net(shape, scalars: Sequence[float]) -> list[AlgebraElement]:
    one = AlgebraElement.identity(shape)
    return [t * one for t in scalars]


def validate_net(net: Sequence[AlgebraElement], tol: float = 1e-10,
                 samples: Sequence[AlgebraElement] = ()) -> None:
    """Raise :class:`MalformedNet` unless the list is an increasing contractive net ending at the unit."""
    if not net:
        raise MalformedNet("empty net")
    shape = net[0].shape
    full = shape.full_support()
    for j, e in enumerate(net):
        if not is_positive(e, tol):
            raise MalformedNet(f"element {j} is not positive")
        if full(e) > 1 + tol:
            raise MalformedNet(f"element {j} has norm {full(e):.6g} > 1")
    for j in range(len(net) - 1):
        if not leq(net[j], net[j + 1], tol):
            raise MalformedNet(f"net decreases between elements {j} and {j + 1}")
    if not net[-1].allclose(AlgebraElement.identity(shape), atol=tol):
        raise MalformedNet("net is not eventually equal to the unit")
    for x in samples:
        prev = np.inf
        for e in net:
            gap = max(full(x - multiply(x, e)), full(x - multiply(e, x)))
            if gap > prev + tol:
                raise MalformedNet("x e_j does not approach x monotonically")
            prev = gap
        if prev > tol:
            raise MalformedNet("x e_j does not reach x")


@dataclass
class StrictnessReport:
    gaps: list[float]
    adjoint_gaps: list[float]
    tail_index: int
    max_gap: float
    note: str = "strictness: trivially satisfied"


def strictness_check(phi: CPMap, net: Sequence[AlgebraElement], p: Seminorm,
                     vectors: Sequence[ModuleVector], tol: float = 1e-10) -> StrictnessReport:
    """Consecutive strict-topology gaps of ``(phi(e_j))_j`` measured on sample vectors.

    ``tail_index`` is the 1-based index from which every later gap is below ``tol``.
    """
    validate_net(net, tol)
    ops = [phi(e) for e in net]
    gaps, adj = [], []
    for a, b in zip(ops, ops[1:]):
        diff = a - b
        gaps.append(max((vector_seminorm(op_apply(diff, v), p) for v in vectors), default=0.0))
        adj.append(max((vector_seminorm(op_apply(diff.H, v), p) for v in vectors), default=0.0))
    tail = len(net)
    for j in range(len(gaps), 0, -1):
        if max(gaps[j - 1], adj[j - 1]) >= tol:
            break
        tail = j
    return StrictnessReport(gaps, adj, tail, max(gaps + adj, default=0.0))


# --- continuity constants ------------------------------------------------------------

def continuity_constants(phi: CPMap, p: Seminorm, tol: float = 1e-10) -> tuple[Seminorm, float, bool]:
    """``(r, d_p, tight)`` with ``||phi(x)||_p <= d_p r(x)`` and ``r`` the full seminorm of ``B``.

    For CP maps the norm is attained at the unit, so ``d_p = ||phi(1)||_p`` is
    exact.  Otherwise a Frobenius-based upper bound is returned and ``tight``
    is False.
    """
    r = phi.domain.full_support()
    if is_completely_positive(phi, tol):
        return r, op_seminorm(phi(AlgebraElement.identity(phi.domain)), p), True
    nmax = max(phi.domain.component_dims)
    bound = 0.0
    for i in p.support:
        M = phi.values[i].reshape(phi.domain.dim, -1).T
        bound = max(bound, spectral_norm(M) * np.sqrt(nmax))
    return r, float(bound), False


@dataclass
class QuotientRepresentation:
    support: tuple[int, ...]
    images: list[tuple[np.ndarray, ...]]
    star_residual: float
    norm: float


def representation_quotient(pi: AlgebraRepresentation, p: Seminorm) -> QuotientRepresentation:
    """``pi_p(b) = pi(b)_p``: keep the codomain components in the support of ``p``."""
    images = [tuple(img[i] for i in p.support) for img in pi.images]
    qpi = AlgebraRepresentation(pi.domain, images)
    units = pi.domain.matrix_units()
    worst = 0.0
    for u in units:
        e = AlgebraElement.matrix_unit(pi.domain, *u)
        for a, b in zip(qpi(involution(e)), qpi(e)):
            worst = max(worst, spectral_norm(a - b.conj().T))
        for u2 in units:
            f = AlgebraElement.matrix_unit(pi.domain, *u2)
            for a, b, c in zip(qpi(multiply(e, f)), qpi(e), qpi(f)):
                worst = max(worst, spectral_norm(a - b @ c))
    one = AlgebraElement.identity(pi.domain)
    norm = max((spectral_norm(x) for x in qpi(one)), default=0.0)
    return QuotientRepresentation(p.support, images, worst, norm)
