"""Operator-valued kernels on finite sets and the inequalities they satisfy.

A kernel ``k: X x X -> L*(A^m)`` is stored per algebra component ``i`` as a
complex array of shape ``(N, N, m n_i, m n_i)``.  Its Gram block is the
``(N m n_i)``-square matrix whose ``(y, x)`` block is ``k(y, x)_i``; for a
finitely supported ``g`` stacked into ``G_i``-coordinates the pairing
``sum_{x,y} [k(y,x) g(x), h(y)]`` is ``g_i^* G_i^* h_i``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .algebra import (DEFAULT_TOL, AlgebraElement, AlgebraShape, Seminorm, as_shape,
                      spectral_norm)
from .errors import (InconsistentOrbit, NotPositive, NotPSD, NotTwoPositive,
                     ShapeMismatch)
from .module import (AdjointableOp, ModuleVector, gramian, op_apply, op_is_positive,
                     op_seminorm, random_vector, vector_seminorm)
from .semigroup import UNDEFINED, Action, StarSemigroup, Verdict


@dataclass(frozen=True, eq=False)
class OperatorKernel:
    shape: AlgebraShape
    m: int
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        shape = as_shape(self.shape)
        object.__setattr__(self, "shape", shape)
        vals = tuple(np.asarray(v, dtype=complex) for v in self.values)
        if len(vals) != shape.s:
            raise ShapeMismatch(f"expected {shape.s} component arrays, got {len(vals)}")
        n_pts = vals[0].shape[0]
        for v, n in zip(vals, shape.component_dims):
            d = self.m * n
            if v.shape != (n_pts, n_pts, d, d):
                raise ShapeMismatch(f"kernel component of shape {v.shape}, expected {(n_pts, n_pts, d, d)}")
        object.__setattr__(self, "values", vals)

    @property
    def n_points(self) -> int:
        return self.values[0].shape[0]

    def block_dims(self) -> list[int]:
        return [self.m * n for n in self.shape.component_dims]

    def __call__(self, x: int, y: int) -> AdjointableOp:
        return AdjointableOp(self.shape, self.m, tuple(v[x, y] for v in self.values))

    @classmethod
    def from_ops(cls, ops: Sequence[Sequence[AdjointableOp]]) -> "OperatorKernel":
        first = ops[0][0]
        vals = tuple(np.array([[ops[x][y].blocks[i] for y in range(len(ops))] for x in range(len(ops))])
                     for i in range(first.shape.s))
        return cls(first.shape, first.m, vals)

    @classmethod
    def scalar(cls, matrix) -> "OperatorKernel":
        """A kernel with values in ``C = M_1``, on ``A = C``, ``m = 1``."""
        a = np.asarray(matrix, dtype=complex)
        return cls(AlgebraShape((1,)), 1, (a[:, :, None, None],))

    @classmethod
    def from_gram(cls, shape, m: int, grams: Sequence[np.ndarray]) -> "OperatorKernel":
        shape = as_shape(shape)
        vals = []
        for g, n in zip(grams, shape.component_dims):
            d = m * n
            n_pts = g.shape[0] // d
            vals.append(np.asarray(g, complex).reshape(n_pts, d, n_pts, d).transpose(0, 2, 1, 3))
        return cls(shape, m, tuple(vals))

    def __mul__(self, scalar):
        return OperatorKernel(self.shape, self.m, tuple(scalar * v for v in self.values))

    __rmul__ = __mul__

    def adjoint(self) -> "OperatorKernel":
        """``k^*(x, y) = k(y, x)^*``."""
        return OperatorKernel(self.shape, self.m, tuple(v.transpose(1, 0, 3, 2).conj() for v in self.values))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.shape.component_dims, self.m, self.n_points)).encode())
        for v in self.values:
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()


def gram_block(k: OperatorKernel) -> tuple[np.ndarray, ...]:
    out = []
    for v in k.values:
        n_pts, _, d, _ = v.shape
        out.append(v.transpose(0, 2, 1, 3).reshape(n_pts * d, n_pts * d))
    return tuple(out)


def stack(k: OperatorKernel, h: Mapping[int, ModuleVector] | Sequence[ModuleVector]) -> tuple[np.ndarray, ...]:
    """Stack a finitely supported ``X -> H`` function into Gram coordinates."""
    items = h.items() if isinstance(h, Mapping) else enumerate(h)
    out = [np.zeros((k.n_points * d, n), complex) for d, n in zip(k.block_dims(), k.shape.component_dims)]
    for x, vec in items:
        for i, d in enumerate(k.block_dims()):
            out[i][x * d:(x + 1) * d] += vec.blocks[i]
    return tuple(out)


def pairing(k: OperatorKernel, g: Mapping[int, ModuleVector], h: Mapping[int, ModuleVector]) -> AlgebraElement:
    """``[g, h]_k = sum_{x,y} [k(y, x) g(x), h(y)]``, evaluated by a direct double sum."""
    total = AlgebraElement.zeros(k.shape)
    for x, gx in g.items():
        for y, hy in h.items():
            total = total + gramian(op_apply(k(y, x), gx), hy)
    return total


def positive_form(k: OperatorKernel, points: Sequence[int], vectors: Sequence[ModuleVector]) -> AlgebraElement:
    """``sum_{i,j} [k(x_i, x_j) h_j, h_i]`` for an arbitrary finite list of points."""
    total = AlgebraElement.zeros(k.shape)
    for i, xi in enumerate(points):
        for j, xj in enumerate(points):
            total = total + gramian(op_apply(k(xi, xj), vectors[j]), vectors[i])
    return total


def hermitian_residual(k: OperatorKernel) -> float:
    """``max ||k(x,y)^* - k(y,x)||`` over all pairs and components."""
    return max(float(np.abs(v - v.transpose(1, 0, 3, 2).conj()).max(initial=0.0)) for v in k.values)


def is_hermitian(k: OperatorKernel, tol: float = DEFAULT_TOL) -> bool:
    scale = 1.0 + max(spectral_norm(g) for g in gram_block(k))
    return hermitian_residual(k) <= tol * scale


def min_relative_eigenvalue(k: OperatorKernel) -> float:
    """``min_i lambda_min(G_i) / (1 + max|lambda(G_i)|)`` over the Hermitian parts."""
    worst = np.inf
    for g in gram_block(k):
        if g.size == 0:
            continue
        lam = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
        worst = min(worst, lam[0] / (1.0 + np.abs(lam).max()))
    return float(worst)


def is_positive_semidefinite(k: OperatorKernel, tol: float = DEFAULT_TOL) -> bool:
    if not is_hermitian(k, tol):
        return False
    return min_relative_eigenvalue(k) >= -tol


def _require_psd(k: OperatorKernel, tol: float = 1e-8) -> None:
    if not is_positive_semidefinite(k, tol):
        raise NotPSD("kernel is not positive semidefinite")


def invariance_scan(k: OperatorKernel, sg: StarSemigroup, act: Action):
    """Largest residual of ``k(y, xi.x) - k(xi^*.y, x)`` and its triple ``(xi, x, y)``.

    Triples for which either side leaves a finite window are skipped.
    """
    if act.n_points != k.n_points:
        raise ShapeMismatch(f"action on {act.n_points} points, kernel on {k.n_points}")
    worst, where = 0.0, None
    T = act.table
    for xi in range(sg.order):
        xs = sg.star[xi]
        for x in range(k.n_points):
            ux = T[xi, x]
            if ux == UNDEFINED:
                continue
            for y in range(k.n_points):
                uy = T[xs, y]
                if uy == UNDEFINED:
                    continue
                r = max(float(np.abs(v[y, ux] - v[uy, x]).max()) for v in k.values)
                if r > worst:
                    worst, where = r, (xi, x, y)
    return worst, where


def is_invariant(k: OperatorKernel, sg: StarSemigroup, act: Action, tol: float = DEFAULT_TOL) -> Verdict:
    scale = 1.0 + max(float(np.abs(v).max(initial=0.0)) for v in k.values)
    worst, where = invariance_scan(k, sg, act)
    if worst <= tol * scale:
        return Verdict(True)
    return Verdict(False, f"invariance residual {worst:.3e} at (xi, x, y) = {where}", where)


@dataclass
class TwoPositiveReport:
    hermitian_residual: float
    zero_points: list[int]
    support_points: list[int]
    max_zero_row: float


def two_positive_structure(k: OperatorKernel, tol: float = DEFAULT_TOL) -> TwoPositiveReport:
    """Partition ``X = X_0 u X_1`` with ``X_0 = {x : k(x, x) = 0}`` for a 2-positive kernel."""
    n_pts = k.n_points
    scale = 1.0 + max(float(np.abs(v).max(initial=0.0)) for v in k.values)
    for x in range(n_pts):
        for y in range(x, n_pts):
            for v in k.values:
                blk = np.block([[v[x, x], v[x, y]], [v[y, x], v[y, y]]])
                herm = spectral_norm(blk - blk.conj().T)
                lam = np.linalg.eigvalsh(0.5 * (blk + blk.conj().T))[0]
                if herm > tol * scale or lam < -tol * scale:
                    raise NotTwoPositive(f"2x2 block at points ({x}, {y}) is not positive")
    zero = [x for x in range(n_pts)
            if max(float(np.abs(v[x, x]).max(initial=0.0)) for v in k.values) <= tol * scale]
    rest = [x for x in range(n_pts) if x not in zero]
    row = max((float(np.abs(v[x]).max(initial=0.0)) for v in k.values for x in zero), default=0.0)
    return TwoPositiveReport(hermitian_residual(k), zero, rest, row)


# --- single positive operators ------------------------------------------------

def _require_positive(T: AdjointableOp, tol: float = 1e-8) -> None:
    if not op_is_positive(T, tol):
        raise NotPositive("operator is not positive")


def krld_constant(T: AdjointableOp, p: Seminorm) -> float:
    """Constant ``C`` with ``p([Th, h]) <= C p([h, h])`` for a positive ``T``.

    ``p``-seminorms are submultiplicative, so ``T`` is m-topologisable with
    ``D_p = ||T_p||`` and the iteration gives ``C = D_p``.
    """
    _require_positive(T)
    return op_seminorm(T, p)


def _draw(T_or_k, rng, samples):
    if isinstance(samples, int):
        return [random_vector(T_or_k.shape, T_or_k.m, rng) for _ in range(samples)]
    return list(samples)


def krld_check(T: AdjointableOp, p: Seminorm, samples, rng=None) -> tuple[float, float]:
    """``(C, max_h p([Th,h]) - C p([h,h]))`` over the samples."""
    C = krld_constant(T, p)
    worst = -np.inf
    for h in _draw(T, rng, samples):
        worst = max(worst, p(gramian(op_apply(T, h), h)) - C * p(gramian(h, h)))
    return C, float(worst)


def mtop_witness(T: AdjointableOp, p: Seminorm, n_max: int, samples=32, rng=None) -> tuple[float, float]:
    """``D_p`` and the largest relative excess of ``p~(T^n h)`` over ``D_p^n p~(h)``."""
    D = op_seminorm(T, p)
    worst = 0.0
    for h in _draw(T, rng, samples):
        base = vector_seminorm(h, p)
        cur = h
        for n in range(1, n_max + 1):
            cur = op_apply(T, cur)
            bound = D ** n * base
            excess = vector_seminorm(cur, p) - bound
            worst = max(worst, excess / (bound if bound > 0 else 1.0))
    return D, float(worst)


def pos_schwarz_check(T: AdjointableOp, p: Seminorm, samples, rng=None) -> float:
    """Largest ``p([Th,h]) - p([Th,Th])^{1/2} p([h,h])^{1/2}``."""
    _require_positive(T)
    worst = -np.inf
    for h in _draw(T, rng, samples):
        Th = op_apply(T, h)
        worst = max(worst, p(gramian(Th, h)) - np.sqrt(p(gramian(Th, Th)) * p(gramian(h, h))))
    return float(worst)


# --- kernel inequalities --------------------------------------------------------

def _convolve_at(k: OperatorKernel, x: int, ys: Sequence[int], hs: Sequence[ModuleVector]) -> ModuleVector:
    g = ModuleVector.zeros(k.shape, k.m)
    for y, h in zip(ys, hs):
        g = g + op_apply(k(x, y), h)
    return g


def kernel_schwarz_terms(k: OperatorKernel, x: int, ys: Sequence[int], hs: Sequence[ModuleVector],
                         p: Seminorm) -> tuple[float, float, float]:
    """The three seminorm values in the Schwarz inequality for a psd kernel.

    Returns ``(lhs, middle, right)`` where the inequality reads
    ``lhs <= middle^{1/2} right^{1/2}``.
    """
    g = _convolve_at(k, x, ys, hs)
    lhs = p(gramian(g, g))
    middle = p(gramian(op_apply(k(x, x), g), g))
    right = p(positive_form(k, ys, hs))
    return lhs, middle, right


def kernel_schwarz_check(k: OperatorKernel, x: int, ys, hs, p: Seminorm, atol: float = 1e-10) -> bool:
    _require_psd(k)
    lhs, middle, right = kernel_schwarz_terms(k, x, ys, hs, p)
    return lhs <= np.sqrt(middle * right) + atol


def b2_constant(k: OperatorKernel, x: int, p: Seminorm) -> float:
    """Tight ``c_p(x)`` in the evaluation bound, namely ``||k(x, x)_p||``."""
    _require_psd(k)
    return op_seminorm(k(x, x), p)


def propagation_check(k: OperatorKernel, x: int, y: int, p: Seminorm, samples=64, rng=None) -> tuple[float, float]:
    """``C = C_x C_y`` and the largest ``p([k(y,x)h, k(y,x)h]) - C p([h,h])``."""
    two_positive_structure(k, 1e-8)
    C = krld_constant(k(x, x), p) * krld_constant(k(y, y), p)
    K = k(y, x)
    worst = -np.inf
    for h in _draw(k, rng, samples):
        Kh = op_apply(K, h)
        worst = max(worst, p(gramian(Kh, Kh)) - C * p(gramian(h, h)))
    return C, float(worst)


# --- vectorised sampling ------------------------------------------------------------

def random_supported(k: OperatorKernel, rng: np.random.Generator, draws: int,
                     domain: Optional[np.ndarray] = None) -> tuple[np.ndarray, ...]:
    """Random finitely supported functions ``X -> H`` as stacked arrays, one per component.

    Each draw picks a random nonempty subset of points (of ``domain`` if given).
    """
    pts = np.arange(k.n_points) if domain is None else np.asarray(domain)
    mask = np.zeros((draws, k.n_points), bool)
    for s in range(draws):
        n = rng.integers(1, len(pts) + 1)
        mask[s, rng.choice(pts, size=n, replace=False)] = True
    out = []
    for d, n in zip(k.block_dims(), k.shape.component_dims):
        h = rng.standard_normal((draws, k.n_points, d, n)) + 1j * rng.standard_normal((draws, k.n_points, d, n))
        h *= mask[:, :, None, None]
        out.append(h.reshape(draws, k.n_points * d, n))
    return tuple(out)


def batched_seminorm(forms: Sequence[np.ndarray], p: Seminorm) -> np.ndarray:
    """``p`` applied to a batch of algebra elements given per component as ``(S, n, n)`` arrays."""
    return np.max([np.linalg.norm(forms[i], ord=2, axis=(1, 2)) for i in p.support], axis=0)


def quadratic_forms(grams: Sequence[np.ndarray], hs: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.einsum("sai,ab,sbj->sij", h.conj(), g, h) for g, h in zip(grams, hs)]


def b2_ratio_sweep(k: OperatorKernel, x: int, p: Seminorm, rng: np.random.Generator,
                   draws: int = 10_000) -> float:
    """Largest sampled ``p(sum [k(x,y_i)h_i, k(x,y_j)h_j]) / p(sum [k(y_j,y_i)h_i, h_j])``."""
    grams = gram_block(k)
    hs = random_supported(k, rng, draws)
    lhs_forms, rhs_forms = [], []
    for g, h, d in zip(grams, hs, k.block_dims()):
        row = g[x * d:(x + 1) * d]
        conv = np.einsum("ab,sbj->saj", row, h)
        lhs_forms.append(np.einsum("sai,saj->sij", conv.conj(), conv))
        rhs_forms.append(np.einsum("sai,ab,sbj->sij", h.conj(), g, h))
    lhs = batched_seminorm(lhs_forms, p)
    rhs = batched_seminorm(rhs_forms, p)
    keep = rhs > 1e-12 * max(1.0, rhs.max())
    return float((lhs[keep] / rhs[keep]).max(initial=0.0))


# --- generator --------------------------------------------------------------------------

def make_invariant_kernel(sg: StarSemigroup, act: Action, shape, m: int,
                          rho: Sequence[Sequence[np.ndarray]],
                          seeds: Mapping[int, Sequence[np.ndarray]],
                          tol: float = 1e-9) -> OperatorKernel:
    """``k(x, y) = V(x)^* V(y)`` with ``V(xi.x) = rho(xi) V(x)`` propagated from seed points.

    ``rho[xi][i]`` is an ``r_i x r_i`` matrix and ``seeds[x][i]`` an ``r_i x (m n_i)``
    matrix.  Every point must be reached from a seed.
    """
    shape = as_shape(shape)
    V: dict[int, list[np.ndarray]] = {x: [np.asarray(b, complex) for b in vals] for x, vals in seeds.items()}
    queue = list(V)
    while queue:
        x = queue.pop(0)
        for xi in range(sg.order):
            y = int(act.table[xi, x])
            if y == UNDEFINED:
                continue
            img = [np.asarray(rho[xi][i]) @ V[x][i] for i in range(shape.s)]
            if y in V:
                err = max(float(np.abs(a - b).max(initial=0.0)) for a, b in zip(img, V[y]))
                if err > tol * (1.0 + max(float(np.abs(b).max(initial=0.0)) for b in V[y])):
                    raise InconsistentOrbit(f"point {y} reached with conflicting values (via {xi} . {x})")
            else:
                V[y] = img
                queue.append(y)
    missing = [x for x in range(act.n_points) if x not in V]
    if missing:
        raise InconsistentOrbit(f"points {missing} are not reached from any seed")
    vals = []
    for i in range(shape.s):
        stacked = np.stack([V[x][i] for x in range(act.n_points)])
        vals.append(np.einsum("xra,yrb->xyab", stacked.conj(), stacked))
    return OperatorKernel(shape, m, tuple(vals))
