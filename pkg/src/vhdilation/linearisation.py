"""Minimal Kolmogorov linearisations of positive semidefinite kernels.

For every component ``i`` the Gram block factors as ``G_i = F_i^* F_i`` with
``F_i`` of full row rank ``d_i``.  The minimal module ``K`` is realised per
component as ``d_i x n_i`` complex matrices with gramian ``u^* v``, and
``V(x)`` is the ``x``-th block column of ``F``.  A *-semigroup acting on the
points acts on ``K`` by ``pi(xi) = F T(xi) F^+``, where ``T(xi)`` relocates the
block of ``x`` to the block of ``xi . x``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import AlgebraShape, Seminorm, as_shape, spectral_norm
from .errors import (NonInvariantKernel, NotEquivalent, NotPSD, PartialActionError,
                     ShapeMismatch)
from .kernel import (OperatorKernel, batched_seminorm, gram_block, invariance_scan,
                     is_positive_semidefinite, random_supported)
from .semigroup import UNDEFINED, Action, StarSemigroup

log = logging.getLogger(__name__)

ROUTES = ("eig", "cholesky")


def _normalise_phase(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible entry of every column real and positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())
        if big.size:
            z = col[big[0]]
            out[:, j] = col * (abs(z) / z)
    return out


def eig_factor(G: np.ndarray, tol: float) -> np.ndarray:
    """``F`` with ``F^* F = G`` after clamping eigenvalues below ``tol * lambda_max``."""
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0), complex)
    lam, vecs = np.linalg.eigh(0.5 * (G + G.conj().T))
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    top = lam[0]
    if top <= 0:
        return np.zeros((0, n), complex)
    keep = lam >= tol * top
    vecs = _normalise_phase(vecs[:, keep])
    return np.sqrt(lam[keep])[:, None] * vecs.conj().T


def pivoted_cholesky(G: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Outer-product pivoted Cholesky of a Hermitian psd matrix.

    Returns ``(L, piv)`` with ``G[piv][:, piv] ~= L L^*``.  Elimination stops
    when the largest remaining diagonal entry falls below ``tol * max(diag G)``.
    """
    A = np.array(0.5 * (G + G.conj().T), dtype=complex)
    n = A.shape[0]
    piv = np.arange(n)
    L = np.zeros((n, n), complex)
    if n == 0:
        return L, piv
    diag = A.diagonal().real.copy()
    stop = tol * max(diag.max(), 0.0)
    r = 0
    for r in range(n):
        j = r + int(np.argmax(diag[r:]))
        if diag[j] <= stop or diag[j] <= 0:
            break
        if j != r:
            A[[r, j]] = A[[j, r]]
            A[:, [r, j]] = A[:, [j, r]]
            L[[r, j]] = L[[j, r]]
            diag[[r, j]] = diag[[j, r]]
            piv[[r, j]] = piv[[j, r]]
        pivot = np.sqrt(diag[r])
        L[r, r] = pivot
        col = (A[r + 1:, r] - L[r + 1:, :r] @ L[r, :r].conj()) / pivot
        L[r + 1:, r] = col
        diag[r + 1:] -= np.abs(col) ** 2
    else:
        r = n
    return L[:, :r], piv


def cholesky_factor(G: np.ndarray, tol: float) -> np.ndarray:
    L, piv = pivoted_cholesky(G, tol)
    PL = np.zeros_like(L)
    PL[piv] = L
    return PL.conj().T


def _pinv(F: np.ndarray) -> np.ndarray:
    if F.shape[0] == 0:
        return np.zeros((F.shape[1], 0), complex)
    return np.linalg.pinv(F)


@dataclass(eq=False)
class Linearisation:
    shape: AlgebraShape
    m: int
    n_points: int
    factors: tuple[np.ndarray, ...]
    tol: float
    kernel_digest: str = ""
    route: str = "eig"

    def __post_init__(self):
        self.shape = as_shape(self.shape)
        self.factors = tuple(np.asarray(f, complex) for f in self.factors)
        for f, d in zip(self.factors, self.block_dims()):
            if f.ndim != 2 or f.shape[1] != self.n_points * d:
                raise ShapeMismatch(f"factor of shape {f.shape} does not match {self.n_points} points x {d}")

    def block_dims(self) -> list[int]:
        return [self.m * n for n in self.shape.component_dims]

    @property
    def dims(self) -> list[int]:
        return [f.shape[0] for f in self.factors]

    def v_of(self, x: int) -> tuple[np.ndarray, ...]:
        """``V(x)`` per component, a ``d_i x (m n_i)`` block."""
        return tuple(f[:, x * d:(x + 1) * d] for f, d in zip(self.factors, self.block_dims()))

    def pinvs(self) -> tuple[np.ndarray, ...]:
        return tuple(_pinv(f) for f in self.factors)

    def reconstructed_kernel(self) -> OperatorKernel:
        return OperatorKernel.from_gram(self.shape, self.m, [f.conj().T @ f for f in self.factors])


def kolmogorov(k: OperatorKernel, tol: float = 1e-10, route: str = "eig",
               psd_tol: Optional[float] = None) -> Linearisation:
    """Minimal linearisation ``k(y, x) = V(y)^* V(x)`` of a psd kernel."""
    if route not in ROUTES:
        raise ValueError(f"unknown factorisation route {route!r}")
    psd_tol = max(tol, 1e-10) if psd_tol is None else psd_tol
    if not is_positive_semidefinite(k, psd_tol):
        raise NotPSD("kernel has a negative eigenvalue beyond tolerance")
    factor = eig_factor if route == "eig" else cholesky_factor
    factors = tuple(factor(G, tol) for G in gram_block(k))
    lin = Linearisation(k.shape, k.m, k.n_points, factors, tol, k.digest(), route)
    log.debug("kolmogorov(%s): dims %s", route, lin.dims)
    return lin


def reconstruction_residual(lin: Linearisation, k: OperatorKernel) -> float:
    """``max_{x,y,i} ||V(y)^* V(x) - k(y, x)||_F``."""
    worst = 0.0
    for f, v, d in zip(lin.factors, k.values, lin.block_dims()):
        n_pts = lin.n_points
        blocks = f.reshape(f.shape[0], n_pts, d)
        rec = np.einsum("ryc,rxe->yxce", blocks.conj(), blocks)
        if rec.size:
            worst = max(worst, float(np.sqrt((np.abs(rec - v) ** 2).sum(axis=(2, 3))).max()))
    return worst


def gram_norm(k: OperatorKernel) -> float:
    return max(spectral_norm(G) for G in gram_block(k))


def kolmogorov_ok(lin: Linearisation, k: OperatorKernel) -> bool:
    return reconstruction_residual(lin, k) <= 10 * lin.tol * max(gram_norm(k), 1e-300) + 1e-300


# --- induced *-representation -----------------------------------------------------

@dataclass(eq=False)
class Representation:
    """``images[xi][i]`` is the ``d_i x d_i`` matrix of ``pi(xi)`` on component ``i``."""

    sg: StarSemigroup
    images: list[tuple[np.ndarray, ...]]
    consistency: list[float] = field(default_factory=list)

    def __call__(self, xi: int) -> tuple[np.ndarray, ...]:
        return self.images[xi]


def _relocated(lin: Linearisation, act: Action, xi: int) -> tuple[np.ndarray, ...]:
    """``F T(xi)``: block column ``x`` replaced by block column ``xi . x``."""
    cols = act.table[xi]
    out = []
    for f, d in zip(lin.factors, lin.block_dims()):
        blocks = f.reshape(f.shape[0], lin.n_points, d)
        out.append(blocks[:, cols, :].reshape(f.shape[0], lin.n_points * d))
    return tuple(out)


def induce_representation(lin: Linearisation, sg: StarSemigroup, act: Action,
                          tol: float = 1e-8) -> Representation:
    if act.is_partial:
        raise PartialActionError("a *-representation needs an action defined on every point")
    if act.n_points != lin.n_points:
        raise ShapeMismatch("action and linearisation disagree on the number of points")
    pinvs = lin.pinvs()
    images, consistency = [], []
    for xi in range(sg.order):
        FT = _relocated(lin, act, xi)
        img, worst = [], 0.0
        for ft, f, fp in zip(FT, lin.factors, pinvs):
            pi = ft @ fp
            resid = spectral_norm(ft - pi @ f)
            worst = max(worst, resid / max(spectral_norm(f), 1e-300))
            img.append(pi)
        if worst > tol:
            _raise_non_invariant(lin, sg, act, f"pi({sg.names[xi]}) is not well defined", worst)
        images.append(tuple(img))
        consistency.append(worst)
    # with pi well defined, invariance is equivalent to pi(xi^*) = pi(xi)^*
    for xi in range(sg.order):
        for a, b in zip(images[sg.star[xi]], images[xi]):
            r = spectral_norm(a - b.conj().T) / (1.0 + spectral_norm(b))
            if r > tol:
                _raise_non_invariant(lin, sg, act, f"pi({sg.names[sg.star[xi]]}) != pi({sg.names[xi]})^*", r)
    return Representation(sg, images, consistency)


def _raise_non_invariant(lin: Linearisation, sg: StarSemigroup, act: Action, what: str, resid: float):
    r, triple = invariance_scan(lin.reconstructed_kernel(), sg, act)
    raise NonInvariantKernel(f"{what} (residual {resid:.3e}); largest invariance defect "
                             f"{r:.3e} at (xi, x, y) = {triple}", triple, resid)


@dataclass
class StarRepReport:
    multiplicative: float
    adjoint: float
    worst_product: Optional[tuple] = None
    worst_adjoint: Optional[int] = None

    def ok(self, tol: float) -> bool:
        return self.multiplicative <= tol and self.adjoint <= tol


def verify_star_rep(rep: Representation, tol: float = 1e-8) -> StarRepReport:
    sg = rep.sg
    mult, where = 0.0, None
    for a in range(sg.order):
        for b in range(sg.order):
            ab = sg.mult[a, b]
            if ab == UNDEFINED:
                continue
            r = max((spectral_norm(p - q @ s) for p, q, s in zip(rep(ab), rep(a), rep(b))), default=0.0)
            if r > mult:
                mult, where = r, (a, b)
    adj, worst_adj = 0.0, None
    for a in range(sg.order):
        r = max((spectral_norm(p - q.conj().T) for p, q in zip(rep(sg.star[a]), rep(a))), default=0.0)
        if r > adj:
            adj, worst_adj = r, a
    return StarRepReport(mult, adj, where, worst_adj)


def intertwining_residual(lin: Linearisation, rep: Representation, act: Action) -> float:
    """``max ||pi(xi) V(x) - V(xi . x)||``."""
    worst = 0.0
    for xi in range(rep.sg.order):
        for x in range(lin.n_points):
            y = act.table[xi, x]
            for pi, vx, vy in zip(rep(xi), lin.v_of(x), lin.v_of(y)):
                worst = max(worst, spectral_norm(pi @ vx - vy))
    return worst


# --- boundedness condition (b1) ---------------------------------------------------------

def b1_constant_exact(lin: Linearisation, rep: Representation, xi: int, p: Seminorm) -> float:
    """Tight ``c_p(xi) = max_{i in J} ||pi(xi)_i||^2``."""
    p.check(lin.shape)
    return max(spectral_norm(rep(xi)[i]) ** 2 for i in p.support)


def _shifted_gram(G: np.ndarray, n_pts: int, d: int, cols: np.ndarray) -> np.ndarray:
    """Gram of the points ``cols``: block ``(a, b)`` is ``G(cols[a], cols[b])``."""
    B = G.reshape(n_pts, d, n_pts, d)
    return B[np.ix_(cols, range(d), cols, range(d))].reshape(len(cols) * d, len(cols) * d)


def shifted_b1_constant(k: OperatorKernel, act: Action, xi: int, p: Seminorm,
                        tol: float = 1e-10) -> float:
    """Smallest ``c`` with ``p(sum [k(xi.x_i, xi.x_j) h_j, h_i]) <= c p(sum [k(x_i, x_j) h_j, h_i])``.

    Computed from the Gram blocks alone, so it applies to partial (window)
    actions, where only points with ``xi . x`` defined take part.  Returns
    ``inf`` when the shifted form does not vanish on the null space.
    """
    p.check(k.shape)
    dom = np.flatnonzero(act.table[xi] != UNDEFINED)
    img = act.table[xi, dom]
    best = 0.0
    for i in p.support:
        G = gram_block(k)[i]
        d = k.block_dims()[i]
        G0 = _shifted_gram(G, k.n_points, d, dom)
        G1 = _shifted_gram(G, k.n_points, d, img)
        F = eig_factor(G0, tol)
        if F.shape[0] == 0:
            if spectral_norm(G1) > tol * (1.0 + spectral_norm(G)):
                return float("inf")
            continue
        Fp = _pinv(F)
        P_null = np.eye(G0.shape[0]) - Fp @ F
        if spectral_norm(G1 @ P_null) > 1e-8 * (1.0 + spectral_norm(G1)):
            return float("inf")
        M = Fp.conj().T @ G1 @ Fp
        best = max(best, float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[-1]))
    return best


def b1_ratio_sweep(k: OperatorKernel, act: Action, xi: int, p: Seminorm,
                   rng: np.random.Generator, draws: int = 10_000) -> float:
    """Largest sampled ratio of the shifted Gram form to the Gram form under ``p``."""
    dom = np.flatnonzero(act.table[xi] != UNDEFINED)
    if dom.size == 0:
        return 0.0
    hs = random_supported(k, rng, draws, domain=dom)
    lhs_forms, rhs_forms = [], []
    cols = np.where(act.table[xi] == UNDEFINED, 0, act.table[xi])
    for G, h, d in zip(gram_block(k), hs, k.block_dims()):
        G1 = _shifted_gram(G, k.n_points, d, cols)
        lhs_forms.append(np.einsum("sai,ab,sbj->sij", h.conj(), G1, h))
        rhs_forms.append(np.einsum("sai,ab,sbj->sij", h.conj(), G, h))
    lhs = batched_seminorm(lhs_forms, p)
    rhs = batched_seminorm(rhs_forms, p)
    keep = rhs > 1e-12 * max(1.0, rhs.max())
    return float((lhs[keep] / rhs[keep]).max(initial=0.0))


# --- uniqueness ---------------------------------------------------------------------------

@dataclass
class Intertwiner:
    blocks: tuple[np.ndarray, ...]
    isometry: float
    coisometry: float
    intertwining: float
    representation: float = 0.0


def unitary_equivalence(lin1: Linearisation, lin2: Linearisation, tol: float = 1e-8,
                        rep1: Optional[Representation] = None,
                        rep2: Optional[Representation] = None) -> Intertwiner:
    """``U`` with ``U V_1(x) = V_2(x)``; raises :class:`NotEquivalent` on any residual above ``tol``."""
    if (lin1.shape, lin1.m, lin1.n_points) != (lin2.shape, lin2.m, lin2.n_points):
        raise NotEquivalent("linearisations of kernels on different spaces")
    if lin1.dims != lin2.dims:
        raise NotEquivalent(f"dimensions differ: {lin1.dims} vs {lin2.dims}")
    blocks = []
    iso = coiso = inter = 0.0
    for f1, f2 in zip(lin1.factors, lin2.factors):
        U = f2 @ _pinv(f1)
        eye = np.eye(U.shape[0])
        iso = max(iso, spectral_norm(U.conj().T @ U - eye))
        coiso = max(coiso, spectral_norm(U @ U.conj().T - eye))
        scale = max(spectral_norm(f2), 1.0)
        inter = max(inter, spectral_norm(U @ f1 - f2) / scale)
        blocks.append(U)
    rep_resid = 0.0
    if rep1 is not None and rep2 is not None:
        for xi in range(rep1.sg.order):
            for U, a, b in zip(blocks, rep1(xi), rep2(xi)):
                rep_resid = max(rep_resid, spectral_norm(U @ a - b @ U))
    result = Intertwiner(tuple(blocks), iso, coiso, inter, rep_resid)
    worst = max(iso, coiso, inter, rep_resid)
    if worst > tol:
        raise NotEquivalent(f"linearisations are not unitarily equivalent (residual {worst:.3e})")
    return result


# --- reproducing kernel view -------------------------------------------------------------

class ReproducingSpace:
    """The space ``R = {V(.)^* f : f in K}`` of ``H``-valued functions on the points.

    Functions are stacked per component as ``(N m n_i) x n_i`` arrays; the
    gramian is transported from ``K``.
    """

    def __init__(self, lin: Linearisation):
        self.lin = lin
        self._pinv_adj = tuple(_pinv(f.conj().T) for f in lin.factors)

    def from_k(self, u: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
        """``f = V(.)^* u``."""
        return tuple(f.conj().T @ ui for f, ui in zip(self.lin.factors, u))

    def to_k(self, f: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
        """Coordinates in ``K`` of a function in ``R``, by least squares."""
        return tuple(pa @ fi for pa, fi in zip(self._pinv_adj, f))

    def evaluate(self, f: Sequence[np.ndarray], x: int) -> tuple[np.ndarray, ...]:
        return tuple(fi[x * d:(x + 1) * d] for fi, d in zip(f, self.lin.block_dims()))

    def section(self, x: int, h: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
        """``k_x h = k(., x) h``."""
        return tuple(f.conj().T @ (v @ hi) for f, v, hi in zip(self.lin.factors, self.lin.v_of(x), h))

    def gramian(self, f: Sequence[np.ndarray], g: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
        return tuple(a.conj().T @ b for a, b in zip(self.to_k(f), self.to_k(g)))

    def reproducing_residual(self, f, x: int, h) -> float:
        """``||[f(x), h]_H - [f, k_x h]_R||``."""
        lhs = [a.conj().T @ b for a, b in zip(self.evaluate(f, x), h)]
        rhs = self.gramian(f, self.section(x, h))
        return max((spectral_norm(a - b) for a, b in zip(lhs, rhs)), default=0.0)

    def evaluation_adjoint_residual(self, x: int, h) -> float:
        """Compare ``E_x^* h`` (the adjoint of ``f -> f(x)`` in ``K``-coordinates) with ``k_x h``."""
        adj = tuple(v @ hi for v, hi in zip(self.lin.v_of(x), h))
        sec = self.to_k(self.section(x, h))
        return max((spectral_norm(a - b) for a, b in zip(adj, sec)), default=0.0)

    def rho(self, sg: StarSemigroup, act: Action, xi: int, f) -> tuple[np.ndarray, ...]:
        """``(rho(xi) f)(y) = f(xi^* . y)``."""
        cols = act.table[sg.star[xi]]
        if (cols == UNDEFINED).any():
            raise PartialActionError("rho needs xi^* to act on every point")
        out = []
        for fi, d in zip(f, self.lin.block_dims()):
            blocks = fi.reshape(self.lin.n_points, d, -1)
            out.append(blocks[cols].reshape(fi.shape))
        return tuple(out)

    def rho_intertwining_residual(self, sg: StarSemigroup, act: Action, xi: int, x: int, h) -> float:
        """``||rho(xi) k_x h - k_{xi.x} h||``."""
        lhs = self.rho(sg, act, xi, self.section(x, h))
        rhs = self.section(int(act.table[xi, x]), h)
        return max((spectral_norm(a - b) for a, b in zip(lhs, rhs)), default=0.0)


def reproducing_space(lin: Linearisation) -> ReproducingSpace:
    return ReproducingSpace(lin)
