"""Seeded test-data generators: random psd kernels and invariant kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algebra import as_shape
from .kernel import OperatorKernel, make_invariant_kernel
from .semigroup import (Action, StarSemigroup, cyclic_group, cyclic_times_semilattice,
                        integer_window, left_regular_action, matrix_unit_monoid, semilattice,
                        trivial_group)

FAMILIES = ("trivial", "cyclic", "semilattice", "matrix_units", "cyclic_semilattice")


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_psd_kernel(shape, m: int, n_points: int, rng: np.random.Generator,
                      rank: Optional[int] = None) -> tuple[OperatorKernel, list[int]]:
    """``k = V^* V`` with ``V`` of ``rank`` rows per component (capped at the Gram size)."""
    shape = as_shape(shape)
    vals, ranks = [], []
    for n in shape.component_dims:
        d = m * n
        full = n_points * d
        r = int(rng.integers(1, full + 1)) if rank is None else min(rank, full)
        V = _cplx(rng, r, n_points, d) / np.sqrt(2 * r)
        vals.append(np.einsum("rxa,ryb->xyab", V.conj(), V))
        ranks.append(r)
    return OperatorKernel(shape, m, tuple(vals)), ranks


@dataclass
class InvariantFixture:
    sg: StarSemigroup
    act: Action
    kernel: OperatorKernel
    rho: list
    family: str


def family_semigroup(family: str, order: int = 4) -> StarSemigroup:
    if family == "trivial":
        return trivial_group()
    if family == "cyclic":
        return cyclic_group(order)
    if family == "semilattice":
        return semilattice()
    if family == "matrix_units":
        return matrix_unit_monoid()
    if family == "cyclic_semilattice":
        return cyclic_times_semilattice(max(order // 2, 1))
    raise ValueError(f"unknown semigroup family {family!r}")


def family_representation(family: str, sg: StarSemigroup, r: int, rng: np.random.Generator) -> list[np.ndarray]:
    """A *-representation of a standard family on ``C^r``, in a random orthonormal basis."""
    Q = random_unitary(r, rng)
    conj = lambda D: Q @ D @ Q.conj().T
    g = sg.order
    if family == "trivial":
        return [np.eye(r, dtype=complex)]
    if family == "cyclic":
        phases = np.exp(2j * np.pi * rng.integers(0, g, size=r) / g)
        return [conj(np.diag(phases ** j)) for j in range(g)]
    if family == "semilattice":
        mask = rng.integers(0, 2, size=r).astype(float)
        return [np.eye(r, dtype=complex), conj(np.diag(mask).astype(complex))]
    if family == "cyclic_semilattice":
        q = g // 2
        phases = np.exp(2j * np.pi * rng.integers(0, q, size=r) / q)
        mask = rng.integers(0, 2, size=r).astype(float)
        out = []
        for a in range(q):
            for s in range(2):
                out.append(conj(np.diag(phases ** a * (mask if s else 1.0)).astype(complex)))
        return out
    if family == "matrix_units":
        t = max(r // 2, 1) if r >= 2 else 0
        imgs = [np.eye(r, dtype=complex)]
        for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)):
            E = np.zeros((2, 2))
            E[i, j] = 1
            D = np.zeros((r, r), complex)
            D[:2 * t, :2 * t] = np.kron(E, np.eye(t))
            imgs.append(conj(D))
        imgs.append(np.zeros((r, r), complex))
        return imgs
    raise ValueError(f"unknown semigroup family {family!r}")


def invariant_fixture(family: str, shape, m: int, rng: np.random.Generator,
                      order: int = 4, rep_dim: int = 3) -> InvariantFixture:
    """An invariant kernel on ``X = Gamma`` (left regular action) from a random representation."""
    shape = as_shape(shape)
    sg = family_semigroup(family, order)
    act = left_regular_action(sg)
    reps = [family_representation(family, sg, rep_dim, rng) for _ in shape.component_dims]
    rho = [[reps[i][xi] for i in range(shape.s)] for xi in range(sg.order)]
    seed = [_cplx(rng, rep_dim, m * n) / np.sqrt(2 * rep_dim) for n in shape.component_dims]
    kernel = make_invariant_kernel(sg, act, shape, m, rho, {sg.unit: seed})
    return InvariantFixture(sg, act, kernel, rho, family)


def circulant_fixture(q: int, shape, m: int, rng: np.random.Generator) -> InvariantFixture:
    """``k(a, b) = f(b - a)`` on ``Z_q`` with ``f(j) = sum_l W_l w^{lj}``, ``W_l >= 0``."""
    shape = as_shape(shape)
    sg = cyclic_group(q)
    act = left_regular_action(sg)
    omega = np.exp(2j * np.pi / q)
    vals = []
    for n in shape.component_dims:
        d = m * n
        W = []
        for _ in range(q):
            S = _cplx(rng, d, d) / np.sqrt(2 * d)
            W.append(S.conj().T @ S)
        f = [sum(W[l] * omega ** (l * j) for l in range(q)) for j in range(q)]
        vals.append(np.array([[f[(b - a) % q] for b in range(q)] for a in range(q)]))
    return InvariantFixture(sg, act, OperatorKernel(shape, m, tuple(vals)), [], "circulant")


def kms_fixture(n_points: int, a: float) -> InvariantFixture:
    """Scalar kernel ``a^{|i - j|}`` on a window of ``Z`` with partial translations."""
    sg, act = integer_window(n_points)
    idx = np.arange(n_points)
    K = a ** np.abs(idx[:, None] - idx[None, :])
    return InvariantFixture(sg, act, OperatorKernel.scalar(K), [], "kms")


def weighted_window_kernel(n_points: int, a: float, r: float) -> OperatorKernel:
    """``w_i w_j a^{|i-j|}`` with ``w_i = r^i``; shifting one step towards 0 scales the Gram form by ``r^{-2}``."""
    idx = np.arange(n_points)
    w = r ** idx
    return OperatorKernel.scalar(np.outer(w, w) * a ** np.abs(idx[:, None] - idx[None, :]))
