"""Free Hilbert modules ``H = A^m`` and their adjointable operators.

Storage is per component ``i``: a vector is an ``(m n_i) x n_i`` matrix (the
``m`` entries stacked), an operator an ``(m n_i) x (m n_i)`` matrix acting by
left multiplication.  With that layout the gramian is ``[h, g]_i = h_i^* g_i``
and ``L*(A^m) = M_m(A)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import (DEFAULT_TOL, AlgebraElement, AlgebraShape, Seminorm,
                      matrix_is_positive, as_shape, spectral_norm)
from .errors import ShapeMismatch


def _check_blocks(shape: AlgebraShape, m: int, blocks, square: bool):
    blocks = tuple(np.asarray(b, dtype=complex) for b in blocks)
    if len(blocks) != shape.s:
        raise ShapeMismatch(f"expected {shape.s} component blocks, got {len(blocks)}")
    for b, n in zip(blocks, shape.component_dims):
        want = (m * n, m * n) if square else (m * n, n)
        if b.shape != want:
            raise ShapeMismatch(f"block of shape {b.shape}, expected {want}")
    return blocks


@dataclass(frozen=True, eq=False)
class ModuleVector:
    shape: AlgebraShape
    m: int
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", as_shape(self.shape))
        if self.m < 1:
            raise ShapeMismatch("module rank must be positive")
        object.__setattr__(self, "blocks", _check_blocks(self.shape, self.m, self.blocks, False))

    @classmethod
    def zeros(cls, shape, m: int) -> "ModuleVector":
        shape = as_shape(shape)
        return cls(shape, m, tuple(np.zeros((m * n, n), complex) for n in shape.component_dims))

    @classmethod
    def unit(cls, shape, m: int, k: int = 0) -> "ModuleVector":
        """The standard column with the algebra unit in entry ``k``."""
        shape = as_shape(shape)
        blocks = []
        for n in shape.component_dims:
            b = np.zeros((m * n, n), complex)
            b[k * n:(k + 1) * n, :] = np.eye(n)
            blocks.append(b)
        return cls(shape, m, tuple(blocks))

    @classmethod
    def from_entries(cls, entries: Sequence[AlgebraElement]) -> "ModuleVector":
        shape = entries[0].shape
        if any(e.shape != shape for e in entries):
            raise ShapeMismatch("module entries of different shapes")
        blocks = tuple(np.vstack([e.components[i] for e in entries]) for i in range(shape.s))
        return cls(shape, len(entries), blocks)

    def entries(self) -> list[AlgebraElement]:
        out = []
        for k in range(self.m):
            out.append(AlgebraElement(self.shape, tuple(
                b[k * n:(k + 1) * n, :] for b, n in zip(self.blocks, self.shape.component_dims))))
        return out

    def _check(self, other) -> None:
        if self.shape != other.shape or self.m != other.m:
            raise ShapeMismatch("module vectors live in different modules")

    def __add__(self, other):
        self._check(other)
        return ModuleVector(self.shape, self.m, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other):
        self._check(other)
        return ModuleVector(self.shape, self.m, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __mul__(self, scalar):
        return ModuleVector(self.shape, self.m, tuple(scalar * b for b in self.blocks))

    __rmul__ = __mul__

    def right_mul(self, a: AlgebraElement) -> "ModuleVector":
        """Module action ``h . a``."""
        if a.shape != self.shape:
            raise ShapeMismatch("algebra element of the wrong shape")
        return ModuleVector(self.shape, self.m, tuple(b @ x for b, x in zip(self.blocks, a.components)))


@dataclass(frozen=True, eq=False)
class AdjointableOp:
    shape: AlgebraShape
    m: int
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", as_shape(self.shape))
        object.__setattr__(self, "blocks", _check_blocks(self.shape, self.m, self.blocks, True))

    @classmethod
    def identity(cls, shape, m: int) -> "AdjointableOp":
        shape = as_shape(shape)
        return cls(shape, m, tuple(np.eye(m * n, dtype=complex) for n in shape.component_dims))

    @classmethod
    def zeros(cls, shape, m: int) -> "AdjointableOp":
        shape = as_shape(shape)
        return cls(shape, m, tuple(np.zeros((m * n, m * n), complex) for n in shape.component_dims))

    @classmethod
    def from_matrix(cls, entries: Sequence[Sequence[AlgebraElement]]) -> "AdjointableOp":
        """Build from an ``m x m`` matrix over ``A``."""
        m = len(entries)
        shape = entries[0][0].shape
        blocks = tuple(np.block([[entries[r][c].components[i] for c in range(m)] for r in range(m)])
                       for i in range(shape.s))
        return cls(shape, m, blocks)

    def entry(self, r: int, c: int) -> AlgebraElement:
        return AlgebraElement(self.shape, tuple(
            b[r * n:(r + 1) * n, c * n:(c + 1) * n] for b, n in zip(self.blocks, self.shape.component_dims)))

    def _check(self, other) -> None:
        if self.shape != other.shape or self.m != other.m:
            raise ShapeMismatch("operators on different modules")

    def __add__(self, other):
        self._check(other)
        return AdjointableOp(self.shape, self.m, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other):
        self._check(other)
        return AdjointableOp(self.shape, self.m, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __mul__(self, scalar):
        return AdjointableOp(self.shape, self.m, tuple(scalar * b for b in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, ModuleVector):
            return op_apply(self, other)
        self._check(other)
        return AdjointableOp(self.shape, self.m, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    @property
    def H(self) -> "AdjointableOp":
        return op_adjoint(self)


def gramian(h: ModuleVector, g: ModuleVector) -> AlgebraElement:
    """``[h, g] = sum_k h_k^* g_k``, conjugate linear in ``h``."""
    h._check(g)
    return AlgebraElement(h.shape, tuple(a.conj().T @ b for a, b in zip(h.blocks, g.blocks)))


def vector_seminorm(h: ModuleVector, p: Seminorm) -> float:
    return float(np.sqrt(p(gramian(h, h))))


def op_apply(T: AdjointableOp, h: ModuleVector) -> ModuleVector:
    if T.shape != h.shape or T.m != h.m:
        raise ShapeMismatch("operator and vector live on different modules")
    return ModuleVector(h.shape, h.m, tuple(t @ b for t, b in zip(T.blocks, h.blocks)))


def op_adjoint(T: AdjointableOp) -> AdjointableOp:
    return AdjointableOp(T.shape, T.m, tuple(b.conj().T for b in T.blocks))


def op_seminorm(T: AdjointableOp, p: Seminorm) -> float:
    """``||T_p||``: the largest spectral norm among the component blocks in the support."""
    p.check(T.shape)
    return max(spectral_norm(T.blocks[i]) for i in p.support)


def op_is_positive(T: AdjointableOp, tol: float = DEFAULT_TOL) -> bool:
    return all(matrix_is_positive(b, tol) for b in T.blocks)


def quotient_op(T: AdjointableOp, p: Seminorm) -> AdjointableOp:
    p.check(T.shape)
    return AdjointableOp(T.shape.sub(p.support), T.m, tuple(T.blocks[i] for i in p.support))


def quotient_vector(h: ModuleVector, p: Seminorm) -> ModuleVector:
    p.check(h.shape)
    return ModuleVector(h.shape.sub(p.support), h.m, tuple(h.blocks[i] for i in p.support))


def matrix_seminorm(entries: Sequence[Sequence[AlgebraElement]], p: Seminorm) -> float:
    """``p_n([a_ij])``: the norm of the image of ``[a_ij]`` in ``M_n(A_p)``."""
    n = len(entries)
    return max(spectral_norm(np.block([[entries[r][c].components[i] for c in range(n)]
                                       for r in range(n)])) for i in p.support)


def random_vector(shape, m: int, rng: np.random.Generator, scale: float = 1.0) -> ModuleVector:
    shape = as_shape(shape)
    return ModuleVector(shape, m, tuple(
        scale * (rng.standard_normal((m * n, n)) + 1j * rng.standard_normal((m * n, n)))
        for n in shape.component_dims))


def random_op(shape, m: int, rng: np.random.Generator, scale: float = 1.0) -> AdjointableOp:
    shape = as_shape(shape)
    return AdjointableOp(shape, m, tuple(
        scale * (rng.standard_normal((m * n, m * n)) + 1j * rng.standard_normal((m * n, m * n)))
        for n in shape.component_dims))


def random_positive_op(shape, m: int, rng: np.random.Generator, rank: int | None = None) -> AdjointableOp:
    """``S^* S`` for a random ``S`` (of the given row count, if any)."""
    shape = as_shape(shape)
    blocks = []
    for n in shape.component_dims:
        r = m * n if rank is None else rank
        s = rng.standard_normal((r, m * n)) + 1j * rng.standard_normal((r, m * n))
        blocks.append(s.conj().T @ s / (m * n))
    return AdjointableOp(shape, m, tuple(blocks))
