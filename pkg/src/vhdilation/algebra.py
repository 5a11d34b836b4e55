"""Finite products of matrix algebras with their lattice of C*-seminorms.

An element of ``A = M_{n_1} x ... x M_{n_s}`` is stored as a tuple of complex
square matrices, one per component.  The seminorm ``p_J`` with support ``J``
is the maximum spectral norm over the components in ``J``; the quotient
``A / ker p_J`` is the sub-product over ``J``.

Component indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch

DEFAULT_TOL = 1e-10


def spectral_norm(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True)
class AlgebraShape:
    component_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.component_dims)
        if not dims:
            raise ShapeMismatch("an algebra needs at least one component")
        if any(n < 1 for n in dims):
            raise ShapeMismatch(f"component sizes must be positive, got {dims}")
        object.__setattr__(self, "component_dims", dims)

    @property
    def s(self) -> int:
        return len(self.component_dims)

    @property
    def dim(self) -> int:
        """Complex dimension of the algebra."""
        return sum(n * n for n in self.component_dims)

    def full_support(self) -> "Seminorm":
        return Seminorm(tuple(range(self.s)))

    def singletons(self) -> list["Seminorm"]:
        return [Seminorm((i,)) for i in range(self.s)]

    def sub(self, support: Iterable[int]) -> "AlgebraShape":
        return AlgebraShape(tuple(self.component_dims[i] for i in support))

    def matrix_units(self) -> list[tuple[int, int, int]]:
        """Canonical spanning set: (component, row, col) for every matrix unit."""
        return [(c, j, k) for c, n in enumerate(self.component_dims)
                for j in range(n) for k in range(n)]


def as_shape(shape) -> AlgebraShape:
    if isinstance(shape, AlgebraShape):
        return shape
    if isinstance(shape, (int, np.integer)):
        return AlgebraShape((int(shape),))
    return AlgebraShape(tuple(shape))


@dataclass(frozen=True)
class Seminorm:
    """The C*-seminorm ``p_J(a) = max_{i in J} ||a_i||``."""

    support: tuple[int, ...]

    def __post_init__(self):
        supp = tuple(sorted(set(int(i) for i in self.support)))
        if not supp:
            raise ValueError("seminorm support must be nonempty")
        object.__setattr__(self, "support", supp)

    def check(self, shape: AlgebraShape) -> None:
        if self.support[-1] >= shape.s or self.support[0] < 0:
            raise ShapeMismatch(f"support {self.support} out of range for {shape.s} components")

    def join(self, other: "Seminorm") -> "Seminorm":
        """Directed maximum: ``max(p_J, p_J') = p_{J u J'}``."""
        return Seminorm(self.support + other.support)

    def __call__(self, a: "AlgebraElement") -> float:
        self.check(a.shape)
        return max(spectral_norm(a.components[i]) for i in self.support)

    def label(self) -> str:
        return ",".join(str(i) for i in self.support)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    shape: AlgebraShape
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=complex) for c in self.components)
        if len(comps) != self.shape.s:
            raise ShapeMismatch(f"expected {self.shape.s} components, got {len(comps)}")
        for c, n in zip(comps, self.shape.component_dims):
            if c.shape != (n, n):
                raise ShapeMismatch(f"component of shape {c.shape}, expected {(n, n)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zeros(cls, shape) -> "AlgebraElement":
        shape = as_shape(shape)
        return cls(shape, tuple(np.zeros((n, n), complex) for n in shape.component_dims))

    @classmethod
    def identity(cls, shape) -> "AlgebraElement":
        shape = as_shape(shape)
        return cls(shape, tuple(np.eye(n, dtype=complex) for n in shape.component_dims))

    @classmethod
    def from_components(cls, components: Sequence) -> "AlgebraElement":
        comps = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in components]
        return cls(AlgebraShape(tuple(c.shape[0] for c in comps)), tuple(comps))

    @classmethod
    def matrix_unit(cls, shape, c: int, j: int, k: int) -> "AlgebraElement":
        e = cls.zeros(shape)
        e.components[c][j, k] = 1.0
        return e

    @classmethod
    def from_coordinates(cls, shape, coords: np.ndarray) -> "AlgebraElement":
        """Inverse of :meth:`coordinates` (row-major entries, component by component)."""
        shape = as_shape(shape)
        coords = np.asarray(coords, dtype=complex)
        comps, start = [], 0
        for n in shape.component_dims:
            comps.append(coords[start:start + n * n].reshape(n, n))
            start += n * n
        return cls(shape, tuple(comps))

    def coordinates(self) -> np.ndarray:
        """Coefficients against the matrix units, ordered as ``shape.matrix_units()``."""
        return np.concatenate([c.reshape(-1) for c in self.components])

    def _check(self, other: "AlgebraElement") -> None:
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape.component_dims} vs {other.shape.component_dims}")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.shape, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.shape, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return AlgebraElement(self.shape, tuple(-a for a in self.components))

    def __mul__(self, scalar):
        return AlgebraElement(self.shape, tuple(scalar * a for a in self.components))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)

    def allclose(self, other, atol=1e-12) -> bool:
        self._check(other)
        return all(np.allclose(a, b, atol=atol, rtol=0) for a, b in zip(self.components, other.components))

    def __repr__(self):
        return f"AlgebraElement(dims={self.shape.component_dims})"


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    a._check(b)
    return AlgebraElement(a.shape, tuple(x @ y for x, y in zip(a.components, b.components)))


def involution(a: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(a.shape, tuple(x.conj().T for x in a.components))


def matrix_is_positive(x: np.ndarray, tol: float) -> bool:
    scale = 1.0 + spectral_norm(x)
    if spectral_norm(x - x.conj().T) > tol * scale:
        return False
    herm = 0.5 * (x + x.conj().T)
    return bool(np.linalg.eigvalsh(herm)[0] >= -tol * scale)


def is_positive(a: AlgebraElement, tol: float = DEFAULT_TOL) -> bool:
    """Membership in the cone ``A^+``, with relative tolerance ``tol * (1 + ||a_i||)``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return all(matrix_is_positive(x, tol) for x in a.components)


def leq(a: AlgebraElement, b: AlgebraElement, tol: float = DEFAULT_TOL) -> bool:
    a._check(b)
    return is_positive(b - a, tol)


def quotient_project(a: AlgebraElement, p: Seminorm) -> AlgebraElement:
    """Image of ``a`` in the C*-algebra ``A_p``, realised as the sub-product over the support."""
    p.check(a.shape)
    return AlgebraElement(a.shape.sub(p.support), tuple(a.components[i] for i in p.support))


def bounded_norm(a: AlgebraElement) -> float:
    """``sup_p p(a)``; finite for every element since the family of seminorms is finite."""
    return max(spectral_norm(x) for x in a.components)


def unitize(shape) -> tuple[AlgebraShape, AlgebraElement]:
    """Multi-matrix algebras are already unital: return the shape and its unit."""
    shape = as_shape(shape)
    return shape, AlgebraElement.identity(shape)


def random_element(shape, rng: np.random.Generator, scale: float = 1.0) -> AlgebraElement:
    shape = as_shape(shape)
    return AlgebraElement(shape, tuple(
        scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        for n in shape.component_dims))
