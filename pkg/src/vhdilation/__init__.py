"""Operator-valued kernels over products of matrix algebras and their dilations."""

__version__ = "0.1.0"

from .algebra import AlgebraElement, AlgebraShape, Seminorm  # noqa: E402
from .errors import DilationError  # noqa: E402
from .kernel import OperatorKernel  # noqa: E402
from .linearisation import Linearisation, induce_representation, kolmogorov  # noqa: E402
from .module import AdjointableOp, ModuleVector, gramian  # noqa: E402
from .semigroup import Action, StarSemigroup  # noqa: E402
from .stinespring import CPMap, stinespring_dilate  # noqa: E402

__all__ = [
    "AlgebraElement", "AlgebraShape", "Seminorm", "DilationError", "OperatorKernel",
    "Linearisation", "induce_representation", "kolmogorov", "AdjointableOp", "ModuleVector",
    "gramian", "Action", "StarSemigroup", "CPMap", "stinespring_dilate", "__version__",
]
