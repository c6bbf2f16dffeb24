"""
MODULE: jets.py
CLASSIFICATION: Numerical Utilities (forward-mode differentiation)
GOAL: Truncated Taylor arithmetic.
      Jet2      -- value, gradient and Hessian of a scalar, propagated exactly
                   through arithmetic and elementary functions.
      ArrayJet  -- value and first partials of an array-valued quantity at a
                   point, propagated through matrix products (product rule).
CONTRACT ID: IO-JET
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

Scalar = Union[int, float]


class Jet2:
    """Second-order forward jet of a scalar in ``n`` active variables.

    The Hessian is built only from symmetric pieces (outer(a, b) + outer(b, a),
    outer(g, g), scalar multiples of symmetric matrices), so it is exactly
    symmetric as stored.
    """

    __slots__ = ("value", "gradient", "hessian")

    def __init__(self, value: float, gradient: np.ndarray, hessian: np.ndarray):
        self.value = float(value)
        self.gradient = gradient
        self.hessian = hessian

    @classmethod
    def constant(cls, value: float, n: int) -> "Jet2":
        return cls(value, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Jet2":
        grad = np.zeros(n)
        grad[index] = 1.0
        return cls(value, grad, np.zeros((n, n)))

    @property
    def nvars(self) -> int:
        return self.gradient.shape[0]

    def is_constant(self) -> bool:
        return not (self.gradient.any() or self.hessian.any())

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, gradient={self.gradient.tolist()!r})"

    # --- arithmetic ---

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(float(other), self.nvars)

    def __add__(self, other) -> "Jet2":
        o = self._coerce(other)
        return Jet2(self.value + o.value, self.gradient + o.gradient, self.hessian + o.hessian)

    __radd__ = __add__

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __sub__(self, other) -> "Jet2":
        o = self._coerce(other)
        return Jet2(self.value - o.value, self.gradient - o.gradient, self.hessian - o.hessian)

    def __rsub__(self, other) -> "Jet2":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            c = float(other)
            return Jet2(self.value * c, self.gradient * c, self.hessian * c)
        a, b = self, other
        cross = np.outer(a.gradient, b.gradient)
        return Jet2(
            a.value * b.value,
            a.value * b.gradient + b.value * a.gradient,
            a.value * b.hessian + b.value * a.hessian + (cross + cross.T),
        )

    __rmul__ = __mul__

    def compose(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a univariate function with f(x)=f0, f'(x)=f1, f''(x)=f2."""
        g = self.gradient
        return Jet2(f0, f1 * g, f1 * self.hessian + f2 * np.outer(g, g))

    def reciprocal(self) -> "Jet2":
        x = self.value
        return self.compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))

    def __truediv__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet2":
        return self.reciprocal() * float(other)

    def ipow(self, n: int) -> "Jet2":
        """Integer power by repeated squaring at the jet level."""
        if n < 0:
            return self.ipow(-n).reciprocal()
        result = Jet2.constant(1.0, self.nvars)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def rpow(self, c: float) -> "Jet2":
        """Real power; the caller guarantees a positive base."""
        x = self.value
        return self.compose(x ** c, c * x ** (c - 1.0), c * (c - 1.0) * x ** (c - 2.0))


@dataclass(frozen=True)
class ArrayJet:
    """First-order jet of an array-valued function of ``k`` parameters.

    ``partials[i]`` is the partial derivative along parameter ``i`` and has the
    shape of ``value``.
    """

    value: np.ndarray
    partials: np.ndarray

    # keep numpy from broadcasting over the jet
    __array_ufunc__ = None

    @classmethod
    def constant(cls, value, k: int) -> "ArrayJet":
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros((k,) + value.shape))

    @classmethod
    def stack(cls, jets: Sequence["ArrayJet"], axis: int = -1) -> "ArrayJet":
        """Stack jets of equal shape into a larger array (default: as columns)."""
        value = np.stack([j.value for j in jets], axis=axis)
        part_axis = axis if axis < 0 else axis + 1
        partials = np.stack([j.partials for j in jets], axis=part_axis)
        return cls(value, partials)

    @property
    def nparams(self) -> int:
        return self.partials.shape[0]

    def along(self, direction) -> np.ndarray:
        """Directional derivative sum_i direction[i] * partials[i]."""
        return np.tensordot(np.asarray(direction, dtype=float), self.partials, axes=1)

    def _lift(self, other) -> "ArrayJet":
        if isinstance(other, ArrayJet):
            return other
        return ArrayJet.constant(other, self.nparams)

    def __add__(self, other) -> "ArrayJet":
        o = self._lift(other)
        return ArrayJet(self.value + o.value, self.partials + o.partials)

    def __sub__(self, other) -> "ArrayJet":
        o = self._lift(other)
        return ArrayJet(self.value - o.value, self.partials - o.partials)

    def __neg__(self) -> "ArrayJet":
        return ArrayJet(-self.value, -self.partials)

    def __matmul__(self, other) -> "ArrayJet":
        o = self._lift(other)
        value = self.value @ o.value
        partials = np.stack(
            [self.partials[i] @ o.value + self.value @ o.partials[i] for i in range(self.nparams)]
        ) if self.nparams else np.zeros((0,) + np.shape(value))
        return ArrayJet(value, partials)

    def __rmatmul__(self, other) -> "ArrayJet":
        return self._lift(other) @ self

    def premul(self, matrix: np.ndarray) -> "ArrayJet":
        """Constant matrix times jet."""
        matrix = np.asarray(matrix, dtype=float)
        if self.value.ndim == 1:
            return ArrayJet(matrix @ self.value, self.partials @ matrix.T)
        return ArrayJet(matrix @ self.value, np.matmul(matrix, self.partials))

    @property
    def T(self) -> "ArrayJet":
        if self.value.ndim < 2:
            return self
        return ArrayJet(self.value.T, np.swapaxes(self.partials, -1, -2))


def jets_to_array(jets: Sequence[Jet2]) -> ArrayJet:
    """Collect scalar jets into a vector ArrayJet (first order only)."""
    value = np.array([j.value for j in jets])
    partials = np.array([j.gradient for j in jets]).T.reshape(-1, len(jets))
    return ArrayJet(value, partials)


def univariate(f0: Callable[[float], float], f1: Callable[[float], float],
               f2: Callable[[float], float]) -> Callable[[Jet2], Jet2]:
    """Build a jet-level elementary function from its value and two derivatives."""
    def apply(x: Jet2) -> Jet2:
        v = x.value
        return x.compose(f0(v), f1(v), f2(v))
    return apply
