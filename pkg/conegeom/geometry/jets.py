"""
Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` holds the normalized Taylor coefficients ``c_a = d^a f / a!`` of a function of
``nvars`` chart parameters, for every multi-index ``a`` of total degree ``<= order``, at a whole
batch of expansion points at once. Products are truncated polynomial products, so the first,
second and third parameter derivatives of a closed-form chart come out exact to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

Scalar = Union[float, np.ndarray]

_SERIES_TERMS = 30


@dataclass(frozen=True)
class _Layout:
    indices: tuple[tuple[int, ...], ...]
    position: dict[tuple[int, ...], int]
    factorial: np.ndarray
    left: np.ndarray
    right: np.ndarray
    groups: tuple[slice, ...]
    # per variable: (source slots, destination slots in the order-1 layout, scale)
    diff_maps: tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]


@lru_cache(maxsize=None)
def _layout(nvars: int, order: int) -> _Layout:
    # Sorted by total degree first, so the first slots of any layout form the lower-order layout.
    indices = tuple(
        sorted(
            (a for a in product(range(order + 1), repeat=nvars) if sum(a) <= order),
            key=lambda a: (sum(a), tuple(-x for x in a)),
        )
    )
    position = {a: k for k, a in enumerate(indices)}
    factorial = np.array([math.prod(math.factorial(x) for x in a) for a in indices], dtype=float)

    pairs = []
    for i, a in enumerate(indices):
        for j, b in enumerate(indices):
            c = tuple(x + y for x, y in zip(a, b))
            if c in position:
                pairs.append((position[c], i, j))
    pairs.sort()
    target = np.array([p[0] for p in pairs], dtype=int)
    left = np.array([p[1] for p in pairs], dtype=int)
    right = np.array([p[2] for p in pairs], dtype=int)
    groups = []
    for k in range(len(indices)):
        rows = np.flatnonzero(target == k)
        groups.append(slice(int(rows[0]), int(rows[-1]) + 1))

    diff_maps = []
    if order >= 1:
        lower = {a: k for k, a in enumerate(indices) if sum(a) <= order - 1}
        for v in range(nvars):
            src, dst, scale = [], [], []
            for k, a in enumerate(indices):
                if a[v] >= 1:
                    b = tuple(x - (1 if w == v else 0) for w, x in enumerate(a))
                    src.append(k)
                    dst.append(lower[b])
                    scale.append(float(a[v]))
            diff_maps.append((np.array(src, dtype=int), np.array(dst, dtype=int), np.array(scale)))

    return _Layout(indices, position, factorial, left, right, tuple(groups), tuple(diff_maps))


def _align(a: "Jet", b: "Jet") -> tuple["Jet", "Jet"]:
    if a.nvars != b.nvars:
        raise ValueError(f"Cannot combine jets in {a.nvars} and {b.nvars} variables")
    order = min(a.order, b.order)
    return a.truncate(order), b.truncate(order)


class Jet:
    """Batched truncated Taylor polynomial in ``nvars`` variables."""

    __slots__ = ("coeffs", "nvars", "order")
    # Make numpy hand mixed ndarray/Jet operators back to the Jet.
    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray, nvars: int, order: int):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.nvars = nvars
        self.order = order
        if self.coeffs.shape[0] != len(_layout(nvars, order).indices):
            raise ValueError("Coefficient array does not match the jet layout")

    # ---------- construction ----------
    @classmethod
    def variable(cls, values: np.ndarray, index: int, nvars: int, order: int) -> "Jet":
        layout = _layout(nvars, order)
        values = np.asarray(values, dtype=float)
        coeffs = np.zeros((len(layout.indices),) + values.shape)
        coeffs[0] = values
        if order >= 1:
            unit = tuple(1 if v == index else 0 for v in range(nvars))
            coeffs[layout.position[unit]] = 1.0
        return cls(coeffs, nvars, order)

    @classmethod
    def constant(cls, values: Scalar, nvars: int, order: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        coeffs = np.zeros((len(_layout(nvars, order).indices),) + values.shape)
        coeffs[0] = values
        return cls(coeffs, nvars, order)

    @classmethod
    def from_derivatives(cls, value: np.ndarray, gradient: np.ndarray, hessian: np.ndarray) -> "Jet":
        """Order-2 jet from a value, gradient (..., m) and Hessian (..., m, m)."""
        value = np.asarray(value, dtype=float)
        nvars = gradient.shape[-1]
        layout = _layout(nvars, 2)
        coeffs = np.zeros((len(layout.indices),) + value.shape)
        coeffs[0] = value
        for k, a in enumerate(layout.indices):
            if sum(a) == 1:
                coeffs[k] = gradient[..., a.index(1)]
            elif sum(a) == 2:
                hot = [v for v in range(nvars) for _ in range(a[v])]
                coeffs[k] = hessian[..., hot[0], hot[1]] / layout.factorial[k]
        return cls(coeffs, nvars, 2)

    # ---------- access ----------
    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    def derivative(self, multi_index: Sequence[int]) -> np.ndarray:
        """Partial derivative ``d^a f`` at the expansion points."""
        layout = _layout(self.nvars, self.order)
        slot = layout.position[tuple(multi_index)]
        return self.coeffs[slot] * layout.factorial[slot]

    def diff(self, var: int) -> "Jet":
        if self.order == 0:
            raise ValueError("Cannot differentiate an order-0 jet")
        src, dst, scale = _layout(self.nvars, self.order).diff_maps[var]
        lower = _layout(self.nvars, self.order - 1)
        coeffs = np.zeros((len(lower.indices),) + self.batch_shape)
        shaped = scale.reshape((-1,) + (1,) * len(self.batch_shape))
        coeffs[dst] = self.coeffs[src] * shaped
        return Jet(coeffs, self.nvars, self.order - 1)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        n = len(_layout(self.nvars, order).indices)
        return Jet(self.coeffs[:n], self.nvars, order)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, batch={self.batch_shape})"

    # ---------- arithmetic ----------
    def _shift(self, other: Scalar, sign: float = 1.0) -> "Jet":
        head = sign * self.coeffs[0] + other
        coeffs = sign * np.broadcast_to(self.coeffs, self.coeffs.shape[:1] + np.shape(head))
        coeffs = np.array(coeffs)
        coeffs[0] = head
        return Jet(coeffs, self.nvars, self.order)

    def __add__(self, other: Union["Jet", Scalar]) -> "Jet":
        if isinstance(other, Jet):
            a, b = _align(self, other)
            return Jet(a.coeffs + b.coeffs, a.nvars, a.order)
        return self._shift(other)

    __radd__ = __add__

    def __sub__(self, other: Union["Jet", Scalar]) -> "Jet":
        if isinstance(other, Jet):
            a, b = _align(self, other)
            return Jet(a.coeffs - b.coeffs, a.nvars, a.order)
        return self._shift(-np.asarray(other, dtype=float))

    def __rsub__(self, other: Scalar) -> "Jet":
        return self._shift(other, sign=-1.0)

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs, self.nvars, self.order)

    def __mul__(self, other: Union["Jet", Scalar]) -> "Jet":
        if isinstance(other, Jet):
            a, b = _align(self, other)
            layout = _layout(a.nvars, a.order)
            terms = a.coeffs[layout.left] * b.coeffs[layout.right]
            coeffs = np.stack([terms[rows].sum(axis=0) for rows in layout.groups])
            return Jet(coeffs, a.nvars, a.order)
        return Jet(self.coeffs * np.asarray(other, dtype=float), self.nvars, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other: Union["Jet", Scalar]) -> "Jet":
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.coeffs / np.asarray(other, dtype=float), self.nvars, self.order)

    def __rtruediv__(self, other: Scalar) -> "Jet":
        return reciprocal(self) * other

    def __pow__(self, exponent: Union[int, float]) -> "Jet":
        if isinstance(exponent, int):
            if exponent < 0:
                return reciprocal(self) ** (-exponent)
            result = Jet.constant(np.ones(self.batch_shape), self.nvars, self.order)
            base = self
            while exponent:
                if exponent & 1:
                    result = result * base
                exponent >>= 1
                if exponent:
                    base = base * base
            return result
        return power(self, float(exponent))


# ---------- seeding ----------
def variables(u: np.ndarray, order: int) -> list[Jet]:
    """Seed jets for the parameter columns of ``u`` (shape (B, m))."""
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    return [Jet.variable(u[..., i], i, m, order) for i in range(m)]


# ---------- composition with univariate functions ----------
def compose(x: Jet, derivatives: Sequence[np.ndarray]) -> Jet:
    """``f(x)`` given ``f, f', f'', ...`` evaluated at ``x.value`` (at least ``x.order + 1`` of them)."""
    h = Jet(x.coeffs.copy(), x.nvars, x.order)
    h.coeffs[0] = 0.0
    result = Jet.constant(np.broadcast_to(derivatives[0], x.batch_shape), x.nvars, x.order)
    term = h
    for k in range(1, x.order + 1):
        result = result + term * (np.asarray(derivatives[k]) / math.factorial(k))
        if k < x.order:
            term = term * h
    return result


def sin(x: Union[Jet, Scalar]):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [s, c, -s, -c]
    return compose(x, [cycle[k % 4] for k in range(x.order + 1)])


def cos(x: Union[Jet, Scalar]):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [c, -s, -c, s]
    return compose(x, [cycle[k % 4] for k in range(x.order + 1)])


def exp(x: Union[Jet, Scalar]):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.value)
    return compose(x, [e] * (x.order + 1))


def power(x: Union[Jet, Scalar], p: float):
    if not isinstance(x, Jet):
        return np.power(x, p)
    a = x.value
    derivatives = []
    falling = 1.0
    for k in range(x.order + 1):
        derivatives.append(falling * np.power(a, p - k))
        falling *= p - k
    return compose(x, derivatives)


def sqrt(x: Union[Jet, Scalar]):
    return power(x, 0.5)


def reciprocal(x: Union[Jet, Scalar]):
    return power(x, -1.0)


def power_series(x: Union[Jet, Scalar], coefficients: np.ndarray):
    """Evaluate the polynomial ``sum_k coefficients[k] x^k`` (a truncated power series)."""
    if not isinstance(x, Jet):
        return npoly.polyval(x, coefficients)
    derivatives = []
    c = np.asarray(coefficients, dtype=float)
    for _ in range(x.order + 1):
        derivatives.append(npoly.polyval(x.value, c))
        c = npoly.polyder(c) if len(c) > 1 else np.zeros(1)
    return compose(x, derivatives)


_SIN_ROOT_OVER_ROOT = np.array([(-1) ** k / math.factorial(2 * k + 1) for k in range(_SERIES_TERMS)])
_COS_ROOT = np.array([(-1) ** k / math.factorial(2 * k) for k in range(_SERIES_TERMS)])


def sin_root_over_root(q: Union[Jet, Scalar]):
    """``sin(sqrt(q)) / sqrt(q)``, smooth through ``q = 0``."""
    return power_series(q, _SIN_ROOT_OVER_ROOT)


def cos_root(q: Union[Jet, Scalar]):
    """``cos(sqrt(q))``, smooth through ``q = 0``."""
    return power_series(q, _COS_ROOT)


# ---------- vectors of jets ----------
def dot(a: Sequence, b: Sequence):
    total = a[0] * b[0]
    for x, y in zip(a[1:], b[1:]):
        total = total + x * y
    return total


def cross(a: Sequence, b: Sequence) -> list:
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]


def norm(a: Sequence):
    return sqrt(dot(a, a))


def values(vector: Sequence[Jet]) -> np.ndarray:
    """Stack the values of a vector of jets into an array of shape (B, len(vector))."""
    return np.stack([c.value for c in vector], axis=-1)
