"""Forward-mode automatic differentiation with dual numbers.

Two representations share one set of rules:

* :class:`Dual` is an immutable scalar ``value + deriv * eps`` with ``eps**2 == 0``.
* :class:`DualArray` stores the value and derivative channels of a whole
  array as two numpy arrays, so vectorised projection code runs at numpy
  speed.

The module-level functions (:func:`sqrt`, :func:`exp`, :func:`sum`, ...)
accept plain floats, numpy arrays, :class:`Dual` or :class:`DualArray` and
dispatch accordingly. Projection code written against these functions runs
unchanged over reals or duals.

Branching functions (comparisons, :func:`maximum`, :func:`minimum`,
:func:`abs`) look only at the value channel; the derivative follows the
selected branch. ``abs`` at exactly zero has derivative zero.
"""

from __future__ import annotations

import builtins
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "Dual",
    "DualArray",
    "seed",
    "dual_add",
    "dual_mul",
    "dual_elementary",
    "is_dual",
    "value",
    "deriv",
    "asdual",
    "sqrt",
    "exp",
    "log",
    "power",
    "abs",
    "maximum",
    "minimum",
    "where",
    "sum",
    "dot",
    "outer",
    "norm",
    "stack",
    "zeros",
    "copy",
]


@dataclass(frozen=True)
class Dual:
    """Scalar dual number ``value + deriv * eps``."""

    value: float
    deriv: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "deriv", float(self.deriv))

    @staticmethod
    def _lift(other):
        if isinstance(other, Dual):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Dual(float(other), 0.0)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return Dual(self.value + o.value, self.deriv + o.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return Dual(self.value - o.value, self.deriv - o.deriv)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return Dual(self.value * o.value, self.value * o.deriv + o.value * self.deriv)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        if o.value == 0.0:
            raise DomainError("division by a dual number with zero value part")
        return Dual(
            self.value / o.value,
            (self.deriv * o.value - self.value * o.deriv) / (o.value * o.value),
        )

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        return _scalar_pow(self, exponent)

    def __rpow__(self, base):
        b = self._lift(base)
        if b is None:
            return NotImplemented
        return _scalar_pow(b, self)

    def __abs__(self):
        return dual_elementary("abs", self)

    # Ordering reads the value channel only.
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"


def seed(x) -> Dual:
    """The active variable: ``(x, 1)``."""
    return Dual(float(x), 1.0)


def dual_add(x: Dual, y: Dual) -> Dual:
    return Dual(x.value + y.value, x.deriv + y.deriv)


def dual_mul(x: Dual, y: Dual) -> Dual:
    return Dual(x.value * y.value, x.value * y.deriv + y.value * x.deriv)


def _val(x):
    return x.value if isinstance(x, Dual) else float(x)


def _scalar_pow(base: Dual, exponent) -> Dual:
    if isinstance(exponent, Dual):
        if exponent.deriv == 0.0:
            exponent = exponent.value
        else:
            if base.value <= 0.0:
                raise DomainError("pow with a dual exponent needs a positive base")
            return _scalar_exp(exponent * _scalar_log(base))
    p = float(exponent)
    if p == 0.0:
        return Dual(1.0, 0.0)
    if base.value == 0.0 and p < 1.0:
        raise DomainError(f"pow(0, {p}) has an unbounded derivative")
    if base.value < 0.0 and not p.is_integer():
        raise DomainError(f"pow of negative base {base.value} to non-integer {p}")
    v = base.value**p
    return Dual(v, p * base.value ** (p - 1.0) * base.deriv)


def _scalar_exp(x: Dual) -> Dual:
    e = math.exp(x.value)
    return Dual(e, e * x.deriv)


def _scalar_log(x: Dual) -> Dual:
    if x.value <= 0.0:
        raise DomainError(f"log of non-positive value {x.value}")
    return Dual(math.log(x.value), x.deriv / x.value)


def dual_elementary(f: str, *args):
    """Apply an elementary function by name to scalar duals.

    ``f`` is one of ``div, sqrt, exp, log, pow, abs, neg, max, min, compare``.
    ``compare`` returns -1, 0 or 1 from the value channels.
    """
    args = tuple(a if isinstance(a, Dual) else Dual(float(a)) for a in args)
    if f == "div":
        return args[0] / args[1]
    if f == "sqrt":
        (x,) = args
        if x.value <= 0.0:
            raise DomainError(f"sqrt needs a positive value, got {x.value}")
        r = math.sqrt(x.value)
        return Dual(r, x.deriv / (2.0 * r))
    if f == "exp":
        return _scalar_exp(args[0])
    if f == "log":
        return _scalar_log(args[0])
    if f == "pow":
        return _scalar_pow(args[0], args[1])
    if f == "abs":
        (x,) = args
        if x.value > 0.0:
            return x
        if x.value < 0.0:
            return -x
        return Dual(0.0, 0.0)
    if f == "neg":
        return -args[0]
    if f == "max":
        x, y = args
        return y if y.value > x.value else x
    if f == "min":
        x, y = args
        return y if y.value < x.value else x
    if f == "compare":
        x, y = args
        return (x.value > y.value) - (x.value < y.value)
    raise ValueError(f"unknown elementary function {f!r}")


class DualArray:
    """An array of dual numbers stored as separate value and derivative arrays."""

    __slots__ = ("val", "der")
    # Make numpy defer to our reflected operators instead of building object arrays.
    __array_ufunc__ = None

    def __init__(self, val, der=None):
        self.val = np.asarray(val, dtype=float)
        if der is None:
            self.der = np.zeros_like(self.val)
        else:
            der = np.asarray(der, dtype=float)
            if der.shape != self.val.shape:
                der = np.broadcast_to(der, self.val.shape).copy()
            self.der = der

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def size(self):
        return self.val.size

    def __len__(self):
        return len(self.val)

    @property
    def T(self):
        return DualArray(self.val.T, self.der.T)

    def reshape(self, *shape):
        return DualArray(self.val.reshape(*shape), self.der.reshape(*shape))

    def copy(self):
        return DualArray(self.val.copy(), self.der.copy())

    def item(self) -> Dual:
        return Dual(self.val.item(), self.der.item())

    def __getitem__(self, idx):
        return DualArray(self.val[idx], self.der[idx])

    def __setitem__(self, idx, other):
        if isinstance(other, (DualArray, Dual)):
            v, d = _split(other)
            self.val[idx] = v
            self.der[idx] = d
        else:
            self.val[idx] = other
            self.der[idx] = 0.0

    def sum(self, axis=None, keepdims=False):
        return DualArray(
            self.val.sum(axis=axis, keepdims=keepdims),
            self.der.sum(axis=axis, keepdims=keepdims),
        )

    def mean(self, axis=None, keepdims=False):
        return DualArray(
            self.val.mean(axis=axis, keepdims=keepdims),
            self.der.mean(axis=axis, keepdims=keepdims),
        )

    def __add__(self, other):
        v, d = _split(other)
        return DualArray(self.val + v, self.der + d)

    __radd__ = __add__

    def __sub__(self, other):
        v, d = _split(other)
        return DualArray(self.val - v, self.der - d)

    def __rsub__(self, other):
        v, d = _split(other)
        return DualArray(v - self.val, d - self.der)

    def __mul__(self, other):
        v, d = _split(other)
        return DualArray(self.val * v, self.val * d + self.der * v)

    __rmul__ = __mul__

    def __truediv__(self, other):
        v, d = _split(other)
        if np.any(np.asarray(v) == 0.0):
            raise DomainError("division by a dual number with zero value part")
        return DualArray(self.val / v, (self.der * v - self.val * d) / (v * v))

    def __rtruediv__(self, other):
        v, d = _split(other)
        if np.any(self.val == 0.0):
            raise DomainError("division by a dual number with zero value part")
        return DualArray(v / self.val, (d * self.val - v * self.der) / (self.val * self.val))

    def __neg__(self):
        return DualArray(-self.val, -self.der)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        if not is_dual(other):
            return DualArray(self.val @ other, self.der @ other)
        v, d = _split(other)
        return DualArray(self.val @ v, self.der @ v + self.val @ d)

    def __rmatmul__(self, other):
        if not is_dual(other):
            return DualArray(other @ self.val, other @ self.der)
        v, d = _split(other)
        return DualArray(v @ self.val, d @ self.val + v @ self.der)

    def __abs__(self):
        return abs(self)

    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __repr__(self):
        return f"DualArray(val={self.val!r}, der={self.der!r})"


def _split(x):
    if isinstance(x, DualArray):
        return x.val, x.der
    if isinstance(x, Dual):
        return x.value, x.deriv
    return x, 0.0


def is_dual(x) -> bool:
    return isinstance(x, (Dual, DualArray))


def value(x):
    """Value channel (identity for plain numbers and arrays)."""
    if isinstance(x, DualArray):
        return x.val
    if isinstance(x, Dual):
        return x.value
    return x


def deriv(x):
    """Derivative channel (zeros for plain numbers and arrays)."""
    if isinstance(x, DualArray):
        return x.der
    if isinstance(x, Dual):
        return x.deriv
    return np.zeros_like(np.asarray(x, dtype=float))


def asdual(x, der=None) -> DualArray:
    if isinstance(x, DualArray) and der is None:
        return x
    return DualArray(value(x), der)


def _scalar_or_array(v, d, like):
    if isinstance(like, Dual):
        return Dual(float(v), float(d))
    return DualArray(v, d)


def sqrt(x):
    if isinstance(x, Dual):
        return dual_elementary("sqrt", x)
    if isinstance(x, DualArray):
        if np.any(x.val <= 0.0):
            raise DomainError("sqrt needs strictly positive values")
        r = np.sqrt(x.val)
        return DualArray(r, x.der / (2.0 * r))
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Dual):
        return _scalar_exp(x)
    if isinstance(x, DualArray):
        e = np.exp(x.val)
        return DualArray(e, e * x.der)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return _scalar_log(x)
    if isinstance(x, DualArray):
        if np.any(x.val <= 0.0):
            raise DomainError("log needs strictly positive values")
        return DualArray(np.log(x.val), x.der / x.val)
    return np.log(x)


def power(x, p):
    """``x ** p`` for a constant real exponent ``p``."""
    if isinstance(x, Dual):
        return _scalar_pow(x, p)
    if isinstance(x, DualArray):
        p = float(p)
        if p == 0.0:
            return DualArray(np.ones_like(x.val))
        if p < 1.0 and np.any(x.val == 0.0):
            raise DomainError(f"pow(0, {p}) has an unbounded derivative")
        if not p.is_integer() and np.any(x.val < 0.0):
            raise DomainError(f"pow of a negative base to non-integer {p}")
        return DualArray(np.power(x.val, p), p * np.power(x.val, p - 1.0) * x.der)
    return np.power(x, p)


def abs(x):
    if isinstance(x, Dual):
        return dual_elementary("abs", x)
    if isinstance(x, DualArray):
        return DualArray(np.abs(x.val), np.sign(x.val) * x.der)
    return np.abs(x)


def maximum(x, y):
    if not (is_dual(x) or is_dual(y)):
        return np.maximum(x, y)
    if isinstance(x, Dual) and not isinstance(y, DualArray):
        return dual_elementary("max", x, y)
    if isinstance(y, Dual) and not isinstance(x, DualArray):
        return dual_elementary("max", x, y)
    (xv, xd), (yv, yd) = _split(x), _split(y)
    take_y = np.asarray(yv) > np.asarray(xv)
    return DualArray(np.where(take_y, yv, xv), np.where(take_y, yd, xd))


def minimum(x, y):
    if not (is_dual(x) or is_dual(y)):
        return np.minimum(x, y)
    if isinstance(x, Dual) and not isinstance(y, DualArray):
        return dual_elementary("min", x, y)
    if isinstance(y, Dual) and not isinstance(x, DualArray):
        return dual_elementary("min", x, y)
    (xv, xd), (yv, yd) = _split(x), _split(y)
    take_y = np.asarray(yv) < np.asarray(xv)
    return DualArray(np.where(take_y, yv, xv), np.where(take_y, yd, xd))


def where(cond, x, y):
    cond = value(cond)
    if not (is_dual(x) or is_dual(y)):
        return np.where(cond, x, y)
    (xv, xd), (yv, yd) = _split(x), _split(y)
    return DualArray(np.where(cond, xv, yv), np.where(cond, xd, yd))


def sum(x, axis=None, keepdims=False):
    if isinstance(x, DualArray):
        return x.sum(axis=axis, keepdims=keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def dot(x, y):
    if is_dual(x) and is_dual(y):
        (xv, xd), (yv, yd) = _split(x), _split(y)
        return DualArray(np.dot(xv, yv), np.dot(xd, yv) + np.dot(xv, yd))
    if is_dual(x):
        return DualArray(np.dot(x.val, y), np.dot(x.der, y))
    if is_dual(y):
        return DualArray(np.dot(x, y.val), np.dot(x, y.der))
    return np.dot(x, y)


def outer(x, y):
    if is_dual(x) or is_dual(y):
        x, y = asdual(x), asdual(y)
        return DualArray(np.outer(x.val, y.val), np.outer(x.der, y.val) + np.outer(x.val, y.der))
    return np.outer(x, y)


def norm(x):
    """Euclidean 2-norm of a vector."""
    return sqrt(dot(x, x))


def stack(arrays, axis=0):
    if builtins.any(is_dual(a) for a in arrays):
        return DualArray(
            np.stack([value(a) for a in arrays], axis=axis),
            np.stack([np.broadcast_to(deriv(a), np.shape(value(a))) for a in arrays], axis=axis),
        )
    return np.stack(arrays, axis=axis)


def zeros(shape, like=None):
    """Zeros of the same kind (real or dual) as ``like``."""
    if is_dual(like):
        return DualArray(np.zeros(shape))
    return np.zeros(shape)


def copy(x):
    if isinstance(x, DualArray):
        return x.copy()
    return np.array(x, dtype=float, copy=True)
