"""Second-order truncated Taylor arithmetic in the moment parameter ``t``.

A :class:`Jet2` holds ``(f(t0), f'(t0), f''(t0))``.  Evaluating a moment
recurrence on jets lifted at ``t0 = 0`` yields the count together with the
first two raw moments of the log-weight in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

Number = Union[int, float]


@dataclass(frozen=True)
class Jet2:
    v0: float
    v1: float = 0.0
    v2: float = 0.0

    @classmethod
    def lift(cls, base: float, t0: float = 0.0) -> "Jet2":
        """``base ** t`` expanded around ``t0``."""
        if base <= 0:
            raise ValueError(f"base must be positive, got {base}")
        lb = math.log(base)
        val = base**t0
        return cls(val, val * lb, val * lb * lb)

    @classmethod
    def const(cls, c: Number) -> "Jet2":
        return cls(float(c), 0.0, 0.0)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.v0 + other.v0, self.v1 + other.v1, self.v2 + other.v2)
        return Jet2(self.v0 + other, self.v1, self.v2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v0, -self.v1, -self.v2)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(
                self.v0 * other.v0,
                self.v0 * other.v1 + self.v1 * other.v0,
                self.v0 * other.v2 + 2.0 * self.v1 * other.v1 + self.v2 * other.v0,
            )
        return Jet2(self.v0 * other, self.v1 * other, self.v2 * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return self * other.reciprocal()
        return Jet2(self.v0 / other, self.v1 / other, self.v2 / other)

    def reciprocal(self) -> "Jet2":
        a, b, c = self.v0, self.v1, self.v2
        return Jet2(1.0 / a, -b / (a * a), 2.0 * b * b / a**3 - c / (a * a))

    # moments of log T when the jet is sum_pi E[T(pi)^t] at t0 = 0
    @property
    def mean(self) -> float:
        return self.v1 / self.v0

    @property
    def variance(self) -> float:
        m = self.v1 / self.v0
        return self.v2 / self.v0 - m * m

    def as_array(self) -> np.ndarray:
        return np.array([self.v0, self.v1, self.v2])


ZERO = Jet2(0.0, 0.0, 0.0)
ONE = Jet2(1.0, 0.0, 0.0)


def lift_array(base: float, t0: float = 0.0) -> np.ndarray:
    j = Jet2.lift(base, t0)
    return np.array([j.v0, j.v1, j.v2])


def jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of jets stored along the last axis (broadcasting)."""
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 0] * b[..., 0]
    out[..., 1] = a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]
    out[..., 2] = a[..., 0] * b[..., 2] + 2.0 * a[..., 1] * b[..., 1] + a[..., 2] * b[..., 0]
    return out


def jet_convolve(x: np.ndarray, m: int) -> np.ndarray:
    """``sum_{i=0}^{m} x[i] * x[m-i]`` for an ``(N, 3)`` array of jets."""
    a = x[: m + 1]
    b = x[m::-1] if m >= 0 else x[:0]
    if m < 0:
        return np.zeros(3)
    return np.array(
        [
            a[:, 0] @ b[:, 0],
            a[:, 0] @ b[:, 1] + a[:, 1] @ b[:, 0],
            a[:, 0] @ b[:, 2] + 2.0 * (a[:, 1] @ b[:, 1]) + a[:, 2] @ b[:, 0],
        ]
    )
