"""Rational transfer functions of the Laplace variable.

Coefficients are stored as real arrays in descending powers of s, with the
leading denominator coefficient normalized to 1.  Arithmetic is plain
polynomial arithmetic over a common denominator; the only simplifications
performed are the removal of exactly-zero leading coefficients and, on
request, of common roots at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Leading/trailing coefficients below this fraction of the largest
# coefficient of the same polynomial are treated as exact zeros.
COEFF_TOL = 1e-12


def _trim_leading(c: np.ndarray) -> np.ndarray:
    # only exactly-zero leading coefficients may be dropped: polynomial
    # products routinely span many orders of magnitude, so a relative
    # threshold here would silently change the degree
    c = np.atleast_1d(np.asarray(c, dtype=float))
    first = 0
    while first < len(c) - 1 and c[first] == 0.0:
        first += 1
    return c[first:]


@dataclass(frozen=True)
class RationalTransfer:
    """Real-coefficient rational function of s, evaluable on the jw axis."""

    num: np.ndarray
    den: np.ndarray

    @classmethod
    def from_coeffs(cls, num, den) -> "RationalTransfer":
        num = _trim_leading(num)
        den = _trim_leading(den)
        if np.all(den == 0.0):
            raise ZeroDivisionError("denominator polynomial is zero")
        lead = den[0]
        num = num / lead
        den = den / lead
        num.setflags(write=False)
        den.setflags(write=False)
        return cls(num=num, den=den)

    @classmethod
    def constant(cls, gain: float) -> "RationalTransfer":
        return cls.from_coeffs([float(gain)], [1.0])

    @classmethod
    def zero(cls) -> "RationalTransfer":
        return cls.from_coeffs([0.0], [1.0])

    @classmethod
    def differentiator(cls, gain: float = 1.0) -> "RationalTransfer":
        """gain * s"""
        return cls.from_coeffs([float(gain), 0.0], [1.0])

    # -- evaluation ---------------------------------------------------------

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def at_frequency(self, f_hz):
        """Evaluate at s = j*2*pi*f for f in Hz."""
        f_hz = np.asarray(f_hz, dtype=float)
        return self(2j * np.pi * f_hz)

    # -- structure ----------------------------------------------------------

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.num == 0.0))

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num) if self.num_degree >= 1 else np.array([])

    def cancel_origin_roots(self) -> "RationalTransfer":
        """Divide out common exact roots at s = 0 from num and den."""
        num, den = self.num, self.den
        nscale = np.max(np.abs(num)) or 1.0
        dscale = np.max(np.abs(den)) or 1.0
        while (
            len(num) > 1
            and len(den) > 1
            and abs(num[-1]) <= COEFF_TOL * nscale
            and abs(den[-1]) <= COEFF_TOL * dscale
        ):
            num = num[:-1]
            den = den[:-1]
        return RationalTransfer.from_coeffs(num, den)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _as_transfer(other)
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return RationalTransfer.from_coeffs(num, np.polymul(self.den, other.den))

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_transfer(other)
        num = np.polysub(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return RationalTransfer.from_coeffs(num, np.polymul(self.den, other.den))

    def __rsub__(self, other):
        return _as_transfer(other) - self

    def __mul__(self, other):
        other = _as_transfer(other)
        return RationalTransfer.from_coeffs(
            np.polymul(self.num, other.num), np.polymul(self.den, other.den)
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_transfer(other)
        return RationalTransfer.from_coeffs(
            np.polymul(self.num, other.den), np.polymul(self.den, other.num)
        )

    def __rtruediv__(self, other):
        return _as_transfer(other) / self

    def __neg__(self):
        return RationalTransfer.from_coeffs(-self.num, self.den)

    def inverse(self) -> "RationalTransfer":
        return RationalTransfer.from_coeffs(self.den, self.num)


def _as_transfer(x) -> RationalTransfer:
    if isinstance(x, RationalTransfer):
        return x
    return RationalTransfer.constant(float(x))
