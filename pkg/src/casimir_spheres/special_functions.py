"""Numerically stable special-function kernels.

Exponentially scaled modified Bessel functions of half-integer order (with
derivatives), Wigner 3j symbols for the magnetic configurations (0,0,0) and
(m,-m,0), and the uniform large-order (Debye) asymptotics used for
validation.  Values that can overflow or underflow double precision are
carried as a sign plus the natural log of the magnitude (:class:`LogScaled`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

# Largest ln-magnitude convertible to a plain float.
_LN_FLOAT_MAX = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class LogScaled:
    """A real number stored as sign and natural log of the absolute value.

    Multiplication and division are exact on the (sign, ln) representation;
    addition uses the two-term max-shift rule.  Conversion back to a plain
    float raises OverflowError when the exponent is out of range instead of
    silently returning inf.
    """

    sign: int
    ln_abs: float

    @staticmethod
    def zero() -> "LogScaled":
        return LogScaled(0, -math.inf)

    @staticmethod
    def from_float(x: float) -> "LogScaled":
        if x == 0.0:
            return LogScaled.zero()
        return LogScaled(1 if x > 0 else -1, math.log(abs(x)))

    def __mul__(self, other: "LogScaled") -> "LogScaled":
        s = self.sign * other.sign
        if s == 0:
            return LogScaled.zero()
        return LogScaled(s, self.ln_abs + other.ln_abs)

    def __truediv__(self, other: "LogScaled") -> "LogScaled":
        if other.sign == 0:
            raise ZeroDivisionError("division by LogScaled zero")
        if self.sign == 0:
            return LogScaled.zero()
        return LogScaled(self.sign * other.sign, self.ln_abs - other.ln_abs)

    def __neg__(self) -> "LogScaled":
        return LogScaled(-self.sign, self.ln_abs)

    def __add__(self, other: "LogScaled") -> "LogScaled":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.ln_abs >= other.ln_abs else (other, self)
        t = hi.sign + lo.sign * math.exp(lo.ln_abs - hi.ln_abs)
        if t == 0.0:
            return LogScaled.zero()
        return LogScaled(1 if t > 0 else -1, hi.ln_abs + math.log(abs(t)))

    def __sub__(self, other: "LogScaled") -> "LogScaled":
        return self + (-other)

    def to_float(self) -> float:
        """Plain float value; raises OverflowError outside the double range."""
        if self.sign == 0:
            return 0.0
        if self.ln_abs > _LN_FLOAT_MAX:
            raise OverflowError(
                f"LogScaled magnitude exp({self.ln_abs:.3g}) exceeds float64 range"
            )
        return self.sign * math.exp(self.ln_abs)


def _check_bessel_args(l: int, x: float) -> None:
    if x <= 0.0 or not math.isfinite(x):
        raise ValueError(f"Bessel argument must be positive, got x={x}")
    if l < 0:
        raise ValueError(f"Bessel order index must be non-negative, got l={l}")


def bessel_i_half(l: int, x: float) -> LogScaled:
    """I_{l+1/2}(x) as a LogScaled value (always positive).

    Miller downward recurrence normalized against the closed form of I_{1/2};
    stable for orders up to several thousand and x from 1e-6 to 1e5.
    """
    _check_bessel_args(l, x)
    ln = _kernels.ln_bessel_i_half(l, x)
    return LogScaled(1, float(ln[l]))


def bessel_k_half(l: int, x: float) -> LogScaled:
    """K_{l+1/2}(x) as a LogScaled value (always positive)."""
    _check_bessel_args(l, x)
    ln = _kernels.ln_bessel_k_half(l, x)
    return LogScaled(1, float(ln[l]))


def bessel_i_half_prime(l: int, x: float) -> LogScaled:
    """d/dx I_{l+1/2}(x), via I'_nu = I_{nu+1} + (nu/x) I_nu."""
    _check_bessel_args(l, x)
    ln = _kernels.ln_bessel_i_half(l + 1, x)
    nu = l + 0.5
    a = LogScaled(1, float(ln[l + 1]))
    b = LogScaled(1, float(ln[l]) + math.log(nu / x))
    return a + b


def bessel_k_half_prime(l: int, x: float) -> LogScaled:
    """d/dx K_{l+1/2}(x), via K'_nu = -K_{nu+1} + (nu/x) K_nu; always negative."""
    _check_bessel_args(l, x)
    ln = _kernels.ln_bessel_k_half(l + 1, x)
    nu = l + 0.5
    a = LogScaled(-1, float(ln[l + 1]))
    b = LogScaled(1, float(ln[l]) + math.log(nu / x))
    return a + b


def bessel_ln_arrays(l_max: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """(ln I_{l+1/2}(x), ln K_{l+1/2}(x)) arrays for l = 0..l_max."""
    _check_bessel_args(l_max, x)
    return _kernels.ln_bessel_i_half(l_max, x), _kernels.ln_bessel_k_half(l_max, x)


# ---------------------------------------------------------------------------
# Wigner 3j symbols
# ---------------------------------------------------------------------------

def _triangle_ok(l1: int, l2: int, l3: int) -> bool:
    return abs(l1 - l2) <= l3 <= l1 + l2


def wigner3j_zero(l1: int, l2: int, l3: int) -> float:
    """3j symbol (l1 l2 l3; 0 0 0); exact 0 on triangle or parity violation."""
    if min(l1, l2, l3) < 0 or not _triangle_ok(l1, l2, l3):
        return 0.0
    if (l1 + l2 + l3) % 2 != 0:
        return 0.0
    n = l1 + l2 + 1 - abs(l1 - l2)
    ln = np.empty(n)
    sg = np.empty(n, dtype=np.int8)
    _kernels.w3j_000_ln(l1, l2, ln, sg)
    idx = l3 - abs(l1 - l2)
    return float(sg[idx]) * math.exp(float(ln[idx]))


def wigner3j_m(l1: int, l2: int, l3: int, m: int) -> float:
    """3j symbol (l1 l2 l3; m -m 0), stable to l of order thousands."""
    if min(l1, l2, l3) < 0 or not _triangle_ok(l1, l2, l3):
        return 0.0
    if abs(m) > min(l1, l2):
        return 0.0
    n = l1 + l2 + 1 - abs(l1 - l2)
    ln = np.empty(n)
    sg = np.empty(n, dtype=np.int8)
    _kernels.w3j_m_ln(l1, l2, abs(m), ln, sg)
    idx = l3 - abs(l1 - l2)
    val = float(sg[idx]) * math.exp(float(ln[idx]))
    if m < 0 and (l1 + l2 + l3) % 2 != 0:
        val = -val
    return val


def wigner3j_m_vector(l1: int, l2: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(ln|3j|, sign) over l3 = |l1-l2| .. l1+l2 for magnetic numbers (m,-m,0)."""
    n = l1 + l2 + 1 - abs(l1 - l2)
    ln = np.empty(n)
    sg = np.empty(n, dtype=np.int8)
    _kernels.w3j_m_ln(l1, l2, abs(m), ln, sg)
    if m < 0:
        jmin = abs(l1 - l2)
        for idx in range(n):
            if (l1 + l2 + jmin + idx) % 2 != 0:
                sg[idx] = -sg[idx]
    return ln, sg


# ---------------------------------------------------------------------------
# Debye uniform asymptotics (validation only)
# ---------------------------------------------------------------------------

def debye_eta(z: float) -> float:
    """eta(z) = sqrt(1+z^2) + ln(z / (1 + sqrt(1+z^2))); strictly increasing."""
    r = math.sqrt(1.0 + z * z)
    return r + math.log(z / (1.0 + r))


def debye_u1(z: float) -> float:
    """First-order Debye correction coefficient."""
    r2 = 1.0 + z * z
    return (0.125 - 5.0 / (24.0 * r2)) / math.sqrt(r2)


def debye_m1(c: float, z: float) -> float:
    """First-order correction coefficient for the Robin-type combination."""
    r2 = 1.0 + z * z
    return (c - 0.375 + 7.0 / (24.0 * r2)) / math.sqrt(r2)


@dataclass(frozen=True)
class DebyeCoefficients:
    """The uniform-asymptotics ingredient functions bundled together."""

    eta: object = debye_eta
    u1: object = debye_u1
    m1: object = debye_m1


DEBYE = DebyeCoefficients()


def debye_validate(l: int, x: float) -> float:
    """Relative deviation of the two-term Debye approximation of I_{l+1/2}(x).

    Only used by tests; the asymptotic regime needs l >= 20.
    """
    nu = l + 0.5
    z = x / nu
    ln_approx = nu * debye_eta(z) - 0.5 * math.log(2.0 * math.pi * nu) \
        - 0.25 * math.log(1.0 + z * z) + math.log1p(debye_u1(z) / nu)
    ln_exact = float(_kernels.ln_bessel_i_half(l, x)[l])
    return abs(math.expm1(ln_approx - ln_exact))
