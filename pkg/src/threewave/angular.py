"""Exact angular-momentum algebra for integer spins.

Wigner 3j symbols are evaluated with the Racah single-sum formula in exact
integer/rational arithmetic and only converted to ``float`` at the end, so
selection-rule zeros are exact zeros.
"""

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from numbers import Integral

__all__ = ["wigner3j", "symtop_element"]


def _check_int(*args):
    for a in args:
        if isinstance(a, bool) or not isinstance(a, Integral):
            raise ValueError(f"angular momentum labels must be integers, got {a!r}")


def _check_jm(j, m):
    if j < 0:
        raise ValueError(f"j must be non-negative, got {j}")
    if abs(m) > j:
        raise ValueError(f"|m| must not exceed j, got j={j}, m={m}")


def wigner3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)`` for integer arguments.

    Raises ``ValueError`` for non-integer labels, negative ``j`` or ``|m| > j``.
    Returns exactly ``0.0`` whenever a selection rule fails.
    """
    _check_int(j1, j2, j3, m1, m2, m3)
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        _check_jm(j, m)
    return _wigner3j(int(j1), int(j2), int(j3), int(m1), int(m2), int(m3))


@lru_cache(maxsize=65536)
def _wigner3j(j1, j2, j3, m1, m2, m3):
    if m1 + m2 + m3 != 0:
        return 0.0
    if j3 < abs(j1 - j2) or j3 > j1 + j2:
        return 0.0

    f = factorial
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k)
            * f(j3 - j2 + k + m1)
            * f(j3 - j1 + k - m2)
            * f(j1 + j2 - j3 - k)
            * f(j1 - k - m1)
            * f(j2 - k + m2)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0

    # value**2 = total**2 * triangle * prod(factorials); all exact rationals
    triangle = Fraction(
        f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3), f(j1 + j2 + j3 + 1)
    )
    mfac = (
        f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3)
    )
    square = total * total * triangle * mfac
    sign = (-1) ** ((j1 - j2 - m3) % 2) * (1 if total > 0 else -1)
    return sign * sqrt(square)


def symtop_element(Jpp: int, Kpp: int, Mpp: int, M: int, K: int, Jp: int, Kp: int, Mp: int) -> float:
    """Symmetric-top matrix element ``<J'' K'' M''| D^1_{M K} |J' K' M'>``.

    Uses the product of two 3j symbols with the phase ``(-1)**(M''+K'')``;
    vanishes exactly unless ``M'' = M' + M``, ``K'' = K' + K`` and
    ``|J'' - J'| <= 1``.
    """
    _check_int(Jpp, Kpp, Mpp, M, K, Jp, Kp, Mp)
    _check_jm(Jpp, Kpp)
    _check_jm(Jpp, Mpp)
    _check_jm(Jp, Kp)
    _check_jm(Jp, Mp)
    _check_jm(1, M)
    _check_jm(1, K)
    if Mpp != Mp + M or Kpp != Kp + K or abs(Jpp - Jp) > 1:
        return 0.0
    w = _wigner3j(Jp, 1, Jpp, Mp, M, -Mpp) * _wigner3j(Jp, 1, Jpp, Kp, K, -Kpp)
    if w == 0.0:
        return 0.0
    phase = -1.0 if (Mpp + Kpp) % 2 else 1.0
    return sqrt((2 * Jpp + 1) * (2 * Jp + 1)) * phase * w
