"""Scalar arithmetic mod Q via Barrett reduction, and positional digit
decomposition.

These are the exact-reference routines: plain Python integers, no wraparound.
The polynomial kernels have their own compiled multiply; everything here is
small enough to stay readable and serves as the oracle layer for those
kernels.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BarrettContext:
    """Precomputed reciprocal for reduction of x < modulus**2.

    reciprocal = floor(2**(2w) / modulus) with w = modulus.bit_length();
    reduce() needs a single conditional correction subtraction.
    """

    modulus: int
    reciprocal: int
    shift: int

    @classmethod
    def for_modulus(cls, modulus: int) -> "BarrettContext":
        if modulus < 2:
            raise ValueError("modulus must be >= 2")
        w = modulus.bit_length()
        return cls(modulus=modulus, reciprocal=(1 << (2 * w)) // modulus, shift=2 * w)

    def reduce(self, x: int) -> int:
        """x mod modulus, exact for 0 <= x < modulus**2."""
        q_est = (x * self.reciprocal) >> self.shift
        r = x - q_est * self.modulus
        if r >= self.modulus:
            r -= self.modulus
        return r


def mod_mul(a: int, b: int, ctx: BarrettContext) -> int:
    """a*b mod modulus for reduced operands."""
    return ctx.reduce(a * b)


def mod_add(a: int, b: int, ctx: BarrettContext) -> int:
    s = a + b
    return s - ctx.modulus if s >= ctx.modulus else s


def mod_sub(a: int, b: int, ctx: BarrettContext) -> int:
    d = a - b
    return d + ctx.modulus if d < 0 else d


def mod_pow(base: int, exp: int, ctx: BarrettContext) -> int:
    return pow(base, exp, ctx.modulus)


def mod_inv(a: int, ctx: BarrettContext) -> int:
    """Inverse mod a prime modulus (Fermat)."""
    return pow(a, ctx.modulus - 2, ctx.modulus)


def gadget_decompose(v: int, base: int, num_digits: int) -> list[int]:
    """Unsigned positional digits d[0..num_digits) with sum(d[j]*base**j) == v.

    Digits lie in [0, base). Requires base**num_digits >= v + 1 so the value
    is fully covered.
    """
    digits = []
    for _ in range(num_digits):
        digits.append(v % base)
        v //= base
    if v:
        raise ValueError("value does not fit in the requested digit count")
    return digits


def gadget_recompose(digits: list[int], base: int) -> int:
    acc = 0
    for d in reversed(digits):
        acc = acc * base + d
    return acc


__all__ = [
    "BarrettContext", "mod_mul", "mod_add", "mod_sub", "mod_pow", "mod_inv",
    "gadget_decompose", "gadget_recompose",
]
