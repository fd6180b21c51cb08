"""Polynomials over Z_Q[X]/(X^N+1): NTT, negacyclic product, substitution.

The forward transform follows the Cooley-Tukey schedule (natural in,
bit-reversed out); the inverse follows Gentleman-Sande (bit-reversed in,
natural out, trailing N^-1 scaling). Pointwise products therefore happen in
bit-reversed order throughout and no pipeline step re-normalizes the order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .errors import InvalidSubstitution


class Domain(enum.Enum):
    COEFFICIENT = 0
    NTT = 1


class Order(enum.Enum):
    NATURAL = 0
    BIT_REVERSED = 1


@dataclass
class Polynomial:
    """Length-N vector of residues mod Q plus its evaluation-domain tag.

    The coefficient order is tied to the domain: coefficient-domain data is
    in natural order, NTT-domain data in bit-reversed order.
    """

    coeffs: np.ndarray
    domain: Domain = Domain.COEFFICIENT

    @property
    def order(self) -> Order:
        return Order.BIT_REVERSED if self.domain == Domain.NTT else Order.NATURAL

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def copy(self) -> "Polynomial":
        return Polynomial(self.coeffs.copy(), self.domain)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.coeffs, other.coeffs)


def bit_reverse_table(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = 0
        x = i
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        out[i] = r
    return out


def _smallest_primitive_2n_root(n: int, q: int) -> int:
    """Smallest x with x^N = -1 mod Q, i.e. the least primitive 2N-th root.

    Walks the odd powers of one known root; deterministic, so every build of
    the same (N, Q) pair agrees.
    """
    base = 2
    half = (q - 1) // 2
    while pow(base, half, q) != q - 1:
        base += 1
    root = pow(base, (q - 1) // (2 * n), q)
    best = root
    sq = root * root % q
    cur = root
    for _ in range(n - 1):
        cur = cur * sq % q
        if cur < best:
            best = cur
    assert pow(best, n, q) == q - 1
    return best


def _shoup_pair(values: np.ndarray, q: int) -> np.ndarray:
    return ((values.astype(object) << 64) // q).astype(np.uint64)


@dataclass
class TwiddleTable:
    """Precomputed transform constants for one (N, Q) pair.

    psi_powers / psi_inv_powers hold the powers of the 2N-th root (and its
    inverse) in bit-reversed order, as the in-place schedules consume them.
    Shoup companions (floor(w << 64 / Q)) feed the butterfly multiplies;
    r2/neg_qinv/bmu serve the Montgomery and Barrett helpers.
    """

    n: int
    q: int
    psi: int
    psi_powers: np.ndarray
    psi_inv_powers: np.ndarray
    n_inv: int
    tf_sh: np.ndarray = field(repr=False, default=None)
    tfi_sh: np.ndarray = field(repr=False, default=None)
    ninv_u: np.uint64 = field(repr=False, default=np.uint64(0))
    ninv_sh: np.uint64 = field(repr=False, default=np.uint64(0))
    neg_qinv: np.uint64 = field(repr=False, default=np.uint64(0))
    r2: np.uint64 = field(repr=False, default=np.uint64(0))
    bmu: np.uint64 = field(repr=False, default=np.uint64(0))

    @property
    def qu(self) -> np.uint64:
        return np.uint64(self.q)

    def to_mont(self, x: int) -> np.uint64:
        """Scalar into Montgomery form."""
        return np.uint64(x * (1 << 64) % self.q)

    def shoup(self, x: int) -> np.uint64:
        """Shoup companion of a scalar constant."""
        return np.uint64((x << 64) // self.q)

    def fwd(self, a: np.ndarray) -> None:
        K.ntt_inplace(a, self.psi_powers, self.tf_sh, self.qu)

    def inv(self, a: np.ndarray) -> None:
        K.intt_inplace(a, self.psi_inv_powers, self.tfi_sh, self.ninv_u,
                       self.ninv_sh, self.qu)

    def fwd_batch(self, mat: np.ndarray) -> None:
        K.ntt_batch(mat, self.psi_powers, self.tf_sh, self.qu)

    def inv_batch(self, mat: np.ndarray) -> None:
        K.intt_batch(mat, self.psi_inv_powers, self.tfi_sh, self.ninv_u,
                     self.ninv_sh, self.qu)


@lru_cache(maxsize=None)
def twiddle_table(n: int, q: int) -> TwiddleTable:
    if q % (2 * n) != 1:
        raise ValueError(f"Q={q} is not NTT-friendly for N={n}")
    psi = _smallest_primitive_2n_root(n, q)
    psi_inv = pow(psi, q - 2, q)
    brv = bit_reverse_table(n)
    pw = np.zeros(n, dtype=np.uint64)
    pwi = np.zeros(n, dtype=np.uint64)
    for i in range(n):
        pw[i] = pow(psi, int(brv[i]), q)
        pwi[i] = pow(psi_inv, int(brv[i]), q)
    n_inv = pow(n, q - 2, q)
    r = 1 << 64
    return TwiddleTable(
        n=n, q=q, psi=psi, psi_powers=pw, psi_inv_powers=pwi, n_inv=n_inv,
        tf_sh=_shoup_pair(pw, q),
        tfi_sh=_shoup_pair(pwi, q),
        ninv_u=np.uint64(n_inv),
        ninv_sh=np.uint64((n_inv << 64) // q),
        neg_qinv=np.uint64((-pow(q, -1, r)) % r),
        r2=np.uint64(r * r % q),
        bmu=np.uint64(((1 << 64) - 1) // q),
    )


def ntt_forward(a: Polynomial, tf: TwiddleTable) -> Polynomial:
    """Forward transform; fresh output, input untouched."""
    if a.domain != Domain.COEFFICIENT:
        raise ValueError("ntt_forward expects a coefficient-domain polynomial")
    out = a.coeffs.copy()
    tf.fwd(out)
    return Polynomial(out, Domain.NTT)


def ntt_inverse(a: Polynomial, tf: TwiddleTable) -> Polynomial:
    """Inverse transform including the N^-1 scaling; fresh output."""
    if a.domain != Domain.NTT:
        raise ValueError("ntt_inverse expects an NTT-domain polynomial")
    out = a.coeffs.copy()
    tf.inv(out)
    return Polynomial(out, Domain.COEFFICIENT)


def negacyclic_mul(a: Polynomial, b: Polynomial, tf: TwiddleTable) -> Polynomial:
    """a*b mod (X^N+1, Q); accepts operands in either domain."""
    fa = a if a.domain == Domain.NTT else ntt_forward(a, tf)
    fb = b if b.domain == Domain.NTT else ntt_forward(b, tf)
    out = np.zeros(tf.n, dtype=np.uint64)
    K.pw_mul(out, fa.coeffs, fb.coeffs, tf.r2, tf.qu, tf.neg_qinv)
    prod = Polynomial(out, Domain.NTT)
    want_ntt = a.domain == Domain.NTT and b.domain == Domain.NTT
    return prod if want_ntt else ntt_inverse(prod, tf)


def substitute(a: Polynomial, k: int, tf: TwiddleTable) -> Polynomial:
    """a(X) -> a(X^k) for odd k in (0, 2N)."""
    if a.domain != Domain.COEFFICIENT:
        raise ValueError("substitute expects a coefficient-domain polynomial")
    if k % 2 == 0 or not 0 < k < 2 * tf.n:
        raise InvalidSubstitution(f"substitution exponent must be odd and in (0, 2N); got {k}")
    out = np.zeros(tf.n, dtype=np.uint64)
    K.substitute_kernel(out, a.coeffs, k, tf.qu)
    return Polynomial(out, Domain.COEFFICIENT)


def mul_monomial(a: Polynomial, e: int, tf: TwiddleTable) -> Polynomial:
    """X^e * a for e in [0, 2N); negacyclic wraparound supplies the signs."""
    if a.domain != Domain.COEFFICIENT:
        raise ValueError("monomial multiplication operates on coefficient-domain polynomials")
    out = np.zeros(tf.n, dtype=np.uint64)
    K.mul_monomial_kernel(out, a.coeffs, e % (2 * tf.n), tf.qu)
    return Polynomial(out, Domain.COEFFICIENT)


def zero_poly(n: int) -> Polynomial:
    return Polynomial(np.zeros(n, dtype=np.uint64), Domain.COEFFICIENT)


def random_poly(n: int, q: int, rng) -> Polynomial:
    return Polynomial(rng.integers(0, q, size=n, dtype=np.uint64), Domain.COEFFICIENT)


__all__ = [
    "Domain", "Order", "Polynomial", "TwiddleTable", "twiddle_table",
    "ntt_forward", "ntt_inverse", "negacyclic_mul", "substitute",
    "mul_monomial", "zero_poly", "random_poly", "bit_reverse_table",
]
