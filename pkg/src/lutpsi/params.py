"""Parameter sets: named builtins, validation, and derived constants.

A :class:`ParameterSet` carries every scheme constant for one configuration.
The ring modulus ``Q`` is not stored in the builtin tables; it is derived at
construction time as the smallest prime with the requested bit length that
satisfies ``Q = 1 mod 2N``, so every implementation of the same table row
lands on the same modulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NotFound, ParamValidationError

DEFAULT_SIGMA = 3.19
DEFAULT_PLAINTEXT_MODULUS = 4

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def ntt_friendly_prime(bits: int, ring_degree: int) -> int:
    """Smallest prime >= 2^(bits-1) congruent to 1 mod 2*ring_degree."""
    step = 2 * ring_degree
    lo = 1 << (bits - 1)
    q = lo + 1 if lo % step == 0 else lo + (step - lo % step) + 1
    while not is_prime(q):
        q += step
    return q


def digits_for(base: int, modulus: int) -> int:
    """Number of base-``base`` digits covering values below ``modulus``."""
    d = 1
    cap = base
    while cap < modulus:
        cap *= base
        d += 1
    return d


@dataclass(frozen=True)
class ParameterSet:
    """All scheme constants for one configuration.

    ``B_rlwe_ks`` is only meaningful for PSI-style sets that run the
    substitution/expansion pipeline; it defaults to ``B_G`` so the two bases
    agree, which the query-packing path relies on.
    """

    name: str
    n: int            # LWE dimension
    q: int            # LWE modulus (power of two)
    N: int            # ring dimension (power of two)
    Q: int            # ring modulus (odd prime, Q = 1 mod 2N)
    B_ks: int         # LWE key-switch digit base
    B_G: int          # RGSW gadget base (power of two)
    B_r: int          # accumulator digit base
    sigma: float = DEFAULT_SIGMA
    t: int = DEFAULT_PLAINTEXT_MODULUS
    B_rlwe_ks: int = field(default=0)

    def __post_init__(self):
        if self.B_rlwe_ks == 0:
            object.__setattr__(self, "B_rlwe_ks", self.B_G)

    # Derived digit counts.
    @property
    def d_g(self) -> int:
        return digits_for(self.B_G, self.Q)

    @property
    def d_ks(self) -> int:
        return digits_for(self.B_ks, self.Q)

    @property
    def d_r(self) -> int:
        return digits_for(self.B_r, self.q)

    @property
    def d_rlwe_ks(self) -> int:
        return digits_for(self.B_rlwe_ks, self.Q)

    @property
    def q_bits(self) -> int:
        return self.Q.bit_length()

    def table(self) -> str:
        """key=value rendering, one line per field plus derived counts."""
        rows = [
            ("name", self.name),
            ("n", self.n),
            ("q", self.q),
            ("N", self.N),
            ("Q", self.Q),
            ("log2_Q", self.q_bits),
            ("t", self.t),
            ("B_ks", self.B_ks),
            ("B_G", self.B_G),
            ("B_r", self.B_r),
            ("B_rlwe_ks", self.B_rlwe_ks),
            ("sigma", self.sigma),
            ("d_g", self.d_g),
            ("d_ks", self.d_ks),
            ("d_r", self.d_r),
        ]
        return "\n".join(f"{k}={v}" for k, v in rows)


# name -> (n, q, N, log2(Q), B_ks, B_G, B_r)
_BUILTIN_TABLE = {
    "MEDIUM":     (256,  512,  1024, 27, 25, 1 << 9,  23),
    "STD128_AP":  (512,  512,  1024, 27, 25, 1 << 9,  23),
    "STD192":     (512,  512,  2048, 37, 25, 1 << 13, 23),
    "STD256":     (1024, 1024, 2048, 29, 25, 1 << 10, 32),
    "STD192Q":    (1024, 1024, 2048, 35, 25, 1 << 12, 32),
    "STD256Q":    (1024, 1024, 2048, 27, 25, 1 << 7,  32),
}

BUILTIN_NAMES = tuple(_BUILTIN_TABLE) + ("PSI2048",)

_cache: dict[str, ParameterSet] = {}


def builtin_params(name: str) -> ParameterSet:
    """Look up a named builtin parameter set.

    Raises :class:`NotFound` for unknown names.
    """
    if name in _cache:
        return _cache[name]
    if name == "PSI2048":
        p = psi_params(2048)
    elif name in _BUILTIN_TABLE:
        n, q, N, qbits, b_ks, b_g, b_r = _BUILTIN_TABLE[name]
        p = ParameterSet(
            name=name, n=n, q=q, N=N, Q=ntt_friendly_prime(qbits, N),
            B_ks=b_ks, B_G=b_g, B_r=b_r,
        )
    else:
        raise NotFound(f"unknown parameter set {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    _cache[name] = p
    return p


def psi_params(N: int = 2048, q_bits: int = 54, base_bits: int = 9) -> ParameterSet:
    """PSI-oriented set: large modulus, matching gadget and key-switch bases.

    The LWE-side constants are not exercised by the PSI pipeline itself and
    mirror the STD256 row.
    """
    return ParameterSet(
        name=f"PSI{N}" if (N, q_bits, base_bits) != (2048, 54, 9) else "PSI2048",
        n=1024, q=1024, N=N, Q=ntt_friendly_prime(q_bits, N),
        B_ks=25, B_G=1 << base_bits, B_r=32,
        B_rlwe_ks=1 << base_bits,
    )


def _is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def validate(p: ParameterSet) -> None:
    """Check every type invariant; raise ParamValidationError naming the first violation."""
    if not _is_power_of_two(p.N):
        raise ParamValidationError("NotPowerOfTwo", f"N={p.N} must be a power of two")
    if p.Q % (2 * p.N) != 1:
        raise ParamValidationError("NttUnfriendly", f"Q={p.Q} must satisfy Q = 1 mod 2N")
    if p.Q.bit_length() > 54:
        raise ParamValidationError("ModulusTooWide", f"Q={p.Q} exceeds 54 bits")
    if not _is_power_of_two(p.q):
        raise ParamValidationError("LweModulusNotPowerOfTwo", f"q={p.q} must be a power of two")
    if p.q > 2 * p.N:
        raise ParamValidationError("LweModulusTooLarge", f"q={p.q} must be <= 2N={2 * p.N}")
    if p.t < 4 or p.q % p.t != 0:
        raise ParamValidationError("BadPlaintextModulus", f"t={p.t} must divide q and be >= 4")
    if not _is_power_of_two(p.B_G):
        raise ParamValidationError("GadgetBaseNotPowerOfTwo", f"B_G={p.B_G} must be a power of two")
    if not _is_power_of_two(p.B_rlwe_ks):
        raise ParamValidationError(
            "RlweKsBaseNotPowerOfTwo", f"B_rlwe_ks={p.B_rlwe_ks} must be a power of two")
    for label, base, modulus in (
        ("B_G", p.B_G, p.Q),
        ("B_ks", p.B_ks, p.Q),
        ("B_r", p.B_r, p.q),
        ("B_rlwe_ks", p.B_rlwe_ks, p.Q),
    ):
        if base < 2:
            raise ParamValidationError("BaseTooSmall", f"{label}={base} must be >= 2")
        d = digits_for(base, modulus)
        if base ** d < modulus:
            raise ParamValidationError("BaseCoverage", f"{label}^{d} < {modulus}")
    if not p.sigma >= 0:
        raise ParamValidationError("BadSigma", f"sigma={p.sigma} must be >= 0")


def toy_params(
    name: str = "TOY",
    n: int = 16,
    q: int = 128,
    N: int = 64,
    q_bits: int = 40,
    b_g_bits: int = 10,
    sigma: float = DEFAULT_SIGMA,
) -> ParameterSet:
    """Small set for fast tests; obeys every validate() invariant."""
    return ParameterSet(
        name=name, n=n, q=q, N=N, Q=ntt_friendly_prime(q_bits, N),
        B_ks=25, B_G=1 << b_g_bits, B_r=8, sigma=sigma,
        B_rlwe_ks=1 << b_g_bits,
    )


def log2_int(x: int) -> int:
    """Exact log2 of a power of two."""
    if not _is_power_of_two(x):
        raise ValueError(f"{x} is not a power of two")
    return x.bit_length() - 1


def ceil_log(base: int, value: int) -> int:
    """Smallest d with base**d >= value (d >= 1)."""
    return digits_for(base, value)


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def bit_length_checked(x: int, limit: int = 64) -> int:
    b = x.bit_length()
    if b > limit:
        raise ValueError(f"value needs {b} bits, limit {limit}")
    return b


def fmt_bytes(nbytes: int) -> str:
    """Human-readable size, decimal megabytes."""
    if nbytes >= 1e6:
        return f"{nbytes / 1e6:.1f} MB"
    if nbytes >= 1e3:
        return f"{nbytes / 1e3:.1f} KB"
    return f"{nbytes} B"


__all__ = [
    "ParameterSet", "builtin_params", "psi_params", "toy_params", "validate",
    "digits_for", "ntt_friendly_prime", "is_prime", "BUILTIN_NAMES",
    "log2_int", "ceil_div", "fmt_bytes", "DEFAULT_SIGMA",
]
