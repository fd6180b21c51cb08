"""RLWE substitution (with key switch back to the original key) and the
recursive coefficient expansion built on it.

Expansion level s splits every node with the exponent k = N/2^s + 1: the sum
with the substituted ciphertext keeps the even-stride coefficients, the
difference keeps the odd ones, and a multiplication by X^(-2^s) realigns the
odd branch so both recurse identically. A full expansion of one ciphertext
into N single-coefficient ciphertexts performs exactly N - 1 substitutions
and scales every coefficient by N; expanding only the first 2^j coefficients
(the input's support must fit) costs 2^j - 1 substitutions and scales by 2^j.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import KeyNotFound, NotSupported
from .params import ParameterSet, log2_int
from .polyring import Domain, twiddle_table
from .ciphertext import (
    NoiseSampler, RlweCiphertext, RlweKeySwitchKey, RlweSecretKey,
    rlwe_add, rlwe_key_switch, rlwe_mul_monomial, rlwe_sub,
)

_counter_lock = threading.Lock()
_substitutions = 0


def substitution_count() -> int:
    """Monotone counter of substitution operations executed."""
    return _substitutions


def _count_substitution() -> None:
    global _substitutions
    with _counter_lock:
        _substitutions += 1


def expansion_exponents(n: int) -> list:
    """The substitution exponents the expansion schedule needs."""
    return [n // (1 << s) + 1 for s in range(log2_int(n))]


@dataclass
class SubstitutionKeySet:
    """Key-switch keys from z(X^k) back to z for every scheduled exponent."""

    keys: dict
    params: ParameterSet

    def __contains__(self, k: int) -> bool:
        return k in self.keys

    def __getitem__(self, k: int) -> RlweKeySwitchKey:
        if k not in self.keys:
            raise KeyNotFound(f"no substitution key for exponent {k}")
        return self.keys[k]


def gen_substitution_keys(sk: RlweSecretKey, p: ParameterSet,
                          rng: NoiseSampler) -> SubstitutionKeySet:
    """Precompute the key-switch key for every expansion exponent."""
    from .ciphertext import rlwe_keyswitch_gen
    tf = twiddle_table(p.N, p.Q)
    keys = {}
    z_mod = sk.z_mod(p.Q)
    for k in expansion_exponents(p.N):
        z_k = np.zeros(p.N, dtype=np.uint64)
        K.substitute_kernel(z_k, z_mod, k, tf.qu)
        keys[k] = rlwe_keyswitch_gen(z_k, sk, p, rng, base=p.B_rlwe_ks)
    return SubstitutionKeySet(keys, p)


def rlwe_substitute(c: RlweCiphertext, k: int, keys: SubstitutionKeySet,
                    p: ParameterSet) -> RlweCiphertext:
    """m(X) -> m(X^k) under the original key: inverse-transform if needed,
    permute both ring elements, then key-switch from z(X^k) back to z."""
    ksk = keys[k]
    tf = twiddle_table(p.N, p.Q)
    cc = c.to_coefficient(tf)
    sub = np.zeros((2, p.N), dtype=np.uint64)
    K.substitute_kernel(sub[0], cc.data[0], k, tf.qu)
    K.substitute_kernel(sub[1], cc.data[1], k, tf.qu)
    out = rlwe_key_switch(RlweCiphertext(sub, Domain.COEFFICIENT), ksk, p)
    _count_substitution()
    return out


def rlwe_expand(c: RlweCiphertext, keys: SubstitutionKeySet, p: ParameterSet,
                count: int | None = None) -> list:
    """Split one ciphertext into per-coefficient constant ciphertexts.

    Output i decrypts to count * m[i] (count = N for a full expansion);
    pre-scale the packed message by the inverse of count to compensate.
    For count < N the input's nonzero support must lie in [0, count).
    """
    if count is None:
        count = p.N
    if count < 1 or count > p.N or count & (count - 1):
        raise NotSupported(f"expansion count {count} must be a power of two <= N")
    tf = twiddle_table(p.N, p.Q)
    out = [c.to_coefficient(tf)]
    for s in range(log2_int(count)):
        k = p.N // (1 << s) + 1
        evens = []
        odds = []
        for node in out:
            sub = rlwe_substitute(node, k, keys, p)
            evens.append(rlwe_add(node, sub, p))
            odds.append(rlwe_mul_monomial(rlwe_sub(node, sub, p),
                                          2 * p.N - (1 << s), p))
        out = evens + odds
    return out


__all__ = [
    "SubstitutionKeySet", "expansion_exponents", "gen_substitution_keys",
    "rlwe_substitute", "rlwe_expand", "substitution_count",
]
