"""Vertically-packed homomorphic lookup tables.

A table over w-bit inputs packs N function values per RLWE row. Evaluation
selects the row with a CMUX tree driven by the w - log2(N) high index bits,
rotates the target slot to position 0 with one blind-rotation per low bit,
and extracts slot 0 as an LWE ciphertext. Total gadget products:
2^(w - log2 N) - 1 + log2 N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleParams
from .params import ParameterSet, log2_int
from .polyring import Domain, Polynomial
from .ciphertext import (
    LweCiphertext, NoiseSampler, RgswCiphertext, RlweCiphertext,
    RlweSecretKey, blind_rotate_step, cmux, extract_lwe, rgsw_encrypt,
    rlwe_encrypt, rlwe_trivial,
)


@dataclass
class PackedLut:
    """Function table packed N values per row; row r, slot i holds the scaled
    value of f(r*N + i)."""

    rows: list
    bits: int
    params: ParameterSet

    @property
    def slots_per_row(self) -> int:
        return min(self.params.N, 1 << self.bits)


@dataclass
class EncryptedIndex:
    """Gadget encryptions of the index bits, LSB first."""

    bits: list

    def __len__(self) -> int:
        return len(self.bits)


def lut_build(table, bits: int, p: ParameterSet,
              sk: RlweSecretKey | None = None,
              rng: NoiseSampler | None = None) -> PackedLut:
    """Pack 2^bits binary values into RLWE rows scaled by Q/t.

    Rows are noiseless by default (the table owner evaluates on its own
    data); pass a key and rng to encrypt them instead. Tables narrower than
    one row fall back to a single partially-filled row handled purely by
    blind rotations.
    """
    table = np.asarray(table, dtype=np.uint64)
    if table.shape[0] != 1 << bits:
        raise ValueError(f"table needs exactly 2^{bits} entries")
    n_rows = max(1, (1 << bits) // p.N)
    rows = []
    for r in range(n_rows):
        m = np.zeros(p.N, dtype=np.uint64)
        chunk = table[r * p.N:(r + 1) * p.N]
        m[: chunk.shape[0]] = chunk
        poly = Polynomial(m, Domain.COEFFICIENT)
        if sk is None:
            rows.append(rlwe_trivial(poly, p))
        else:
            rows.append(rlwe_encrypt(poly, sk, p, rng))
    return PackedLut(rows, bits, p)


def encrypt_index(x: int, bits: int, sk: RlweSecretKey, p: ParameterSet,
                  rng: NoiseSampler) -> EncryptedIndex:
    """Bit-decompose x and gadget-encrypt each bit as a constant."""
    out = []
    for t in range(bits):
        m = np.zeros(p.N, dtype=np.uint64)
        m[0] = (x >> t) & 1
        out.append(rgsw_encrypt(Polynomial(m, Domain.COEFFICIENT), sk, p, rng))
    return EncryptedIndex(out)


def lut_eval(lut: PackedLut, x: EncryptedIndex, p: ParameterSet) -> LweCiphertext:
    """Homomorphic table lookup; returns an LWE ciphertext of f(x)."""
    if len(x) != lut.bits:
        raise IncompatibleParams(
            f"index has {len(x)} bits, table expects {lut.bits}")
    log_n = log2_int(p.N)
    cur = list(lut.rows)
    for tb in range(max(0, lut.bits - log_n)):
        sel = x.bits[log_n + tb]
        cur = [cmux(sel, cur[2 * i], cur[2 * i + 1], p)
               for i in range(len(cur) // 2)]
    c = cur[0]
    for t in reversed(range(min(lut.bits, log_n))):
        c = blind_rotate_step(x.bits[t], c, 1 << t, p)
    return extract_lwe(c, 0, p)


def cmux_tree_count(bits: int, n: int) -> int:
    """Gadget products per lookup: row-select tree plus slot rotations."""
    log_n = log2_int(n)
    if bits < log_n:
        return bits
    return (1 << (bits - log_n)) - 1 + log_n


__all__ = [
    "PackedLut", "EncryptedIndex", "lut_build", "encrypt_index", "lut_eval",
    "cmux_tree_count",
]
