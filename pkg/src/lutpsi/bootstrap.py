"""Gate bootstrapping: key generation, accumulator loop, and the NAND gate.

The refresh pipeline: encode the gate as a phase on the q-grid, initialize a
noiseless accumulator holding the rotated test vector, run the gadget-product
accumulation over every mask digit, extract slot 0, key-switch back to the
short LWE key, then modulus-switch down to q.

Digit convention for the accumulation: each mask element a[i] contributes the
base-B_r digits of (q - a[i]) mod q; key entry (i, p, v) holds the monomial
X^((v * B_r^p * s[i] mod q) * 2N/q), so the loop rotates the test vector by
-a.s in q-grid units. Zero digits select the identity monomial and are
skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NotSupported
from .params import ParameterSet, log2_int
from .polyring import Domain, Polynomial, twiddle_table
from .ciphertext import (
    LweCiphertext, LweKeySwitchKey, LweSecretKey, NoiseSampler,
    RgswCiphertext, RlweCiphertext, RlweSecretKey, _encrypt_ntt_rows,
    _key_dtype, _lazy_keys_ok, _pad4, extract_lwe, keyswitch_cap, lwe_add,
    lwe_key_switch, lwe_keyswitch_gen, lwe_mod_switch, lwe_trivial,
)

GATE_NAND = "NAND"


@dataclass
class BootstrapKey:
    """entries[i, p, v] is the gadget ciphertext of the monomial selected by
    digit value v at position p for mask index i; shape
    (n, d_r, B_r, 2*d_g, 2, N)."""

    entries: np.ndarray
    params: ParameterSet
    mont: bool

    @property
    def num_entries(self) -> int:
        n, d_r, b_r = self.entries.shape[:3]
        return n * d_r * b_r

    def entry(self, i: int, p: int, v: int) -> RgswCiphertext:
        return RgswCiphertext(self.entries[i, p, v], self.params, self.mont)


@dataclass
class Accumulator:
    acc: RlweCiphertext


@dataclass
class TestVector:
    tv: Polynomial
    gate: str


@dataclass
class BootstrapKeys:
    """Everything the server needs to refresh ciphertexts."""

    params: ParameterSet
    bk: BootstrapKey
    ksk: LweKeySwitchKey


def rotation_step(p: ParameterSet) -> int:
    """Monomial-exponent units per q-grid step."""
    return 2 * p.N // p.q


def nand_test_vector(p: ParameterSet) -> TestVector:
    """Coefficients so that slot 0 of tv * X^(w*2N/q) is +Q/8 when the phase
    w encodes gate output 1 and -Q/8 when it encodes 0, with the negacyclic
    wraparound supplying the anti-periodic half.

    The gate input carries a +2 offset on the q/4 grid, so the phase of an
    all-zero input sits at q/2; the sign layout below accounts for that.
    """
    q8 = p.Q // 8
    tv = np.full(p.N, q8, dtype=np.uint64)
    tv[: p.N // 4 + 1] = p.Q - q8
    return TestVector(Polynomial(tv, Domain.COEFFICIENT), GATE_NAND)


def btkey_gen(sk_lwe: LweSecretKey, sk_rlwe: RlweSecretKey, p: ParameterSet,
              rng: NoiseSampler) -> BootstrapKey:
    """Encrypt the full (i, digit position, digit value) monomial table.

    Monomial transforms are shared across entries with equal exponents, so
    the per-entry cost is the fresh-randomness encryption of 2*d_g rows.
    """
    tf = twiddle_table(p.N, p.Q)
    n, d_r, b_r, d_g = p.n, p.d_r, p.B_r, p.d_g
    step = rotation_step(p)
    lazy = _lazy_keys_ok(p, d_g)
    bk = np.zeros((n, d_r, b_r, 2 * d_g, 2, p.N), dtype=_key_dtype(lazy))

    # One (2*d_g, N) message block per distinct monomial exponent: the
    # scaled NTTs of -z*X^e and X^e. Entries only differ by fresh randomness.
    qv = np.uint64(p.Q)
    z_mont = sk_rlwe.z_ntt_mont(tf)
    scales = [(np.uint64(pow(p.B_G, j, p.Q)), tf.shoup(pow(p.B_G, j, p.Q)))
              for j in range(d_g)]
    block_cache: dict[int, np.ndarray] = {}

    def msg_block(e: int) -> np.ndarray:
        if e not in block_cache:
            m = np.zeros(p.N, dtype=np.uint64)
            if e < p.N:
                m[e] = 1
            else:
                m[e - p.N] = p.Q - 1
            tf.fwd(m)
            zm = np.zeros(p.N, dtype=np.uint64)
            K.pw_mont_mul(zm, m, z_mont, qv, tf.neg_qinv)
            blk = np.zeros((2 * d_g, p.N), dtype=np.uint64)
            for j, (c, c_sh) in enumerate(scales):
                K.pw_scale(blk[j], zm, c, c_sh, qv)
                blk[j] = np.where(blk[j] == 0, 0, qv - blk[j])
                K.pw_scale(blk[d_g + j], m, c, c_sh, qv)
            block_cache[e] = blk
        return block_cache[e]

    msgs = np.zeros((b_r * 2 * d_g, p.N), dtype=np.uint64)
    for i in range(n):
        s_i = int(sk_lwe.s[i])
        for pos in range(d_r):
            for v in range(b_r):
                e = (v * p.B_r ** pos * s_i % p.q) * step
                msgs[v * 2 * d_g:(v + 1) * 2 * d_g] = msg_block(e)
            rows = _encrypt_ntt_rows(msgs, sk_rlwe, tf, rng)
            if not lazy:
                K.to_mont(rows.reshape(-1), tf.r2, qv, tf.neg_qinv)
            bk[i, pos] = rows.reshape(b_r, 2 * d_g, 2, p.N)
    return BootstrapKey(bk, p, mont=not lazy)


def keygen(p: ParameterSet, rng: NoiseSampler) -> tuple[LweSecretKey, RlweSecretKey, BootstrapKeys]:
    """Fresh secret keys plus the server-side refresh material."""
    from .ciphertext import gen_lwe_key, gen_rlwe_key
    sk = gen_lwe_key(p, rng)
    zk = gen_rlwe_key(p, rng)
    bk = btkey_gen(sk, zk, p, rng)
    ksk = lwe_keyswitch_gen(zk, sk, p, rng)
    return sk, zk, BootstrapKeys(p, bk, ksk)


def acc_init(b: int, gate: str, p: ParameterSet) -> Accumulator:
    """Noiseless accumulator [0, tv * X^(b * 2N/q)] in coefficient order."""
    if gate != GATE_NAND:
        raise NotSupported(f"unsupported gate {gate!r}")
    tv = nand_test_vector(p).tv
    data = np.zeros((2, p.N), dtype=np.uint64)
    e = (b % p.q) * rotation_step(p)
    K.mul_monomial_kernel(data[1], tv.coeffs, e, np.uint64(p.Q))
    return Accumulator(RlweCiphertext(data, Domain.COEFFICIENT))


def accumulate(acc: Accumulator, a: np.ndarray, bk: BootstrapKey) -> Accumulator:
    """Run the gadget-product loop for one mask vector."""
    p = bk.params
    tf = twiddle_table(p.N, p.Q)
    data = acc.acc.to_coefficient(tf).data.copy()
    s0 = np.zeros(p.N, dtype=np.uint64)
    s1 = np.zeros(p.N, dtype=np.uint64)
    dig = np.zeros((p.N, _pad4(2 * p.d_g)), dtype=np.uint64)
    K.accumulate_inplace(
        data, np.asarray(a, dtype=np.uint64), bk.entries, np.uint64(p.B_r),
        p.d_r, np.uint64(log2_int(p.B_G)), p.d_g, np.uint64(p.q), tf.qu,
        tf.neg_qinv, tf.bmu, tf.psi_powers, tf.tf_sh, tf.psi_inv_powers,
        tf.tfi_sh, tf.ninv_u, tf.ninv_sh, s0, s1, dig, bk.mont)
    return Accumulator(RlweCiphertext(data, Domain.COEFFICIENT))


def _nand_input(c1: LweCiphertext, c2: LweCiphertext, p: ParameterSet) -> LweCiphertext:
    # Phase lands on (m1 + m2 + 2) * q/4.
    return lwe_add(lwe_add(c1, c2), lwe_trivial(2, p.q, p.t, p.n))


def _finish(acc_data: np.ndarray, keys: BootstrapKeys) -> LweCiphertext:
    p = keys.params
    lw = extract_lwe(RlweCiphertext(acc_data, Domain.COEFFICIENT), 0, p)
    lw.b = (lw.b + p.Q // 8) % p.Q
    return lwe_mod_switch(lwe_key_switch(lw, keys.ksk), p.q)


def bootstrap_nand(c1: LweCiphertext, c2: LweCiphertext,
                   keys: BootstrapKeys) -> LweCiphertext:
    """NAND with noise refresh; inputs and output encode bits at scale q/4."""
    p = keys.params
    c = _nand_input(c1, c2, p)
    acc = accumulate(acc_init(c.b, GATE_NAND, p), c.a, keys.bk)
    return _finish(acc.acc.data, keys)


def bootstrap_nand_batch(cs1: list, cs2: list, keys: BootstrapKeys) -> list:
    """Refresh a batch of independent NAND gates; the accumulation loops run
    in parallel across trials."""
    p = keys.params
    trials = len(cs1)
    tf = twiddle_table(p.N, p.Q)
    a_mat = np.zeros((trials, p.n), dtype=np.uint64)
    accs = np.zeros((trials, 2, p.N), dtype=np.uint64)
    tvc = nand_test_vector(p).tv.coeffs
    step = rotation_step(p)
    for t in range(trials):
        c = _nand_input(cs1[t], cs2[t], p)
        a_mat[t] = c.a
        K.mul_monomial_kernel(accs[t, 1], tvc, (c.b % p.q) * step, np.uint64(p.Q))
    K.accumulate_batch(
        accs, a_mat, keys.bk.entries, np.uint64(p.B_r), p.d_r,
        np.uint64(log2_int(p.B_G)), p.d_g, np.uint64(p.q), tf.qu,
        tf.neg_qinv, tf.bmu, tf.psi_powers, tf.tf_sh, tf.psi_inv_powers,
        tf.tfi_sh, tf.ninv_u, tf.ninv_sh, keys.bk.mont, _pad4(2 * p.d_g))

    # Extraction of slot 0, +Q/8 offset, then batch key switch.
    q8 = p.Q // 8
    ext_a = np.zeros((trials, p.N), dtype=np.uint64)
    ext_b = np.zeros(trials, dtype=np.uint64)
    qv = np.uint64(p.Q)
    for t in range(trials):
        a = accs[t, 0]
        ext_a[t, 0] = a[0]
        tail = a[:0:-1]
        ext_a[t, 1:] = np.where(tail == 0, 0, qv - tail)
        ext_b[t] = (int(accs[t, 1, 0]) + q8) % p.Q
    switched = np.zeros((trials, p.n + 1), dtype=np.uint64)
    K.lwe_keyswitch_batch(switched, ext_a, ext_b, keys.ksk.table,
                          np.uint64(keys.ksk.base), qv,
                          keyswitch_cap(keys.ksk.base, p.Q))
    out = []
    for t in range(trials):
        lw = LweCiphertext(switched[t, :p.n].copy(), int(switched[t, p.n]), p.Q)
        out.append(lwe_mod_switch(lw, p.q))
    return out


__all__ = [
    "GATE_NAND", "BootstrapKey", "Accumulator", "TestVector", "BootstrapKeys",
    "rotation_step", "nand_test_vector", "btkey_gen", "keygen", "acc_init",
    "accumulate", "bootstrap_nand", "bootstrap_nand_batch",
]
