"""Ciphertext types and operations: LWE/RLWE/RGSW encryption, extraction,
gadget (external) products, CMUX, blind rotation, and the two key switches.

Key material that feeds the compiled multiply-accumulate loops is stored in
NTT order, either standard-form (narrow Q: raw products are accumulated
lazily) or Montgomery-form (wide Q). ``RgswCiphertext.c0`` / ``.c1`` expose
the spec-level view as rows of RLWE ciphertexts regardless of storage form.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import IncompatibleParams, OutOfRange
from .params import ParameterSet, digits_for, log2_int
from .polyring import Domain, Polynomial, TwiddleTable, twiddle_table

_counter_lock = threading.Lock()
_external_products = 0


def _count_external_product(k: int = 1) -> None:
    global _external_products
    with _counter_lock:
        _external_products += k


def external_product_count() -> int:
    """Monotone counter of gadget products executed through this module."""
    return _external_products


class NoiseSampler:
    """Deterministic randomness source for one party/session.

    Errors are rounded continuous Gaussians (Box-Muller over a counter-based
    Philox stream, round-half-up); sigma 0 gives the noiseless mode used by
    exactness tests. Uniform draws and key sampling share the same stream so
    a single seed fixes an entire transcript.
    """

    def __init__(self, sigma: float, seed: int):
        self.sigma = sigma
        self.seed = seed
        self._rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def errors(self, size) -> np.ndarray:
        """Rounded Gaussian integers as int64."""
        if self.sigma == 0:
            return np.zeros(size, dtype=np.int64)
        n = int(np.prod(size)) if not np.isscalar(size) else int(size)
        u1 = 1.0 - self._rng.random(n)
        u2 = self._rng.random(n)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2) * self.sigma
        out = np.floor(z + 0.5).astype(np.int64)
        return out.reshape(size) if not np.isscalar(size) else out

    def errors_mod(self, size, modulus: int) -> np.ndarray:
        return np.mod(self.errors(size), modulus).astype(np.uint64)

    def uniform(self, size, modulus: int) -> np.ndarray:
        return self._rng.integers(0, modulus, size=size, dtype=np.uint64)

    def binary(self, n: int) -> np.ndarray:
        return self._rng.integers(0, 2, size=n, dtype=np.int64)

    def ternary(self, n: int) -> np.ndarray:
        return self._rng.integers(0, 3, size=n, dtype=np.int64) - 1

    def child(self, tag: int) -> "NoiseSampler":
        """Independent stream derived from this seed; used for retries."""
        return NoiseSampler(self.sigma, (self.seed * 0x9E3779B97F4A7C15 + tag) % (1 << 256))


@dataclass
class LweSecretKey:
    s: np.ndarray  # int64 entries in {0, 1}

    @property
    def n(self) -> int:
        return self.s.shape[0]


@dataclass
class RlweSecretKey:
    z: np.ndarray  # int64 entries in {-1, 0, 1}, coefficient order
    _ntt_mont: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def z_mod(self, q: int) -> np.ndarray:
        return np.mod(self.z, q).astype(np.uint64)

    def z_ntt_mont(self, tf: TwiddleTable) -> np.ndarray:
        """NTT of the key in Montgomery form; cached per modulus."""
        key = (tf.n, tf.q)
        if key not in self._ntt_mont:
            zc = self.z_mod(tf.q)
            tf.fwd(zc)
            K.to_mont(zc, tf.r2, tf.qu, tf.neg_qinv)
            self._ntt_mont[key] = zc
        return self._ntt_mont[key]

    def as_lwe_key(self) -> np.ndarray:
        """The key viewed as a length-N integer vector for extracted LWEs."""
        return self.z


def gen_lwe_key(p: ParameterSet, rng: NoiseSampler) -> LweSecretKey:
    return LweSecretKey(rng.binary(p.n))


def gen_rlwe_key(p: ParameterSet, rng: NoiseSampler) -> RlweSecretKey:
    return RlweSecretKey(rng.ternary(p.N))


@dataclass
class LweCiphertext:
    a: np.ndarray  # uint64, length = dimension
    b: int
    modulus: int

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def copy(self) -> "LweCiphertext":
        return LweCiphertext(self.a.copy(), self.b, self.modulus)


@dataclass
class RlweCiphertext:
    """Pair of ring elements; ``data`` has shape (2, N): row 0 = a, row 1 = b."""

    data: np.ndarray
    domain: Domain = Domain.COEFFICIENT

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def a(self) -> Polynomial:
        return Polynomial(self.data[0], self.domain)

    @property
    def b(self) -> Polynomial:
        return Polynomial(self.data[1], self.domain)

    def copy(self) -> "RlweCiphertext":
        return RlweCiphertext(self.data.copy(), self.domain)

    def to_coefficient(self, tf: TwiddleTable) -> "RlweCiphertext":
        if self.domain == Domain.COEFFICIENT:
            return self
        out = self.data.copy()
        tf.inv(out[0])
        tf.inv(out[1])
        return RlweCiphertext(out, Domain.COEFFICIENT)

    def to_ntt(self, tf: TwiddleTable) -> "RlweCiphertext":
        if self.domain == Domain.NTT:
            return self
        out = self.data.copy()
        tf.fwd(out[0])
        tf.fwd(out[1])
        return RlweCiphertext(out, Domain.NTT)

    @classmethod
    def from_ab(cls, a: Polynomial, b: Polynomial) -> "RlweCiphertext":
        if a.domain != b.domain:
            raise IncompatibleParams("a and b must share a domain")
        return cls(np.stack([a.coeffs, b.coeffs]).astype(np.uint64), a.domain)


@dataclass
class RlwePrimeVector:
    """Gadget ladder: row j encrypts base^j times the message."""

    rows: list

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, j: int) -> RlweCiphertext:
        return self.rows[j]


def _pad4(lanes: int) -> int:
    # Lane blocks rounded up so the column loops vectorize cleanly.
    return (lanes + 3) // 4 * 4


def _lazy_keys_ok(p: ParameterSet, num_rows: int) -> bool:
    # Raw-product accumulation of 2*d terms, with digit factors up to 4Q
    # from the lazy forward transform, must fit 64 bits.
    return 2 * p.q_bits + 2 + (2 * num_rows - 1).bit_length() <= 63


def _key_dtype(lazy: bool) -> type:
    return np.uint32 if lazy else np.uint64


@dataclass
class RgswCiphertext:
    """Gadget ciphertext: two RLWE' columns, stored as one (2*d_g, 2, N) array
    in NTT order. ``mont`` records the storage form of the rows."""

    rows: np.ndarray
    params: ParameterSet
    mont: bool

    @property
    def d_g(self) -> int:
        return self.rows.shape[0] // 2

    def _column(self, base_row: int) -> RlwePrimeVector:
        tf = twiddle_table(self.params.N, self.params.Q)
        out = []
        for j in range(self.d_g):
            data = self.rows[base_row + j].astype(np.uint64)
            if self.mont:
                K.from_mont(data[0], tf.qu, tf.neg_qinv)
                K.from_mont(data[1], tf.qu, tf.neg_qinv)
            out.append(RlweCiphertext(data, Domain.NTT))
        return RlwePrimeVector(out)

    @property
    def c0(self) -> RlwePrimeVector:
        """Rows encrypting -z * m * B_G^j."""
        return self._column(0)

    @property
    def c1(self) -> RlwePrimeVector:
        """Rows encrypting m * B_G^j."""
        return self._column(self.d_g)

    @classmethod
    def from_columns(cls, c0_rows: list, c1_rows: list, p: ParameterSet) -> "RgswCiphertext":
        """Assemble from NTT-domain RLWE rows (standard form)."""
        tf = twiddle_table(p.N, p.Q)
        d_g = len(c1_rows)
        lazy = _lazy_keys_ok(p, d_g)
        rows = np.zeros((2 * d_g, 2, p.N), dtype=np.uint64)
        for j, ct in enumerate(c0_rows):
            rows[j] = ct.data
        for j, ct in enumerate(c1_rows):
            rows[d_g + j] = ct.data
        if not lazy:
            flat = rows.reshape(-1)
            K.to_mont(flat, tf.r2, tf.qu, tf.neg_qinv)
        return cls(rows.astype(_key_dtype(lazy)), p, mont=not lazy)


@dataclass
class RlweKeySwitchKey:
    """Rows encrypt base^j * z_src under z_dst; (d, 2, N), NTT order,
    Montgomery form."""

    rows: np.ndarray
    base: int
    params: ParameterSet

    @property
    def d(self) -> int:
        return self.rows.shape[0]

    def standard_rows(self) -> np.ndarray:
        tf = twiddle_table(self.params.N, self.params.Q)
        out = self.rows.copy()
        flat = out.reshape(-1)
        K.from_mont(flat, tf.qu, tf.neg_qinv)
        return out


@dataclass
class LweKeySwitchKey:
    """table[i, p] is an LWE encryption of B_ks^p * z[i] mod Q under s;
    shape (N, d_ks, n + 1) with the trailing column holding b."""

    table: np.ndarray
    base: int
    modulus: int


# ---------------------------------------------------------------------------
# LWE

def lwe_encrypt(m: int, sk: LweSecretKey, p: ParameterSet, rng: NoiseSampler) -> LweCiphertext:
    """Encrypt m mod t at scale q/t."""
    if not 0 <= m < p.t:
        raise OutOfRange(f"message {m} outside [0, {p.t})")
    a = rng.uniform(p.n, p.q)
    e = int(rng.errors(1)[0])
    b = (int((a * sk.s.astype(np.uint64)).sum()) + e + m * (p.q // p.t)) % p.q
    return LweCiphertext(a, b, p.q)


def lwe_phase(c: LweCiphertext, key: np.ndarray) -> int:
    """b - a.s mod modulus for an integer key vector (entries in {-1,0,1})."""
    a = c.a.astype(object)
    pos = int(a[key == 1].sum()) if (key == 1).any() else 0
    neg = int(a[key == -1].sum()) if (key == -1).any() else 0
    return (c.b - pos + neg) % c.modulus


def decode_phase(phase: int, modulus: int, t: int) -> int:
    """Round-half-up decode of a scaled phase to Z_t."""
    return ((2 * phase * t + modulus) // (2 * modulus)) % t


def lwe_decrypt(c: LweCiphertext, sk: LweSecretKey, t: int) -> int:
    return decode_phase(lwe_phase(c, sk.s), c.modulus, t)


def lwe_add(c1: LweCiphertext, c2: LweCiphertext) -> LweCiphertext:
    if c1.modulus != c2.modulus or c1.dim != c2.dim:
        raise IncompatibleParams("LWE operands disagree on modulus or dimension")
    q = np.uint64(c1.modulus)
    return LweCiphertext((c1.a + c2.a) % q, (c1.b + c2.b) % c1.modulus, c1.modulus)


def lwe_trivial(m: int, modulus: int, t: int, dim: int) -> LweCiphertext:
    """Noiseless ciphertext [0, m*modulus/t]."""
    return LweCiphertext(np.zeros(dim, dtype=np.uint64), m * (modulus // t) % modulus, modulus)


# ---------------------------------------------------------------------------
# RLWE

def _encrypt_ntt_rows(msgs_ntt: np.ndarray, sk: RlweSecretKey, tf: TwiddleTable,
                      rng: NoiseSampler) -> np.ndarray:
    """Encrypt each NTT-domain message row; returns (rows, 2, N) standard form."""
    rows, n = msgs_ntt.shape
    z_mont = sk.z_ntt_mont(tf)
    out = np.zeros((rows, 2, n), dtype=np.uint64)
    out[:, 0] = rng.uniform((rows, n), tf.q)
    noise = rng.errors_mod((rows, n), tf.q)
    if rows > 1:
        tf.fwd_batch(noise)
    else:
        tf.fwd(noise[0])
    em = (noise + msgs_ntt) % np.uint64(tf.q)
    for r in range(rows):
        K.pw_mont_muladd(out[r, 1], out[r, 0], z_mont, em[r], tf.qu, tf.neg_qinv)
    return out


def rlwe_encrypt(m: Polynomial, sk: RlweSecretKey, p: ParameterSet,
                 rng: NoiseSampler, scale: int | None = None,
                 out_domain: Domain = Domain.COEFFICIENT) -> RlweCiphertext:
    """Encrypt a coefficient-domain message at the given scale.

    scale defaults to Q/t; pass 1 for key-material style encryptions where
    the message is already a full-range residue.
    """
    tf = twiddle_table(p.N, p.Q)
    if scale is None:
        scale = p.Q // p.t
    msg = (m.coeffs * np.uint64(scale)) % np.uint64(p.Q) if scale != 1 else m.coeffs.copy()
    msg = msg.astype(np.uint64)
    tf.fwd(msg)
    data = _encrypt_ntt_rows(msg[None, :], sk, tf, rng)[0]
    ct = RlweCiphertext(data, Domain.NTT)
    return ct.to_coefficient(tf) if out_domain == Domain.COEFFICIENT else ct


def rlwe_phase(c: RlweCiphertext, sk: RlweSecretKey, p: ParameterSet) -> np.ndarray:
    """b - a*z as a coefficient-domain residue vector."""
    tf = twiddle_table(p.N, p.Q)
    cn = c.to_ntt(tf)
    az = np.zeros(p.N, dtype=np.uint64)
    K.pw_mont_mul(az, cn.data[0], sk.z_ntt_mont(tf), tf.qu, tf.neg_qinv)
    phase = (cn.data[1] + np.uint64(p.Q) - az) % np.uint64(p.Q)
    tf.inv(phase)
    return phase


def rlwe_decrypt(c: RlweCiphertext, sk: RlweSecretKey, p: ParameterSet,
                 t: int | None = None) -> np.ndarray:
    """Rounded decode of every slot at plaintext modulus t."""
    if t is None:
        t = p.t
    phase = rlwe_phase(c, sk, p)
    tt = np.uint64(t)
    return ((2 * phase * tt + np.uint64(p.Q)) // np.uint64(2 * p.Q)) % tt


def rlwe_trivial(m: Polynomial, p: ParameterSet, scale: int | None = None) -> RlweCiphertext:
    """Noiseless [0, m*scale]."""
    if scale is None:
        scale = p.Q // p.t
    msg = (m.coeffs.astype(np.uint64) * np.uint64(scale)) % np.uint64(p.Q) \
        if scale != 1 else m.coeffs.astype(np.uint64).copy()
    data = np.zeros((2, p.N), dtype=np.uint64)
    data[1] = msg
    return RlweCiphertext(data, Domain.COEFFICIENT)


def rlwe_add(c1: RlweCiphertext, c2: RlweCiphertext, p: ParameterSet) -> RlweCiphertext:
    if c1.domain != c2.domain:
        raise IncompatibleParams("RLWE addition requires matching domains")
    return RlweCiphertext((c1.data + c2.data) % np.uint64(p.Q), c1.domain)


def rlwe_sub(c1: RlweCiphertext, c2: RlweCiphertext, p: ParameterSet) -> RlweCiphertext:
    if c1.domain != c2.domain:
        raise IncompatibleParams("RLWE subtraction requires matching domains")
    q = np.uint64(p.Q)
    return RlweCiphertext((c1.data + q - c2.data) % q, c1.domain)


def rlwe_mul_monomial(c: RlweCiphertext, e: int, p: ParameterSet) -> RlweCiphertext:
    """X^e * ciphertext (coefficient domain), e taken mod 2N."""
    tf = twiddle_table(p.N, p.Q)
    cc = c.to_coefficient(tf)
    out = np.zeros_like(cc.data)
    e %= 2 * p.N
    K.mul_monomial_kernel(out[0], cc.data[0], e, tf.qu)
    K.mul_monomial_kernel(out[1], cc.data[1], e, tf.qu)
    return RlweCiphertext(out, Domain.COEFFICIENT)


# ---------------------------------------------------------------------------
# Extraction (RLWE slot -> LWE under the ring key)

def extract_lwe(c: RlweCiphertext, index: int, p: ParameterSet) -> LweCiphertext:
    """LWE ciphertext of slot ``index`` under the ring key viewed as a vector.

    For index 0 the mask is [a[0], -a[N-1], ..., -a[1]]; general indices
    rotate the same pattern.
    """
    if not 0 <= index < p.N:
        raise OutOfRange(f"slot index {index} outside [0, {p.N})")
    tf = twiddle_table(p.N, p.Q)
    cc = c.to_coefficient(tf)
    a = cc.data[0]
    q = np.uint64(p.Q)
    out = np.zeros(p.N, dtype=np.uint64)
    out[: index + 1] = a[index::-1]
    if index + 1 < p.N:
        tail = a[p.N - 1: index: -1]
        out[index + 1:] = np.where(tail == 0, 0, q - tail)
    return LweCiphertext(out, int(cc.data[1][index]), p.Q)


# ---------------------------------------------------------------------------
# RGSW and gadget products

def rgsw_encrypt(m: Polynomial, sk: RlweSecretKey, p: ParameterSet,
                 rng: NoiseSampler) -> RgswCiphertext:
    """Encrypt a (typically monomial) message as a gadget ciphertext."""
    tf = twiddle_table(p.N, p.Q)
    d_g = p.d_g
    m_ntt = m.coeffs.astype(np.uint64).copy()
    tf.fwd(m_ntt)
    zm = np.zeros(p.N, dtype=np.uint64)
    K.pw_mont_mul(zm, m_ntt, sk.z_ntt_mont(tf), tf.qu, tf.neg_qinv)
    q = np.uint64(p.Q)
    msgs = np.zeros((2 * d_g, p.N), dtype=np.uint64)
    for j in range(d_g):
        scale = pow(p.B_G, j, p.Q)
        c, c_sh = np.uint64(scale), tf.shoup(scale)
        K.pw_scale(msgs[j], zm, c, c_sh, q)
        msgs[j] = np.where(msgs[j] == 0, 0, q - msgs[j])  # -z*m*B^j
        K.pw_scale(msgs[d_g + j], m_ntt, c, c_sh, q)      # m*B^j
    rows = _encrypt_ntt_rows(msgs, sk, tf, rng)
    lazy = _lazy_keys_ok(p, d_g)
    if not lazy:
        flat = rows.reshape(-1)
        K.to_mont(flat, tf.r2, tf.qu, tf.neg_qinv)
    return RgswCiphertext(rows.astype(_key_dtype(lazy)), p, mont=not lazy)


def _check_gsw_compat(c: RlweCiphertext, g: RgswCiphertext, p: ParameterSet) -> None:
    if g.params.N != p.N or g.params.Q != p.Q or g.params.B_G != p.B_G:
        raise IncompatibleParams("gadget ciphertext was built under different parameters")
    if c.n != p.N:
        raise IncompatibleParams("ring dimension mismatch")


def external_product(c: RlweCiphertext, g: RgswCiphertext, p: ParameterSet) -> RlweCiphertext:
    """c (x) g: gadget-decompose c, multiply-accumulate against g's rows.

    Decomposition happens on coefficient-domain data; an NTT-domain operand
    is converted first.
    """
    _check_gsw_compat(c, g, p)
    tf = twiddle_table(p.N, p.Q)
    out = c.to_coefficient(tf).data.copy()
    s0 = np.zeros(p.N, dtype=np.uint64)
    s1 = np.zeros(p.N, dtype=np.uint64)
    dig = np.zeros((p.N, _pad4(2 * g.d_g)), dtype=np.uint64)
    K.external_product_inplace(
        out, g.rows, np.uint64(log2_int(p.B_G)), g.d_g, tf.qu, tf.neg_qinv,
        tf.bmu, tf.psi_powers, tf.tf_sh, tf.psi_inv_powers, tf.tfi_sh,
        tf.ninv_u, tf.ninv_sh, s0, s1, dig, g.mont)
    _count_external_product()
    return RlweCiphertext(out, Domain.COEFFICIENT)


def cmux(g: RgswCiphertext, c0: RlweCiphertext, c1: RlweCiphertext,
         p: ParameterSet) -> RlweCiphertext:
    """g (x) (c1 - c0) + c0: selects c_sel for a 0/1 gadget selector."""
    tf = twiddle_table(p.N, p.Q)
    d = rlwe_sub(c1.to_coefficient(tf), c0.to_coefficient(tf), p)
    prod = external_product(d, g, p)
    return rlwe_add(prod, c0.to_coefficient(tf), p)


def blind_rotate_step(g: RgswCiphertext, c: RlweCiphertext, j: int,
                      p: ParameterSet) -> RlweCiphertext:
    """CMUX(g, c, X^-j * c): rotate by j slots iff the selector is 1."""
    rotated = rlwe_mul_monomial(c, 2 * p.N - (j % (2 * p.N)), p)
    return cmux(g, c, rotated, p)


# ---------------------------------------------------------------------------
# RLWE key switch

def rlwe_keyswitch_gen(z_src: np.ndarray, sk_dst: RlweSecretKey, p: ParameterSet,
                       rng: NoiseSampler, base: int | None = None) -> RlweKeySwitchKey:
    """Key encrypting base^j * z_src under sk_dst, for switching ciphertexts
    from key z_src to sk_dst. z_src is a coefficient-order residue vector."""
    tf = twiddle_table(p.N, p.Q)
    if base is None:
        base = p.B_rlwe_ks
    d = digits_for(base, p.Q)
    src_ntt = np.mod(z_src, p.Q).astype(np.uint64)
    tf.fwd(src_ntt)
    msgs = np.zeros((d, p.N), dtype=np.uint64)
    for j in range(d):
        scale = pow(base, j, p.Q)
        K.pw_scale(msgs[j], src_ntt, np.uint64(scale), tf.shoup(scale), tf.qu)
    rows = _encrypt_ntt_rows(msgs, sk_dst, tf, rng)
    flat = rows.reshape(-1)
    K.to_mont(flat, tf.r2, tf.qu, tf.neg_qinv)
    return RlweKeySwitchKey(rows, base, p)


def rlwe_key_switch(c: RlweCiphertext, ksk: RlweKeySwitchKey,
                    p: ParameterSet) -> RlweCiphertext:
    """[0, b] - sum_j a_j * ksk[j] where a_j are the base-B digits of a."""
    if ksk.params.N != p.N or ksk.params.Q != p.Q:
        raise IncompatibleParams("key-switch key was built under different parameters")
    if ksk.base & (ksk.base - 1):
        raise IncompatibleParams("key-switch base must be a power of two")
    tf = twiddle_table(p.N, p.Q)
    out = c.to_coefficient(tf).data.copy()
    s0 = np.zeros(p.N, dtype=np.uint64)
    s1 = np.zeros(p.N, dtype=np.uint64)
    dig = np.zeros((p.N, _pad4(ksk.d)), dtype=np.uint64)
    K.rlwe_keyswitch_inplace(
        out, ksk.rows, np.uint64(log2_int(ksk.base)), ksk.d, tf.qu,
        tf.neg_qinv, tf.psi_powers, tf.tf_sh, tf.psi_inv_powers, tf.tfi_sh,
        tf.ninv_u, tf.ninv_sh, s0, s1, dig)
    return RlweCiphertext(out, Domain.COEFFICIENT)


# ---------------------------------------------------------------------------
# LWE key switch (ring key -> vector key) and modulus switch

def _dot_mod(mat: np.ndarray, vec: np.ndarray, modulus: int) -> np.ndarray:
    """(mat @ vec) mod modulus without 64-bit overflow; vec entries are 0/1."""
    terms = int(vec.sum())
    if terms == 0:
        return np.zeros(mat.shape[0], dtype=np.uint64)
    if terms * (modulus - 1) < (1 << 63):
        return ((mat * vec).sum(axis=1)) % np.uint64(modulus)
    cols = np.nonzero(vec)[0]
    acc = np.zeros(mat.shape[0], dtype=np.uint64)
    step = max(1, (1 << 63) // (modulus - 1) - 1)
    for i in range(0, cols.shape[0], step):
        acc = (acc + mat[:, cols[i:i + step]].sum(axis=1)) % np.uint64(modulus)
    return acc


def lwe_keyswitch_gen(sk_ring: RlweSecretKey, sk_lwe: LweSecretKey,
                      p: ParameterSet, rng: NoiseSampler) -> LweKeySwitchKey:
    """Encrypt B_ks^p * z[i] mod Q under s for every (i, p)."""
    d = p.d_ks
    N, n, Q = sk_ring.n, sk_lwe.n, p.Q
    a = rng.uniform((N * d, n), Q)
    e = rng.errors_mod(N * d, Q).astype(np.uint64)
    scales = [pow(p.B_ks, j, Q) for j in range(d)]
    # z entries are +-1 residues, so the products need more than 64 bits.
    msgs = np.array(
        [[int(zm) * sc % Q for sc in scales] for zm in np.mod(sk_ring.z, Q)],
        dtype=np.uint64)
    s = sk_lwe.s.astype(np.uint64)
    b = (_dot_mod(a, s, Q) + e + msgs.reshape(-1)) % np.uint64(Q)
    table = np.zeros((N, d, n + 1), dtype=np.uint64)
    table[:, :, :n] = a.reshape(N, d, n)
    table[:, :, n] = b.reshape(N, d)
    return LweKeySwitchKey(table, p.B_ks, Q)


def keyswitch_cap(base: int, modulus: int) -> int:
    """Rows a lazy key-switch accumulator can absorb before reducing."""
    return max(1, (1 << 63) // ((base - 1) * (modulus - 1) + 1))


def lwe_key_switch(c: LweCiphertext, ksk: LweKeySwitchKey) -> LweCiphertext:
    """Switch an extracted (ring-key) LWE to the short vector key."""
    N, d, n1 = ksk.table.shape
    if c.dim != N or c.modulus != ksk.modulus:
        raise IncompatibleParams("ciphertext does not match the key-switch key")
    out = np.zeros((1, n1), dtype=np.uint64)
    K.lwe_keyswitch_batch(
        out, c.a[None, :], np.array([c.b], dtype=np.uint64), ksk.table,
        np.uint64(ksk.base), np.uint64(ksk.modulus),
        keyswitch_cap(ksk.base, ksk.modulus))
    return LweCiphertext(out[0, :n1 - 1].copy(), int(out[0, n1 - 1]), ksk.modulus)


def lwe_mod_switch(c: LweCiphertext, target: int) -> LweCiphertext:
    """Rescale every entry by target/modulus with round-half-up."""
    Q = c.modulus
    if 2 * (Q - 1) * target < (1 << 64):
        tt, qq = np.uint64(target), np.uint64(Q)
        a = ((2 * c.a * tt + qq) // (2 * qq)) % tt
    else:
        a = np.array([((2 * int(x) * target + Q) // (2 * Q)) % target for x in c.a],
                     dtype=np.uint64)
    b = ((2 * c.b * target + Q) // (2 * Q)) % target
    return LweCiphertext(a.astype(np.uint64), b, target)


__all__ = [
    "NoiseSampler", "LweSecretKey", "RlweSecretKey", "gen_lwe_key", "gen_rlwe_key",
    "LweCiphertext", "RlweCiphertext", "RlwePrimeVector", "RgswCiphertext",
    "RlweKeySwitchKey", "LweKeySwitchKey",
    "lwe_encrypt", "lwe_decrypt", "lwe_phase", "lwe_add", "lwe_trivial",
    "decode_phase", "rlwe_encrypt", "rlwe_decrypt", "rlwe_phase", "rlwe_trivial",
    "rlwe_add", "rlwe_sub", "rlwe_mul_monomial", "extract_lwe",
    "rgsw_encrypt", "external_product", "cmux", "blind_rotate_step",
    "rlwe_keyswitch_gen", "rlwe_key_switch", "lwe_keyswitch_gen",
    "lwe_key_switch", "lwe_mod_switch", "keyswitch_cap",
    "external_product_count",
]
