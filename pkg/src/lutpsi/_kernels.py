"""Compiled inner loops: modular multiply, NTT/INTT, gadget products.

Conventions shared by every kernel here:

* Coefficient data travels as uint64 arrays holding standard residues < Q.
* Twiddle factors come in pairs (w, w_shoup) with w_shoup = floor(w*2^64/Q),
  so the butterfly multiply is two wrapping products plus a branchless
  correction.
* Key material is either standard-form (narrow moduli, where 2*d raw 128-bit
  products never overflow a uint64 accumulator and reduction is deferred) or
  Montgomery-form (wide moduli); callers pass ``keys_mont`` accordingly.
* Forward NTT consumes natural order and produces bit-reversed order; the
  inverse consumes bit-reversed order, produces natural order, and folds in
  the final N^-1 scaling pass.
* Gadget digit extraction is shift/mask: gadget and key-switch bases are
  powers of two.

Index variables stay int64; value variables stay uint64. Mixing the two in
arithmetic silently promotes to float under NumPy rules, so every mixed spot
casts explicitly.
"""

import numpy as np
from numba import njit, prange

_MASK32 = np.uint64(0xFFFFFFFF)
_U0 = np.uint64(0)
_U1 = np.uint64(1)
_U32 = np.uint64(32)

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


@njit(inline="always")
def _mulhi(a, b):
    # High 64 bits of a 64x64 product, via 32-bit limbs.
    a0 = a & _MASK32
    a1 = a >> _U32
    b0 = b & _MASK32
    b1 = b >> _U32
    t = a1 * b0 + ((a0 * b0) >> _U32)
    w1 = a0 * b1 + (t & _MASK32)
    return a1 * b1 + (t >> _U32) + (w1 >> _U32)


@njit(inline="always")
def _shoup(a, w, w_sh, q):
    # a*w mod q with precomputed w_sh = floor(w << 64 / q); a unrestricted.
    r = a * w - _mulhi(a, w_sh) * q
    return min(r, r - q)


@njit(inline="always")
def _shoup_lazy(a, w, w_sh, q):
    # Same product but left in [0, 2q).
    return a * w - _mulhi(a, w_sh) * q


@njit(inline="always")
def _mont(a, b_mont, q, nqi):
    # REDC product a * b_mont * 2^-64 mod q; nqi = -q^-1 mod 2^64.
    t_lo = a * b_mont
    t_hi = _mulhi(a, b_mont)
    m = t_lo * nqi
    r = t_hi + _mulhi(m, q) + np.uint64(t_lo != _U0)
    return min(r, r - q)


@njit(inline="always")
def _addmod(a, b, q):
    s = a + b
    return min(s, s - q)


@njit(inline="always")
def _submod(a, b, q):
    d = a - b
    return min(d, d + q)


@njit(inline="always")
def _barrett(x, q, bmu):
    # x mod q for any 64-bit x; bmu = floor(2^64 / q).
    r = x - _mulhi(x, bmu) * q
    r = min(r, r - q)
    return min(r, r - q)


@njit(cache=True, nogil=True)
def ntt_lazy(a, tf, tf_sh, q):
    """Forward pass leaving values below 4q; callers that tolerate the slack
    (the gadget MACs) use this directly and skip the cleanup."""
    n = a.shape[0]
    q2 = q + q
    t = n
    m = 1
    while m < n:
        t >>= 1
        for i in range(m):
            j1 = 2 * i * t
            w = tf[m + i]
            w_sh = tf_sh[m + i]
            for j in range(j1, j1 + t):
                u = a[j]
                u = min(u, u - q2)
                v = _shoup_lazy(a[j + t], w, w_sh, q)
                a[j] = u + v
                a[j + t] = u - v + q2
        m <<= 1


@njit(cache=True, nogil=True)
def ntt_inplace(a, tf, tf_sh, q):
    """Cooley-Tukey forward pass; natural order in, bit-reversed out.

    Butterflies run lazily with values below 4q (q < 2^54 leaves headroom);
    a final pass restores fully-reduced residues.
    """
    ntt_lazy(a, tf, tf_sh, q)
    n = a.shape[0]
    q2 = q + q
    for j in range(n):
        x = a[j]
        x = min(x, x - q2)
        a[j] = min(x, x - q)


@njit(cache=True, nogil=True)
def intt_inplace(a, tfi, tfi_sh, ninv, ninv_sh, q):
    """Gentleman-Sande inverse pass with the trailing N^-1 scaling loop.

    Lazy butterflies keep values below 2q; the scaling pass reduces fully.
    """
    n = a.shape[0]
    q2 = q + q
    t = 1
    m = n
    while m > 1:
        j1 = 0
        h = m >> 1
        for i in range(h):
            w = tfi[h + i]
            w_sh = tfi_sh[h + i]
            for j in range(j1, j1 + t):
                u = a[j]
                v = a[j + t]
                s = u + v
                a[j] = min(s, s - q2)
                a[j + t] = _shoup_lazy(u - v + q2, w, w_sh, q)
            j1 += 2 * t
        t <<= 1
        m = h
    for j in range(n):
        a[j] = _shoup(a[j], ninv, ninv_sh, q)


@njit(cache=True, nogil=True, parallel=True)
def ntt_batch(mat, tf, tf_sh, q):
    for r in prange(mat.shape[0]):
        ntt_inplace(mat[r], tf, tf_sh, q)


@njit(cache=True, nogil=True, parallel=True)
def intt_batch(mat, tfi, tfi_sh, ninv, ninv_sh, q):
    for r in prange(mat.shape[0]):
        intt_inplace(mat[r], tfi, tfi_sh, ninv, ninv_sh, q)


@njit(cache=True, nogil=True)
def to_mont(a, r2, q, nqi):
    for i in range(a.shape[0]):
        a[i] = _mont(a[i], r2, q, nqi)


@njit(cache=True, nogil=True)
def from_mont(a, q, nqi):
    for i in range(a.shape[0]):
        a[i] = _mont(a[i], _U1, q, nqi)


@njit(cache=True, nogil=True)
def pw_mul(out, a, b, r2, q, nqi):
    # Pointwise product of two standard-form vectors.
    for i in range(a.shape[0]):
        out[i] = _mont(a[i], _mont(b[i], r2, q, nqi), q, nqi)


@njit(cache=True, nogil=True)
def pw_mont_mul(out, a, b_mont, q, nqi):
    for i in range(a.shape[0]):
        out[i] = _mont(a[i], b_mont[i], q, nqi)


@njit(cache=True, nogil=True)
def pw_mont_muladd(out, a, b_mont, c, q, nqi):
    # out = a * b_mont + c, elementwise.
    for i in range(a.shape[0]):
        out[i] = _addmod(_mont(a[i], b_mont[i], q, nqi), c[i], q)


@njit(cache=True, nogil=True)
def pw_scale(out, a, c, c_sh, q):
    for i in range(a.shape[0]):
        out[i] = _shoup(a[i], c, c_sh, q)


@njit(cache=True, nogil=True)
def pw_add(out, a, b, q):
    for i in range(a.shape[0]):
        out[i] = _addmod(a[i], b[i], q)


@njit(cache=True, nogil=True)
def pw_sub(out, a, b, q):
    for i in range(a.shape[0]):
        out[i] = _submod(a[i], b[i], q)


@njit(cache=True, nogil=True)
def pw_neg(out, a, q):
    for i in range(a.shape[0]):
        out[i] = _U0 if a[i] == _U0 else q - a[i]


@njit(cache=True, nogil=True)
def substitute_kernel(out, a, k, q):
    """out = a(X^k) over X^N+1; coefficient i lands at i*k mod 2N, negated
    when the exponent wraps into [N, 2N)."""
    n = a.shape[0]
    n2 = 2 * n
    for i in range(n):
        j = (i * k) % n2
        if j < n:
            out[j] = a[i]
        else:
            out[j - n] = _U0 if a[i] == _U0 else q - a[i]


@njit(cache=True, nogil=True)
def mul_monomial_kernel(out, a, e, q):
    """out = X^e * a for e in [0, 2N)."""
    n = a.shape[0]
    for i in range(n):
        j = i + e
        neg = False
        while j >= n:
            j -= n
            neg = not neg
        if neg:
            out[j] = _U0 if a[i] == _U0 else q - a[i]
        else:
            out[j] = a[i]


@njit(cache=True, nogil=True)
def ntt_lanes_lazy(a, tf, tf_sh, q):
    """Forward pass over an (N, L) lane-major block: every column is one
    polynomial. The column loop vectorizes, which is what pays for the
    layout. Values stay below 4q."""
    n, lanes = a.shape
    q2 = q + q
    t = n
    m = 1
    while m < n:
        t >>= 1
        for i in range(m):
            j1 = 2 * i * t
            w = tf[m + i]
            w_sh = tf_sh[m + i]
            for j in range(j1, j1 + t):
                for l in range(lanes):
                    u = a[j, l]
                    u = min(u, u - q2)
                    v = _shoup_lazy(a[j + t, l], w, w_sh, q)
                    a[j, l] = u + v
                    a[j + t, l] = u - v + q2
        m <<= 1


@njit(cache=True, nogil=True)
def intt_pair(a0, a1, tfi, tfi_sh, ninv, ninv_sh, q):
    """Inverse transform of two polynomials in step (the two halves of an
    RLWE ciphertext); identical schedule to intt_inplace."""
    n = a0.shape[0]
    q2 = q + q
    t = 1
    m = n
    while m > 1:
        j1 = 0
        h = m >> 1
        for i in range(h):
            w = tfi[h + i]
            w_sh = tfi_sh[h + i]
            for j in range(j1, j1 + t):
                u0 = a0[j]
                v0 = a0[j + t]
                s0 = u0 + v0
                a0[j] = min(s0, s0 - q2)
                a0[j + t] = _shoup_lazy(u0 - v0 + q2, w, w_sh, q)
                u1 = a1[j]
                v1 = a1[j + t]
                s1 = u1 + v1
                a1[j] = min(s1, s1 - q2)
                a1[j + t] = _shoup_lazy(u1 - v1 + q2, w, w_sh, q)
            j1 += 2 * t
        t <<= 1
        m = h
    for j in range(n):
        a0[j] = _shoup(a0[j], ninv, ninv_sh, q)
        a1[j] = _shoup(a1[j], ninv, ninv_sh, q)


@njit(cache=True, nogil=True)
def external_product_inplace(ct, gsw, bg_bits, dg, q, nqi, bmu,
                             tf, tf_sh, tfi, tfi_sh, ninv, ninv_sh,
                             acc0, acc1, dig, keys_mont):
    """ct (2, N) coefficient domain <- ct (x) gsw, in place.

    gsw is (2*dg, 2, N) in NTT order: rows [0, dg) multiply the a-digits,
    rows [dg, 2*dg) the b-digits. Scratch: acc0/acc1 length N, dig an
    (N, >=2*dg) lane block whose surplus lanes stay zero. Digit lanes leave
    ntt_lanes_lazy below 4q; both MAC flavors absorb that slack (lazy
    products stay under 63 bits by the key-form rule, REDC tolerates any
    product below q * 2^64).
    """
    n = ct.shape[1]
    mask = (_U1 << bg_bits) - _U1
    for x in range(n):
        w0 = ct[0, x]
        w1 = ct[1, x]
        for jd in range(dg):
            sh = np.uint64(jd) * bg_bits
            dig[x, jd] = (w0 >> sh) & mask
            dig[x, dg + jd] = (w1 >> sh) & mask
    ntt_lanes_lazy(dig, tf, tf_sh, q)
    if keys_mont:
        for x in range(n):
            s0 = _U0
            s1 = _U0
            for l in range(2 * dg):
                s0 = _addmod(s0, _mont(dig[x, l], np.uint64(gsw[l, 0, x]), q, nqi), q)
                s1 = _addmod(s1, _mont(dig[x, l], np.uint64(gsw[l, 1, x]), q, nqi), q)
            acc0[x] = s0
            acc1[x] = s1
    else:
        for x in range(n):
            s0 = _U0
            s1 = _U0
            for l in range(2 * dg):
                s0 += dig[x, l] * np.uint64(gsw[l, 0, x])
                s1 += dig[x, l] * np.uint64(gsw[l, 1, x])
            acc0[x] = _barrett(s0, q, bmu)
            acc1[x] = _barrett(s1, q, bmu)
    intt_pair(acc0, acc1, tfi, tfi_sh, ninv, ninv_sh, q)
    for x in range(n):
        ct[0, x] = acc0[x]
        ct[1, x] = acc1[x]


@njit(cache=True, nogil=True)
def rlwe_keyswitch_inplace(ct, ksk, bks_bits, dks, q, nqi,
                           tf, tf_sh, tfi, tfi_sh, ninv, ninv_sh,
                           acc0, acc1, dig):
    """ct (2, N) coefficient domain <- [0, b] - sum_j a_j * ksk[j], in place.

    ksk is (dks, 2, N), NTT order, Montgomery form. dig is an (N, >=dks)
    lane block.
    """
    n = ct.shape[1]
    mask = (_U1 << bks_bits) - _U1
    for x in range(n):
        w = ct[0, x]
        for jd in range(dks):
            dig[x, jd] = (w >> (np.uint64(jd) * bks_bits)) & mask
    ntt_lanes_lazy(dig, tf, tf_sh, q)
    for x in range(n):
        s0 = _U0
        s1 = _U0
        for l in range(dks):
            s0 = _addmod(s0, _mont(dig[x, l], np.uint64(ksk[l, 0, x]), q, nqi), q)
            s1 = _addmod(s1, _mont(dig[x, l], np.uint64(ksk[l, 1, x]), q, nqi), q)
        acc0[x] = s0
        acc1[x] = s1
    intt_pair(acc0, acc1, tfi, tfi_sh, ninv, ninv_sh, q)
    for x in range(n):
        ct[0, x] = _U0 if acc0[x] == _U0 else q - acc0[x]
        ct[1, x] = _submod(ct[1, x], acc1[x], q)


@njit(cache=True, nogil=True)
def accumulate_inplace(acc, a_vec, bk, b_r, d_r, bg_bits, d_g, q_lwe,
                       q, nqi, bmu, tf, tf_sh, tfi, tfi_sh, ninv, ninv_sh,
                       s0, s1, dig, keys_mont):
    """Gadget-product accumulation over every mask element and base-B_r digit.

    bk is (n, d_r, B_r, 2*d_g, 2, N); a zero digit selects the identity
    monomial and is skipped.
    """
    n_lwe = a_vec.shape[0]
    for i in range(n_lwe):
        w = (q_lwe - a_vec[i]) % q_lwe
        for p in range(d_r):
            v = w % b_r
            w //= b_r
            if v != 0:
                external_product_inplace(
                    acc, bk[i, p, v], bg_bits, d_g, q, nqi, bmu,
                    tf, tf_sh, tfi, tfi_sh, ninv, ninv_sh,
                    s0, s1, dig, keys_mont)


@njit(cache=True, nogil=True, parallel=True)
def accumulate_batch(accs, a_mat, bk, b_r, d_r, bg_bits, d_g, q_lwe,
                     q, nqi, bmu, tf, tf_sh, tfi, tfi_sh, ninv, ninv_sh,
                     keys_mont, lanes):
    n = accs.shape[2]
    for trial in prange(accs.shape[0]):
        s0 = np.zeros(n, dtype=np.uint64)
        s1 = np.zeros(n, dtype=np.uint64)
        dig = np.zeros((n, lanes), dtype=np.uint64)
        accumulate_inplace(accs[trial], a_mat[trial], bk, b_r, d_r, bg_bits,
                           d_g, q_lwe, q, nqi, bmu, tf, tf_sh, tfi, tfi_sh,
                           ninv, ninv_sh, s0, s1, dig, keys_mont)


@njit(cache=True, nogil=True, parallel=True)
def lwe_keyswitch_batch(out, a_in, b_in, table, base, q, cap):
    """Digit-multiply key switch for a batch of extracted LWEs.

    table is (N, d, n+1) holding mask rows and the b column; out is
    (T, n+1). cap bounds how many digit-scaled rows fit in the lazy
    accumulator before a reduction pass.
    """
    big_n = table.shape[0]
    d = table.shape[1]
    n1 = table.shape[2]
    for t in prange(a_in.shape[0]):
        acc = np.zeros(n1, dtype=np.uint64)
        cnt = 0
        for i in range(big_n):
            w = a_in[t, i]
            for p in range(d):
                v = w % base
                w //= base
                if v != _U0:
                    row = table[i, p]
                    for x in range(n1):
                        acc[x] += v * row[x]
                    cnt += 1
                    if cnt >= cap:
                        for x in range(n1):
                            acc[x] = acc[x] % q
                        cnt = 0
        for x in range(n1):
            acc[x] = acc[x] % q
        for x in range(n1 - 1):
            out[t, x] = _U0 if acc[x] == _U0 else q - acc[x]
        out[t, n1 - 1] = _submod(b_in[t], acc[n1 - 1], q)


@njit(cache=True, nogil=True)
def fnv1a64(data):
    """64-bit FNV-1a over a uint8 array."""
    h = _FNV_OFFSET
    for i in range(data.shape[0]):
        h = (h ^ np.uint64(data[i])) * _FNV_PRIME
    return h
