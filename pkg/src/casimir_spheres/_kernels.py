"""Jitted numerical kernels shared by the special-function and round-trip layers.

Everything here works on plain float arrays holding natural-log magnitudes and
int8 signs, so that quantities spanning thousands of orders of magnitude
(Bessel ratios, 3j chains, translation sums) never leave the representable
range.  Linear-space recurrences carry an explicit power-of-two shift counter
that is folded back into the log at the end.
"""

import numpy as np
from numba import njit, prange

# Exact power-of-two rescale unit used by all shift-counting recurrences.
RESCALE_LOG = 512.0 * np.log(2.0)
_RES_DOWN = 2.0 ** -512
_RES_UP = 2.0 ** 512
_MANT_HI = 2.0 ** 256
_MANT_LO = 2.0 ** -256

NEG_INF = -np.inf


@njit(cache=True)
def _ln_sinh(x):
    # ln sinh(x) without overflow; sinh itself overflows for x > ~710
    if x > 33.0:
        return x - np.log(2.0) + np.log1p(-np.exp(-2.0 * x))
    return np.log(np.sinh(x))


@njit(cache=True)
def ln_bessel_i_half_exact0(x):
    """ln I_{1/2}(x) from the closed trigonometric form."""
    return 0.5 * np.log(2.0 / (np.pi * x)) + _ln_sinh(x)


@njit(cache=True)
def _miller_start(nmax, x):
    # Start order for the downward recurrence: the admixture of the
    # complementary solution decays like exp(-2*[F(N)-F(n)]) with
    # F(t) = t*asinh(t/x) - sqrt(t^2+x^2); demand a margin of 26 nats.
    n0 = nmax + 1.0
    fn = n0 * np.arcsinh(n0 / x) - np.sqrt(n0 * n0 + x * x)
    N = float(nmax + 12)
    while N * np.arcsinh(N / x) - np.sqrt(N * N + x * x) - fn < 26.0:
        N += max(8.0, 0.5 * (N - nmax))
    return int(N)


@njit(cache=True)
def ln_bessel_k_half(nmax, x):
    """ln K_{l+1/2}(x) for l = 0..nmax by upward recurrence (stable for K)."""
    out = np.empty(nmax + 1)
    ln_k0 = 0.5 * np.log(np.pi / (2.0 * x)) - x
    out[0] = ln_k0
    if nmax == 0:
        return out
    c = 0
    k_prev = 1.0            # K_{1/2} rescaled to unity
    k_cur = 1.0 + 1.0 / x   # K_{3/2}/K_{1/2}
    out[1] = ln_k0 + np.log(k_cur)
    for l in range(1, nmax):
        k_next = k_prev + ((2.0 * l + 1.0) / x) * k_cur
        if k_next > _MANT_HI:
            k_next *= _RES_DOWN
            k_cur *= _RES_DOWN
            c += 1
        out[l + 1] = ln_k0 + (c * RESCALE_LOG + np.log(k_next))
        k_prev = k_cur
        k_cur = k_next
    return out


@njit(cache=True)
def ln_bessel_i_half(nmax, x):
    """ln I_{l+1/2}(x) for l = 0..nmax by Miller downward recurrence.

    Normalized against the exact closed form of I_{1/2}.
    """
    N = _miller_start(nmax, x)
    mant = np.zeros(nmax + 1)
    cnt = np.zeros(nmax + 1, dtype=np.int64)
    p_up = 0.0       # trial value at order l+1
    p_cur = 1e-200   # arbitrary seed at order N
    c = 0
    for l in range(N, 0, -1):
        p_down = p_up + ((2.0 * l + 1.0) / x) * p_cur
        if p_down > _MANT_HI:
            p_down *= _RES_DOWN
            p_cur *= _RES_DOWN
            c += 1
        if l - 1 <= nmax:
            mant[l - 1] = p_down
            cnt[l - 1] = c
        p_up = p_cur
        p_cur = p_down
    ln0 = ln_bessel_i_half_exact0(x)
    lm0 = np.log(mant[0])
    out = np.empty(nmax + 1)
    out[0] = ln0
    for l in range(1, nmax + 1):
        # group the (usually cancelling) shift difference before the offset
        out[l] = ln0 + ((cnt[l] - cnt[0]) * RESCALE_LOG + (np.log(mant[l]) - lm0))
    return out


# ---------------------------------------------------------------------------
# Wigner 3j vectors over the third angular momentum
# ---------------------------------------------------------------------------

@njit(cache=True)
def _w3j_A(j, l1, l2):
    # A(j) for magnetic numbers (m, -m, 0); vanishes at j = |l1-l2| and l1+l2+1
    dj = float(l1 - l2)
    sj = float(l1 + l2 + 1)
    return j * np.sqrt((j * j - dj * dj) * (sj * sj - j * j))


@njit(cache=True)
def _w3j_normalize(l1, l2, jmin, jmax, ln_tmp, ln_out, sg_out):
    # completeness sum over j plus the stretched-top sign convention
    n = jmax - jmin + 1
    mx = -np.inf
    for idx in range(n):
        a = 2.0 * ln_tmp[idx] + np.log(2.0 * (jmin + idx) + 1.0)
        if a > mx:
            mx = a
    s = 0.0
    for idx in range(n):
        a = 2.0 * ln_tmp[idx] + np.log(2.0 * (jmin + idx) + 1.0) - mx
        if a > -45.0:
            s += np.exp(a)
    ln_norm = 0.5 * (np.log(s) + mx)
    for idx in range(n):
        ln_out[idx] = ln_tmp[idx] - ln_norm
    want = 1 if (l1 - l2) % 2 == 0 else -1
    if sg_out[n - 1] != 0 and sg_out[n - 1] != want:
        for idx in range(n):
            sg_out[idx] = -sg_out[idx]
    return n


@njit(cache=True)
def w3j_000_ln(l1, l2, ln_out, sg_out):
    """Fill ln|3j(l1,l2,j;0,0,0)| and signs for j = |l1-l2| .. l1+l2.

    Odd-parity entries are exact zeros (sign 0).  The even chain is a pure
    two-term ratio recursion from the stretched top, so it has no stability
    issue in either direction.
    """
    jmin = abs(l1 - l2)
    jmax = l1 + l2
    n = jmax - jmin + 1
    ln_tmp = np.empty(n)
    for i in range(n):
        ln_tmp[i] = NEG_INF
        sg_out[i] = 0
    nch = (jmax - jmin) // 2 + 1
    v = 1.0
    c = 0
    ln_tmp[n - 1] = 0.0
    sg_out[n - 1] = 1
    for t in range(1, nch):
        jo = jmax - 2 * t + 1  # odd j between consecutive chain nodes
        ratio = -(jo * _w3j_A(jo + 1.0, l1, l2)) / ((jo + 1.0) * _w3j_A(float(jo), l1, l2))
        v = v * ratio
        if np.abs(v) > _MANT_HI:
            v *= _RES_DOWN
            c += 1
        elif np.abs(v) < _MANT_LO:
            v *= _RES_UP
            c -= 1
        idx = n - 1 - 2 * t
        ln_tmp[idx] = np.log(np.abs(v)) + c * RESCALE_LOG
        sg_out[idx] = 1 if v > 0.0 else -1
    return _w3j_normalize(l1, l2, jmin, jmax, ln_tmp, ln_out, sg_out)


@njit(cache=True)
def _w3j_splice_ln(bw, bc, n):
    ln = np.empty(n)
    for idx in range(n):
        v = bw[idx]
        if v == 0.0:
            ln[idx] = NEG_INF
        else:
            ln[idx] = np.log(np.abs(v)) + bc[idx] * RESCALE_LOG
    return ln


@njit(cache=True)
def w3j_m_ln(l1, l2, m, ln_out, sg_out):
    """Fill ln|3j(l1,l2,j;m,-m,0)| and signs for j = |l1-l2| .. l1+l2.

    Two-sided three-term recursion joined inside the classical region,
    completeness normalization, stretched-top sign fix.
    """
    jmin = abs(l1 - l2)
    jmax = l1 + l2
    n = jmax - jmin + 1
    if m == 0:
        return w3j_000_ln(l1, l2, ln_out, sg_out)

    fm = float(m)
    # backward sweep from the stretched top
    bw = np.empty(n)
    bc = np.zeros(n, dtype=np.int64)
    bw[n - 1] = 1.0
    c = 0
    v_hi = 0.0
    v_cur = 1.0
    jb_idx = -1
    for j in range(jmax, jmin, -1):
        Bj = -(2.0 * j + 1.0) * 2.0 * fm * j * (j + 1.0)
        v_lo = -(j * _w3j_A(j + 1.0, l1, l2) * v_hi + Bj * v_cur) / ((j + 1.0) * _w3j_A(float(j), l1, l2))
        if np.abs(v_lo) > _MANT_HI:
            v_lo *= _RES_DOWN
            v_cur *= _RES_DOWN
            c += 1
        idx = j - 1 - jmin
        bw[idx] = v_lo
        bc[idx] = c
        if jb_idx < 0 and np.abs(v_lo) <= np.abs(v_cur):
            jb_idx = idx + 1
        v_hi = v_cur
        v_cur = v_lo

    if jb_idx <= 0:
        ln_tmp = _w3j_splice_ln(bw, bc, n)
        for idx in range(n):
            sg_out[idx] = 0 if bw[idx] == 0.0 else (1 if bw[idx] > 0.0 else -1)
        return _w3j_normalize(l1, l2, jmin, jmax, ln_tmp, ln_out, sg_out)

    # forward sweep from jmin up to just past the backward turning point
    top = min(jb_idx + 1, n - 1)
    fw = np.zeros(top + 1)
    fc = np.zeros(top + 1, dtype=np.int64)
    fw[0] = 1.0
    if n > 1:
        if jmin == 0:
            fw[1] = fm / np.sqrt(l1 * (l1 + 1.0))
        else:
            Bj = -(2.0 * jmin + 1.0) * 2.0 * fm * jmin * (jmin + 1.0)
            fw[1] = -Bj / (jmin * _w3j_A(jmin + 1.0, l1, l2))
    c = 0
    v_lo = fw[0]
    v_cur = fw[1] if top >= 1 else fw[0]
    jf_idx = -1
    for idx in range(1, top):
        j = jmin + idx
        Bj = -(2.0 * j + 1.0) * 2.0 * fm * j * (j + 1.0)
        v_hi = -(Bj * v_cur + (j + 1.0) * _w3j_A(float(j), l1, l2) * v_lo) / (j * _w3j_A(j + 1.0, l1, l2))
        if np.abs(v_hi) > _MANT_HI:
            v_hi *= _RES_DOWN
            v_cur *= _RES_DOWN
            c += 1
        fw[idx + 1] = v_hi
        fc[idx + 1] = c
        if jf_idx < 0 and np.abs(v_hi) <= np.abs(v_cur):
            jf_idx = idx
        v_lo = v_cur
        v_cur = v_hi

    if jf_idx < 0:
        jf_idx = jb_idx
    jc = (jf_idx + jb_idx) // 2
    if jc < 1:
        jc = 1
    if jc > top:
        jc = top

    best = -1
    best_ln = -np.inf
    lo = max(0, jc - 2)
    hi = min(top, jc + 2)
    for idx in range(lo, hi + 1):
        if fw[idx] == 0.0:
            continue
        lnb = np.log(np.abs(bw[idx])) + bc[idx] * RESCALE_LOG
        if lnb > best_ln:
            best_ln = lnb
            best = idx
    if best < 0:
        ln_tmp = _w3j_splice_ln(bw, bc, n)
        for idx in range(n):
            sg_out[idx] = 0 if bw[idx] == 0.0 else (1 if bw[idx] > 0.0 else -1)
        return _w3j_normalize(l1, l2, jmin, jmax, ln_tmp, ln_out, sg_out)

    dlog = (np.log(np.abs(bw[best])) + bc[best] * RESCALE_LOG) \
        - (np.log(np.abs(fw[best])) + fc[best] * RESCALE_LOG)
    flip = (bw[best] > 0.0) == (fw[best] > 0.0)

    ln_tmp = np.empty(n)
    for idx in range(n):
        if idx < best:
            v = fw[idx]
            if v == 0.0:
                ln_tmp[idx] = NEG_INF
                sg_out[idx] = 0
            else:
                ln_tmp[idx] = np.log(np.abs(v)) + fc[idx] * RESCALE_LOG + dlog
                sg = 1 if v > 0.0 else -1
                sg_out[idx] = sg if flip else -sg
        else:
            v = bw[idx]
            if v == 0.0:
                ln_tmp[idx] = NEG_INF
                sg_out[idx] = 0
            else:
                ln_tmp[idx] = np.log(np.abs(v)) + bc[idx] * RESCALE_LOG
                sg_out[idx] = 1 if v > 0.0 else -1
    return _w3j_normalize(l1, l2, jmin, jmax, ln_tmp, ln_out, sg_out)


# ---------------------------------------------------------------------------
# Packed 3j product profiles for one azimuthal number m
# ---------------------------------------------------------------------------

@njit(cache=True)
def profile_offsets(g_min, g_max):
    """CSR offsets for the packed upper-triangle pair profiles."""
    ng = g_max - g_min + 1
    npairs = ng * (ng + 1) // 2
    off = np.empty(npairs + 1, dtype=np.int64)
    off[0] = 0
    p = 0
    for i in range(ng):
        x = g_min + i
        for j in range(i, ng):
            off[p + 1] = off[p] + (x + 1)  # even-parity l'' count = min(x,y)+1
            p += 1
    return off


@njit(cache=True, parallel=True)
def build_profiles(g_min, g_max, m, off, ln_dat, sg_dat, run_max, z_descending):
    """Fill packed ln|w000 * wm * (2l''+1)| products for all pairs x <= y.

    run_max holds the running maximum of ln_dat along the direction the
    assembly iterates (from the Bessel-dominant end), used for early exit.
    """
    ng = g_max - g_min + 1
    for i in prange(ng):
        x = g_min + i
        nvec = 2 * x + 2
        ln000 = np.empty(nvec)
        sg000 = np.empty(nvec, dtype=np.int8)
        lnm = np.empty(nvec)
        sgm = np.empty(nvec, dtype=np.int8)
        for j in range(i, ng):
            y = g_min + j
            p = i * ng - i * (i - 1) // 2 + (j - i)
            o = off[p]
            w3j_000_ln(x, y, ln000, sg000)
            nfill = x + 1
            if m == 0:
                for t in range(nfill):
                    lpp = (y - x) + 2 * t
                    ln_dat[o + t] = 2.0 * ln000[2 * t] + np.log(2.0 * lpp + 1.0)
                    sg_dat[o + t] = 1 if sg000[2 * t] != 0 else 0
            else:
                w3j_m_ln(x, y, m, lnm, sgm)
                for t in range(nfill):
                    lpp = (y - x) + 2 * t
                    ln_dat[o + t] = ln000[2 * t] + lnm[2 * t] + np.log(2.0 * lpp + 1.0)
                    sg_dat[o + t] = sg000[2 * t] * sgm[2 * t]
            if z_descending:
                rm = -np.inf
                for t in range(nfill - 1, -1, -1):
                    if ln_dat[o + t] > rm:
                        rm = ln_dat[o + t]
                    run_max[o + t] = rm
            else:
                rm = -np.inf
                for t in range(nfill):
                    if ln_dat[o + t] > rm:
                        rm = ln_dat[o + t]
                    run_max[o + t] = rm


@njit(cache=True, parallel=True)
def assemble_sym_sums(g_min, g_max, n_rows, n_cols, off, ln_dat, sg_dat, run_max,
                      lnZ, z_descending, pref_ln, with_lambda, window,
                      lnS, sgS, lnSL, sgSL):
    """Balanced l''-sums for the symmetric translation matrix S (and the
    Lambda-weighted variant used by the electromagnetic block).

    lnS/sgS are (n_rows, n_cols) arrays; row x in [g_min, g_min+n_rows),
    column y in [g_min, g_min+n_cols); the packed profiles may extend to
    g_max.  Only x <= y is filled here; the caller mirrors.
    """
    ng = g_max - g_min + 1
    for i in prange(n_rows):
        x = g_min + i
        xfac = x * (x + 1.0)
        for j in range(i, n_cols):
            y = g_min + j
            p = i * ng - i * (i - 1) // 2 + (j - i)
            o = off[p]
            nterm = x + 1
            base = y - x
            yfac = y * (y + 1.0)
            lamden = np.sqrt(xfac * yfac) if with_lambda else 1.0
            # single balanced pass with an online running maximum; the
            # run_max bound gives early exit once the rest cannot matter
            ref = -np.inf
            acc = 0.0
            accL = 0.0
            if z_descending:
                t0, t1, dt = 0, nterm, 1
            else:
                t0, t1, dt = nterm - 1, -1, -1
            for t in range(t0, t1, dt):
                zv = lnZ[base + 2 * t]
                if run_max[o + t] + zv < ref - window:
                    break
                a = ln_dat[o + t] + zv
                if a <= ref - window:
                    continue
                if a > ref:
                    scale = np.exp(ref - a)
                    acc *= scale
                    accL *= scale
                    ref = a
                w = sg_dat[o + t] * np.exp(a - ref)
                acc += w
                if with_lambda:
                    lpp = float(base + 2 * t)
                    accL += w * 0.5 * (lpp * (lpp + 1.0) - xfac - yfac) / lamden
            if ref == -np.inf or acc == 0.0:
                lnS[i, j] = NEG_INF
                sgS[i, j] = 0
            else:
                lnS[i, j] = pref_ln + ref + np.log(np.abs(acc))
                sgS[i, j] = 1 if acc > 0.0 else -1
            if with_lambda:
                if accL == 0.0:
                    lnSL[i, j] = NEG_INF
                    sgSL[i, j] = 0
                else:
                    lnSL[i, j] = pref_ln + ref + np.log(np.abs(accL))
                    sgSL[i, j] = 1 if accL > 0.0 else -1
