"""Round-trip matrix assembly for one angular block at one imaginary frequency.

The block is the operator M = T_A U_AB T_B U_BA (scalar field) or its
electromagnetic 2x2-polarization counterpart.  Transition factors are ratios
of modified Bessel functions at the sphere radii; translation matrices couple
the two sphere-centered multipole bases through 3j-symbol sums weighted by
Bessel functions of the center distance.

All internal arithmetic is carried in (sign, ln) form; the only materialized
floats are the balanced factor matrices whose product is the block itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .special_functions import LogScaled

LN_OVERFLOW = 700.0  # ln threshold beyond which a balanced factor overflows


class SingularTransitionError(ValueError):
    """Robin transition denominator vanished at some (l, xi)."""

    def __init__(self, l: int, xi: float):
        super().__init__(f"singular Robin transition element at l={l}, xi={xi}")
        self.l = l
        self.xi = xi


class TruncationOverflowError(ArithmeticError):
    """Block factors exceed the float range even after exponent balancing.

    Usually indicates an unphysically large xi*L or truncation window; try a
    smaller frequency range or a larger scaling window.
    """


class Mode(Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


class Field(Enum):
    SCALAR = "scalar"
    EM = "em"


@dataclass(frozen=True)
class Condition:
    """Boundary condition on one sphere.

    kind is one of "dirichlet", "robin", "pec", "permeable"; alpha is the
    Robin parameter (Neumann is alpha = 0).  The internal Robin parameter is
    u = alpha - 1/2.
    """

    kind: str
    alpha: float = math.nan

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin", "pec", "permeable"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == "robin" and not math.isfinite(self.alpha):
            raise ValueError("Robin condition requires a finite alpha")

    @property
    def u(self) -> float:
        return self.alpha - 0.5

    def label(self) -> str:
        if self.kind == "dirichlet":
            return "D"
        if self.kind == "robin":
            return "N" if self.alpha == 0.0 else "R"
        return {"pec": "C", "permeable": "P"}[self.kind]


DIRICHLET = Condition("dirichlet")
PEC = Condition("pec")
PERMEABLE = Condition("permeable")


def robin(alpha: float) -> Condition:
    return Condition("robin", float(alpha))


def neumann() -> Condition:
    return Condition("robin", 0.0)


@dataclass(frozen=True)
class Geometry:
    """Two spheres with radii r_A, r_B and center distance L.

    Interior: sphere A inside sphere B, gap d = r_B - r_A - L (eccentric,
    L > 0 required).  Exterior: gap d = L - r_A - r_B.  The r_A <= r_B
    convention is enforced for the interior case; the exterior case accepts
    either order so that the A/B relabeling symmetry can be expressed.
    """

    r_A: float
    r_B: float
    L: float
    mode: Mode

    def __post_init__(self):
        if self.r_A <= 0 or self.r_B <= 0 or self.L <= 0:
            raise ValueError("radii and center distance must be positive")
        if self.mode is Mode.INTERIOR:
            if self.r_A > self.r_B:
                raise ValueError("interior geometry requires r_A <= r_B")
            if self.d <= 0:
                raise ValueError("interior geometry requires d = r_B - r_A - L > 0")
        else:
            if self.d <= 0:
                raise ValueError("exterior geometry requires d = L - r_A - r_B > 0")

    @property
    def d(self) -> float:
        if self.mode is Mode.INTERIOR:
            return self.r_B - self.r_A - self.L
        return self.L - self.r_A - self.r_B

    @property
    def eps(self) -> float:
        """Small expansion parameter d/(r_B - r_A) (interior) or d/(r_A + r_B)."""
        if self.mode is Mode.INTERIOR:
            return self.d / (self.r_B - self.r_A)
        return self.d / (self.r_A + self.r_B)

    @property
    def a(self) -> float:
        """r_A / (r_B - r_A), interior-expansion accessor."""
        return self.r_A / (self.r_B - self.r_A)

    @property
    def b(self) -> float:
        """r_B / (r_B - r_A), interior-expansion accessor."""
        return self.r_B / (self.r_B - self.r_A)

    @staticmethod
    def interior(r_A: float, r_B: float, d: float | None = None,
                 L: float | None = None) -> "Geometry":
        if (d is None) == (L is None):
            raise ValueError("specify exactly one of d or L")
        if L is None:
            L = r_B - r_A - d
        return Geometry(r_A, r_B, L, Mode.INTERIOR)

    @staticmethod
    def exterior(r_A: float, r_B: float, d: float | None = None,
                 L: float | None = None) -> "Geometry":
        if (d is None) == (L is None):
            raise ValueError("specify exactly one of d or L")
        if L is None:
            L = r_A + r_B + d
        return Geometry(r_A, r_B, L, Mode.EXTERIOR)


@dataclass(frozen=True)
class BoundaryPair:
    """Field type plus the per-sphere boundary conditions."""

    field: Field
    cond_A: Condition
    cond_B: Condition

    def __post_init__(self):
        scalar_kinds = ("dirichlet", "robin")
        em_kinds = ("pec", "permeable")
        ok = scalar_kinds if self.field is Field.SCALAR else em_kinds
        for name, cond in (("cond_A", self.cond_A), ("cond_B", self.cond_B)):
            if cond.kind not in ok:
                raise ValueError(
                    f"{name}={cond.kind!r} invalid for {self.field.value} field"
                )

    def label(self) -> str:
        return self.cond_A.label() + self.cond_B.label()


def scalar_pair(cond_A: Condition, cond_B: Condition) -> BoundaryPair:
    return BoundaryPair(Field.SCALAR, cond_A, cond_B)


def em_pair(cond_A: Condition, cond_B: Condition) -> BoundaryPair:
    return BoundaryPair(Field.EM, cond_A, cond_B)


@dataclass
class BlockMatrix:
    """Dense round-trip block for one (m, xi).

    Scalar blocks have one entry per l; EM blocks are doubled with 2x2
    polarization sub-blocks ordered (TE, TM), index 2*(l - l_min) + pol.
    """

    m: int
    l_min: int
    l_max: int
    entries: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.entries)):
            raise TruncationOverflowError(
                "non-finite entries in assembled block; reduce xi*L or enlarge "
                "the scaling window"
            )


# ---------------------------------------------------------------------------
# Transition factors
# ---------------------------------------------------------------------------

def _signed_pair_sum(s1, a1, s2, a2):
    """Signed log-sum of two terms given as (sign, ln) arrays."""
    hi = np.maximum(a1, a2)
    hi = np.where(np.isfinite(hi), hi, -np.inf)
    with np.errstate(invalid="ignore"):
        t = s1 * np.exp(a1 - hi) + s2 * np.exp(a2 - hi)
    t = np.where(np.isfinite(hi), t, 0.0)
    sg = np.sign(t).astype(np.int8)
    with np.errstate(divide="ignore"):
        ln = np.where(t != 0.0, hi + np.log(np.abs(np.where(t == 0.0, 1.0, t))), -np.inf)
    return sg, ln


def _transition_ln_arrays(xi: float, radius: float, cond: Condition,
                          inverted: bool, l_max: int):
    """(sign, ln) arrays of the scalar transition factor for l = 0..l_max.

    inverted=False gives the small-sphere form I.../K... (Dirichlet) and the
    Robin analogue; inverted=True gives the interior large-sphere form with
    K and I swapped.
    """
    x = xi * radius
    ln_i = _kernels.ln_bessel_i_half(l_max + 1, x)
    ln_k = _kernels.ln_bessel_k_half(l_max + 1, x)
    ls = np.arange(l_max + 1, dtype=float)
    if cond.kind == "dirichlet":
        ln = ln_i[:-1] - ln_k[:-1]
        sg = np.ones(l_max + 1, dtype=np.int8)
    else:
        # u*I + x*I' = (alpha + l)*I_nu + x*I_{nu+1};  u*K + x*K' likewise
        # with the K_{nu+1} term negative.
        coef = cond.alpha + ls
        csg = np.sign(coef).astype(np.int8)
        with np.errstate(divide="ignore"):
            cln = np.where(coef != 0.0, np.log(np.abs(np.where(coef == 0.0, 1.0, coef))), -np.inf)
        lx = math.log(x)
        s_num, ln_num = _signed_pair_sum(csg, cln + ln_i[:-1], np.int8(1), lx + ln_i[1:])
        s_den, ln_den = _signed_pair_sum(csg, cln + ln_k[:-1], np.int8(-1), lx + ln_k[1:])
        if np.any(s_den == 0):
            l_bad = int(np.argmax(s_den == 0))
            raise SingularTransitionError(l_bad, xi)
        sg = (s_num * s_den).astype(np.int8)
        ln = ln_num - ln_den
    if inverted:
        ln = -ln
        # sign of a ratio is unchanged by inversion
    return sg, ln


def transition_A(l: int, xi: float, geometry: Geometry, cond: Condition) -> LogScaled:
    """Scalar transition element of the smaller sphere A at angular index l."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    sg, ln = _transition_ln_arrays(xi, geometry.r_A, cond, False, l)
    return LogScaled(int(sg[l]), float(ln[l]))


def transition_B(l: int, xi: float, geometry: Geometry, cond: Condition) -> LogScaled:
    """Scalar transition element of sphere B.

    Interior geometry uses the K/I (inverted) form; exterior uses the same
    form as sphere A with r_B substituted.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    inverted = geometry.mode is Mode.INTERIOR
    sg, ln = _transition_ln_arrays(xi, geometry.r_B, cond, inverted, l)
    return LogScaled(int(sg[l]), float(ln[l]))


def _em_transition_ln_arrays(xi: float, radius: float, cond: Condition,
                             inverted: bool, l_max: int):
    """((sg_TE, ln_TE), (sg_TM, ln_TM)) for a PEC or permeable sphere."""
    d_sg, d_ln = _transition_ln_arrays(xi, radius, DIRICHLET, inverted, l_max)
    r_sg, r_ln = _transition_ln_arrays(xi, radius, robin(1.0), inverted, l_max)  # u = 1/2
    if cond.kind == "pec":
        return (d_sg, d_ln), ((-r_sg).astype(np.int8), r_ln)
    return (r_sg, r_ln), ((-d_sg).astype(np.int8), d_ln)


# ---------------------------------------------------------------------------
# Translation matrix
# ---------------------------------------------------------------------------

def _ln_Z(geometry: Geometry, xi: float, lpp_max: int) -> tuple[np.ndarray, bool]:
    """ln Z_{l''+1/2}(xi L) for l'' = 0..lpp_max; True if Z decays with l''."""
    xL = xi * geometry.L
    if geometry.mode is Mode.INTERIOR:
        return _kernels.ln_bessel_i_half(lpp_max, xL), True
    return _kernels.ln_bessel_k_half(lpp_max, xL), False


def translation_element(l: int, lt: int, m: int, xi: float, geometry: Geometry,
                        direction: str = "AB") -> float:
    """Translation matrix element U^{AB}_{l,lt} (or U^{BA}) at frequency xi.

    The l''-dependent sign is +1 for AB and (-1)^{l''} for BA; by the parity
    rule only l'' with l + lt + l'' even contribute, so the two directions
    differ by the global factor (-1)^{l+lt}.
    """
    if l < abs(m) or lt < abs(m):
        return 0.0
    if xi <= 0:
        raise ValueError("xi must be positive")
    x, y = (l, lt) if l <= lt else (lt, l)
    n = 2 * x + 1
    ln0 = np.empty(n)
    sg0 = np.empty(n, dtype=np.int8)
    lnm = np.empty(n)
    sgm = np.empty(n, dtype=np.int8)
    _kernels.w3j_000_ln(x, y, ln0, sg0)
    _kernels.w3j_m_ln(x, y, abs(m), lnm, sgm)
    lnZ, _ = _ln_Z(geometry, xi, l + lt)
    pref_ln = 0.5 * math.log(math.pi / (2.0 * xi * geometry.L)) \
        + 0.5 * (math.log(2 * l + 1) + math.log(2 * lt + 1))
    terms_ln = []
    terms_sg = []
    for t in range(x + 1):
        lpp = (y - x) + 2 * t
        s = int(sg0[2 * t]) * int(sgm[2 * t])
        if s == 0:
            continue
        terms_ln.append(ln0[2 * t] + lnm[2 * t] + math.log(2 * lpp + 1) + lnZ[lpp])
        terms_sg.append(s)
    if not terms_ln:
        return 0.0
    ref = max(terms_ln)
    acc = sum(s * math.exp(a - ref) for s, a in zip(terms_sg, terms_ln))
    val_ln = pref_ln + ref
    sign = (-1) ** (l + m)
    if direction == "BA":
        sign *= (-1) ** (l + lt)
    elif direction != "AB":
        raise ValueError("direction must be 'AB' or 'BA'")
    return (LogScaled(sign, val_ln) * LogScaled.from_float(acc)).to_float()


# ---------------------------------------------------------------------------
# Block assembly
# ---------------------------------------------------------------------------

class _ProfileSet:
    """Packed 3j product profiles on the symmetric grid [g_min, g_max]."""

    def __init__(self, g_min: int, g_max: int, m: int, z_descending: bool):
        self.g_min = g_min
        self.g_max = g_max
        self.m = m
        self.z_descending = z_descending
        self.off = _kernels.profile_offsets(g_min, g_max)
        size = int(self.off[-1])
        self.ln = np.empty(size)
        self.sg = np.empty(size, dtype=np.int8)
        self.run_max = np.empty(size)
        _kernels.build_profiles(g_min, g_max, abs(m), self.off, self.ln,
                                self.sg, self.run_max, z_descending)


def _assemble_S(profiles: _ProfileSet, lnZ: np.ndarray, pref_ln: float,
                n_grid: int, with_lambda: bool, window: float = 46.0):
    """Symmetric (n_grid x n_grid) translation sums on the profile grid.

    window is the l''-sum truncation depth in nats below the running peak;
    46 keeps every representable contribution, smaller values trade accuracy
    for speed in tolerance-limited sweeps.
    """
    lnS = np.full((n_grid, n_grid), -np.inf)
    sgS = np.zeros((n_grid, n_grid), dtype=np.int8)
    if with_lambda:
        lnSL = np.full((n_grid, n_grid), -np.inf)
        sgSL = np.zeros((n_grid, n_grid), dtype=np.int8)
    else:
        lnSL = np.empty((1, 1))
        sgSL = np.zeros((1, 1), dtype=np.int8)
    _kernels.assemble_sym_sums(profiles.g_min, profiles.g_max, n_grid, n_grid,
                               profiles.off, profiles.ln, profiles.sg,
                               profiles.run_max, lnZ, profiles.z_descending,
                               pref_ln, with_lambda, window, lnS, sgS, lnSL, sgSL)
    # sqrt((2l+1)(2lt+1)) prefactor of the translation element
    hl = 0.5 * np.log(2.0 * np.arange(profiles.g_min,
                                      profiles.g_min + n_grid) + 1.0)
    lnS += hl[:, None] + hl[None, :]
    if with_lambda:
        lnSL += hl[:, None] + hl[None, :]
    # mirror the strict lower triangle
    idx = np.tril_indices(n_grid, k=-1)
    lnS[idx] = lnS.T[idx]
    sgS[idx] = sgS.T[idx]
    if with_lambda:
        lnSL[idx] = lnSL.T[idx]
        sgSL[idx] = sgSL.T[idx]
        return (lnS, sgS), (lnSL, sgSL)
    return (lnS, sgS), None


def _balanced_product(lnW, sgW, lnR, sgR, trim=False):
    """W @ R with per-channel exponent balancing; factors stay representable.

    Channels whose largest contribution underflows entirely are dropped.
    With trim=True (valid only for determinant-equivalent use) rows/columns
    whose Cauchy-Schwarz bound ||W_i|| * ||R_i|| sits 60 nats below the
    leading one are removed before the product; their effect on
    ln det(1 - M) is below double precision.
    """
    with np.errstate(invalid="ignore"):
        A = np.max(lnW, axis=0)
        B = np.max(lnR, axis=1)
    cap = 0.5 * (A + B)
    live = np.isfinite(cap)
    if np.any(cap[live] > LN_OVERFLOW):
        raise TruncationOverflowError(
            "balanced round-trip factors overflow float64; reduce xi*L or "
            "enlarge the scaling window"
        )
    if not live.any():
        Z = np.zeros((lnW.shape[0], lnR.shape[1]))
        return (Z, None) if trim else Z
    sigma = 0.5 * (B[live] - A[live])
    W = sgW[:, live] * np.exp(lnW[:, live] + sigma[None, :])
    R = sgR[live, :] * np.exp(lnR[live, :] - sigma[:, None])
    keep = None
    if trim and W.shape[0] == R.shape[1]:
        with np.errstate(divide="ignore"):
            score = np.log(np.linalg.norm(W, axis=1)) \
                + np.log(np.linalg.norm(R, axis=0))
        smax = np.max(score)
        if np.isfinite(smax):
            mask = score >= smax - 60.0
            if not mask.all():
                W = W[mask]
                R = R[:, mask]
                keep = mask
    if trim:
        return W @ R, keep
    return W @ R


def _checkerboard(n: int, rep: int = 1) -> np.ndarray:
    ls = np.repeat(np.arange(n), rep)
    return np.where((ls[:, None] + ls[None, :]) % 2 == 0, 1.0, -1.0)


def _scalar_block_matrix(m, xi, l_min, l_max, lt_max, geometry, pair,
                         profiles=None, symmetrized=False, trim=False,
                         sum_window=46.0):
    """Scalar block; symmetrized=True returns the determinant-equivalent
    similarity transform |T_A|^{1/2} sgn(T_A) S T_B S |T_A|^{1/2} whose
    entries stay representable at large l_max (used by the spectral engine).
    trim=True additionally drops determinant-irrelevant rows and columns.
    """
    g_min, g_max = l_min, lt_max
    lnZ, z_desc = _ln_Z(geometry, xi, 2 * g_max)
    if profiles is None:
        profiles = _ProfileSet(g_min, g_max, m, z_desc)
    elif profiles.g_min != g_min or profiles.g_max < g_max:
        raise ValueError("profile grid does not cover the block dimensions")
    n = l_max - l_min + 1
    pref_ln = 0.5 * math.log(math.pi / (2.0 * xi * geometry.L))
    (lnS, sgS), _ = _assemble_S(profiles, lnZ, pref_ln, g_max - g_min + 1,
                                False, sum_window)
    sA, lnA = _transition_ln_arrays(xi, geometry.r_A, pair.cond_A, False, l_max)
    sB, lnB = _transition_ln_arrays(xi, geometry.r_B, pair.cond_B,
                                    geometry.mode is Mode.INTERIOR, g_max)
    if symmetrized:
        half = 0.5 * lnA[l_min:]
        lnW = half[:, None] + lnS[:n, :]
        sgW = sA[l_min:, None] * sgS[:n, :]
        lnR = lnB[g_min:, None] + lnS[:, :n] + half[None, :]
        sgR = sB[g_min:, None] * sgS[:, :n]
        if not trim:
            return _balanced_product(lnW, sgW, lnR, sgR)
        M, keep = _balanced_product(lnW, sgW, lnR, sgR, trim=True)
        l_live = l_max if keep is None else l_min + int(np.nonzero(keep)[0].max())
        return M, l_live
    lnW = lnA[l_min:, None] + lnS[:n, :]
    sgW = sA[l_min:, None] * sgS[:n, :]
    lnR = lnB[g_min:, None] + lnS[:, :n]
    sgR = sB[g_min:, None] * sgS[:, :n]
    M = _balanced_product(lnW, sgW, lnR, sgR)
    M *= _checkerboard(n)
    return M


def _em_block_matrix(m, xi, l_min, l_max, lt_max, geometry, pair,
                     profiles=None, symmetrized=False, trim=False,
                     sum_window=46.0):
    g_min, g_max = l_min, lt_max
    lnZ, z_desc = _ln_Z(geometry, xi, 2 * g_max)
    if profiles is None:
        profiles = _ProfileSet(g_min, g_max, m, z_desc)
    elif profiles.g_min != g_min or profiles.g_max < g_max:
        raise ValueError("profile grid does not cover the block dimensions")
    n = l_max - l_min + 1
    ng = g_max - g_min + 1
    pref_ln = 0.5 * math.log(math.pi / (2.0 * xi * geometry.L))
    (lnS, sgS), (lnSL, sgSL) = _assemble_S(profiles, lnZ, pref_ln, ng, True,
                                            sum_window)
    inv = geometry.mode is Mode.INTERIOR
    (teA_sg, teA_ln), (tmA_sg, tmA_ln) = _em_transition_ln_arrays(
        xi, geometry.r_A, pair.cond_A, False, l_max)
    (teB_sg, teB_ln), (tmB_sg, tmB_ln) = _em_transition_ln_arrays(
        xi, geometry.r_B, pair.cond_B, inv, g_max)

    ls = np.arange(g_min, g_max + 1, dtype=float)
    ln_fac = 0.5 * np.log(ls * (ls + 1.0))
    if m == 0:
        lnLt = np.full((ng, ng), -np.inf)
        sgLt = np.zeros((ng, ng), dtype=np.int8)
    else:
        lnLt = math.log(abs(m) * xi * geometry.L) - ln_fac[:, None] - ln_fac[None, :] + lnS
        sgLt = (np.sign(m) * sgS).astype(np.int8)

    def big(lnT_te, sgT_te, lnT_tm, sgT_tm, lnSd, sgSd, lnSo, sgSo, rows, cols):
        # rows/cols: slices of the grid; diagonal part lnSd, off-diagonal lnSo
        nr = rows.stop - rows.start
        nc = cols.stop - cols.start
        ln = np.empty((2 * nr, 2 * nc))
        sg = np.empty((2 * nr, 2 * nc), dtype=np.int8)
        ln[0::2, 0::2] = lnT_te[:, None] + lnSd[rows, cols]
        sg[0::2, 0::2] = sgT_te[:, None] * sgSd[rows, cols]
        ln[0::2, 1::2] = lnT_te[:, None] + lnSo[rows, cols]
        sg[0::2, 1::2] = sgT_te[:, None] * sgSo[rows, cols]
        ln[1::2, 0::2] = lnT_tm[:, None] + lnSo[rows, cols]
        sg[1::2, 0::2] = sgT_tm[:, None] * sgSo[rows, cols]
        ln[1::2, 1::2] = lnT_tm[:, None] + lnSd[rows, cols]
        sg[1::2, 1::2] = sgT_tm[:, None] * sgSd[rows, cols]
        return ln, sg

    rows_n = slice(0, n)
    rows_g = slice(0, ng)
    if symmetrized:
        # conjugate by diag(|T_A|^{1/2}) per (l, polarization)
        half = np.empty(2 * n)
        half[0::2] = 0.5 * teA_ln[l_min:]
        half[1::2] = 0.5 * tmA_ln[l_min:]
        lnW, sgW = big(0.5 * teA_ln[l_min:], teA_sg[l_min:],
                       0.5 * tmA_ln[l_min:], tmA_sg[l_min:],
                       lnSL, sgSL, lnLt, sgLt, rows_n, rows_g)
        lnR, sgR = big(teB_ln[g_min:], teB_sg[g_min:], tmB_ln[g_min:],
                       tmB_sg[g_min:], lnSL, sgSL, lnLt, sgLt, rows_g, rows_n)
        lnR += half[None, :]
        if not trim:
            return _balanced_product(lnW, sgW, lnR, sgR)
        M, keep = _balanced_product(lnW, sgW, lnR, sgR, trim=True)
        l_live = l_max if keep is None \
            else l_min + int(np.nonzero(keep)[0].max()) // 2
        return M, l_live
    lnW, sgW = big(teA_ln[l_min:], teA_sg[l_min:], tmA_ln[l_min:], tmA_sg[l_min:],
                   lnSL, sgSL, lnLt, sgLt, rows_n, rows_g)
    lnR, sgR = big(teB_ln[g_min:], teB_sg[g_min:], tmB_ln[g_min:], tmB_sg[g_min:],
                   lnSL, sgSL, lnLt, sgLt, rows_g, rows_n)
    M = _balanced_product(lnW, sgW, lnR, sgR)
    M *= _checkerboard(n, rep=2)
    return M


def assemble_scalar_block(m: int, xi: float, l_max: int, geometry: Geometry,
                          pair: BoundaryPair, ltilde_margin: int = 10) -> BlockMatrix:
    """Scalar round-trip block M for azimuthal index m at frequency xi.

    The internal l-tilde sum is truncated at l_max + ltilde_margin; the margin
    default follows the super-exponential decay of the translation elements.
    """
    if pair.field is not Field.SCALAR:
        raise ValueError("assemble_scalar_block requires a scalar pair")
    l_min = abs(m)
    if l_max < l_min:
        raise ValueError("l_max must be >= |m|")
    if xi <= 0:
        raise ValueError("xi must be positive")
    M = _scalar_block_matrix(m, xi, l_min, l_max, l_max + ltilde_margin,
                             geometry, pair)
    return BlockMatrix(m, l_min, l_max, M)


def assemble_em_block(m: int, xi: float, l_max: int, geometry: Geometry,
                      pair: BoundaryPair, ltilde_margin: int = 10) -> BlockMatrix:
    """Electromagnetic round-trip block with (TE, TM) sub-block ordering."""
    if pair.field is not Field.EM:
        raise ValueError("assemble_em_block requires an EM pair")
    l_min = max(1, abs(m))
    if l_max < l_min:
        raise ValueError("l_max must be >= max(1, |m|)")
    if xi <= 0:
        raise ValueError("xi must be positive")
    M = _em_block_matrix(m, xi, l_min, l_max, l_max + ltilde_margin,
                         geometry, pair)
    return BlockMatrix(m, l_min, l_max, M)


def assemble_block(m: int, xi: float, l_max: int, geometry: Geometry,
                   pair: BoundaryPair, ltilde_margin: int = 10) -> BlockMatrix:
    if pair.field is Field.SCALAR:
        return assemble_scalar_block(m, xi, l_max, geometry, pair, ltilde_margin)
    return assemble_em_block(m, xi, l_max, geometry, pair, ltilde_margin)
