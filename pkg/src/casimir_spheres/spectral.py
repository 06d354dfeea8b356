"""From round-trip blocks to physical quantities.

Log-determinants, the azimuthal sum, frequency quadrature at zero
temperature, Matsubara summation at finite temperature, and the force by
numerical differentiation, all with automatic truncation control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .round_trip import (
    BlockMatrix,
    BoundaryPair,
    Field,
    Geometry,
    Mode,
    _ProfileSet,
    _em_block_matrix,
    _scalar_block_matrix,
)


class SpectralRadiusExceededError(ArithmeticError):
    """det(1 - M) came out non-positive: the block spectral radius reached 1.

    Signals an l_max/truncation failure or an unphysical configuration; the
    determinant sign is never silently absolute-valued.
    """


class NotConvergedError(RuntimeError):
    """Convergence cap reached; carries the best estimate record."""

    def __init__(self, message: str, best: "ResultRecord"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ConvergenceSpec:
    """Truncation and tolerance knobs for the exact route.

    l_max_initial = 0 selects the automatic geometry-based start; setting
    l_max_initial == l_max_cap pins the angular truncation (no escalation),
    which the force stencil uses to difference at a fixed resolution.
    """

    rel_tol: float = 1e-6
    l_max_initial: int = 0
    l_max_cap: int = 2000
    quad_points_initial: int = 8
    matsubara_tail_tol: float = 1e-6
    ltilde_margin: int = 10

    def __post_init__(self):
        if self.rel_tol <= 0 or self.matsubara_tail_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.l_max_initial and self.l_max_cap < self.l_max_initial:
            raise ValueError("l_max_cap must be >= l_max_initial")
        if self.quad_points_initial < 2:
            raise ValueError("quad_points_initial must be >= 2")


class ResultKind(Enum):
    ENERGY_T0 = "energy_T0"
    FREE_ENERGY = "free_energy"
    FORCE = "force"


@dataclass
class ResultRecord:
    """A computed energy/free-energy/force with convergence metadata.

    Units are hbar = c = k_B = 1: energies in inverse length, forces in
    inverse length squared, temperatures in inverse length.
    """

    value: float
    kind: ResultKind
    geometry: Geometry
    pair: BoundaryPair
    temperature: float
    l_max_used: int
    quad_points_used: int
    p_max_used: int
    est_rel_err: float


def _logdet_one_minus_array(M: np.ndarray) -> float:
    sign, logabs = np.linalg.slogdet(np.eye(M.shape[0]) - M)
    if sign <= 0:
        raise SpectralRadiusExceededError(
            "det(1 - M) is not positive; spectral radius reached 1 "
            "(l_max or physics inconsistency)"
        )
    return float(logabs)


def logdet_one_minus(block: BlockMatrix) -> float:
    """ln det(1 - M) of one assembled block by dense LU with pivoting."""
    if block.entries.size == 0:
        return 0.0
    return _logdet_one_minus_array(block.entries)


# ---------------------------------------------------------------------------
# Batched trace engine
# ---------------------------------------------------------------------------

def _xi_floor(geometry: Geometry) -> float:
    # stand-in for the xi -> 0+ Matsubara term; keeps the kernels in their
    # stable domain, with a shift far below any reported tolerance
    return 1e-8 / geometry.r_B


def _canonical(geometry: Geometry, pair: BoundaryPair):
    """Relabel an exterior configuration so that r_A <= r_B.

    The two labelings describe the same physical system; pinning one makes
    the A/B relabeling symmetry exact instead of truncation-limited.
    """
    if geometry.mode is Mode.EXTERIOR and geometry.r_A > geometry.r_B:
        geometry = Geometry(geometry.r_B, geometry.r_A, geometry.L, Mode.EXTERIOR)
        pair = BoundaryPair(pair.field, pair.cond_B, pair.cond_A)
    return geometry, pair


def _block_fn(pair: BoundaryPair):
    return _scalar_block_matrix if pair.field is Field.SCALAR else _em_block_matrix


def _trace_batch(xis: np.ndarray, geometry: Geometry, pair: BoundaryPair,
                 l_max: int, spec: ConvergenceSpec) -> np.ndarray:
    """Tr ln(1 - M(xi)) for every xi in one sweep.

    The azimuthal sum runs m outermost so the 3j profiles (which do not
    depend on xi) are built once per m; each node leaves the sweep once its
    m-tail is inside tolerance.
    """
    nx = len(xis)
    g = np.zeros(nx)
    prev = np.full(nx, np.inf)
    active = np.ones(nx, dtype=bool)
    pol_min = 0 if pair.field is Field.SCALAR else 1
    z_desc = geometry.mode is Mode.INTERIOR
    block = _block_fn(pair)
    margin = spec.ltilde_margin
    term_tol = 0.05 * spec.rel_tol
    # l''-sum depth: enough for the requested tolerance plus a generous
    # cancellation allowance, capped at full double precision
    window = min(46.0, max(20.0, -math.log(0.01 * spec.rel_tol) + 14.0))
    for m in range(0, l_max + 1):
        l_min = max(m, pol_min)
        if l_min > l_max or not active.any():
            break
        profiles = _ProfileSet(l_min, l_max + margin, m, z_desc)
        weight = 1.0 if m == 0 else 2.0
        for j in np.nonzero(active)[0]:
            M, _ = block(m, float(xis[j]), l_min, l_max, l_max + margin,
                         geometry, pair, profiles=profiles,
                         symmetrized=True, trim=True, sum_window=window)
            term = _logdet_one_minus_array(M)
            g[j] += weight * term
            at = abs(term)
            if g[j] != 0.0 and at < term_tol * abs(g[j]) and at <= prev[j]:
                active[j] = False
            prev[j] = at
    return g


def trace_over_m(xi: float, l_max: int, geometry: Geometry, pair: BoundaryPair,
                 spec: ConvergenceSpec | None = None) -> float:
    """Azimuthal sum of ln det(1 - M(m, xi)): the m = 0 block once, m > 0
    doubled, terminated once a block's contribution is inside tolerance past
    the turning point."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    spec = spec or ConvergenceSpec()
    geometry, pair = _canonical(geometry, pair)
    return float(_trace_batch(np.array([xi]), geometry, pair, l_max, spec)[0])


# ---------------------------------------------------------------------------
# Zero-temperature energy
# ---------------------------------------------------------------------------

def _auto_l_max(geometry: Geometry) -> int:
    if geometry.mode is Mode.INTERIOR:
        return max(8, math.ceil(5.0 * geometry.r_A / geometry.d))
    r_eff = geometry.r_A * geometry.r_B / (geometry.r_A + geometry.r_B)
    return max(8, math.ceil(5.0 * r_eff / geometry.d))


_T_EDGES = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
_T_EDGE_CAP = 4096.0


def _panel_nodes(edges, n):
    xs, ws = np.polynomial.legendre.leggauss(n)
    ts = [0.5 * (a + b) + 0.5 * (b - a) * xs for a, b in zip(edges[:-1], edges[1:])]
    wts = [0.5 * (b - a) * ws for a, b in zip(edges[:-1], edges[1:])]
    return ts, wts


def _integral_once(geometry, pair, l_max, spec, edges, n):
    """t-integral of the trace with lazy tail-panel extension.

    All panel nodes go through one batched trace sweep so the 3j profiles
    are built once per m.  Returns (integral value, final edges, node count).
    """
    d = geometry.d
    edges = list(edges)
    ts, wts = _panel_nodes(edges, n)
    g = _trace_batch(np.concatenate(ts) / (2.0 * d), geometry, pair, l_max, spec)
    panels = [float(np.dot(w_k, g[k * n:(k + 1) * n]))
              for k, w_k in enumerate(wts)]
    total = sum(panels)
    while abs(panels[-1]) > 0.02 * spec.rel_tol * abs(total) \
            and edges[-1] < _T_EDGE_CAP:
        edges.append(2.0 * edges[-1])
        (t_k,), (w_k,) = _panel_nodes(edges[-2:], n)
        g_k = _trace_batch(t_k / (2.0 * d), geometry, pair, l_max, spec)
        panels.append(float(np.dot(w_k, g_k)))
        total = sum(panels)
    return total, edges, n * (len(edges) - 1)


def _integral_verified(geometry, pair, l_max, spec, edges, n, total):
    """Node-doubled quadrature check against the known value at n points.

    Returns (value, edges, n, used, err); each doubling costs one sweep.
    """
    while True:
        total2, edges, used = _integral_once(geometry, pair, l_max, spec,
                                             edges, 2 * n)
        err = abs(total2 - total) / max(abs(total2), 1e-300)
        total, n = total2, 2 * n
        if err <= 0.5 * spec.rel_tol or n >= 256:
            return total, edges, n, used, err


def energy_T0(geometry: Geometry, pair: BoundaryPair,
              spec: ConvergenceSpec | None = None) -> ResultRecord:
    """Zero-temperature interaction energy by frequency quadrature.

    E = (1/2pi) Int_0^inf dxi Tr ln(1 - M(xi)), evaluated on Gauss-Legendre
    panels in t = 2*d*xi (the natural decay variable of the round trip) with
    l_max escalated by x1.5 until the relative change is inside tolerance.
    """
    spec = spec or ConvergenceSpec()
    geometry, pair = _canonical(geometry, pair)
    d = geometry.d
    l_max = spec.l_max_initial or _auto_l_max(geometry)
    pinned = spec.l_max_initial and spec.l_max_initial == spec.l_max_cap
    edges, n = _T_EDGES, spec.quad_points_initial
    total, edges, used = _integral_once(geometry, pair, l_max, spec, edges, n)
    l_err = 0.0 if pinned else math.inf
    while not pinned:
        l_next = math.ceil(1.5 * l_max)
        if l_next > spec.l_max_cap:
            best = _energy_record(total, d, geometry, pair, l_max, used, l_err)
            raise NotConvergedError(
                f"l_max cap {spec.l_max_cap} reached before convergence "
                f"(last relative change {l_err:.2e})", best)
        total_next, edges, used = _integral_once(geometry, pair, l_next, spec,
                                                 edges, n)
        l_err = abs(total_next - total) / max(abs(total_next), 1e-300)
        total, l_max = total_next, l_next
        if l_err < spec.rel_tol:
            break
    total, edges, n, used, quad_err = _integral_verified(
        geometry, pair, l_max, spec, edges, n, total)
    return _energy_record(total, d, geometry, pair, l_max, used,
                          max(l_err, quad_err))


def _energy_record(total, d, geometry, pair, l_max, used, est):
    value = total / (4.0 * math.pi * d)
    return ResultRecord(value=value, kind=ResultKind.ENERGY_T0,
                        geometry=geometry, pair=pair, temperature=0.0,
                        l_max_used=l_max, quad_points_used=used,
                        p_max_used=0, est_rel_err=float(est))


# ---------------------------------------------------------------------------
# Finite temperature
# ---------------------------------------------------------------------------

def _matsubara_sum(geometry, pair, T, l_max, spec):
    """(primed sum with half-weighted p=0, p_max used, tail estimate)."""
    dT = geometry.d * T
    p_guess = max(2, math.ceil(math.log(1.0 / spec.matsubara_tail_tol)
                               / (4.0 * math.pi * dT)) + 2)
    xis = np.empty(p_guess + 1)
    xis[0] = _xi_floor(geometry)
    xis[1:] = 2.0 * math.pi * T * np.arange(1, p_guess + 1)
    g = _trace_batch(xis, geometry, pair, l_max, spec)
    total = 0.5 * g[0] + float(np.sum(g[1:]))
    p_max = p_guess
    while abs(g[-1]) > spec.matsubara_tail_tol * abs(total) and p_max < 100000:
        extra = max(2, p_max // 2)
        xs = 2.0 * math.pi * T * np.arange(p_max + 1, p_max + extra + 1)
        ge = _trace_batch(xs, geometry, pair, l_max, spec)
        total += float(np.sum(ge))
        g = np.concatenate([g, ge])
        p_max += extra
    tail = 0.0
    if len(g) >= 3 and g[-2] != 0.0:
        ratio = min(0.99, abs(g[-1] / g[-2]))
        tail = abs(g[-1]) * ratio / max(1e-300, 1.0 - ratio)
    return total, p_max, tail / max(abs(total), 1e-300)


def free_energy(geometry: Geometry, pair: BoundaryPair, T: float,
                spec: ConvergenceSpec | None = None) -> ResultRecord:
    """Finite-temperature free energy: T * primed Matsubara sum over
    xi_p = 2 pi p T with the p = 0 term half-weighted.

    The p = 0 block is evaluated at a tiny positive frequency floor; the
    tail stops once terms fall below matsubara_tail_tol of the sum.
    """
    if T <= 0:
        raise ValueError("free_energy requires T > 0 (use energy_T0 at T = 0)")
    spec = spec or ConvergenceSpec()
    geometry, pair = _canonical(geometry, pair)
    l_max = spec.l_max_initial or _auto_l_max(geometry)
    pinned = spec.l_max_initial and spec.l_max_initial == spec.l_max_cap
    total, p_max, tail = _matsubara_sum(geometry, pair, T, l_max, spec)
    l_err = 0.0 if pinned else math.inf
    while not pinned:
        l_next = math.ceil(1.5 * l_max)
        if l_next > spec.l_max_cap:
            best = _fe_record(total, T, geometry, pair, l_max, p_max,
                              max(tail, l_err))
            raise NotConvergedError(
                f"l_max cap {spec.l_max_cap} reached before convergence "
                f"(last relative change {l_err:.2e})", best)
        total_next, p_max, tail = _matsubara_sum(geometry, pair, T, l_next, spec)
        l_err = abs(total_next - total) / max(abs(total_next), 1e-300)
        total, l_max = total_next, l_next
        if l_err < spec.rel_tol:
            break
    return _fe_record(total, T, geometry, pair, l_max, p_max, max(tail, l_err))


def _fe_record(total, T, geometry, pair, l_max, p_max, est):
    return ResultRecord(value=T * total, kind=ResultKind.FREE_ENERGY,
                        geometry=geometry, pair=pair, temperature=T,
                        l_max_used=l_max, quad_points_used=0,
                        p_max_used=p_max, est_rel_err=float(est))


# ---------------------------------------------------------------------------
# Force
# ---------------------------------------------------------------------------

def _with_d(geometry: Geometry, d: float) -> Geometry:
    if geometry.mode is Mode.INTERIOR:
        return Geometry.interior(geometry.r_A, geometry.r_B, d=d)
    return Geometry.exterior(geometry.r_A, geometry.r_B, d=d)


def force(geometry: Geometry, pair: BoundaryPair, T: float = 0.0,
          spec: ConvergenceSpec | None = None) -> ResultRecord:
    """Casimir force F = -dE/dd by a 5-point central difference, h = 1e-3 d.

    The angular truncation is resolved once at the central separation and
    pinned for the four stencil evaluations so the difference is smooth.
    """
    spec = spec or ConvergenceSpec()
    d = geometry.d
    h = 1e-3 * d
    if geometry.mode is Mode.INTERIOR and d + 2 * h >= geometry.r_B - geometry.r_A:
        raise ValueError("d + 2h leaves no room for the center offset")
    center = energy_T0(geometry, pair, spec) if T == 0.0 \
        else free_energy(geometry, pair, T, spec)
    pinned = replace(spec, l_max_initial=center.l_max_used,
                     l_max_cap=center.l_max_used)

    def ev(dd: float) -> float:
        geo = _with_d(geometry, dd)
        rec = energy_T0(geo, pair, pinned) if T == 0.0 \
            else free_energy(geo, pair, T, pinned)
        return rec.value

    e_m2, e_m1, e_p1, e_p2 = ev(d - 2 * h), ev(d - h), ev(d + h), ev(d + 2 * h)
    deriv5 = (e_m2 - 8.0 * e_m1 + 8.0 * e_p1 - e_p2) / (12.0 * h)
    deriv3 = (e_p1 - e_m1) / (2.0 * h)
    value = -deriv5
    stencil_err = abs(deriv5 - deriv3) / max(abs(deriv5), 1e-300)
    noise = 1.5 * center.est_rel_err * abs(center.value) / (h * max(abs(deriv5), 1e-300))
    est = max(center.est_rel_err, min(stencil_err, 1.0), noise)
    return ResultRecord(value=value, kind=ResultKind.FORCE, geometry=geometry,
                        pair=pair, temperature=T,
                        l_max_used=center.l_max_used,
                        quad_points_used=center.quad_points_used,
                        p_max_used=center.p_max_used, est_rel_err=float(est))
