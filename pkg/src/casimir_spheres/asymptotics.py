"""Small-separation asymptotic expansions of the zero-temperature energy and
force (leading plus next-to-leading order) for every boundary pair, interior
and exterior, with the sphere-plane limit and the exact leading term of the
finite-temperature free energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .pfa import ZETA3
from .round_trip import BoundaryPair, Field, Geometry, Mode

PI2 = math.pi ** 2
PI3 = math.pi ** 3

#: Published numeric fit of the two-sphere mirror force correction
#: (k1, k2, k3 with one-sigma uncertainties), juxtaposed against the exact
#: coefficients by `cc_force_coefficients`.
CC_FORCE_FIT_REFERENCE = {
    "k1": (1.08, 0.08),
    "k2": (1.38, 0.06),
    "k3": (1.05, 0.14),
}

#: Validity heuristic: beyond d/min(r_A, r_B) = 0.2 the dropped quadratic
#: term can reach the few-percent level.
VALIDITY_WARN = 0.2


@dataclass(frozen=True)
class ExpansionResult:
    """Two-term expansion: value = leading * (1 + ntl_coefficient * d)."""

    leading: float
    ntl_coefficient: float
    value: float
    validity_hint: float


def _compose(leading: float, c1: float, d: float, hint: float) -> ExpansionResult:
    return ExpansionResult(leading=leading, ntl_coefficient=c1,
                           value=leading * (1.0 + c1 * d), validity_hint=hint)


def _label(pair: BoundaryPair) -> str:
    kinds = (pair.cond_A.kind, pair.cond_B.kind)
    if pair.field is Field.EM:
        return "CC" if kinds[0] == kinds[1] else "CP"
    return {"dirichlet": "D", "robin": "R"}[kinds[0]] \
        + {"dirichlet": "D", "robin": "R"}[kinds[1]]


def energy_asym_T0(geometry: Geometry, pair: BoundaryPair) -> ExpansionResult:
    """Leading plus next-to-leading zero-temperature energy.

    The interior case carries the upper signs of the expansion list (the
    relative-curvature denominator r_B - r_A); the exterior case flips them
    and uses r_A + r_B.
    """
    rA, rB = geometry.r_A, geometry.r_B
    d = geometry.d
    s = 1.0 if geometry.mode is Mode.INTERIOR else -1.0
    D = rB - rA if geometry.mode is Mode.INTERIOR else rA + rB
    rr = rA * rB
    base = s / D
    curv = 1.0 / rA - s / rB
    lab = _label(pair)
    if lab == "DD":
        lead = -PI3 * rr / (1440.0 * d * d * D)
        c1 = base + curv / 3.0
    elif lab == "RR":
        aA, aB = pair.cond_A.alpha, pair.cond_B.alpha
        lead = -PI3 * rr / (1440.0 * d * d * D)
        c1 = base + curv / 3.0 \
            + (20.0 / PI2) * ((3.0 * aA - 2.0) / rA - s * (3.0 * aB - 2.0) / rB)
    elif lab == "RD":
        aA = pair.cond_A.alpha
        lead = 7.0 * PI3 * rr / (11520.0 * d * d * D)
        c1 = base + curv / 3.0 + (80.0 / (7.0 * PI2)) * (3.0 * aA - 2.0) / rA
    elif lab == "DR":
        aB = pair.cond_B.alpha
        lead = 7.0 * PI3 * rr / (11520.0 * d * d * D)
        c1 = base + curv / 3.0 - s * (80.0 / (7.0 * PI2)) * (3.0 * aB - 2.0) / rB
    elif lab == "CC":
        lead = -PI3 * rr / (720.0 * d * d * D)
        c1 = base + (1.0 / 3.0 - 20.0 / PI2) * curv
    else:  # CP / PC
        lead = 7.0 * PI3 * rr / (5760.0 * d * d * D)
        c1 = base + (1.0 / 3.0 - 80.0 / (7.0 * PI2)) * curv
    return _compose(lead, c1, d, d / min(rA, rB))


def force_asym_T0(geometry: Geometry, pair: BoundaryPair) -> ExpansionResult:
    """Leading plus next-to-leading zero-temperature force, F = -dE/dd.

    Differentiating the two-term energy doubles the leading term over d and
    halves the bracket coefficient; this reproduces the printed force list
    term by term.
    """
    e = energy_asym_T0(geometry, pair)
    d = geometry.d
    return _compose(2.0 * e.leading / d, 0.5 * e.ntl_coefficient, d,
                    e.validity_hint)


def sphere_plane_limit(pair: BoundaryPair, r_A: float, d: float) -> ExpansionResult:
    """r_B -> infinity limit: a sphere in front of a plane."""
    if r_A <= 0 or d <= 0:
        raise ValueError("r_A and d must be positive")
    lab = _label(pair)
    if lab == "DD":
        lead = -PI3 * r_A / (1440.0 * d * d)
        c1 = (1.0 / 3.0) / r_A
    elif lab == "RR":
        aA = pair.cond_A.alpha
        lead = -PI3 * r_A / (1440.0 * d * d)
        c1 = (1.0 / 3.0 + (20.0 / PI2) * (3.0 * aA - 2.0)) / r_A
    elif lab == "RD":
        aA = pair.cond_A.alpha
        lead = 7.0 * PI3 * r_A / (11520.0 * d * d)
        c1 = (1.0 / 3.0 + (80.0 / (7.0 * PI2)) * (3.0 * aA - 2.0)) / r_A
    elif lab == "DR":
        lead = 7.0 * PI3 * r_A / (11520.0 * d * d)
        c1 = (1.0 / 3.0) / r_A
    elif lab == "CC":
        lead = -PI3 * r_A / (720.0 * d * d)
        c1 = (1.0 / 3.0 - 20.0 / PI2) / r_A
    else:
        lead = 7.0 * PI3 * r_A / (5760.0 * d * d)
        c1 = (1.0 / 3.0 - 80.0 / (7.0 * PI2)) / r_A
    return _compose(lead, c1, d, d / r_A)


def free_energy_leading(geometry: Geometry, pair: BoundaryPair, T: float) -> float:
    """Exact leading term of the finite-temperature free energy.

    The coth-resummed sum over reflections; symmetric pairs sum all terms
    with one sign, mixed pairs alternate.  Electromagnetic pairs are twice
    their scalar counterparts.
    """
    if T <= 0:
        raise ValueError("free_energy_leading requires T > 0")
    rA, rB = geometry.r_A, geometry.r_B
    d = geometry.d
    D = rB - rA if geometry.mode is Mode.INTERIOR else rA + rB
    symmetric = pair.cond_A.kind == pair.cond_B.kind
    factor = 2.0 if pair.field is Field.EM else 1.0
    if symmetric:
        s = ZETA3
    else:
        s = -0.75 * ZETA3
    k = 1
    while True:
        y = 4.0 * math.pi * k * d * T
        term = 2.0 / (k ** 3 * math.expm1(y)) if y < 700 else 0.0
        if symmetric:
            s += term
        else:
            s += -term if k % 2 == 1 else term
        if term < 1e-16 * abs(s):
            break
        k += 1
    return -factor * rA * rB * T * s / (8.0 * d * D)


def cc_force_coefficients() -> dict[str, float]:
    """Exact coefficients of the mirror-pair force bracket written as
    1 +- (k1/2) d/(r_B -+ r_A) - (k2/2) d/r_A +- (k3/2) d/r_B."""
    k23 = 2.0 * (10.0 / PI2 - 1.0 / 6.0)
    return {"k1": 1.0, "k2": k23, "k3": k23}
