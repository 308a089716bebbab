"""Predicates on rotation parameters behind ontology axiom forms.

Each window predicate reports a signed margin (radians, or the tighter of a
radian and a scale slack) such that `holds == (margin >= -tol)`.  The default
forms are the sound ones: whenever a predicate holds, the corresponding
subset/fixed-point relation verified by the cone algebra holds on every
unsaturated cone.  The looser composition forms that drop the half-width
factor (and ignore the doubled axis shift) are kept behind `form="printed"`
for auditing; they are sufficient conditions only in special cases.

The exact_* checks are per-coordinate angle congruences on boundary-rotor
vectors, with a default tolerance of 1e-6 rad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from conequery.cones import ANGLE_TOL, TWO_PI, Rotation

# Closed enumeration of the supported axiom forms.
CONTAINMENT = "containment"
COMPOSITION = "composition"
TRANSITIVITY = "transitivity"
INVERSE = "inverse"
SYMMETRY = "symmetry"
ASYMMETRY = "asymmetry"

PATTERN_KINDS = (CONTAINMENT, COMPOSITION, TRANSITIVITY, INVERSE, SYMMETRY, ASYMMETRY)

EXACT_TOL = 1e-6

_FORMS = ("derived", "printed")


@dataclass(frozen=True)
class ConditionReport:
    kind: str
    holds: bool
    margin: float


def _report(kind: str, margin: float, tol: float) -> ConditionReport:
    return ConditionReport(kind, margin >= -tol, margin)


def _turn_dist(x) -> float:
    """Distance from an angle (or angle array) to the nearest multiple of 2*pi."""
    x = np.asarray(x, dtype=float)
    d = np.abs(x - np.round(x / TWO_PI) * TWO_PI)
    return float(d) if d.ndim == 0 else d


def _check_form(form: str) -> None:
    if form not in _FORMS:
        raise ValueError(f"unknown condition form {form!r}")


def containment_additive(r: Rotation, s: Rotation, tol: float = ANGLE_TOL) -> ConditionReport:
    """r's images always inside s's images, for width-preserving rotations.

    Requires s's widening window to cover r's on both boundaries:
    s.theta + s.delta/2 >= r.theta + r.delta/2 and
    s.theta - s.delta/2 <= r.theta - r.delta/2.
    """
    if r.gamma != 1.0 or s.gamma != 1.0:
        raise ValueError("containment_additive needs gamma == 1 on both rotations")
    upper_slack = (s.theta + 0.5 * s.delta) - (r.theta + 0.5 * r.delta)
    lower_slack = (r.theta - 0.5 * r.delta) - (s.theta - 0.5 * s.delta)
    return _report(CONTAINMENT, min(upper_slack, lower_slack), tol)


def containment_multiplicative(r: Rotation, s: Rotation, tol: float = ANGLE_TOL) -> ConditionReport:
    """Containment for equal-axis-shift rotations: s scales and widens at least as much."""
    if abs(r.theta - s.theta) > tol:
        raise ValueError("containment_multiplicative needs equal axis shifts")
    return _report(CONTAINMENT, min(s.gamma - r.gamma, s.delta - r.delta), tol)


def composition_additive(
    r1: Rotation,
    r2: Rotation,
    r3: Rotation,
    tol: float = ANGLE_TOL,
    form: str = "derived",
    kind: str = COMPOSITION,
) -> ConditionReport:
    """r3's images contain the images of r1-then-r2 (width-preserving case).

    Derived form: the chained axis shift must sit within half the spare
    widening, |theta3 - (theta1 + theta2)| <= (delta3 - delta1 - delta2)/2,
    taken modulo full turns.  The printed form drops the half factor and
    cancels theta2 on the left; it is retained for auditing only.
    """
    _check_form(form)
    for r in (r1, r2, r3):
        if r.gamma != 1.0:
            raise ValueError("composition_additive needs gamma == 1 on all rotations")
        if r.delta < 0.0:
            raise ValueError("composition_additive needs non-negative aperture shifts")
    if form == "printed":
        margin = (r3.delta - r1.delta - r2.delta) - abs(r2.theta - (r1.theta + r2.theta))
        return _report(kind, margin, tol)
    spare = 0.5 * (r3.delta - r1.delta - r2.delta)
    margin = spare - _turn_dist(r3.theta - (r1.theta + r2.theta))
    return _report(kind, margin, tol)


def composition_multiplicative(
    r1: Rotation,
    r2: Rotation,
    r3: Rotation,
    tol: float = ANGLE_TOL,
    form: str = "derived",
    kind: str = COMPOSITION,
) -> ConditionReport:
    """Containment of the chained action for equal-axis-shift rotations.

    Derived form: gamma1*gamma2 <= gamma3 and the spare widening must absorb
    both the chained shifts and the doubled axis offset:
    2*dist(theta) + gamma2*delta1 + delta2 <= delta3.  The printed form
    checks delta1 + delta2 <= delta3 and ignores the axis offset.
    """
    _check_form(form)
    if abs(r1.theta - r2.theta) > tol or abs(r1.theta - r3.theta) > tol:
        raise ValueError("composition_multiplicative needs equal axis shifts")
    if r1.delta < 0.0 or r2.delta < 0.0:
        raise ValueError("composition_multiplicative needs non-negative aperture shifts")
    gamma_slack = r3.gamma - r1.gamma * r2.gamma
    if form == "printed":
        delta_slack = r3.delta - (r1.delta + r2.delta)
    else:
        delta_slack = r3.delta - (r2.gamma * r1.delta + r2.delta) - 2.0 * _turn_dist(r1.theta)
    return _report(kind, min(gamma_slack, delta_slack), tol)


def transitivity(r: Rotation, tol: float = ANGLE_TOL, form: str = "derived") -> ConditionReport:
    """Containment of r-then-r inside r, via the matching composition predicate."""
    if r.gamma == 1.0:
        return composition_additive(r, r, r, tol, form, kind=TRANSITIVITY)
    return composition_multiplicative(r, r, r, tol, form, kind=TRANSITIVITY)


def symmetry(r: Rotation, tol: float = ANGLE_TOL) -> ConditionReport:
    """Applying r twice lands back on the starting cone's region.

    Holds iff some full turn 2k*pi falls inside the window
    [2*theta - (gamma+1)*delta/2, 2*theta + (gamma+1)*delta/2].
    """
    if r.gamma < 1.0:
        raise ValueError("symmetry needs gamma >= 1")
    if r.delta < 0.0:
        raise ValueError("symmetry needs non-negative aperture shift")
    window = 0.5 * (r.gamma + 1.0) * r.delta
    return _report(SYMMETRY, window - _turn_dist(2.0 * r.theta), tol)


def asymmetry(r: Rotation, tol: float = ANGLE_TOL) -> ConditionReport:
    """Negation of the symmetry window; margin flips sign."""
    rep = symmetry(r, tol)
    return ConditionReport(ASYMMETRY, not rep.holds, -rep.margin)


# ---------------------------------------------------------------------------
# Exact per-coordinate congruences on boundary-rotor angle vectors.
# ---------------------------------------------------------------------------


def _as_vectors(*vecs):
    arrs = [np.atleast_1d(np.asarray(v, dtype=float)) for v in vecs]
    n = arrs[0].shape[0]
    for a in arrs:
        if a.shape != (n,):
            raise ValueError("angle vectors must share one length")
    return arrs


def exact_symmetry(r_upper, r_lower, tol: float = EXACT_TOL) -> np.ndarray:
    """Per coordinate: both boundary rotors square to the identity (2*theta is a full turn)."""
    up, lo = _as_vectors(r_upper, r_lower)
    return (_turn_dist(2.0 * up) <= tol) & (_turn_dist(2.0 * lo) <= tol)


def exact_inverse(r1_upper, r1_lower, r2_upper, r2_lower, tol: float = EXACT_TOL) -> np.ndarray:
    """Per coordinate: the second rotor undoes the first on both boundaries."""
    u1, l1, u2, l2 = _as_vectors(r1_upper, r1_lower, r2_upper, r2_lower)
    return (_turn_dist(u1 + u2) <= tol) & (_turn_dist(l1 + l2) <= tol)


def exact_composition(
    r1_upper, r1_lower, r2_upper, r2_lower, r3_upper, r3_lower, tol: float = EXACT_TOL
) -> np.ndarray:
    """Per coordinate: chaining the first two rotors equals the third on both boundaries."""
    u1, l1, u2, l2, u3, l3 = _as_vectors(
        r1_upper, r1_lower, r2_upper, r2_lower, r3_upper, r3_lower
    )
    return (_turn_dist(u1 + u2 - u3) <= tol) & (_turn_dist(l1 + l2 - l3) <= tol)
