"""Closed-form bounds on the privacy-utility trade-off and the user's utility.

Notation used below: ``S`` private data, ``F`` the disclosed semantic,
``H`` the user's task, ``eps`` the leakage budget. ``h_eps`` denotes the
best I(U;F) over mechanisms P(U|S,F) with I(U;S) <= eps.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

from .probcore import (JointTable, conditional_entropy, entropy, marginalize,
                       mutual_information)

TIGHT_TOL = 1e-10

# Additive constants of the strong functional representation overhead, in nats.
SFRL_LOG_OFFSET = 1.0
SFRL_CONST = 4.0


def positive_part(x: Optional[float]) -> Optional[float]:
    return None if x is None else max(0.0, x)


@dataclass(frozen=True)
class BoundsReport:
    """All bound quantities for one joint and one leakage budget (nats).

    ``util_*`` fields and ``gap`` are ``None`` when the report was built from
    an (S, F) joint alone, without the task axis.
    """

    epsilon: float
    alpha: Optional[float]
    L_h1: float
    L_h2: Optional[float]
    L_h2_clamped: Optional[float]
    upper_h_eps: float
    tight: bool
    H_S: float
    H_F_given_S: float
    H_S_given_F: float
    I_S_F: float
    degenerate_s: bool = False
    util_L1: Optional[float] = None
    util_L2: Optional[float] = None
    util_L2_clamped: Optional[float] = None
    util_L3: Optional[float] = None
    util_upper: Optional[float] = None
    gap: Optional[float] = None
    H_F_given_H: Optional[float] = None
    H_H_given_F: Optional[float] = None
    corollary2_upper: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class SemanticConstraints:
    """Design limits on the semantic: gamma1 <= I(F;H) <= gamma2, H(F) <= gamma3."""

    gamma1: float
    gamma2: float
    gamma3: float = math.inf

    def __post_init__(self):
        if self.gamma1 > self.gamma2:
            raise ValueError(f"gamma1 ({self.gamma1}) exceeds gamma2 ({self.gamma2})")


@dataclass(frozen=True)
class ConstraintReport:
    mutual_information: float
    task_entropy: float
    semantic_entropy: float
    lower_ok: bool
    upper_ok: bool
    below_task_entropy: bool
    compression_ok: bool
    # The compression limit is read as an entropy bound on the semantic.
    compression_measure: str = "H(F)"

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok and self.below_task_entropy and self.compression_ok


def theorem1_bounds(joint: JointTable, epsilon: float, s_axis: str = "S",
                    f_axis: str = "F") -> BoundsReport:
    """Lower and upper bounds on ``h_eps`` for the (S, F) marginal of ``joint``.

    Parameters
    ----------
    joint : JointTable
        Any table containing ``s_axis`` and ``f_axis``; other axes are
        summed out.
    epsilon : float
        Leakage budget in nats, non-negative.

    Returns
    -------
    BoundsReport
        ``L_h1 = H(F|S) - H(S|F) + eps``;
        ``L_h2 = H(F|S) - a H(S|F) + eps - (1 - a)(ln(I(S;F) + 1) + 4)``
        with ``a = eps / H(S)``; ``upper_h_eps = H(F|S) + eps``.
        When H(S) = 0 the second bound is undefined and reported as ``None``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    pair = marginalize(joint, [s_axis, f_axis])
    h_s = entropy(pair.pmf(s_axis))
    h_f_s = conditional_entropy(pair, f_axis, s_axis)
    h_s_f = conditional_entropy(pair, s_axis, f_axis)
    i_sf = mutual_information(pair, s_axis, f_axis)

    l1 = h_f_s - h_s_f + epsilon
    upper = h_f_s + epsilon
    degenerate = h_s == 0.0
    if degenerate:
        alpha = l2 = None
    else:
        alpha = epsilon / h_s
        overhead = math.log(i_sf + SFRL_LOG_OFFSET) + SFRL_CONST
        l2 = h_f_s - alpha * h_s_f + epsilon - (1.0 - alpha) * overhead
    # The upper bound is attained in the deterministic special cases only
    # while the budget does not exceed I(S;F) (beyond that h_eps = H(F)).
    deterministic = h_s_f <= TIGHT_TOL or h_f_s <= TIGHT_TOL
    tight = deterministic and epsilon <= i_sf + TIGHT_TOL
    return BoundsReport(
        epsilon=epsilon, alpha=alpha, L_h1=l1, L_h2=l2, L_h2_clamped=positive_part(l2),
        upper_h_eps=upper, tight=tight, H_S=h_s, H_F_given_S=h_f_s,
        H_S_given_F=h_s_f, I_S_F=i_sf, degenerate_s=degenerate)


def utility_bounds(joint3: JointTable, epsilon: float,
                   h_eps_estimate: Optional[float] = None, s_axis: str = "S",
                   f_axis: str = "F", h_axis: str = "H",
                   constraints: Optional[SemanticConstraints] = None) -> BoundsReport:
    """Bounds on the user's utility I(U;H) for a joint over (S, F, H).

    Every lower bound on ``h_eps`` turns into a lower bound on I(U;H) after
    subtracting H(F|H); the upper bound gains H(H|F). ``gap`` is the
    distance between the upper bound and ``util_L1`` when H(S|F) = 0.
    """
    for name in (s_axis, f_axis, h_axis):
        joint3.index(name)
    base = theorem1_bounds(joint3, epsilon, s_axis, f_axis)
    fh = marginalize(joint3, [f_axis, h_axis])
    h_f_h = conditional_entropy(fh, f_axis, h_axis)
    h_h_f = conditional_entropy(fh, h_axis, f_axis)
    util_l2 = None if base.L_h2 is None else base.L_h2 - h_f_h
    extra = {}
    if constraints is not None:
        extra["corollary2_upper"] = corollary2_upper(
            constraints, entropy(fh.pmf(h_axis)), epsilon)
    return BoundsReport(**{
        **base.to_dict(),
        "util_L1": base.L_h1 - h_f_h,
        "util_L2": util_l2,
        "util_L2_clamped": positive_part(util_l2),
        "util_L3": None if h_eps_estimate is None else h_eps_estimate - h_f_h,
        "util_upper": base.upper_h_eps + h_h_f,
        "gap": h_f_h + h_h_f,
        "H_F_given_H": h_f_h,
        "H_H_given_F": h_h_f,
        **extra,
    })


def corollary2_upper(constraints: SemanticConstraints, task_entropy: float,
                     epsilon: float) -> float:
    """Semantic-free upper bound on I(U;H): eps + gamma2 - gamma1 + H(H)."""
    return epsilon + constraints.gamma2 - constraints.gamma1 + task_entropy


def check_semantic_constraints(joint: JointTable, c: SemanticConstraints,
                               f_axis: str = "F", h_axis: str = "H") -> ConstraintReport:
    fh = marginalize(joint, [f_axis, h_axis])
    i_fh = mutual_information(fh, f_axis, h_axis)
    h_h = entropy(fh.pmf(h_axis))
    h_f = entropy(fh.pmf(f_axis))
    return ConstraintReport(
        mutual_information=i_fh, task_entropy=h_h, semantic_entropy=h_f,
        lower_ok=c.gamma1 <= i_fh, upper_ok=i_fh <= c.gamma2,
        below_task_entropy=c.gamma2 < h_h, compression_ok=h_f <= c.gamma3)
