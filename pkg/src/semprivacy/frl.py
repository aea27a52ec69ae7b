"""Functional-representation channels and exact-leakage mechanisms.

:func:`construct_frl` builds a variable ``U0`` independent of the private
variable ``S`` such that the semantic ``F`` is a deterministic function of
``(U0, S)``. :func:`tune_leakage` then appends a randomized response of
``S`` and tunes its truth-telling probability until the disclosed
``U = (U0, W)`` leaks exactly the requested amount about ``S``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .probcore import (Channel, JointTable, ValidationError, conditional_entropy,
                       entropy, extend_with_channel, marginalize, mutual_information)

log = logging.getLogger(__name__)

BREAKPOINT_TOL = 1e-14
LEAKAGE_TOL = 1e-9
MAX_BISECTIONS = 200


class MonotonicityError(RuntimeError):
    """Leakage failed to increase with the truth-telling probability."""


@dataclass(frozen=True)
class FrlOutput:
    """Result of the interval-refinement construction.

    Attributes
    ----------
    u_alphabet : tuple of str
        Cell labels ``"c0", "c1", ...`` in ascending interval order.
    cell_lengths : ndarray
        Length of each cell in [0, 1); this is also P(U0 = cell).
    channel : Channel
        P(U0 | S, F).
    decoder : dict
        ``(u0, s) -> f`` for every cell and every private symbol.
    """

    u_alphabet: tuple
    cell_lengths: np.ndarray
    channel: Channel
    decoder: dict
    s_axis: str = "S"
    f_axis: str = "F"

    def decode(self, u0, s):
        return self.decoder[(u0, s)]


@dataclass(frozen=True)
class Mechanism:
    """Disclosure channel P(U | S, F) with U = (U0, W), plus measured figures."""

    channel: Channel
    leakage: float
    utility_semantic: float
    rr_prob: float
    epsilon: float
    clamped: bool = False
    degenerate_s: bool = False
    trace: tuple = field(default=(), repr=False)

    @property
    def u_alphabet(self) -> tuple:
        return self.channel.output[1]

    def to_dict(self) -> dict:
        (s_name, s_alpha), (f_name, f_alpha) = self.channel.inputs
        rows = {}
        for i, s in enumerate(s_alpha):
            for k, f in enumerate(f_alpha):
                rows[f"({s},{f})"] = self.channel.rows[i, k].tolist()
        return {
            "u_alphabet": list(self.u_alphabet),
            "rows": rows,
            "leakage": self.leakage,
            "utility_semantic": self.utility_semantic,
            "rr_prob": self.rr_prob,
            "epsilon": self.epsilon,
            "clamped": self.clamped,
            "degenerate_s": self.degenerate_s,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _axes_pair(joint: JointTable, s_axis: str, f_axis: str) -> JointTable:
    pair = marginalize(joint, [s_axis, f_axis])
    if pair.names != (s_axis, f_axis):
        pair = JointTable((pair.axes[1], pair.axes[0]), pair.cells.T)
    return pair


def _merge_breakpoints(points: np.ndarray) -> np.ndarray:
    points = np.sort(points)
    points = points[(points > BREAKPOINT_TOL) & (points < 1 - BREAKPOINT_TOL)]
    merged = []
    for x in points:
        if not merged or x - merged[-1] > BREAKPOINT_TOL:
            merged.append(x)
    return np.asarray(merged, dtype=np.float64)


def construct_frl(joint: JointTable, s_axis: str = "S", f_axis: str = "F") -> FrlOutput:
    """Build a functional representation of ``F`` given ``S``.

    For every private symbol ``s`` the conditional CDF of ``F | S = s`` cuts
    [0, 1) into intervals, one per semantic symbol. The common refinement of
    all these cuts gives the cells of ``U0``; each cell has probability equal
    to its length regardless of ``s``, so ``U0`` is independent of ``S``, and
    ``(cell, s)`` identifies the interval, hence the symbol of ``F``.

    Private symbols of zero mass do not contribute cuts; their decoder uses
    the marginal CDF of ``F`` and is never exercised with positive probability.
    """
    pair = _axes_pair(joint, s_axis, f_axis)
    p = pair.cells
    s_alpha, f_alpha = pair.axes[0][1], pair.axes[1][1]
    p_s = p.sum(axis=1)
    p_f = p.sum(axis=0)

    cond = np.empty_like(p)
    for i, ps in enumerate(p_s):
        cond[i] = p[i] / ps if ps > 0 else p_f
    cdfs = np.cumsum(cond, axis=1)[:, :-1]

    cuts = _merge_breakpoints(cdfs[p_s > 0].ravel())
    edges = np.concatenate([[0.0], cuts, [1.0]])
    lengths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    n_cells = len(lengths)
    u_alpha = tuple(f"c{k}" for k in range(n_cells))

    # owner[i, k]: index of the f-symbol whose interval under s_i holds cell k
    owner = np.empty((len(s_alpha), n_cells), dtype=int)
    for i in range(len(s_alpha)):
        owner[i] = np.searchsorted(cdfs[i], mids, side="right")

    rows = np.zeros((len(s_alpha), len(f_alpha), n_cells))
    for i in range(len(s_alpha)):
        for y in range(len(f_alpha)):
            hit = owner[i] == y
            mass = lengths[hit].sum()
            if p[i, y] > 0 and mass > 0:
                rows[i, y, hit] = lengths[hit] / mass
            else:
                rows[i, y] = 1.0 / n_cells
    decoder = {(u_alpha[k], s_alpha[i]): f_alpha[owner[i, k]]
               for i in range(len(s_alpha)) for k in range(n_cells)}
    channel = Channel(pair.axes, ("U0", u_alpha), rows)
    return FrlOutput(u_alpha, lengths, channel, decoder, s_axis, f_axis)


def randomized_response(s_alphabet, p: float, in_axis: str = "S",
                        out_axis: str = "W") -> Channel:
    """Generalized randomized response over the private alphabet.

    Reports the true symbol with probability ``p`` and each of the other
    ``k - 1`` symbols with probability ``(1 - p) / (k - 1)``.
    """
    s_alphabet = tuple(s_alphabet)
    k = len(s_alphabet)
    if not (1.0 / k - 1e-15 <= p <= 1.0):
        raise ValueError(f"truth probability {p} outside [1/{k}, 1]")
    if k == 1:
        rows = np.ones((1, 1))
    else:
        rows = np.full((k, k), (1.0 - p) / (k - 1))
        np.fill_diagonal(rows, p)
    return Channel(((in_axis, s_alphabet),), (out_axis, s_alphabet), rows)


def _combine(frl: FrlOutput, s_alpha: tuple, rr: Channel) -> Channel:
    """P(u0, w | s, f) = P(u0 | s, f) P(w | s)."""
    q0 = frl.channel.rows                      # (S, F, U0)
    w = rr.rows                                # (S, W)
    rows = q0[:, :, :, None] * w[:, None, None, :]
    n_s, n_f = q0.shape[:2]
    rows = rows.reshape(n_s, n_f, -1)
    labels = tuple(f"{u}|{s}" for u in frl.u_alphabet for s in s_alpha)
    return Channel(frl.channel.inputs, ("U", labels), rows)


def _measure(pair: JointTable, channel: Channel, s_axis: str, f_axis: str):
    ext = extend_with_channel(pair, channel)
    out = channel.output[0]
    return mutual_information(ext, out, s_axis), mutual_information(ext, out, f_axis)


def tune_leakage(joint: JointTable, frl: FrlOutput, epsilon: float) -> Mechanism:
    """Add randomized response to ``frl`` so that I(U; S) equals ``epsilon``.

    The truth probability is found by bisection on [1/|S|, 1] against the
    measured leakage of the full extended joint; leakage is required to be
    monotone along the bisection trace. An ``epsilon`` above H(S) is
    clamped to H(S) and flagged.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    s_axis, f_axis = frl.s_axis, frl.f_axis
    pair = _axes_pair(joint, s_axis, f_axis)
    s_alpha = pair.axes[0][1]
    h_s = entropy(pair.pmf(s_axis))

    if h_s == 0.0:
        channel = Channel(frl.channel.inputs, ("U", frl.u_alphabet), frl.channel.rows)
        leak, util = _measure(pair, channel, s_axis, f_axis)
        return Mechanism(channel, leak, util, 1.0, epsilon, clamped=epsilon > 0,
                         degenerate_s=True)

    # Budgets a round-off away from H(S) are the boundary itself, not a clamp.
    clamped = epsilon > h_s + LEAKAGE_TOL
    if clamped:
        log.warning("epsilon %.6g exceeds H(S) = %.6g; clamping", epsilon, h_s)
    epsilon = min(epsilon, h_s)

    def evaluate(p):
        ch = _combine(frl, s_alpha, randomized_response(s_alpha, p, s_axis))
        leak, util = _measure(pair, ch, s_axis, f_axis)
        return ch, leak, util

    lo, hi = 1.0 / len(s_alpha), 1.0
    ch_lo, leak_lo, util_lo = evaluate(lo)
    ch_hi, leak_hi, util_hi = evaluate(hi)
    trace = [(lo, leak_lo), (hi, leak_hi)]
    if leak_hi < leak_lo:
        raise MonotonicityError(f"leakage at p=1 ({leak_hi}) below p=1/|S| ({leak_lo})")

    best = min([(abs(leak_lo - epsilon), lo, ch_lo, leak_lo, util_lo),
                (abs(leak_hi - epsilon), hi, ch_hi, leak_hi, util_hi)],
               key=lambda t: t[0])
    for _ in range(MAX_BISECTIONS):
        if best[0] <= LEAKAGE_TOL:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        ch, leak, util = evaluate(mid)
        if not (leak_lo - 1e-15 <= leak <= leak_hi + 1e-15):
            raise MonotonicityError(
                f"leakage {leak} at p={mid} outside [{leak_lo}, {leak_hi}]")
        trace.append((mid, leak))
        if abs(leak - epsilon) < best[0]:
            best = (abs(leak - epsilon), mid, ch, leak, util)
        if leak < epsilon:
            lo, leak_lo = mid, leak
        else:
            hi, leak_hi = mid, leak

    _, p, ch, leak, util = best
    return Mechanism(ch, leak, util, p, epsilon, clamped=clamped, trace=tuple(trace))


def efrl_mechanism(joint: JointTable, epsilon: float, s_axis: str = "S",
                   f_axis: str = "F") -> Mechanism:
    """Shortcut for ``tune_leakage(joint, construct_frl(joint), epsilon)``."""
    return tune_leakage(joint, construct_frl(joint, s_axis, f_axis), epsilon)


def mechanism_utilities(joint3: JointTable, m: Mechanism, f_axis: str = "F",
                        h_axis: str = "H") -> tuple:
    """Return ``(I(U;F), I(U;H))`` on the joint extended by the mechanism."""
    for name, alpha in m.channel.inputs:
        if joint3.alphabet(name) != alpha:
            raise ValidationError(f"alphabet mismatch on axis {name!r}")
    ext = extend_with_channel(joint3, m.channel)
    u = m.channel.output[0]
    return mutual_information(ext, u, f_axis), mutual_information(ext, u, h_axis)


def frl_check(joint: JointTable, frl: FrlOutput) -> tuple:
    """Return ``(I(U0;S), H(F|U0,S))`` under the induced joint."""
    pair = _axes_pair(joint, frl.s_axis, frl.f_axis)
    ext = extend_with_channel(pair, frl.channel)
    return (mutual_information(ext, "U0", frl.s_axis),
            conditional_entropy(ext, frl.f_axis, ["U0", frl.s_axis]))
