"""Numerical estimate of the best semantic utility under a leakage budget.

Any mechanism P(U|S,F) splits the joint P(S,F) into a mixture of posterior
"atoms" q_u = P(S,F | U=u) with weights P(u). Both I(U;F) and I(U;S) are
weighted sums of per-atom divergences, so for a fixed pool of atoms the best
mixture is a linear program. The pool is grown by column generation: each
round prices candidate atoms against the LP duals with a batch of
multi-start exponentiated-gradient ascents, and the loop stops once no atom
improves the LP. The returned channel is always verified feasible; its
utility certifies a lower bound on the supremum, not global optimality.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .bounds import theorem1_bounds
from .probcore import Channel, JointTable, extend_with_channel, mutual_information
from .frl import _axes_pair

MAX_CELLS = 16
DEFAULT_RESTARTS = 64
# LP objective + best reduced value bounds the optimum over all atoms, so
# stopping below REDUCED_TOL leaves at most that much on the table.
REDUCED_TOL = 1e-9
STALL_ROUNDS = 5
STALL_TOL = 1e-12
WEIGHT_TOL = 1e-12
# Leakage slack when certifying feasibility; measured I(U;S) of an exactly
# private channel is round-off noise of this order.
FEAS_TOL = 1e-12


class OracleError(RuntimeError):
    pass


class SandwichViolation(AssertionError):
    """An estimate fell outside the closed-form bounds.

    ``rows`` holds the full per-epsilon report, ``failures`` the offending
    subset.
    """

    def __init__(self, rows, failures):
        self.rows = rows
        self.failures = failures
        desc = ", ".join(
            f"eps={r.epsilon:.6g} (lower margin {r.lower_margin:.3e}, "
            f"upper margin {r.upper_margin:.3e})" for r in failures)
        super().__init__(f"sandwich violated at {desc}")


@dataclass(frozen=True)
class OracleResult:
    value: float
    channel: Channel
    leakage: float
    restarts_used: int
    seed: int
    epsilon: float
    u_size: int
    rounds: int = 0
    support: int = 0

    def to_dict(self, include_channel: bool = False) -> dict:
        out = {
            "value": self.value,
            "leakage": self.leakage,
            "epsilon": self.epsilon,
            "u_size": self.u_size,
            "restarts_used": self.restarts_used,
            "seed": self.seed,
            "rounds": self.rounds,
            "support": self.support,
        }
        if include_channel:
            out["channel"] = {
                "inputs": [{"name": n, "alphabet": list(a)} for n, a in self.channel.inputs],
                "output": {"name": self.channel.output[0],
                           "alphabet": list(self.channel.output[1])},
                "rows": self.channel.rows.tolist(),
            }
        return out

    def to_json(self, include_channel: bool = False, **kwargs) -> str:
        return json.dumps(self.to_dict(include_channel), **kwargs)


def _kl_rows(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    ratio = np.divide(q, p, out=np.ones_like(q), where=q > 0)
    return np.sum(q * np.log(ratio), axis=-1)


class _Problem:
    """Atom arithmetic for a fixed (S, F) joint."""

    def __init__(self, P: np.ndarray):
        self.P = P
        self.PS = P.sum(axis=1)
        self.PF = P.sum(axis=0)
        self.mask = P > 0
        self.live = self.PS > 0
        self.safe_PS = np.where(self.live, self.PS, 1.0)
        self.safe_PF = np.where(self.PF > 0, self.PF, 1.0)
        n_f = P.shape[1]
        self.cond = np.where(self.live[:, None], P / self.safe_PS[:, None], 1.0 / n_f)

    def divergences(self, atoms: np.ndarray):
        """Per-atom (KL to P_F, KL to P_S), i.e. contributions to I(U;F), I(U;S)."""
        return _kl_rows(atoms.sum(axis=1), self.PF), _kl_rows(atoms.sum(axis=2), self.PS)

    def deterministic_conditionals(self) -> np.ndarray:
        choices = [np.flatnonzero(self.mask[s]) if self.live[s] else [0]
                   for s in range(self.P.shape[0])]
        out = []
        for pick in itertools.product(*choices):
            c = self.cond.copy()
            for s, f in enumerate(pick):
                if self.live[s]:
                    c[s] = 0.0
                    c[s, f] = 1.0
            out.append(c)
        return np.array(out)

    def random_conditionals(self, rng, k: int, concentration: float = 0.5) -> np.ndarray:
        g = rng.gamma(concentration, size=(k,) + self.P.shape) + 1e-300
        g = np.where(self.mask[None], g, 0.0)
        g = np.where(self.live[None, :, None], g, 1.0)
        return g / g.sum(axis=2, keepdims=True)

    def random_marginals(self, rng, k: int) -> np.ndarray:
        a = rng.dirichlet(np.ones(self.P.shape[0]), size=k) * self.live
        return a / a.sum(axis=1, keepdims=True)

    def split(self, atoms: np.ndarray):
        a = atoms.sum(axis=2)
        c = np.where(a[:, :, None] > 0, atoms / np.maximum(a, 1e-300)[:, :, None],
                     self.cond[None])
        return a, c


def _solve_lp(prob: _Problem, atoms, d_f, d_s, epsilon):
    m = prob.mask.ravel()
    a_eq = atoms.reshape(len(atoms), -1)[:, m].T
    res = linprog(-d_f, A_ub=d_s[None, :], b_ub=[epsilon], A_eq=a_eq,
                  b_eq=prob.P.ravel()[m], bounds=(0, None), method="highs")
    if res.status != 0:
        raise OracleError(f"master LP failed: {res.message}")
    lam = np.zeros(prob.P.size)
    lam[m] = -res.eqlin.marginals
    mu = -res.ineqlin.marginals[0]
    return res.x, lam.reshape(prob.P.shape), mu


def _reduced(prob: _Problem, lam, mu, q):
    d_f, d_s = prob.divergences(q)
    return d_f - mu * d_s - np.sum(q * lam, axis=(1, 2)), d_f, d_s


def _log_normalize(x, axis):
    x = x - x.max(axis=axis, keepdims=True)
    return x - np.log(np.exp(x).sum(axis=axis, keepdims=True))


def _price(prob: _Problem, lam, mu, a, c, fix_a, iters, step=1.0):
    """Batched exponentiated-gradient ascent of the reduced value of an atom.

    The reduced value is KL(q_F||P_F) - mu KL(q_S||P_S) - <lam, q>. Atoms are
    kept factored as S-marginal ``a`` times conditional rows ``c`` and updated
    in log space; rows with ``fix_a`` set keep their marginal bit-exact so
    zero-leakage atoms stay exact. Each start carries its own step size,
    grown after an accepted move and halved after a rejected one.
    """
    a_fixed = a
    with np.errstate(divide="ignore"):
        la, lc = np.log(a), np.log(c)
    steps = np.full(len(a), step)
    value = _reduced(prob, lam, mu, a[:, :, None] * c)[0]
    for _ in range(iters):
        a, c = np.exp(la), np.exp(lc)
        q = a[:, :, None] * c
        log_f = np.log(np.maximum(q.sum(axis=1), 1e-300) / prob.safe_PF)
        log_s = np.log(np.maximum(q.sum(axis=2), 1e-300) / prob.safe_PS)
        g = log_f[:, None, :] - mu * log_s[:, :, None] - lam[None]
        g = np.where(prob.mask[None], g, 0.0)
        st = steps[:, None, None]
        lc_new = _log_normalize(lc + st * a[:, :, None] * g, axis=2)
        la_new = _log_normalize(la + st[:, :, 0] * np.sum(c * g, axis=2), axis=1)
        la_new = np.where(fix_a[:, None], la, la_new)
        a_new = np.where(fix_a[:, None], a_fixed, np.exp(la_new))
        trial = _reduced(prob, lam, mu, a_new[:, :, None] * np.exp(lc_new))[0]
        ok = trial >= value
        la = np.where(ok[:, None], la_new, la)
        lc = np.where(ok[:, None, None], lc_new, lc)
        value = np.where(ok, trial, value)
        steps = np.where(ok, steps * 1.5, steps * 0.5)
        if np.all(steps < 1e-12):
            break
    a = np.where(fix_a[:, None], a_fixed, np.exp(la))
    q = a[:, :, None] * np.exp(lc)
    red, d_f, d_s = _reduced(prob, lam, mu, q)
    return q, red, d_f, d_s


def _channel_from_atoms(prob, weights, atoms, inputs, u_size):
    n_s, n_f = prob.P.shape
    rows = np.zeros((n_s, n_f, u_size))
    k = len(weights)
    safe = np.where(prob.mask, prob.P, 1.0)
    rows[:, :, :k] = np.moveaxis(weights[:, None, None] * atoms, 0, -1) / safe[:, :, None]
    rows[~prob.mask] = 0.0
    rows[~prob.mask, 0] = 1.0
    rows[prob.mask] /= rows[prob.mask].sum(axis=-1, keepdims=True)
    labels = tuple(f"u{k}" for k in range(u_size))
    return Channel(inputs, ("U", labels), rows)


def _atoms_from_channel(prob, ch: Channel):
    joint = prob.P[:, :, None] * ch.rows
    pu = joint.sum(axis=(0, 1))
    keep = pu > 0
    return np.moveaxis(joint[:, :, keep] / pu[keep], -1, 0)


def _merge_to(prob, weights, atoms, u_size):
    """Greedily merge atom pairs until at most ``u_size`` remain.

    Merging is a deterministic post-processing of U, so leakage cannot grow.
    """
    weights, atoms = list(weights), list(atoms)
    while len(weights) > u_size:
        best = None
        for i, j in itertools.combinations(range(len(weights)), 2):
            w = weights[i] + weights[j]
            q = (weights[i] * atoms[i] + weights[j] * atoms[j]) / w
            d_f, _ = prob.divergences(np.array([q, atoms[i], atoms[j]]))
            loss = weights[i] * d_f[1] + weights[j] * d_f[2] - w * d_f[0]
            if best is None or loss < best[0]:
                best = (loss, i, j, w, q)
        _, i, j, w, q = best
        weights[i], atoms[i] = w, q
        del weights[j], atoms[j]
    return np.array(weights), np.array(atoms)


def _measure(pair: JointTable, ch: Channel, s_axis, f_axis):
    ext = extend_with_channel(pair, ch)
    return mutual_information(ext, "U", f_axis), mutual_information(ext, "U", s_axis)


def _restore(pair, ch, epsilon, s_axis, f_axis):
    """Pull the channel toward a constant output until leakage <= epsilon.

    Leakage is convex in the channel and zero at the constant channel, so it
    is non-increasing along the segment and bisection is valid.
    """
    util, leak = _measure(pair, ch, s_axis, f_axis)
    epsilon += FEAS_TOL
    if leak <= epsilon:
        return ch, util, leak
    const = np.zeros_like(ch.rows)
    const[..., 0] = 1.0
    lo, hi = 0.0, 1.0
    for _ in range(80):
        t = 0.5 * (lo + hi)
        trial = Channel(ch.inputs, ch.output, (1 - t) * ch.rows + t * const)
        if _measure(pair, trial, s_axis, f_axis)[1] <= epsilon:
            hi = t
        else:
            lo = t
    ch = Channel(ch.inputs, ch.output, (1 - hi) * ch.rows + hi * const)
    util, leak = _measure(pair, ch, s_axis, f_axis)
    return ch, util, leak


def estimate_h_eps(joint: JointTable, epsilon: float, u_size: Optional[int] = None,
                   restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                   s_axis: str = "S", f_axis: str = "F",
                   warm_start: Optional[Channel] = None, max_rounds: int = 200,
                   pricing_iters: int = 300) -> OracleResult:
    """Search for a channel P(U|S,F) maximizing I(U;F) with I(U;S) <= epsilon.

    Parameters
    ----------
    joint : JointTable
        Table containing ``s_axis`` and ``f_axis`` with at most 16 cells
        in their product.
    epsilon : float
        Leakage budget in nats.
    u_size : int, optional
        Output alphabet size, default ``|S||F| + 1``. Smaller values are met
        by merging atoms of the LP solution.
    restarts : int
        Number of independent random streams feeding the pricing step.
        Stream ``r`` is seeded by ``(seed, r)``.
    warm_start : Channel, optional
        A feasible channel (e.g. the solution for a smaller budget) whose
        atoms seed the pool; the result is then at least as good.

    Returns
    -------
    OracleResult
        Best feasible channel found, with its exactly measured utility and
        leakage.
    """
    pair = _axes_pair(joint, s_axis, f_axis)
    n_s, n_f = pair.cells.shape
    if n_s * n_f > MAX_CELLS:
        raise ValueError(f"|S||F| = {n_s * n_f} exceeds the {MAX_CELLS}-cell guard")
    if u_size is None:
        u_size = n_s * n_f + 1
    if u_size < 1 or u_size > MAX_CELLS + 1:
        raise ValueError(f"u_size must lie in [1, {MAX_CELLS + 1}]")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if restarts < 1:
        raise ValueError("restarts must be positive")

    prob = _Problem(np.array(pair.cells))
    rngs = [np.random.default_rng([seed, r]) for r in range(restarts)]
    det = prob.deterministic_conditionals()
    zero_leak = prob.PS[None, :, None] * det
    pool = [prob.P[None], zero_leak]
    if warm_start is not None:
        pool.append(_atoms_from_channel(prob, warm_start))
    atoms = np.concatenate(pool)
    d_f, d_s = prob.divergences(atoms)

    rounds = 0
    history = []
    for rounds in range(1, max_rounds + 1):
        w, lam, mu = _solve_lp(prob, atoms, d_f, d_s, epsilon)
        history.append(float(w @ d_f))
        if (len(history) > STALL_ROUNDS
                and history[-1] - history[-1 - STALL_ROUNDS] < STALL_TOL):
            break
        basis_a, basis_c = prob.split(atoms[w > WEIGHT_TOL])
        # Faces with deterministic conditionals: once with the prior marginal
        # held fixed (zero leakage), once with a free marginal.
        starts_a = [basis_a, np.repeat(prob.PS[None], 2 * len(det), 0)]
        starts_c = [basis_c, np.concatenate([0.98 * det + 0.02 * prob.cond, det])]
        fixed = [np.zeros(len(basis_a), bool), np.ones(len(det), bool),
                 np.zeros(len(det), bool)]
        for rng in rngs:
            pick = det[rng.integers(len(det), size=1)]
            starts_a += [np.repeat(prob.PS[None], 1, 0), prob.random_marginals(rng, 3)]
            starts_c += [prob.random_conditionals(rng, 1), prob.random_conditionals(rng, 2), pick]
            fixed += [np.ones(1, bool), np.zeros(3, bool)]
        q, reduced, qf, qs = _price(prob, lam, mu, np.concatenate(starts_a),
                                    np.concatenate(starts_c), np.concatenate(fixed),
                                    pricing_iters)
        better = reduced > REDUCED_TOL
        if not better.any():
            break
        atoms = np.concatenate([atoms, q[better]])
        d_f = np.concatenate([d_f, qf[better]])
        d_s = np.concatenate([d_s, qs[better]])

    w, _, _ = _solve_lp(prob, atoms, d_f, d_s, epsilon)
    keep = w > WEIGHT_TOL
    weights, chosen = w[keep], atoms[keep]
    if len(weights) > u_size:
        weights, chosen = _merge_to(prob, weights, chosen, u_size)
    ch = _channel_from_atoms(prob, weights, chosen, pair.axes, u_size)
    ch, util, leak = _restore(pair, ch, epsilon, s_axis, f_axis)
    if leak > epsilon + FEAS_TOL:
        raise OracleError(f"could not certify feasibility: leakage {leak} > {epsilon}")
    return OracleResult(util, ch, leak, restarts, seed, epsilon, u_size,
                        rounds=rounds, support=len(weights))


@dataclass(frozen=True)
class SandwichRow:
    epsilon: float
    lower: float
    estimate: float
    upper: float
    lower_margin: float
    upper_margin: float
    ok: bool


@dataclass(frozen=True)
class SandwichReport:
    rows: tuple
    results: tuple = field(repr=False, default=())

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def verify_sandwich(joint: JointTable, eps_grid: Sequence[float],
                    u_size: Optional[int] = None, restarts: int = DEFAULT_RESTARTS,
                    seed: int = 0, s_axis: str = "S", f_axis: str = "F",
                    lower_slack: float = 1e-6, upper_slack: float = 1e-9,
                    raise_on_violation: bool = True) -> SandwichReport:
    """Check max(L1, [L2]^+, 0) <= estimate <= H(F|S) + eps on every budget.

    Budgets are processed in ascending order, each warm-started from the
    previous solution so the estimates are non-decreasing in epsilon.
    """
    rows, results = [], []
    warm = None
    for eps in sorted(eps_grid):
        b = theorem1_bounds(joint, eps, s_axis, f_axis)
        lower = max(b.L_h1, b.L_h2_clamped or 0.0, 0.0)
        res = estimate_h_eps(joint, eps, u_size, restarts, seed, s_axis, f_axis,
                             warm_start=warm)
        warm = res.channel
        lo_m = res.value - lower
        up_m = b.upper_h_eps - res.value
        rows.append(SandwichRow(eps, lower, res.value, b.upper_h_eps, lo_m, up_m,
                                lo_m >= -lower_slack and up_m >= -upper_slack))
        results.append(res)
    report = SandwichReport(tuple(rows), tuple(results))
    failures = [r for r in rows if not r.ok]
    if failures and raise_on_violation:
        raise SandwichViolation(tuple(rows), failures)
    return report
