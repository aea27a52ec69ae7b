"""Exact information measures over finite joint distributions.

Everything here works on dense numpy tables whose axes carry names
(``"S"``, ``"F"``, ``"H"``, ``"U"`` ...). All logarithms are natural, so
every quantity is in nats. Objects are immutable once built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

MASS_TOL = 1e-12
CLAMP_TOL = 1e-12

AxisSpec = Union[str, Iterable[str]]


class ValidationError(ValueError):
    """A table or distribution violates a probability invariant."""


class AxisError(ValueError):
    """Unknown, duplicated or overlapping axis names."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _check_mass(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{what}: non-finite entries")
    if np.any(values < 0):
        raise ValidationError(f"{what}: negative entries")
    total = float(values.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise ValidationError(f"{what}: total mass {total!r} is not 1")


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over an ordered finite alphabet."""

    alphabet: tuple
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "probs", _frozen(self.probs))
        if self.probs.ndim != 1 or len(self.probs) != len(self.alphabet):
            raise ValidationError("probs length must equal alphabet length")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValidationError("alphabet labels must be unique")
        _check_mass(self.probs, "Pmf")

    def __getitem__(self, symbol) -> float:
        return float(self.probs[self.alphabet.index(symbol)])


@dataclass(frozen=True)
class JointTable:
    """Joint distribution over named axes.

    ``axes`` is a tuple of ``(name, alphabet)`` pairs and ``cells`` has one
    dimension per axis, in the same order.
    """

    axes: tuple
    cells: np.ndarray

    def __post_init__(self):
        axes = tuple((str(name), tuple(alpha)) for name, alpha in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "cells", _frozen(self.cells))
        names = [name for name, _ in axes]
        if len(set(names)) != len(names):
            raise AxisError(f"duplicate axis names in {names}")
        for name, alpha in axes:
            if len(alpha) == 0:
                raise ValidationError(f"axis {name!r} has an empty alphabet")
            if len(set(alpha)) != len(alpha):
                raise ValidationError(f"axis {name!r} has repeated labels")
        shape = tuple(len(alpha) for _, alpha in axes)
        if self.cells.shape != shape:
            raise ValidationError(
                f"cells shape {self.cells.shape} does not match axes {shape}")
        _check_mass(self.cells, "JointTable")

    @property
    def names(self) -> tuple:
        return tuple(name for name, _ in self.axes)

    def alphabet(self, name: str) -> tuple:
        return self.axes[self.index(name)][1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise AxisError(f"unknown axis {name!r}; have {self.names}") from None

    def pmf(self, name: str) -> Pmf:
        m = marginalize(self, [name])
        return Pmf(m.axes[0][1], m.cells)

    @classmethod
    def from_array(cls, cells, names: Sequence[str], alphabets=None) -> "JointTable":
        """Build a table with default integer alphabets ``0..n-1``."""
        cells = np.asarray(cells, dtype=np.float64)
        if alphabets is None:
            alphabets = [tuple(range(n)) for n in cells.shape]
        return cls(tuple(zip(names, alphabets)), cells)

    def to_dict(self) -> dict:
        return {
            "axes": [{"name": n, "alphabet": list(a)} for n, a in self.axes],
            "cells": self.cells.ravel().tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "JointTable":
        try:
            axes = tuple((ax["name"], tuple(ax["alphabet"])) for ax in data["axes"])
            flat = np.asarray(data["cells"], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed joint table: {exc}") from None
        shape = tuple(len(a) for _, a in axes)
        if flat.size != int(np.prod(shape)):
            raise ValidationError(
                f"{flat.size} cells given for axes of shape {shape}")
        return cls(axes, flat.reshape(shape))

    @classmethod
    def from_json(cls, text: str) -> "JointTable":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Channel:
    """Conditional distribution of one output axis given some input axes.

    ``rows`` has shape ``(*input sizes, output size)``; each row sums to one.
    """

    inputs: tuple
    output: tuple
    rows: np.ndarray

    def __post_init__(self):
        inputs = tuple((str(n), tuple(a)) for n, a in self.inputs)
        output = (str(self.output[0]), tuple(self.output[1]))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "rows", _frozen(self.rows))
        shape = tuple(len(a) for _, a in inputs) + (len(output[1]),)
        if self.rows.shape != shape:
            raise ValidationError(
                f"channel rows shape {self.rows.shape} does not match {shape}")
        if np.any(self.rows < 0) or not np.all(np.isfinite(self.rows)):
            raise ValidationError("channel rows must be finite and non-negative")
        sums = self.rows.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > MASS_TOL):
            raise ValidationError("every channel row must sum to 1")

    @property
    def input_names(self) -> tuple:
        return tuple(n for n, _ in self.inputs)

    def row(self, *symbols) -> Pmf:
        idx = tuple(alpha.index(s) for (_, alpha), s in zip(self.inputs, symbols))
        return Pmf(self.output[1], self.rows[idx])


def _as_names(spec: AxisSpec) -> tuple:
    if isinstance(spec, str):
        return (spec,)
    return tuple(spec)


def _disjoint(*groups: tuple) -> None:
    seen = set()
    for g in groups:
        if len(set(g)) != len(g) or seen & set(g):
            raise AxisError(f"axis sets must be pairwise disjoint: {groups}")
        seen |= set(g)


def marginalize(j: JointTable, keep: AxisSpec) -> JointTable:
    """Sum out every axis not in ``keep``. Kept axes retain their original order."""
    keep = set(_as_names(keep))
    if not keep:
        raise AxisError("keep must name at least one axis")
    for name in keep:
        j.index(name)
    drop = tuple(i for i, n in enumerate(j.names) if n not in keep)
    if not drop:
        return j
    axes = tuple(ax for ax in j.axes if ax[0] in keep)
    return JointTable(axes, j.cells.sum(axis=drop))


def _sub(j: JointTable, names: tuple) -> np.ndarray:
    """Marginal over ``names`` as an array broadcastable against ``j.cells``."""
    idx = [j.index(n) for n in names]
    drop = tuple(i for i in range(j.cells.ndim) if i not in idx)
    return j.cells.sum(axis=drop, keepdims=True)


def _xlogy_sum(num: np.ndarray, ratio_num: np.ndarray, ratio_den: np.ndarray) -> float:
    """sum num * ln(ratio_num / ratio_den) over cells with num > 0."""
    num, ratio_num, ratio_den = np.broadcast_arrays(num, ratio_num, ratio_den)
    mask = num > 0
    return float(np.sum(num[mask] * np.log(ratio_num[mask] / ratio_den[mask])))


def _clamp(x: float) -> float:
    return 0.0 if -CLAMP_TOL <= x < 0 else x


def entropy(p: Union[Pmf, JointTable, np.ndarray]) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0.

    Accepts a :class:`Pmf`, a :class:`JointTable` (joint entropy of all
    axes) or a raw probability array, which is validated first.
    """
    if isinstance(p, (Pmf, JointTable)):
        probs = p.probs if isinstance(p, Pmf) else p.cells
    else:
        probs = np.asarray(p, dtype=np.float64)
        _check_mass(probs, "probability array")
    nz = probs[probs > 0]
    return max(0.0, float(-np.sum(nz * np.log(nz))))


def joint_entropy(j: JointTable, axes: AxisSpec) -> float:
    return entropy(marginalize(j, axes))


def conditional_entropy(j: JointTable, target: AxisSpec, given: AxisSpec = ()) -> float:
    """H(target | given) in nats.

    Computed directly as ``-sum p(t,g) ln p(t|g)`` so that a target which is
    a deterministic function of ``given`` yields exactly zero.
    """
    target, given = _as_names(target), _as_names(given)
    _disjoint(target, given)
    if not given:
        return joint_entropy(j, target)
    m = marginalize(j, target + given)
    joint = m.cells
    cond = _sub(m, given)
    return _clamp(max(0.0, -_xlogy_sum(joint, joint, cond)))


def mutual_information(j: JointTable, a: AxisSpec, b: AxisSpec) -> float:
    """I(a; b) in nats."""
    return conditional_mutual_information(j, a, b, ())


def conditional_mutual_information(j: JointTable, a: AxisSpec, b: AxisSpec,
                                   c: AxisSpec = ()) -> float:
    """I(a; b | c) in nats; an empty ``c`` gives plain mutual information.

    Evaluated as ``sum p(abc) ln[p(abc) p(c) / (p(ac) p(bc))]``. Round-off
    negatives within 1e-12 are clamped to zero.
    """
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if not a or not b:
        raise AxisError("both information arguments need at least one axis")
    _disjoint(a, b, c)
    m = marginalize(j, a + b + c)
    p = m.cells
    pac = _sub(m, a + c)
    pbc = _sub(m, b + c)
    pc = _sub(m, c) if c else np.ones_like(pac)
    value = _xlogy_sum(p, p * pc, pac * pbc)
    return _clamp(value)


def extend_with_channel(j: JointTable, ch: Channel) -> JointTable:
    """Append the channel's output axis to ``j``.

    The new cells are ``p(x) * ch(u | inputs(x))``; summing out the new axis
    gives back ``j.cells`` up to floating point addition of the row.
    """
    if ch.output[0] in j.names:
        raise AxisError(f"output axis {ch.output[0]!r} already present")
    idx = []
    for name, alpha in ch.inputs:
        if j.alphabet(name) != alpha:
            raise ValidationError(
                f"alphabet mismatch on axis {name!r}: "
                f"{j.alphabet(name)} vs channel {alpha}")
        idx.append(j.index(name))
    # Move the channel's input dims into the joint's axis positions.
    n = j.cells.ndim
    order = sorted(range(len(idx)), key=lambda k: idx[k])
    rows = np.transpose(ch.rows, order + [len(idx)])
    shape = [1] * n + [rows.shape[-1]]
    for k in order:
        shape[idx[k]] = rows.shape[order.index(k)]
    rows = rows.reshape(shape)
    cells = j.cells[..., None] * rows
    return JointTable(j.axes + (ch.output,), cells)
