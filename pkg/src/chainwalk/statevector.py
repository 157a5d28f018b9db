"""Exact sparse state vectors over byte-encoded basis labels.

A state is a finite map from basis key to complex amplitude with unit 2-norm.
Keys are canonical byte strings: a sorted subset block, optionally followed by
an opaque register suffix.  Equal sets encode to equal keys, and the subset
block is length-prefixed so appending a suffix stays injective.

Conventions used throughout:

* norms are kept within 1e-9 of 1, and amplitudes below 1e-12 in magnitude
  are pruned after every operation;
* measurement outcomes are ordered by their label before sampling, so a fixed
  generator always walks the same cumulative distribution;
* state equality is taken up to one global phase.
"""

from __future__ import annotations

import json
import struct
from typing import Callable, Dict, Iterable, Tuple

import numpy as np

from .errors import ContractViolationError, ValidationError

PRUNE_EPS = 1e-12
NORM_TOL = 1e-9

BasisKey = bytes


def subset_key(points: Iterable[int]) -> BasisKey:
    """Canonical key for a set of domain points (order independent)."""
    pts = sorted(set(int(p) for p in points))
    for p in pts:
        if p < 0 or p > 0xFFFFFFFF:
            raise ValidationError(f"point {p} out of encodable range")
    return struct.pack(">H", len(pts)) + b"".join(struct.pack(">I", p) for p in pts)


def decode_subset(key: BasisKey) -> Tuple[int, ...]:
    """Subset block of a key, as a sorted tuple of points."""
    (count,) = struct.unpack_from(">H", key, 0)
    end = 2 + 4 * count
    if len(key) < end:
        raise ValidationError("truncated subset block")
    return tuple(
        struct.unpack_from(">I", key, 2 + 4 * i)[0] for i in range(count)
    )


def key_register(key: BasisKey) -> bytes:
    """Register suffix of a key (empty bytes when none is attached)."""
    (count,) = struct.unpack_from(">H", key, 0)
    return key[2 + 4 * count:]


def attach_register(key: BasisKey, token: bytes) -> BasisKey:
    if key_register(key):
        raise ContractViolationError("key already carries a register")
    return key + token


def strip_register(key: BasisKey) -> BasisKey:
    (count,) = struct.unpack_from(">H", key, 0)
    return key[: 2 + 4 * count]


class State:
    """Immutable-by-convention sparse unit vector."""

    __slots__ = ("_amps",)

    def __init__(self, amplitudes: Dict[BasisKey, complex], *, normalize: bool = False):
        amps = {
            k: complex(a)
            for k, a in amplitudes.items()
            if abs(a) > PRUNE_EPS
        }
        if not amps:
            raise ValidationError("state has no support")
        if normalize:
            norm = np.sqrt(sum(abs(a) ** 2 for a in amps.values()))
            amps = {k: a / norm for k, a in amps.items()}
        norm2 = sum(abs(a) ** 2 for a in amps.values())
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm^2 = {norm2!r}, outside tolerance")
        self._amps = amps

    def amplitude(self, key: BasisKey) -> complex:
        return self._amps.get(key, 0j)

    def support(self) -> Tuple[BasisKey, ...]:
        return tuple(sorted(self._amps))

    def items(self):
        return self._amps.items()

    def __len__(self) -> int:
        return len(self._amps)

    def __contains__(self, key: BasisKey) -> bool:
        return key in self._amps

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self._amps.values())))

    def inner(self, other: "State") -> complex:
        """<self|other> over the intersection of supports."""
        small, big = self._amps, other._amps
        if len(big) < len(small):
            return np.conj(other.inner(self))
        total = 0j
        for k, a in small.items():
            b = big.get(k)
            if b is not None:
                total += np.conj(a) * b
        return total

    def probability(self, predicate: Callable[[BasisKey], bool]) -> float:
        return float(sum(abs(a) ** 2 for k, a in self._amps.items() if predicate(k)))


def uniform_state(keys: Iterable[BasisKey]) -> State:
    """Equal positive amplitude on each distinct key."""
    ks = sorted(set(keys))
    if not ks:
        raise ValidationError("uniform state over empty key set")
    amp = 1.0 / np.sqrt(len(ks))
    return State({k: amp for k in ks})


def reflect_about_state(state: State, axis: State) -> State:
    """(2|axis><axis| - I) applied to `state`."""
    overlap = axis.inner(state)
    out: Dict[BasisKey, complex] = {}
    for k, a in state.items():
        out[k] = -a
    for k, a in axis.items():
        out[k] = out.get(k, 0j) + 2.0 * overlap * a
    return State(out)


def reflect_about_predicate(state: State, flip: Callable[[BasisKey], bool]) -> State:
    """Negate the amplitude of every key where `flip` holds."""
    return State({
        k: (-a if flip(k) else a)
        for k, a in state.items()
    })


def measure(state: State, register: Callable[[BasisKey], object], rng: np.random.Generator):
    """Projective measurement of the register labelling function.

    Returns (outcome, collapsed state).  Outcomes are grouped by label, the
    label set is sorted, and a single uniform draw selects the branch.
    """
    weights: Dict[object, float] = {}
    for k, a in state.items():
        label = register(k)
        weights[label] = weights.get(label, 0.0) + abs(a) ** 2
    labels = sorted(weights)
    draw = float(rng.random())
    acc = 0.0
    outcome = labels[-1]
    for label in labels:
        acc += weights[label]
        if draw < acc:
            outcome = label
            break
    collapsed = _collapse(state, register, outcome, weights[outcome])
    return outcome, collapsed


def outcome_distribution(state: State, register: Callable[[BasisKey], object]):
    """Full branch decomposition: {label: (probability, collapsed state)}."""
    weights: Dict[object, float] = {}
    for k, a in state.items():
        label = register(k)
        weights[label] = weights.get(label, 0.0) + abs(a) ** 2
    out = {}
    for label in sorted(weights):
        out[label] = (weights[label], _collapse(state, register, label, weights[label]))
    return out


def _collapse(state: State, register, outcome, weight: float) -> State:
    scale = 1.0 / np.sqrt(weight)
    return State({
        k: a * scale
        for k, a in state.items()
        if register(k) == outcome
    })


def states_close(a: State, b: State, tol: float = 1e-9) -> bool:
    """Equality up to a global phase, max amplitude deviation below `tol`."""
    ref_key = None
    for k in a.support():
        if abs(a.amplitude(k)) > tol:
            ref_key = k
            break
    if ref_key is None:
        return False
    b_ref = b.amplitude(ref_key)
    if abs(b_ref) <= tol:
        return False
    phase = (a.amplitude(ref_key) / abs(a.amplitude(ref_key))) / (b_ref / abs(b_ref))
    keys = set(dict(a.items())) | set(dict(b.items()))
    return all(abs(a.amplitude(k) - phase * b.amplitude(k)) <= tol for k in keys)


def dump_debug(state: State) -> str:
    """JSON array of {key, re, im}, sorted by key, for debugging dumps."""
    rows = [
        {"key": k.hex(), "re": float(a.real), "im": float(a.imag)}
        for k, a in sorted(state.items())
    ]
    return json.dumps(rows)
