"""Amplitude amplification with exact rotation accounting.

Relative to a fixed axis state u and a good-key predicate, write
u = beta*B + alpha*G where G and B are the normalized good and bad
projections of u.  One amplification round applies (Ref_u . Ref_flip) where
Ref_flip negates the good amplitudes; in the plane spanned by B and G this is
a rotation by 2*asin(alpha), so a state at angle phi moves to phi + 2*theta.

`flip` drives rounds of iterate-then-measure until the projective flag
measurement lands on the wanted side.  Inputs are expected to lie in
span{B, G} (uniform class states always do); the returned state is then
exactly the renormalized wanted projection of the axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ImpossibleTargetError, ParameterError
from .statevector import (
    BasisKey,
    State,
    decode_subset,
    measure,
    reflect_about_predicate,
    reflect_about_state,
    subset_key,
    uniform_state,
)

_HALF = 1.0 / math.sqrt(2.0)
_ZERO_AMP = 1e-12


class Want(Enum):
    GOOD = "good"
    BAD = "bad"


@dataclass(frozen=True)
class AmplitudeDecomposition:
    """Good/bad split of a state: alpha^2 + beta^2 = 1, theta = asin(alpha)."""

    alpha: float
    beta: float
    theta: float


@dataclass
class FlipStats:
    """Work record for one `flip` (or a merged sequence of them)."""

    iterations_used: int = 0
    restarts: int = 0
    attempts: int = 0
    projections: list = field(default_factory=list)

    def absorb(self, other: "FlipStats") -> None:
        self.iterations_used += other.iterations_used
        self.restarts += other.restarts
        self.attempts += other.attempts
        self.projections.extend(other.projections)


def decompose(state: State, good: Callable[[BasisKey], bool]) -> AmplitudeDecomposition:
    """Exact amplitude split of `state` along the good predicate."""
    good_mass = state.probability(good)
    good_mass = min(1.0, max(0.0, good_mass))
    alpha = math.sqrt(good_mass)
    beta = math.sqrt(max(0.0, 1.0 - good_mass))
    return AmplitudeDecomposition(alpha=alpha, beta=beta, theta=math.asin(min(1.0, alpha)))


def grover_iterate(
    state: State,
    good: Callable[[BasisKey], bool],
    axis: State,
    count: int,
) -> State:
    """Apply (Ref_axis . Ref_flip)^count, one exact rotation per application."""
    if count < 0:
        raise ParameterError("iteration count must be nonnegative")
    out = state
    for _ in range(count):
        out = reflect_about_predicate(out, good)
        out = reflect_about_state(out, axis)
    return out


def iteration_count(alpha: float) -> int:
    """Rounds of rotation aimed at a quarter turn: round(pi/(4*asin a) - 1/2).

    Rounding is half-up, which for alpha <= 1/sqrt(2) always returns at
    least 1.
    """
    if alpha <= 0.0:
        raise ImpossibleTargetError("cannot size iterations for zero amplitude")
    theta = math.asin(min(1.0, alpha))
    return max(0, int(math.floor(math.pi / (4.0 * theta) - 0.5 + 0.5)))


def flip(
    state: State,
    good: Callable[[BasisKey], bool],
    axis: State,
    want: Want,
    rng: np.random.Generator,
) -> tuple[State, FlipStats]:
    """Iterate and project until the flag measurement lands on `want`.

    The wanted component of the axis must be nonempty.  When the good
    amplitude exceeds 1/sqrt(2) and the good side is wanted, rotation is too
    coarse to help, so each attempt measures a fresh copy of the axis instead;
    success probability is then above 1/2 per attempt.
    """
    dec = decompose(axis, good)
    target_amp = dec.alpha if want is Want.GOOD else dec.beta
    if target_amp <= _ZERO_AMP:
        raise ImpossibleTargetError(f"axis has no {want.value} component")
    stats = FlipStats()
    flag = lambda key: bool(good(key))
    wanted_label = want is Want.GOOD

    if want is Want.GOOD and dec.alpha > _HALF:
        while True:
            stats.attempts += 1
            outcome, collapsed = measure(axis, flag, rng)
            stats.projections.append(outcome)
            if outcome == wanted_label:
                return collapsed, stats
            stats.restarts += 1

    count = iteration_count(dec.alpha) if dec.alpha > _ZERO_AMP else 1
    if want is Want.BAD:
        count = max(1, count)
    current = state
    while True:
        stats.attempts += 1
        current = grover_iterate(current, good, axis, count)
        stats.iterations_used += count
        outcome, current = measure(current, flag, rng)
        stats.projections.append(outcome)
        if outcome == wanted_label:
            return current, stats
        stats.restarts += 1


def superpose_excluding(
    domain_size: int,
    excluded: Callable[[int], bool],
    rng: np.random.Generator,
) -> tuple[State, FlipStats]:
    """Uniform superposition over the non-excluded points, by rejection.

    Models amplifying the clean branch of a uniform draw with an exclusion
    flag.  The excluded set must cover fewer than half the points, so the
    clean amplitude exceeds 1/sqrt(2) and a constant number of attempts
    suffices.
    """
    if domain_size < 1:
        raise ParameterError("domain must be nonempty")
    bad_points = sum(1 for x in range(domain_size) if excluded(x))
    if 2 * bad_points >= domain_size:
        raise ParameterError(
            f"excluded set covers {bad_points} of {domain_size} points, needs under half"
        )
    axis = uniform_state(subset_key((x,)) for x in range(domain_size))
    good = lambda key: not excluded(decode_subset(key)[0])
    return flip(axis, good, axis, Want.GOOD, rng)
