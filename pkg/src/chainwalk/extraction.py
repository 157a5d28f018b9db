"""Dummy-padded extraction of multicollision tuples from vertex states.

A vertex superposition carries, per vertex, some number z of multicollision
tuples.  Measuring a tuple straight out of a uniform-over-tuples register
post-selects in favor of collision-rich vertices and the residual state stops
being uniform.  The fix implemented here pads every vertex to a fixed branch
count y: its z tuple branches plus dummy branches d_{z+1}..d_y, all at
relative amplitude 1/sqrt(y).  Measuring the padded register then either
yields a tuple (and the residual state is uniform over the shrunken vertex
family) or a dummy index i (and the residual state is uniform over the same
family with the count interval tightened to [x, i-1], which a short
amplification dance can widen back).

Families are described by VertexFamily: a restricted function, a subset size,
and an inclusive count interval whose upper end may be unbounded.  FamilyIndex
enumerates a family's full vertex set once so that class sizes, membership
predicates, and diffusion axes are exact.
"""

from __future__ import annotations

import itertools
import json
import math
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .amplify import FlipStats, Want, flip
from .errors import (
    CapacityError,
    ContractViolationError,
    FlaggedInstanceError,
    ImpossibleTargetError,
    ParameterError,
    SimulationError,
    ValidationError,
)
from .johnson import vertex_data
from .oracle import RestrictedFunction, restrict
from .statevector import (
    BasisKey,
    State,
    attach_register,
    decode_subset,
    key_register,
    measure,
    strip_register,
    subset_key,
    uniform_state,
)

_TUPLE_TAG = b"t"
_DUMMY_TAG = b"d"
_UNIFORM_TOL = 1e-9
_MAX_FAMILY_VERTICES = 250_000
_MAX_LOOP = 10_000


def tuple_token(image: int, preimages) -> bytes:
    """Serialized extraction-register value for one multicollision tuple."""
    pres = tuple(sorted(int(p) for p in preimages))
    if len(pres) < 2:
        raise ParameterError("a tuple token needs at least two preimages")
    if len(pres) > 255:
        raise ParameterError("tuple too large to serialize")
    body = struct.pack(">IB", int(image), len(pres))
    return _TUPLE_TAG + body + b"".join(struct.pack(">I", p) for p in pres)


def dummy_token(index: int) -> bytes:
    """Serialized extraction-register value for the dummy branch d_index."""
    if not (1 <= index < (1 << 16)):
        raise ParameterError(f"dummy index out of range: {index}")
    return _DUMMY_TAG + struct.pack(">H", index)


def parse_token(token: bytes):
    """Decode a register value into ("tuple", image, preimages) or ("dummy", i)."""
    if token[:1] == _DUMMY_TAG and len(token) == 3:
        return ("dummy", struct.unpack(">H", token[1:])[0])
    if token[:1] == _TUPLE_TAG and len(token) >= 6:
        image, count = struct.unpack(">IB", token[1:6])
        if len(token) == 6 + 4 * count:
            pres = struct.unpack(f">{count}I", token[6:])
            return ("tuple", image, tuple(pres))
    raise ValidationError(f"unrecognized extraction token: {token!r}")


@dataclass(frozen=True)
class VertexFamily:
    """All subsets of a fixed size whose multicollision count lies in [lo, hi].

    hi = None means unbounded above.  Membership additionally requires the
    subset to avoid the restriction's exclusion closure, which is implied for
    subsets drawn from restriction.domain_points.
    """

    restriction: RestrictedFunction
    big_r: int
    lo: int
    hi: Optional[int]

    def __post_init__(self) -> None:
        if self.big_r < 0:
            raise ParameterError("subset size must be non-negative")
        if self.lo < 0:
            raise ParameterError("interval lower bound must be non-negative")
        if self.hi is not None and self.hi < self.lo:
            raise ParameterError(
                f"empty interval [{self.lo}, {self.hi}]"
            )

    def contains_count(self, count: int) -> bool:
        return count >= self.lo and (self.hi is None or count <= self.hi)

    def interval_label(self) -> str:
        top = "inf" if self.hi is None else str(self.hi)
        return f"[{self.lo},{top}]"


class FamilyIndex:
    """Exhaustive per-subset multicollision data for one (restriction, R).

    Built once per family by enumerating every R-subset of the restricted
    domain; class sizes and count lookups are then exact.  Enumeration is the
    desk-scale privilege that stands in for the quantum data structure.
    """

    def __init__(
        self,
        restriction: RestrictedFunction,
        big_r: int,
        cap: int = _MAX_FAMILY_VERTICES,
    ) -> None:
        points = restriction.domain_points
        if not (0 < big_r <= len(points)):
            raise ParameterError(
                f"subset size {big_r} invalid for domain of {len(points)} points"
            )
        total = math.comb(len(points), big_r)
        if total > cap:
            raise CapacityError(
                f"family of {total} vertices exceeds enumeration cap {cap}"
            )
        self.restriction = restriction
        self.big_r = big_r
        self.total = total
        self._count_by_key: Dict[BasisKey, int] = {}
        self._tuples_by_key: Dict[BasisKey, tuple] = {}
        self._size_by_count: Dict[int, int] = {}
        self._keys: List[BasisKey] = []
        for combo in itertools.combinations(points, big_r):
            data = vertex_data(restriction, combo)
            key = subset_key(combo)
            self._keys.append(key)
            self._count_by_key[key] = data.count
            self._tuples_by_key[key] = data.multicollisions
            self._size_by_count[data.count] = self._size_by_count.get(data.count, 0) + 1
        self._axis: Optional[State] = None

    def count_of(self, key: BasisKey) -> int:
        try:
            return self._count_by_key[key]
        except KeyError:
            raise ValidationError("key is not a vertex of this family") from None

    def tuples_of(self, key: BasisKey) -> tuple:
        try:
            return self._tuples_by_key[key]
        except KeyError:
            raise ValidationError("key is not a vertex of this family") from None

    def histogram(self) -> Dict[int, int]:
        return dict(self._size_by_count)

    def max_count(self) -> int:
        return max(self._size_by_count) if self._size_by_count else 0

    def class_size(self, lo: int, hi: Optional[int]) -> int:
        if hi is not None and hi < lo:
            return 0
        return sum(
            size
            for count, size in self._size_by_count.items()
            if count >= lo and (hi is None or count <= hi)
        )

    def keys_in(self, lo: int, hi: Optional[int]) -> List[BasisKey]:
        return [
            key
            for key in self._keys
            if self._count_by_key[key] >= lo
            and (hi is None or self._count_by_key[key] <= hi)
        ]

    def axis_state(self) -> State:
        """Uniform superposition over the whole vertex set (diffusion axis)."""
        if self._axis is None:
            self._axis = uniform_state(self._keys)
        return self._axis

    def class_state(self, lo: int, hi: Optional[int]) -> State:
        keys = self.keys_in(lo, hi)
        if not keys:
            raise ImpossibleTargetError(
                f"no vertices with count in [{lo}, {hi}]"
            )
        return uniform_state(keys)


def pad_and_attach(
    state: State,
    restriction: RestrictedFunction,
    y: int,
    index: Optional[FamilyIndex] = None,
) -> State:
    """Attach the padded extraction register to every support vertex.

    Each vertex with tuples t_1..t_z branches into z tuple values and y - z
    dummy values, all at relative amplitude 1/sqrt(y).  Requires z <= y on
    every support vertex.
    """
    if y < 1:
        raise ParameterError("padding width y must be at least 1")
    scale = 1.0 / math.sqrt(y)
    amps: Dict[BasisKey, complex] = {}
    for key, amp in state.items():
        if index is not None:
            tuples = index.tuples_of(key)
        else:
            tuples = vertex_data(restriction, decode_subset(key)).multicollisions
        z = len(tuples)
        if z > y:
            raise ContractViolationError(
                f"vertex holds {z} tuples, above the padding width {y}"
            )
        branch = amp * scale
        for image, pres in tuples:
            amps[attach_register(key, tuple_token(image, pres))] = branch
        for i in range(z + 1, y + 1):
            amps[attach_register(key, dummy_token(i))] = branch
    return State(amps)


@dataclass(frozen=True)
class ExtractionOutcome:
    """Result of measuring the padded register once.

    kind "tuple": image/preimages hold the measured multicollision, collapsed
    is uniform over the shrunken family [lo-1, hi-1] with the preimages
    removed from every vertex and the collision table grown by one entry.
    kind "dummy": dummy_index holds i, collapsed is uniform over the same
    family narrowed to [lo, i-1].
    """

    kind: str
    image: Optional[int]
    preimages: Optional[Tuple[int, ...]]
    dummy_index: Optional[int]
    collapsed: State
    new_family: VertexFamily


def _check_uniform_support(state: State) -> None:
    target = 1.0 / math.sqrt(len(state))
    for _, amp in state.items():
        if abs(abs(amp) - target) > _UNIFORM_TOL:
            raise ValidationError("state is not uniform over its support")


def _strip_and_remove(state: State, preimages: Tuple[int, ...]) -> State:
    """Drop the register and delete the measured preimages from every vertex."""
    removed = frozenset(preimages)
    amps: Dict[BasisKey, complex] = {}
    for key, amp in state.items():
        pts = decode_subset(strip_register(key))
        if not removed.issubset(pts):
            raise ContractViolationError(
                "collapsed vertex is missing a measured preimage"
            )
        amps[subset_key(p for p in pts if p not in removed)] = amp
    return State(amps)


def _strip_only(state: State) -> State:
    amps = {strip_register(key): amp for key, amp in state.items()}
    return State(amps)


def extract_once(
    state: State,
    family: VertexFamily,
    rng: np.random.Generator,
    index: Optional[FamilyIndex] = None,
    check: bool = True,
) -> ExtractionOutcome:
    """One padded-register measurement on a uniform family state.

    With probability sum_z |V_z| z / (y |V_{lo,hi}|) the outcome is a tuple;
    the dummy index i appears with probability |V_{lo,i-1}| / (y |V_{lo,hi}|).
    Every branch collapses to a uniform state over its stated family.  When an
    index is supplied the input support is checked to be the entire class.
    """
    if family.hi is None:
        raise ParameterError(
            "extraction needs a finite upper bound; reframe the family first"
        )
    y = family.hi
    if y < 1:
        raise ParameterError("cannot extract from a family with hi = 0")
    if check:
        _check_uniform_support(state)
        if index is not None:
            expected = set(index.keys_in(family.lo, family.hi))
            if set(state.support()) != expected:
                raise ValidationError(
                    "state support is not the full declared family class"
                )
    padded = pad_and_attach(state, family.restriction, y, index)
    outcome, collapsed = measure(padded, key_register, rng)
    parsed = parse_token(outcome)
    if parsed[0] == "tuple":
        _, image, preimages = parsed
        residual = _strip_and_remove(collapsed, preimages)
        new_table = family.restriction.table.insert(
            family.restriction.base, image, preimages
        )
        new_restriction = restrict(family.restriction.base, new_table)
        new_family = VertexFamily(
            restriction=new_restriction,
            big_r=family.big_r - len(preimages),
            lo=max(0, family.lo - 1),
            hi=y - 1,
        )
        return ExtractionOutcome(
            kind="tuple",
            image=image,
            preimages=preimages,
            dummy_index=None,
            collapsed=residual,
            new_family=new_family,
        )
    _, dummy_index = parsed
    residual = _strip_only(collapsed)
    new_family = VertexFamily(
        restriction=family.restriction,
        big_r=family.big_r,
        lo=family.lo,
        hi=dummy_index - 1,
    )
    return ExtractionOutcome(
        kind="dummy",
        image=None,
        preimages=None,
        dummy_index=dummy_index,
        collapsed=residual,
        new_family=new_family,
    )


def correct_interval(
    state: State,
    family: VertexFamily,
    target_hi: int,
    index: FamilyIndex,
    rng: np.random.Generator,
    min_fraction: float = 0.0,
    max_transitions: int = _MAX_LOOP,
) -> Tuple[State, FlipStats]:
    """Widen a narrowed family state [lo, b] back to [lo, target_hi].

    Alternates flips to the complement class with two-cell count projections:
    a slab [lo, b] flips out to {below-lo} or {above-b}; a tail [a, inf) flips
    back to {below-lo} or the slab [lo, a-1]; the below-lo cell flips up to
    {[lo, target_hi]: done} or the tail above target_hi.  Requires the three
    classes [lo, target_hi], [0, lo-1], [target_hi+1, inf) to be nonempty
    (and to hold at least min_fraction of all vertices when given); instances
    failing that are flagged, not patched.
    """
    x = family.lo
    b = family.hi
    if b is None or target_hi < x or b > target_hi:
        raise ParameterError(
            f"cannot correct interval [{x}, {b}] to [{x}, {target_hi}]"
        )
    if b == target_hi:
        return state, FlipStats()
    y = target_hi
    low_size = index.class_size(0, x - 1) if x >= 1 else 0
    mid_size = index.class_size(x, y)
    top_size = index.class_size(y + 1, None)
    if mid_size == 0:
        raise ImpossibleTargetError(
            f"target class [{x}, {y}] holds no vertices"
        )
    if low_size == 0 or top_size == 0:
        raise FlaggedInstanceError(
            "The instance violates a statistical premise; it is skipped, "
            f"not patched: classes below {x} and above {y} must be nonempty "
            f"(sizes {low_size}, {top_size})."
        )
    if min_fraction > 0.0:
        floor_size = min_fraction * index.total
        if min(low_size, mid_size, top_size) < floor_size:
            raise FlaggedInstanceError(
                "The instance violates a statistical premise; it is skipped, "
                f"not patched: class sizes ({low_size}, {mid_size}, {top_size}) "
                f"fall below fraction {min_fraction} of {index.total}."
            )
    axis = index.axis_state()
    stats = FlipStats()
    mode, arg = "slab", b
    for _ in range(max_transitions):
        if mode == "slab":
            if arg == y:
                return state, stats
            upper = arg
            state, fs = flip(
                state,
                lambda key: x <= index.count_of(key) <= upper,
                axis,
                Want.BAD,
                rng,
            )
            stats.absorb(fs)
            outcome, state = measure(
                state,
                lambda key: "low" if index.count_of(key) < x else "tail",
                rng,
            )
            stats.projections.append(outcome)
            mode, arg = ("low", None) if outcome == "low" else ("tail", upper + 1)
        elif mode == "tail":
            start = arg
            state, fs = flip(
                state,
                lambda key: index.count_of(key) >= start,
                axis,
                Want.BAD,
                rng,
            )
            stats.absorb(fs)
            outcome, state = measure(
                state,
                lambda key: "low" if index.count_of(key) < x else "slab",
                rng,
            )
            stats.projections.append(outcome)
            mode, arg = ("low", None) if outcome == "low" else ("slab", start - 1)
        else:
            state, fs = flip(
                state,
                lambda key: index.count_of(key) < x,
                axis,
                Want.BAD,
                rng,
            )
            stats.absorb(fs)
            outcome, state = measure(
                state,
                lambda key: "mid" if index.count_of(key) <= y else "top",
                rng,
            )
            stats.projections.append(outcome)
            mode, arg = ("slab", y) if outcome == "mid" else ("tail", y + 1)
    raise SimulationError(
        f"interval correction did not converge in {max_transitions} transitions"
    )


def extract_tuple(
    state: State,
    family: VertexFamily,
    rng: np.random.Generator,
    index: Optional[FamilyIndex] = None,
    min_fraction: float = 0.0,
    trace: Optional[List[dict]] = None,
    max_attempts: int = _MAX_LOOP,
):
    """Repeat padded measurements until a tuple comes out.

    Dummy outcomes are corrected back to the full interval before retrying,
    so the expected number of measurement rounds is at most y/lo plus O(1).
    Returns ((image, preimages), residual state, new family, work record).
    Trace entries, when a list is supplied, record each event; for a dummy
    event interval_after is the narrowed interval before correction and
    iterations is the correction's diffusion-iteration count.
    """
    if family.lo < 1:
        raise ParameterError(
            "tuple extraction requires every vertex to hold a tuple (lo >= 1)"
        )
    if family.hi is None:
        raise ParameterError("tuple extraction requires a finite upper bound")
    if index is None:
        index = FamilyIndex(family.restriction, family.big_r)
    stats = FlipStats()
    interval_before = [family.lo, family.hi]
    for _ in range(max_attempts):
        out = extract_once(state, family, rng, index=index)
        stats.attempts += 1
        if out.kind == "tuple":
            if trace is not None:
                trace.append({
                    "event": "tuple",
                    "image": out.image,
                    "preimages": list(out.preimages),
                    "interval_before": list(interval_before),
                    "interval_after": [out.new_family.lo, out.new_family.hi],
                    "iterations": 0,
                })
            return (
                (out.image, out.preimages),
                out.collapsed,
                out.new_family,
                stats,
            )
        corrected, fs = correct_interval(
            out.collapsed, out.new_family, family.hi, index, rng, min_fraction
        )
        stats.absorb(fs)
        if trace is not None:
            trace.append({
                "event": "dummy",
                "image": None,
                "preimages": None,
                "interval_before": list(interval_before),
                "interval_after": [out.new_family.lo, out.new_family.hi],
                "iterations": fs.iterations_used,
            })
        state = corrected
    raise SimulationError(
        f"no tuple outcome after {max_attempts} padded measurements"
    )


def format_trace(events: List[dict]) -> str:
    """Extraction trace as JSON lines, one event per line."""
    return "\n".join(json.dumps(event, sort_keys=True) for event in events)
