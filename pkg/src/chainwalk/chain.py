"""The chained collision-finding loop with its cost ledger.

A run starts from the uniform superposition over all R-subsets of the domain
and alternates walk phases (amplitude amplification toward collision-bearing
vertices, charged as quantum-walk updates) with extraction phases (padded
measurements that pull one multicollision tuple out and shrink the domain).
The residual state is reused from step to step without re-preparation; after
every phase the run checks that the live state is exactly uniform over its
declared vertex family.

Two operating regimes exist.  The dense regime assumes each vertex holds at
least E >= 2 expected tuples and moves the count interval [E, E+T] down and
back up in blocks of T extractions; extraction_step and walk_step implement
its two halves.  Desk-scale instances essentially never reach density, so
run() drops to the sparse regime: project onto vertices with at least one
tuple, measure the exact count z, and extract tuple by tuple down from
[z, z].  Results carry both the reached status and the regime used.

Costs follow the walk accounting: Setup charges R oracle queries, each
diffusion iteration charges ceil(1/sqrt(delta)) Update calls and one Check
call, and each extracted tuple is verified with r counted queries.  The
closed-form prediction R + 2^k 2^(m/2)/sqrt(R) rides along for comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .amplify import FlipStats, Want, flip
from .errors import (
    CapacityError,
    ContractViolationError,
    FlaggedInstanceError,
    ParameterError,
    SimulationError,
    ValidationError,
)
from .extraction import FamilyIndex, VertexFamily, extract_tuple
from .johnson import closed_form_gap
from .oracle import (
    CollisionTable,
    FunctionTable,
    Params,
    generate_function,
    restrict,
)
from .statevector import State, measure
from .stats import IntervalPlan, round_count

_ELL_SLACK = 4
_MAX_WALK_TRANSITIONS = 10_000


class ChainStatus(Enum):
    COMPLETED = "completed"
    CAPACITY = "capacity"
    MAX_ITERATIONS = "max_iterations"
    SPARSE_FALLBACK = "sparse_fallback"


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of one chained run.

    ell sets the initial vertex size R = 2^ell.  target_tuples defaults to
    2^k and max_outer_iterations to the loop bound ceil(2^k 2^(m/2) / R);
    desk-scale sparse runs extract one tuple per iteration, so tests that
    need the full collision set raise the bound explicitly.
    """

    params: Params
    ell: int
    seed: int
    max_outer_iterations: Optional[int] = None
    target_tuples: Optional[int] = None
    calibration_c: float = 7.0 / 12.0
    min_fraction: float = 0.0
    family_cap: int = 250_000
    record_states: bool = False

    def __post_init__(self) -> None:
        if self.ell < 1:
            raise ParameterError("ell must be at least 1 (R >= 2)")
        bound = (2 * self.params.k + self.params.m) / 3.0 + _ELL_SLACK
        if self.ell > bound:
            raise ParameterError(
                f"ell={self.ell} beyond the sanity bound {bound:.2f}"
            )
        if self.max_outer_iterations is not None and self.max_outer_iterations < 1:
            raise ParameterError("max_outer_iterations must be positive")
        if self.target_tuples is not None and self.target_tuples < 1:
            raise ParameterError("target_tuples must be positive")
        if not (0.0 < self.calibration_c < 1.0):
            raise ParameterError("calibration_c must sit in (0, 1)")

    @property
    def vertex_size(self) -> int:
        return 1 << self.ell

    @property
    def target(self) -> int:
        return self.target_tuples if self.target_tuples is not None else 1 << self.params.k

    @property
    def outer_bound(self) -> int:
        if self.max_outer_iterations is not None:
            return self.max_outer_iterations
        p = self.params
        return max(1, math.ceil((1 << p.k) * 2.0 ** (p.m / 2.0) / self.vertex_size))


@dataclass
class CostLedger:
    """Walk-accounting counters plus the closed-form prediction."""

    setup_calls: int = 0
    update_calls: int = 0
    check_calls: int = 0
    oracle_queries: int = 0
    extraction_events: int = 0
    predicted_total: float = 0.0

    def charge_flip(self, stats: FlipStats, delta: float) -> None:
        """One amplification run: each iteration is one diffusion plus one check."""
        per_diffusion = max(1, math.ceil(1.0 / math.sqrt(delta)))
        self.update_calls += stats.iterations_used * per_diffusion
        self.check_calls += stats.iterations_used

    def as_dict(self) -> dict:
        return {
            "setup_calls": self.setup_calls,
            "update_calls": self.update_calls,
            "check_calls": self.check_calls,
            "oracle_queries": self.oracle_queries,
            "extraction_events": self.extraction_events,
            "predicted_total": self.predicted_total,
        }


@dataclass(frozen=True)
class CostPrediction:
    """Closed-form query count R + 2^k 2^(m/2) / sqrt(R) with validity info.

    The prior and new regimes share the algebraic form and differ in where
    they apply: small vertices (R <= 2^(m/2), one collision found per walk)
    versus large vertices (R >= 2^(m/2), vertices hold many collisions).
    """

    regime: str
    ell: float
    setup_term: float
    walk_term: float
    valid: bool

    @property
    def total(self) -> float:
        return self.setup_term + self.walk_term


def predict_cost(params: Params, ell: float, regime: str) -> CostPrediction:
    if regime not in ("prior", "new"):
        raise ParameterError(f"regime must be 'prior' or 'new', got {regime!r}")
    if ell <= 0:
        raise ParameterError("ell must be positive")
    setup = 2.0 ** ell
    walk = 2.0 ** (params.k + params.m / 2.0 - ell / 2.0)
    if regime == "prior":
        valid = ell <= params.m / 2.0
    else:
        valid = ell >= params.m / 2.0
    return CostPrediction(
        regime=regime, ell=ell, setup_term=setup, walk_term=walk, valid=valid
    )


def optimal_ell(params: Params) -> float:
    """Memory exponent balancing setup against walk cost: (2k + m) / 3."""
    return (2.0 * params.k + params.m) / 3.0


@dataclass
class ChainResult:
    config: ChainConfig
    collision_table: CollisionTable
    ledger: CostLedger
    outer_iterations: int
    status: ChainStatus
    regime: str
    per_step_trace: List[dict] = field(default_factory=list)

    def report_json(self) -> str:
        p = self.config.params
        doc = {
            "params": {"n": p.n, "m": p.m, "k": p.k},
            "ell": self.config.ell,
            "seed": self.config.seed,
            "status": self.status.value,
            "regime": self.regime,
            "tuples": [
                {"image": image, "preimages": list(pres)}
                for image, pres in self.collision_table.items()
            ],
            "ledger": self.ledger.as_dict(),
            "outer_iterations": self.outer_iterations,
            "per_step_trace": self.per_step_trace,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _delta_for(domain_size: int, big_r: int) -> float:
    if domain_size > big_r:
        return closed_form_gap(domain_size, big_r)
    return 1.0


def _verify_tuple(
    fn: FunctionTable, ledger: CostLedger, image: int, preimages: Tuple[int, ...]
) -> None:
    """Classical confirmation of a measured tuple, with counted queries."""
    if len(set(preimages)) != len(preimages) or len(preimages) < 2:
        raise ContractViolationError("measured tuple is not a valid collision")
    for x in preimages:
        ledger.oracle_queries += 1
        if fn.query(x) != image:
            raise ContractViolationError(
                f"measured preimage {x} does not map to image {image}"
            )


def _check_uniform_class(
    state: State, index: FamilyIndex, family: VertexFamily
) -> int:
    """Assert the state is exactly uniform over its declared class."""
    expected = index.keys_in(family.lo, family.hi)
    if set(state.support()) != set(expected):
        raise ValidationError(
            f"state support does not match family {family.interval_label()}"
        )
    target = 1.0 / math.sqrt(len(expected))
    for _, amp in state.items():
        if abs(abs(amp) - target) > 1e-9:
            raise ValidationError("state is not uniform over its family")
    return len(expected)


def extraction_step(
    state: State,
    family: VertexFamily,
    plan: IntervalPlan,
    rng: np.random.Generator,
    index: Optional[FamilyIndex] = None,
    min_fraction: float = 0.0,
    trace: Optional[List[dict]] = None,
    ledger: Optional[CostLedger] = None,
    fn: Optional[FunctionTable] = None,
):
    """Dense-regime extraction: T tuples, then a few more to re-center.

    Starting from a state over [x, y], extracts plan.width tuples (interval
    slides to [x-T, y-T]) and keeps extracting while the upper bound still
    exceeds the recomputed expectation for the shrunken subset size.  Returns
    (tuples, state, family, refreshed plan, index).
    """
    if plan.expected_now < 2:
        raise FlaggedInstanceError(
            "The instance violates a statistical premise; it is skipped, "
            f"not patched: dense extraction needs E >= 2, got {plan.expected_now}."
        )
    if index is None:
        index = FamilyIndex(family.restriction, family.big_r)
    tuples = []

    def one(state, family, index):
        delta = _delta_for(family.restriction.domain_size, family.big_r)
        (image, pres), state, family, fs = extract_tuple(
            state, family, rng, index=index, min_fraction=min_fraction, trace=trace
        )
        if ledger is not None:
            ledger.extraction_events += 1
            ledger.charge_flip(fs, delta)
            if fn is not None:
                _verify_tuple(fn, ledger, image, pres)
        tuples.append((image, pres))
        index = FamilyIndex(family.restriction, family.big_r)
        _check_uniform_class(state, index, family)
        return state, family, index

    for _ in range(plan.width):
        state, family, index = one(state, family, index)
    while True:
        e_new = round_count(
            plan.c * family.big_r ** 2 / family.restriction.codomain_size
        )
        if family.hi <= e_new:
            break
        if family.lo < 1:
            raise FlaggedInstanceError(
                "The instance violates a statistical premise; it is skipped, "
                "not patched: interval re-centering ran out of extractable tuples."
            )
        state, family, index = one(state, family, index)
    new_plan = plan.refreshed(family.big_r, family.restriction.codomain_size)
    return tuples, state, family, new_plan, index


def walk_step(
    state: State,
    family: VertexFamily,
    plan: IntervalPlan,
    rng: np.random.Generator,
    index: Optional[FamilyIndex] = None,
    ledger: Optional[CostLedger] = None,
    max_transitions: int = _MAX_WALK_TRANSITIONS,
):
    """Dense-regime walk: push the interval from [E-T, E] up to [E+1, E+T].

    Repeatedly measures which of the four count cells [0, E-T-1], [E-T, E],
    [E+1, E+T], [E+T+1, inf) the state occupies and flips to the complement
    until the third cell comes up.  Each flip's iterations are charged as
    diffusions.  Returns (state, family over [E+1, E+T], stats).
    """
    e_now, width = plan.expected_now, plan.width
    if index is None:
        index = FamilyIndex(family.restriction, family.big_r)
    lo_cell = max(0, e_now - width)
    if not (lo_cell <= family.lo and family.hi is not None and family.hi <= e_now):
        raise ParameterError(
            f"walk step expects a state inside [{lo_cell}, {e_now}], "
            f"got {family.interval_label()}"
        )
    if index.class_size(e_now + 1, e_now + width) == 0:
        raise FlaggedInstanceError(
            "The instance violates a statistical premise; it is skipped, "
            f"not patched: target cell [{e_now + 1}, {e_now + width}] is empty."
        )

    def cell_of(count: int) -> int:
        if count < lo_cell:
            return 0
        if count <= e_now:
            return 1
        if count <= e_now + width:
            return 2
        return 3

    universe = frozenset(range(index.max_count() + 1))
    cls = frozenset(
        c for c in universe if family.lo <= c <= family.hi
    )
    axis = index.axis_state()
    delta = _delta_for(family.restriction.domain_size, family.big_r)
    stats = FlipStats()
    for _ in range(max_transitions):
        outcome, state = measure(
            state, lambda key: cell_of(index.count_of(key)), rng
        )
        stats.projections.append(outcome)
        cls = frozenset(c for c in cls if cell_of(c) == outcome)
        if outcome == 2:
            new_family = VertexFamily(
                restriction=family.restriction,
                big_r=family.big_r,
                lo=e_now + 1,
                hi=e_now + width,
            )
            _check_uniform_class(state, index, new_family)
            return state, new_family, stats
        member = cls
        state, fs = flip(
            state,
            lambda key: index.count_of(key) in member,
            axis,
            Want.BAD,
            rng,
        )
        stats.absorb(fs)
        if ledger is not None:
            ledger.charge_flip(fs, delta)
        cls = universe - cls
    raise SimulationError(
        f"walk step did not reach the target cell in {max_transitions} measurements"
    )


def _record(result_trace, step, phase, family, support, **extra) -> None:
    entry = {
        "iteration": step,
        "phase": phase,
        "interval": family.interval_label(),
        "subset_size": family.big_r,
        "support_size": support,
        "uniform_ok": True,
    }
    entry.update(extra)
    result_trace.append(entry)


def run(config: ChainConfig) -> ChainResult:
    """Execute the chained loop end to end on a freshly generated function.

    The function table derives from config.seed, as does the measurement
    stream, so identical configs give identical results.  Statuses:
    COMPLETED (target reached), CAPACITY (exclusion closure hit half the
    domain), MAX_ITERATIONS (loop bound), SPARSE_FALLBACK (the sparse regime
    ran out of collision-bearing vertices).
    """
    params = config.params
    fn = generate_function(params, config.seed)
    rng = np.random.default_rng([config.seed, 1])
    ledger = CostLedger(
        predicted_total=predict_cost(params, float(config.ell), "new").total
    )
    table = CollisionTable()
    restriction = restrict(fn, table)
    big_r = config.vertex_size
    if big_r > restriction.domain_size:
        raise ParameterError(
            f"initial vertex size {big_r} exceeds the domain "
            f"({restriction.domain_size} points)"
        )

    index = FamilyIndex(restriction, big_r, cap=config.family_cap)
    state = index.axis_state()
    family = VertexFamily(restriction, big_r, 0, None)
    ledger.setup_calls = 1
    fn.charge(big_r)
    ledger.oracle_queries += big_r

    trace: List[dict] = []
    _record(trace, 0, "setup", family, len(state))

    m_size = restriction.codomain_size
    e0 = round_count(config.calibration_c * big_r * big_r / m_size)
    dense = (8 * big_r < m_size) and e0 >= 2
    regimes_used = set()

    status = ChainStatus.MAX_ITERATIONS
    outer = 0
    plan: Optional[IntervalPlan] = None

    if dense:
        regimes_used.add("dense")
        plan = IntervalPlan.build(big_r, m_size, config.calibration_c)
        e_now, width = plan.expected_now, plan.width
        if index.class_size(e_now, e_now + width) == 0:
            raise FlaggedInstanceError(
                "The instance violates a statistical premise; it is skipped, "
                f"not patched: no vertices hold [{e_now}, {e_now + width}] tuples."
            )
        state, fs = flip(
            state,
            lambda key: e_now <= index.count_of(key) <= e_now + width,
            index.axis_state(),
            Want.GOOD,
            rng,
        )
        ledger.charge_flip(fs, _delta_for(restriction.domain_size, big_r))
        family = VertexFamily(restriction, big_r, e_now, e_now + width)
        _check_uniform_class(state, index, family)
        _record(trace, 0, "project", family, len(state))

    while outer < config.outer_bound and len(table) < config.target:
        outer += 1
        if dense:
            try:
                tuples, state, family, plan, index = extraction_step(
                    state, family, plan, rng,
                    index=index, min_fraction=config.min_fraction,
                    trace=trace, ledger=ledger, fn=fn,
                )
            except CapacityError:
                status = ChainStatus.CAPACITY
                break
            table = family.restriction.table
            restriction = family.restriction
            big_r = family.big_r
            _record(
                trace, outer, "extraction", family, len(state),
                tuples_total=len(table),
            )
            if len(table) >= config.target:
                status = ChainStatus.COMPLETED
                break
            if plan.expected_now < 2:
                dense = False
                regimes_used.add("sparse")
                count, state = measure(
                    state, lambda key: index.count_of(key), rng
                )
                family = VertexFamily(restriction, big_r, count, count)
                _check_uniform_class(state, index, family)
                _record(trace, outer, "regime-switch", family, len(state))
                continue
            state, family, fs = walk_step(
                state, family, plan, rng, index=index, ledger=ledger
            )
            _record(trace, outer, "walk", family, len(state))
            continue

        regimes_used.add("sparse")
        if family.lo < 1 or family.hi is None:
            if big_r < 2 or index.class_size(1, None) == 0:
                status = ChainStatus.SPARSE_FALLBACK
                break
            if family.hi is None:
                state, fs = flip(
                    state,
                    lambda key: index.count_of(key) >= 1,
                    index.axis_state(),
                    Want.GOOD,
                    rng,
                )
            else:
                state, fs = flip(
                    state,
                    lambda key: index.count_of(key) <= family.hi,
                    index.axis_state(),
                    Want.BAD,
                    rng,
                )
            ledger.charge_flip(fs, _delta_for(restriction.domain_size, big_r))
            family = VertexFamily(restriction, big_r, 1, None)
            count, state = measure(
                state, lambda key: index.count_of(key), rng
            )
            family = VertexFamily(restriction, big_r, count, count)
            _check_uniform_class(state, index, family)
            _record(trace, outer, "walk", family, len(state))
        try:
            delta = _delta_for(restriction.domain_size, big_r)
            (image, pres), state, family, fs = extract_tuple(
                state, family, rng,
                index=index, min_fraction=config.min_fraction, trace=trace,
            )
            ledger.extraction_events += 1
            ledger.charge_flip(fs, delta)
            _verify_tuple(fn, ledger, image, pres)
        except CapacityError:
            status = ChainStatus.CAPACITY
            break
        table = family.restriction.table
        restriction = family.restriction
        big_r = family.big_r
        if big_r < 1 or restriction.domain_size < big_r:
            status = ChainStatus.SPARSE_FALLBACK
            break
        index = FamilyIndex(restriction, big_r, cap=config.family_cap)
        support = _check_uniform_class(state, index, family)
        _record(
            trace, outer, "extraction", family, support,
            tuples_total=len(table),
        )
        if len(table) >= config.target:
            status = ChainStatus.COMPLETED
            break

    if len(table) >= config.target:
        status = ChainStatus.COMPLETED
    if ledger.oracle_queries != fn.query_count:
        raise ContractViolationError(
            f"ledger mismatch: {ledger.oracle_queries} recorded vs "
            f"{fn.query_count} counted oracle queries"
        )
    if not regimes_used:
        regime = "sparse"
    elif len(regimes_used) == 2:
        regime = "mixed"
    else:
        regime = next(iter(regimes_used))
    return ChainResult(
        config=config,
        collision_table=table,
        ledger=ledger,
        outer_iterations=outer,
        status=status,
        regime=regime,
        per_step_trace=trace,
    )
