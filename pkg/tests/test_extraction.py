"""Tests for collision extraction: tokens, families, the padded register law.

Reference instance (8 points): values [0, 0, 1, 1, 2, 2, 3, 4], so images
0, 1, 2 each have one preimage pair.  At subset size 4 the 70 vertices split
into 28 with no collision, 39 with one, 3 with two.  All closed-form outcome
probabilities below are derived from that split by direct counting.
"""

import itertools
import json
import math

import numpy as np
import pytest

from chainwalk.errors import (
    CapacityError,
    ContractViolationError,
    FlaggedInstanceError,
    ImpossibleTargetError,
    ParameterError,
    ValidationError,
)
from chainwalk.oracle import CollisionTable, FunctionTable, Params, restrict
from chainwalk.statevector import (
    State,
    attach_register,
    decode_subset,
    key_register,
    states_close,
    strip_register,
    subset_key,
)
from chainwalk.extraction import (
    FamilyIndex,
    VertexFamily,
    correct_interval,
    dummy_token,
    extract_once,
    extract_tuple,
    format_trace,
    pad_and_attach,
    parse_token,
    tuple_token,
)


def eight_point():
    fn = FunctionTable(Params(n=3, m=3, k=1), [0, 0, 1, 1, 2, 2, 3, 4])
    return fn, restrict(fn, CollisionTable())


def four_pair():
    # 16 points, four preimage pairs, eight singleton images
    values = [0, 0, 1, 1, 2, 2, 3, 3, 4, 5, 6, 7, 8, 9, 10, 11]
    fn = FunctionTable(Params(n=4, m=4, k=0), values)
    return fn, restrict(fn, CollisionTable())


def test_token_round_trip():
    tok = tuple_token(5, (9, 2, 4))
    assert parse_token(tok) == ("tuple", 5, (2, 4, 9))
    assert parse_token(dummy_token(3)) == ("dummy", 3)
    assert parse_token(dummy_token(65535)) == ("dummy", 65535)


def test_token_validation():
    with pytest.raises(ParameterError):
        tuple_token(5, (9,))
    with pytest.raises(ParameterError):
        tuple_token(5, range(300))
    with pytest.raises(ParameterError):
        dummy_token(0)
    with pytest.raises(ParameterError):
        dummy_token(1 << 16)
    for junk in (b"", b"x", b"d\x00", tuple_token(1, (2, 3))[:-1]):
        with pytest.raises(ValidationError):
            parse_token(junk)


def test_vertex_family_validation():
    _, restriction = eight_point()
    fam = VertexFamily(restriction=restriction, big_r=4, lo=1, hi=2)
    assert fam.contains_count(1) and fam.contains_count(2)
    assert not fam.contains_count(0) and not fam.contains_count(3)
    assert fam.interval_label() == "[1,2]"
    open_fam = VertexFamily(restriction=restriction, big_r=4, lo=0, hi=None)
    assert open_fam.contains_count(99)
    assert open_fam.interval_label() == "[0,inf]"
    # an emptied-out vertex is legitimate after a full-size extraction
    VertexFamily(restriction=restriction, big_r=0, lo=0, hi=0)
    with pytest.raises(ParameterError):
        VertexFamily(restriction=restriction, big_r=-1, lo=0, hi=None)
    with pytest.raises(ParameterError):
        VertexFamily(restriction=restriction, big_r=4, lo=-1, hi=None)
    with pytest.raises(ParameterError):
        VertexFamily(restriction=restriction, big_r=4, lo=2, hi=1)


def test_family_index_matches_brute_force():
    fn, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    hist = {}
    for combo in itertools.combinations(range(8), 4):
        images = {}
        for x in combo:
            images.setdefault(fn.value(x), []).append(x)
        z = sum(1 for pre in images.values() if len(pre) >= 2)
        hist[z] = hist.get(z, 0) + 1
    assert index.histogram() == hist == {0: 28, 1: 39, 2: 3}
    assert index.total == 70
    assert index.max_count() == 2
    key = subset_key((0, 1, 2, 3))
    assert index.count_of(key) == 2
    assert index.tuples_of(key) == ((0, (0, 1)), (1, (2, 3)))
    assert index.class_size(1, 2) == 42
    assert index.class_size(1, None) == 42
    assert index.class_size(3, None) == 0
    assert len(index.keys_in(0, 0)) == 28
    with pytest.raises(ValidationError):
        index.count_of(subset_key((0, 1, 2)))


def test_family_index_states_and_caps():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    axis = index.axis_state()
    assert len(axis) == 70
    amp = 1.0 / math.sqrt(70)
    assert all(abs(a - amp) < 1e-12 for _, a in axis.items())
    cls = index.class_state(2, 2)
    assert len(cls) == 3
    with pytest.raises(ImpossibleTargetError):
        index.class_state(5, None)
    with pytest.raises(CapacityError):
        FamilyIndex(restriction, 4, cap=10)
    with pytest.raises(ParameterError):
        FamilyIndex(restriction, 9)


def test_pad_and_attach_amplitudes():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    padded = pad_and_attach(index.class_state(1, 2), restriction, 2, index)
    amp = 1.0 / math.sqrt(42 * 2)
    for key, value in padded.items():
        assert abs(value - amp) < 1e-12
    # every vertex contributes exactly y branches
    assert len(padded) == 42 * 2
    with pytest.raises(ParameterError):
        pad_and_attach(index.class_state(1, 2), restriction, 0, index)
    with pytest.raises(ContractViolationError):
        pad_and_attach(index.class_state(2, 2), restriction, 1, index)


def test_outcome_probabilities_match_counting():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    padded = pad_and_attach(index.class_state(1, 2), restriction, 2, index)
    # tuple branches total: (39*1 + 3*2) / (2*42) = 15/28
    tuple_p = padded.probability(lambda key: key_register(key)[:1] == b"t")
    assert abs(tuple_p - 15.0 / 28.0) < 1e-9
    # the only dummy is d_2, carried by the 39 single-collision vertices
    d2 = padded.probability(lambda key: key_register(key) == dummy_token(2))
    assert abs(d2 - 13.0 / 28.0) < 1e-9
    assert padded.probability(lambda key: key_register(key) == dummy_token(1)) == 0.0
    # one named tuple outcome: 15 vertices contain the pair {0, 1}
    tok = tuple_token(0, (0, 1))
    named = [key for key in padded.support() if key_register(key) == tok]
    assert len(named) == 15
    for key in named:
        assert {0, 1}.issubset(decode_subset(strip_register(key)))
    assert abs(padded.probability(lambda key: key_register(key) == tok) - 5.0 / 28.0) < 1e-9


def test_extract_once_both_branches():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    fam = VertexFamily(restriction=restriction, big_r=4, lo=1, hi=2)
    state = index.class_state(1, 2)
    seen = set()
    for seed in range(12):
        out = extract_once(state, fam, np.random.default_rng(seed), index=index)
        seen.add(out.kind)
        if out.kind == "tuple":
            assert len(out.preimages) == 2
            assert out.new_family.big_r == 2
            assert (out.new_family.lo, out.new_family.hi) == (0, 1)
            # residual is uniform over every remaining pair, i.e. the full
            # class [0, 1] of the shrunken instance
            fresh = FamilyIndex(out.new_family.restriction, 2)
            assert sorted(out.collapsed.support()) == sorted(fresh.keys_in(0, 1))
            assert len(out.collapsed) == 15
            amp = 1.0 / math.sqrt(15)
            assert all(abs(abs(a) - amp) < 1e-9 for _, a in out.collapsed.items())
        else:
            assert out.dummy_index == 2
            assert (out.new_family.lo, out.new_family.hi) == (1, 1)
            assert states_close(out.collapsed, index.class_state(1, 1))
    assert seen == {"tuple", "dummy"}


def test_extract_once_frequencies():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    fam = VertexFamily(restriction=restriction, big_r=4, lo=1, hi=2)
    state = index.class_state(1, 2)
    rng = np.random.default_rng(100)
    draws = 2000
    tuples = sum(
        1 for _ in range(draws) if extract_once(state, fam, rng, index=index).kind == "tuple"
    )
    p = 15.0 / 28.0
    sigma = math.sqrt(p * (1 - p) / draws)
    assert abs(tuples / draws - p) < 4.0 * sigma


def test_extract_once_validation():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    state = index.class_state(1, 2)
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        extract_once(state, VertexFamily(restriction=restriction, big_r=4, lo=1, hi=None), rng)
    with pytest.raises(ParameterError):
        extract_once(state, VertexFamily(restriction=restriction, big_r=4, lo=0, hi=0), rng)
    # support must be the entire declared class
    with pytest.raises(ValidationError):
        extract_once(
            index.class_state(2, 2),
            VertexFamily(restriction=restriction, big_r=4, lo=1, hi=2),
            rng,
            index=index,
        )
    # and uniform over it
    keys = index.keys_in(1, 2)
    lopsided = State({k: (2.0 if i == 0 else 1.0) for i, k in enumerate(keys)}, normalize=True)
    with pytest.raises(ValidationError):
        extract_once(lopsided, VertexFamily(restriction=restriction, big_r=4, lo=1, hi=2), rng)


def test_two_vertex_padding_contrast():
    """A two-vertex superposition shows why the register needs padding."""
    _, restriction = eight_point()
    v1 = (0, 1, 2, 3, 4, 5)   # three collision pairs
    v2 = (0, 1, 2, 3, 6, 7)   # two collision pairs
    st = State({subset_key(v1): 1.0, subset_key(v2): 1.0}, normalize=True)
    padded = pad_and_attach(st, restriction, 3)
    tok = tuple_token(0, (0, 1))
    assert abs(padded.probability(lambda k: key_register(k) == tok) - 1.0 / 3.0) < 1e-12
    assert abs(padded.probability(lambda k: key_register(k) == dummy_token(3)) - 1.0 / 6.0) < 1e-12
    # conditioned on the shared tuple the two vertices stay balanced
    a1 = padded.amplitude(attach_register(subset_key(v1), tok))
    a2 = padded.amplitude(attach_register(subset_key(v2), tok))
    assert abs(a1 - a2) < 1e-12
    # without padding each vertex splits over its own tuple count and the
    # conditional amplitudes skew by sqrt(3/2)
    raw1 = (1.0 / math.sqrt(2)) / math.sqrt(3)
    raw2 = (1.0 / math.sqrt(2)) / math.sqrt(2)
    assert abs(raw2 / raw1 - math.sqrt(1.5)) < 1e-12


def test_two_vertex_measured_branches():
    _, restriction = eight_point()
    v1 = (0, 1, 2, 3, 4, 5)
    v2 = (0, 1, 2, 3, 6, 7)
    st = State({subset_key(v1): 1.0, subset_key(v2): 1.0}, normalize=True)
    fam = VertexFamily(restriction=restriction, big_r=6, lo=2, hi=3)
    kinds = set()
    for seed in range(30):
        out = extract_once(st, fam, np.random.default_rng(seed))
        kinds.add(out.kind)
        if out.kind == "tuple":
            assert len(out.collapsed) in (1, 2)
            if len(out.collapsed) == 2:
                amps = [abs(a) for _, a in out.collapsed.items()]
                assert all(abs(a - 1.0 / math.sqrt(2)) < 1e-9 for a in amps)
        else:
            assert out.dummy_index == 3
            assert out.collapsed.support() == (subset_key(v2),)
    assert kinds == {"tuple", "dummy"}


def test_correct_interval_identity_and_recovery():
    _, restriction = four_pair()
    index = FamilyIndex(restriction, 6)
    assert index.histogram() == {0: 4396, 1: 3224, 2: 384, 3: 4}
    fam = VertexFamily(restriction=restriction, big_r=6, lo=1, hi=2)
    same, stats = correct_interval(
        index.class_state(1, 2), fam, 2, index, np.random.default_rng(0)
    )
    assert states_close(same, index.class_state(1, 2))
    assert stats.iterations_used == 0
    narrowed = VertexFamily(restriction=restriction, big_r=6, lo=1, hi=1)
    fixed, stats = correct_interval(
        index.class_state(1, 1), narrowed, 2, index, np.random.default_rng(5)
    )
    assert states_close(fixed, index.class_state(1, 2))


def test_correct_interval_premise_failures():
    _, restriction8 = eight_point()
    index8 = FamilyIndex(restriction8, 4)
    axis = index8.axis_state()
    rng = np.random.default_rng(0)
    # nobody sits above count 2 on the 8-point instance
    with pytest.raises(FlaggedInstanceError):
        correct_interval(
            index8.class_state(1, 1),
            VertexFamily(restriction=restriction8, big_r=4, lo=1, hi=1),
            2, index8, rng,
        )
    # lo = 0 leaves no class below to flip through
    with pytest.raises(FlaggedInstanceError):
        correct_interval(
            index8.class_state(0, 1),
            VertexFamily(restriction=restriction8, big_r=4, lo=0, hi=1),
            2, index8, rng,
        )
    # an empty target class is impossible, not merely flagged
    with pytest.raises(ImpossibleTargetError):
        correct_interval(
            axis, VertexFamily(restriction=restriction8, big_r=4, lo=5, hi=5),
            6, index8, rng,
        )
    with pytest.raises(ParameterError):
        correct_interval(
            axis, VertexFamily(restriction=restriction8, big_r=4, lo=1, hi=None),
            2, index8, rng,
        )
    # min_fraction demands all three classes carry real weight
    _, restriction16 = four_pair()
    index16 = FamilyIndex(restriction16, 6)
    with pytest.raises(FlaggedInstanceError):
        correct_interval(
            index16.class_state(1, 1),
            VertexFamily(restriction=restriction16, big_r=6, lo=1, hi=1),
            2, index16, np.random.default_rng(1), min_fraction=0.5,
        )


def test_extract_tuple_with_trace():
    _, restriction = four_pair()
    index = FamilyIndex(restriction, 6)
    fam = VertexFamily(restriction=restriction, big_r=6, lo=1, hi=2)
    trace = []
    (image, preimages), residual, new_fam, stats = extract_tuple(
        index.class_state(1, 2), fam, np.random.default_rng(3),
        index=index, trace=trace,
    )
    assert image in (0, 1, 2, 3)
    assert len(preimages) == 2
    assert (new_fam.lo, new_fam.hi, new_fam.big_r) == (0, 1, 4)
    assert trace[-1]["event"] == "tuple"
    assert trace[-1]["interval_after"] == [0, 1]
    for event in trace[:-1]:
        assert event["event"] == "dummy"
        assert event["interval_before"] == [1, 2]
        assert event["interval_after"] == [1, 1]
        assert event["iterations"] >= 1
    assert stats.attempts >= len(trace)
    # residual support avoids the measured preimages everywhere
    for key in residual.support():
        assert not set(preimages) & set(decode_subset(key))


def test_extract_tuple_validation():
    _, restriction = eight_point()
    index = FamilyIndex(restriction, 4)
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        extract_tuple(
            index.class_state(0, 2),
            VertexFamily(restriction=restriction, big_r=4, lo=0, hi=2),
            rng, index=index,
        )
    with pytest.raises(ParameterError):
        extract_tuple(
            index.class_state(1, None),
            VertexFamily(restriction=restriction, big_r=4, lo=1, hi=None),
            rng, index=index,
        )


def test_format_trace_round_trip():
    events = [
        {"event": "dummy", "image": None, "preimages": None,
         "interval_before": [1, 2], "interval_after": [1, 1], "iterations": 2},
        {"event": "tuple", "image": 3, "preimages": [6, 7],
         "interval_before": [1, 2], "interval_after": [0, 1], "iterations": 0},
    ]
    text = format_trace(events)
    lines = text.splitlines()
    assert len(lines) == 2
    assert [json.loads(line) for line in lines] == events
