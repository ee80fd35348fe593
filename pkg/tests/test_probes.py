import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from wmfam.errors import InvalidDepth, InvalidEntityCount, InvalidSurface
from wmfam.probes import (
    ARITHMETIC_SURFACES, ASSIGNMENT_SURFACES, ParaphraseTemplate, ProbeKind, ProbeSpec, SurfaceForm,
    build_instance, generate_battery, generate_multi_entity, generate_probe, read_probes, write_probes,
)
from wmfam.rng import SplitMix64, stream_seed

PT = ParaphraseTemplate


def spec(kind=ProbeKind.WMF_AM, depth=3, surface=SurfaceForm.POINTS, template=PT.ORIGINAL, seed=0, index=0):
    return ProbeSpec(kind, depth, surface, template, seed, index)


def test_worked_points_example():
    p = build_instance(spec(), 10, (5, -3, 7), "Alice")
    assert p.ground_truth == 19
    assert p.prompt == ("Alice starts with 10 points. Alice gains 5 points. Alice loses 3 points. "
                        "Alice gains 7 points. What is Alice's current score?")


def test_worked_yoked_example():
    p = build_instance(spec(ProbeKind.YOKED, 3), 10, (5, -5, 3, -3, 7, -7), "Alice")
    assert p.ground_truth == 10
    assert p.running_states() == [15, 10, 13, 10, 17, 10]


def test_worked_warehouse_example():
    s = ProbeSpec(ProbeKind.WMF_AM, 3, SurfaceForm.INVENTORY, PT.ORIGINAL, 0, 0, True, 3)
    p = build_instance(s, {"Widget": 50, "Gadget": 30, "Sprocket": 20},
                       [("Widget", -10), ("Gadget", 25), ("Sprocket", -5)], "warehouse")
    assert p.ground_truth == {"Widget": 40, "Gadget": 55, "Sprocket": 15}
    assert "A warehouse has 3 items" in p.prompt


def test_nonarith_last_assignment():
    s = spec(ProbeKind.NON_ARITHMETIC, 3, SurfaceForm.COLOR)
    p = build_instance(s, "white", ("red", "blue", "green"), "car")
    assert p.ground_truth == "green"


def test_yoked_pair_must_cancel():
    with pytest.raises(ValueError):
        build_instance(spec(ProbeKind.YOKED, 1), 10, (5, -4), "Alice")


def test_negative_prefix_rejected():
    with pytest.raises(ValueError):
        build_instance(spec(), 5, (-3, -4, 9), "Alice")


def test_determinism_same_spec():
    a, b = generate_probe(spec(seed=7, index=3)), generate_probe(spec(seed=7, index=3))
    assert a.to_dict() == b.to_dict()


def test_rng_reference_values():
    # SplitMix64 reference outputs for state 0 (published test vector)
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert stream_seed("abc") == int.from_bytes(
        bytes.fromhex("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")[:8], "big")


def test_invalid_depth_and_surface():
    with pytest.raises(InvalidDepth):
        generate_probe(spec(depth=4))
    generate_probe(spec(depth=4), sweep=True)
    with pytest.raises(InvalidDepth):
        generate_probe(spec(depth=0), sweep=True)
    with pytest.raises(InvalidSurface):
        generate_probe(spec(surface=SurfaceForm.COLOR))
    with pytest.raises(InvalidSurface):
        generate_probe(spec(ProbeKind.NON_ARITHMETIC, 3, SurfaceForm.POINTS))


def test_battery_default_sizes():
    wmf = generate_battery(ProbeKind.WMF_AM, (3, 5, 7), 15, (SurfaceForm.POINTS,), (PT.ORIGINAL,), (0, 1, 2, 3))
    assert len(wmf) == 180
    yoked = generate_battery(ProbeKind.YOKED, (2, 4, 6, 8, 12), 20, ARITHMETIC_SURFACES, (PT.ORIGINAL,), (0,))
    assert len(yoked) == 100
    assert {p.spec.surface for p in yoked} == set(ARITHMETIC_SURFACES)


def test_battery_order_is_seed_major():
    # blocks follow the order the caller gave: seed, then depth, surface, template, index
    seeds, templates = (1, 0), (PT.ORIGINAL, PT.FORMAL)
    b = generate_battery(ProbeKind.WMF_AM, (5, 3), 2, (SurfaceForm.POINTS,), templates, seeds)
    keys = [(seeds.index(p.spec.seed), (5, 3).index(p.spec.depth), templates.index(p.spec.template), p.spec.index)
            for p in b]
    assert keys == sorted(keys)
    assert len(b) == 2 * 2 * 2 * 2


def test_battery_rejects_empty():
    with pytest.raises(ValueError):
        generate_battery(ProbeKind.WMF_AM, (3,), 0, (SurfaceForm.POINTS,), (PT.ORIGINAL,), (0,))
    with pytest.raises(ValueError):
        generate_battery(ProbeKind.WMF_AM, (), 1, (SurfaceForm.POINTS,), (PT.ORIGINAL,), (0,))


def test_multi_entity():
    s = ProbeSpec(ProbeKind.WMF_AM, 5, SurfaceForm.INVENTORY, PT.ORIGINAL, 3, 1)
    a, b = generate_multi_entity(s, 3), generate_multi_entity(s, 3)
    assert a.to_dict() == b.to_dict()
    truth = dict(a.initial_state)
    for item, d in a.operations:
        truth[item] += d
    assert truth == a.ground_truth
    with pytest.raises(InvalidEntityCount):
        generate_multi_entity(s, 1)
    with pytest.raises(InvalidSurface):
        generate_multi_entity(spec(), 3)


def test_multi_entity_untouched_items_keep_initial():
    s = ProbeSpec(ProbeKind.WMF_AM, 3, SurfaceForm.INVENTORY, PT.ORIGINAL, 0, 0, True, 3)
    p = build_instance(s, {"Widget": 5, "Gadget": 6, "Sprocket": 7},
                       [("Widget", 2), ("Widget", -1), ("Widget", 4)], "warehouse")
    assert p.ground_truth == {"Widget": 10, "Gadget": 6, "Sprocket": 7}


def test_jsonl_round_trip(tmp_path):
    probes = generate_battery(ProbeKind.NON_ARITHMETIC, (3,), 2, ASSIGNMENT_SURFACES, (PT.ORIGINAL,), (0,))
    probes.append(generate_multi_entity(ProbeSpec(ProbeKind.WMF_AM, 3, SurfaceForm.INVENTORY, PT.ORIGINAL, 0, 0), 3))
    path = write_probes(tmp_path / "p.jsonl", probes, {"x": 1}, "abc")
    header, back = read_probes(path)
    assert header["rng"].startswith("splitmix64")
    assert header["manifest"] == "abc"
    assert [p.to_dict() for p in back] == [p.to_dict() for p in probes]
    first = json.loads(path.read_text().splitlines()[0])
    assert "header" in first


def _random_spec(rng, kind):
    depths = {ProbeKind.YOKED: (2, 4, 6, 8, 12), ProbeKind.WMF_AM: (3, 5, 7)}[kind]
    return ProbeSpec(kind, rng.choice(depths), rng.choice(ARITHMETIC_SURFACES), rng.choice(list(PT)),
                     rng.randrange(2 ** 32), rng.randrange(1000))


def test_yoked_invariant_1000():
    rng = random.Random(11)
    for _ in range(1000):
        p = generate_probe(_random_spec(rng, ProbeKind.YOKED))
        assert p.ground_truth == p.initial_state
        assert len(p.operations) == 2 * p.spec.depth
        assert min(p.running_states()) >= 0


def test_sum_invariant_1000():
    rng = random.Random(12)
    for _ in range(1000):
        p = generate_probe(_random_spec(rng, ProbeKind.WMF_AM))
        assert p.ground_truth == p.initial_state + sum(p.operations)
        assert min(p.running_states()) >= 0
        assert all(1 <= abs(d) <= 20 for d in p.operations)
        assert 10 <= p.initial_state <= 100


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), index=st.integers(0, 10_000), depth=st.sampled_from([3, 5, 7]),
       surface=st.sampled_from(ARITHMETIC_SURFACES))
def test_template_invariance(seed, index, depth, surface):
    probes = [generate_probe(ProbeSpec(ProbeKind.WMF_AM, depth, surface, t, seed, index)) for t in PT]
    assert len({p.operations for p in probes}) == 1
    assert len({p.ground_truth for p in probes}) == 1
    assert len({p.prompt for p in probes}) == len(PT)
    by = {p.spec.template: p for p in probes}
    assert len(by[PT.MINIMAL].prompt.split()) < len(by[PT.ORIGINAL].prompt.split())


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32), depth=st.integers(1, 30), surface=st.sampled_from(ASSIGNMENT_SURFACES))
def test_nonarith_properties(seed, depth, surface):
    p = generate_probe(ProbeSpec(ProbeKind.NON_ARITHMETIC, depth, surface, PT.ORIGINAL, seed, 0), sweep=True)
    assert p.ground_truth == p.operations[-1]
    seq = (p.initial_state,) + p.operations
    assert all(a != b for a, b in zip(seq, seq[1:]))


def test_k1_control_has_single_op():
    p = generate_probe(spec(ProbeKind.SINGLE_STEP, 1))
    assert len(p.operations) == 1
