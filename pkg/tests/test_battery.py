import json
from fractions import Fraction

import pytest

from wmfam.battery import (
    BatteryResult, MatchRule, TaskCategory, TaskResult, calculator, kv_store, load_pack, match_checkpoint,
    run_battery, run_task, write_transcripts,
)
from wmfam.client import ModelEndpoint, ScriptedTransport
from wmfam.errors import EndpointUnreachable, MalformedTask
from wmfam.mocks import MockBehavior, MockKind

PACK = load_pack("bundled")


def mock(kind=MockKind.PERFECT_TRACKER, capacity=9, name="m"):
    return ModelEndpoint(name, "fam", transport="mock", mock=MockBehavior(kind, capacity))


def four_checkpoint_task():
    steps = [{"kind": "tool", "tool": "kv", "call": {"op": "set", "key": "n", "value": 3}}]
    for k in range(4):
        steps.append({"kind": "tool", "tool": "kv", "call": {"op": "incr", "key": "n", "by": 2}})
        steps.append({"kind": "prompt", "text": f"Counter value after update {k + 1}?",
                      "checkpoint": {"expected_from": "kv:n", "load": k + 1}})
    return {"id": "four", "category": "state_tracking", "steps": steps}


def test_pack_shape():
    assert len(PACK) == 10
    assert {t.category for t in PACK} == set(TaskCategory)
    assert all(len(t.checkpoints) >= 1 for t in PACK)


def test_all_correct_scores_one():
    res = run_battery(PACK, mock(capacity=99))
    assert res.abs == 1.0 and all(r.score == 1.0 for r in res.tasks)


def test_unparseable_scores_zero():
    t = ScriptedTransport(lambda body, hint: "I am not sure.")
    res = run_battery(PACK, mock(), transport=t)
    assert res.abs == 0.0


def test_three_of_four_checkpoints():
    task = load_pack({"tasks": [four_checkpoint_task()]})[0]
    res = run_task(task, mock(capacity=3))
    assert (res.passed, res.total, res.score) == (3, 4, 0.75)
    expected = [e["expected"] for e in res.transcript if e["kind"] == "prompt"]
    assert expected == [5, 7, 9, 11]


def test_abs_is_exact_mean():
    # capacity 2 passes the first two of four checkpoints in every task
    tasks = load_pack({"tasks": [dict(four_checkpoint_task(), id=f"t{i}") for i in range(10)]})
    assert run_battery(tasks, mock(capacity=2)).abs == 0.5
    scores = [0.9, 0.9, 0.9, 0.7, 1.0, 0.5, 0.8, 0.6, 1.0, 0.7]
    results = [TaskResult(f"t{i}", "state_tracking", s, 0, 1) for i, s in enumerate(scores)]
    fake = BatteryResult("m", float(sum(map(Fraction, map(str, scores))) / 10), results, {})
    assert fake.abs == 0.8
    assert fake.measures(tasks)[0].value == 0.8


def test_capacity_makes_abs_monotone():
    values = [run_battery(PACK, mock(capacity=c)).abs for c in range(1, 11)]
    assert values == sorted(values) and values[0] < values[-1]


def test_deterministic_and_order_independent(tmp_path):
    a = run_battery(PACK, mock(capacity=4))
    b = run_battery(list(reversed(PACK)), mock(capacity=4))
    assert a.abs == b.abs
    assert {r.task_id: r.score for r in a.tasks} == {r.task_id: r.score for r in b.tasks}
    again = run_battery(PACK, mock(capacity=4))
    p1 = write_transcripts(tmp_path / "a.jsonl", [a])
    p2 = write_transcripts(tmp_path / "b.jsonl", [again])
    assert p1.read_bytes() == p2.read_bytes()


def test_pack_file_round_trip(tmp_path):
    path = tmp_path / "pack.json"
    path.write_text(json.dumps({"tasks": [t.to_dict() for t in PACK]}))
    again = load_pack(path)
    assert [t.to_dict() for t in again] == [t.to_dict() for t in PACK]
    assert run_battery(again, mock(capacity=5)).abs == run_battery(PACK, mock(capacity=5)).abs


@pytest.mark.parametrize("mutate", [
    lambda t: t.update(steps=[]),
    lambda t: t.update(steps=[s for s in t["steps"] if "checkpoint" not in s]),
    lambda t: t["steps"].insert(0, {"kind": "tool", "tool": "shell", "call": {"op": "x"}}),
    lambda t: t["steps"].insert(0, {"kind": "dance", "text": "x"}),
    lambda t: t.update(category="cooking"),
    lambda t: t["steps"][-1]["checkpoint"].update(expected=3),
    lambda t: t["steps"][-1]["checkpoint"].update(load=0),
])
def test_malformed_tasks(mutate):
    t = four_checkpoint_task()
    mutate(t)
    with pytest.raises(MalformedTask):
        load_pack({"tasks": [t]})


def test_duplicate_ids_rejected():
    with pytest.raises(MalformedTask):
        load_pack({"tasks": [four_checkpoint_task(), four_checkpoint_task()]})


def test_tools_are_pure():
    state = {"x": 1}
    new, obs, val = kv_store(state, {"op": "incr", "key": "x", "by": 4})
    # updates only acknowledge, so the model has to track the value itself
    assert state == {"x": 1} and new == {"x": 5} and val is None and obs.endswith("ok")
    assert kv_store(new, {"op": "get", "key": "x"})[2] == 5
    assert calculator({}, {"op": "div", "args": [7, 2]})[2] == 3.5
    assert calculator({}, {"op": "div", "args": [1, 3]})[2] == float(Fraction(1, 3))
    assert calculator({}, {"op": "sub", "args": [10, 4, 1]})[2] == 5


def test_match_rules():
    assert match_checkpoint("It is 12, no wait, 14", 14, MatchRule.NUMBER) == (14, True)
    assert match_checkpoint("nothing", 14, MatchRule.NUMBER) == (None, False)
    assert match_checkpoint("  Green. ", "green", MatchRule.STRING)[1]


def test_unreachable_task_scores_zero():
    def down(body, hint):
        raise EndpointUnreachable("down")

    res = run_battery(PACK[:2], mock(), transport=ScriptedTransport(down), backoff_s=0)
    assert res.abs == 0.0 and set(res.errors) == {t.id for t in PACK[:2]}
    with pytest.raises(ValueError):
        run_battery([], mock())


def test_measures_include_subsets():
    res = run_battery(PACK, mock(capacity=3))
    names = {s.measure for s in res.measures(PACK)}
    assert {"abs", "abs_tool_use", "abs_state_tracking", "abs_multi_step_reasoning",
            "abs_wmf_heavy", "abs_non_wmf"} <= names


def test_wrappers_shape_conversation():
    seen = []

    def answer(body, hint):
        seen.append(body)
        return str(hint["expected"]) if hint else "ok"

    t = ScriptedTransport(answer)
    run_task(PACK[0], mock(), "cot", transport=t)
    assert seen[0]["messages"][0]["role"] == "user"
    assert seen[-1]["messages"][-2]["role"] == "assistant"
