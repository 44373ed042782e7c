import pytest
from hypothesis import given
from hypothesis import strategies as st

from stlppc.formulas import PhiFormula
from stlppc.parser import parse_task
from stlppc.topology import CommGraph, UnionFind, clusters, stage2_timing_ok


def tasks_of(texts):
    return {i: parse_task(t) for i, t in texts.items()}


def test_three_agent_example_clusters():
    tasks = tasks_of({
        1: "F[0,5] dist(1,2) <= 1",
        2: "F[0,5] dist(2,[0,0]) <= 1",
        3: "F[0,5] dist(3,[0,0]) <= 1",
    })
    cs = clusters(tasks, CommGraph(tasks))
    groups = [c.agents for c in cs]
    assert groups == [(1, 2), (3,)]


def test_all_non_collaborative_singletons_case_a():
    tasks = tasks_of({i: f"F[0,5] dist({i},[0,0]) <= 1" for i in range(1, 6)})
    cs = clusters(tasks, CommGraph(tasks))
    assert [c.agents for c in cs] == [(i,) for i in range(1, 6)]
    assert all(c.case_a for c in cs)


def test_identical_tasks_case_a_cluster():
    text = "F[10,15] (dist(1,2) <= 2 && dist(1,3) <= 2 && dist(2,3) <= 2)"
    tasks = tasks_of({1: text, 2: text, 3: text})
    (c,) = clusters(tasks, CommGraph(tasks))
    assert c.agents == (1, 2, 3)
    assert c.case_a and c.comm_ok


def test_mixed_tasks_not_case_a():
    tasks = tasks_of({
        1: "G[0,15] (dist(1,2) <= 10 && dist(1,3) <= 10)",
        2: "F[5,15] dist(2,[90,90]) <= 5",
        3: "F[5,15] dist(3,[90,10]) <= 5",
    })
    (c,) = clusters(tasks, CommGraph(tasks))
    assert c.agents == (1, 2, 3)
    assert not c.case_a


def test_comm_ok_flags_missing_links():
    text = "F[0,5] dist(1,2) <= 1"
    tasks = tasks_of({1: text, 2: "F[0,5] dist(2,[0,0]) <= 1"})
    cs = clusters(tasks, CommGraph([1, 2], edges=[]))
    assert cs[0].agents == (1, 2)
    assert not cs[0].comm_ok
    cs = clusters(tasks, CommGraph([1, 2], edges=[(1, 2)]))
    assert cs[0].comm_ok


def test_no_dependency_edge_crosses_clusters_fuzzed():
    import numpy as np

    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        tasks = {}
        for i in range(1, n + 1):
            j = int(rng.integers(1, n + 1))
            if j == i or rng.random() < 0.4:
                tasks[i] = parse_task(f"F[0,5] dist({i},[0,0]) <= 1")
            else:
                tasks[i] = parse_task(f"F[0,5] dist({i},{j}) <= 1")
        cs = clusters(tasks, CommGraph(tasks))
        index = {a: k for k, c in enumerate(cs) for a in c.agents}
        covered = sorted(a for c in cs for a in c.agents)
        assert covered == list(tasks)
        for i, task in tasks.items():
            for j in task.participants(i):
                assert index[i] == index[j]


@given(st.permutations(list(range(1, 7))))
def test_cluster_partition_order_independent(order):
    texts = {
        1: "F[0,5] dist(1,2) <= 1",
        2: "F[0,5] dist(2,[0,0]) <= 1",
        3: "F[0,5] dist(3,4) <= 1",
        4: "F[0,5] dist(4,[1,1]) <= 1",
        5: "true",
        6: "F[0,5] dist(6,[2,2]) <= 1",
    }
    tasks = {i: parse_task(texts[i]) for i in order}
    cs = clusters(tasks, CommGraph(tasks))
    assert [c.agents for c in cs] == [(1, 2), (3, 4), (5,), (6,)]


def test_union_find_basic():
    uf = UnionFind([1, 2, 3])
    uf.union(1, 3)
    assert uf.find(1) == uf.find(3) != uf.find(2)
    assert uf.groups() == [frozenset({1, 3}), frozenset({2})]


UNIT_F = PhiFormula("F", 5.0, 10.0, parse_task("F[5,10] dist(4,5) <= 1").units[0].psi)


def test_timing_all_free():
    assert stage2_timing_ok(4, UNIT_F, [4, 5], {5: -1}, {5: None})


def test_timing_busy_participant_with_later_deadline():
    unit5 = parse_task("F[5,15] dist(5,[0,0]) <= 1").units[0]
    assert stage2_timing_ok(4, UNIT_F, [4, 5], {5: 0}, {5: unit5})
    # equal deadlines fail the strict inequality
    unit5b = parse_task("F[5,10] dist(5,[0,0]) <= 1").units[0]
    assert not stage2_timing_ok(4, UNIT_F, [4, 5], {5: 0}, {5: unit5b})


def test_timing_always_uses_window_start():
    unit5 = parse_task("G[12,20] dist(5,[0,0]) <= 1").units[0]
    assert stage2_timing_ok(4, UNIT_F, [4, 5], {5: 0}, {5: unit5})
    unit5b = parse_task("G[8,20] dist(5,[0,0]) <= 1").units[0]
    assert not stage2_timing_ok(4, UNIT_F, [4, 5], {5: 0}, {5: unit5b})


def test_timing_collaborating_elsewhere_blocks():
    assert not stage2_timing_ok(4, UNIT_F, [4, 5], {5: 3}, {5: None})
