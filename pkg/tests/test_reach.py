"""Tests for interval-run checks, test stripping, constant folding, and the
level-decomposition reachability solver."""

from __future__ import annotations

import random

import pytest

from flatmc.machines import (
    ClassMismatch,
    Config,
    CounterMachine,
    MachineError,
    Update,
    validate_run,
)
from flatmc.reach import (
    LevelSet,
    default_bound,
    enumerate_gammas,
    fold_constants,
    interval_return,
    interval_run,
    parametric_reach,
    strip_tests,
    plain_rep_reach,
)
from tests.gen import all_gammas, random_machine, random_oca
from tests.oracles import gamma_reach_oracle, interval_run_oracle


class TestIntervalRun:
    def test_empty_run(self):
        m = CounterMachine.build([], initial="a")
        assert interval_run(m, "a", "a", 2, 2)
        assert not interval_run(m, "a", "a", 2, 3)

    def test_strictly_inside_path(self):
        m = CounterMachine.build([("a", "+1", "a"), ("a", "+1", "b")], initial="a")
        assert interval_run(m, "a", "b", 0, 3)

    def test_final_step_must_change_value(self):
        # The step into b keeps the value, so the pre-final configuration
        # would sit on the upper boundary; no such run exists.
        m = CounterMachine.build([("a", "+1", "a"), ("a", "0", "b")], initial="a")
        assert not interval_run(m, "a", "b", 0, 3)

    def test_return_via_direct_step(self):
        m = CounterMachine.build(
            [("a", "+1", "a"), ("a", "-1", "a"), ("a", "0", "b")], initial="a")
        assert interval_return(m, "a", "b", 0, 2)

    def test_return_with_no_transitions(self):
        m = CounterMachine.build([], initial="a", extra_states=["b"])
        assert not interval_return(m, "a", "b", 0, 5)

    def test_rejects_parametric_machines(self):
        m = CounterMachine.build([("a", "=x:x", "a")], initial="a", params=["x"])
        with pytest.raises(ClassMismatch):
            interval_run(m, "a", "a", 0, 1)

    def test_agrees_with_enumeration_oracle(self):
        rng = random.Random(1337)
        for _ in range(40):
            m = random_oca(rng, max_states=5)
            states = sorted(m.states)
            for _ in range(30):
                q, q2 = rng.choice(states), rng.choice(states)
                v, v2 = rng.randint(0, 8), rng.randint(0, 8)
                assert interval_run(m, q, q2, v, v2) == \
                    interval_run_oracle(m, q, q2, v, v2, v2)
                assert interval_return(m, q, q2, v, v2) == \
                    interval_run_oracle(m, q, q2, v, v2, v)


class TestLevelSet:
    def test_must_start_at_zero(self):
        with pytest.raises(MachineError):
            LevelSet((1, 2))

    def test_must_increase(self):
        with pytest.raises(MachineError):
            LevelSet((0, 2, 2))

    def test_interior(self):
        assert LevelSet((0, 2, 5, 9)).interior == (2, 5)


class TestStripTests:
    def test_updates_only_unchanged(self):
        m = CounterMachine.build([("a", "+1", "b"), ("b", "-1", "a")], initial="a")
        stripped = strip_tests(m, 0, LevelSet((0, 4)), {})
        assert stripped.machine.transitions == m.transitions
        assert stripped.origin == (0, 1)

    def test_below_test_becomes_zero_update(self):
        m = CounterMachine.build([("q", "<x:x1", "q2")], initial="q", params=["x1"])
        stripped = strip_tests(m, 0, LevelSet((0, 3, 7)), {"x1": 3})
        assert stripped.machine.transitions[0].op == Update(0)
        assert stripped.origin == (0,)

    def test_equality_test_removed(self):
        m = CounterMachine.build([("q", "=x:x1", "q2")], initial="q", params=["x1"])
        for segment in (0, 1):
            stripped = strip_tests(m, segment, LevelSet((0, 3, 7)), {"x1": 3})
            assert stripped.machine.transitions == ()

    def test_case_table(self):
        m = CounterMachine.build(
            [("q", ">x:x1", "a"), ("q", "<x:x1", "b"),
             ("q", ">x:x2", "c"), ("q", "<x:x2", "d"), ("q", "=0", "e")],
            initial="q", params=["x1", "x2"])
        levels = LevelSet((0, 2, 5, 9))
        gamma = {"x1": 2, "x2": 5}
        # Inside (2, 5): >x1 and <x2 hold throughout, the others never.
        stripped = strip_tests(m, 1, levels, gamma)
        assert stripped.origin == (0, 3)
        assert all(t.op == Update(0) for t in stripped.machine.transitions)

    def test_rejects_non_bijective_assignment(self):
        m = CounterMachine.build([("q", ">x:x1", "a")], initial="q",
                                 params=["x1", "x2"])
        with pytest.raises(MachineError):
            strip_tests(m, 0, LevelSet((0, 3, 7)), {"x1": 3, "x2": 3})

    def test_stripped_runs_match_direct_interval_search(self):
        # A run through one open interval exists in the stripped machine iff
        # the original machine has a level-avoiding run there under the
        # instantiation identifying parameters with levels. Same-value
        # crossings are compared with at least one interior configuration,
        # since value-preserving steps on a level are not interval business.
        from collections import deque

        from flatmc.machines import successors
        from flatmc.reach import _interval_search

        def direct(machine, gamma, start, goal, lo, hi, strict):
            if not strict and start == goal:
                return True
            seen = {start}
            queue = deque([start])
            while queue:
                here = queue.popleft()
                for _i, there in successors(machine, gamma, here):
                    if there == goal and not (strict and here == start):
                        return True
                    if lo < there.value < hi and there not in seen:
                        seen.add(there)
                        queue.append(there)
            return False

        rng = random.Random(555)
        tried = 0
        for _ in range(80):
            m = random_machine(rng, max_states=4, max_params=2)
            if not m.params:
                continue
            values = sorted(rng.sample(range(1, 8), len(m.params)))
            gamma = dict(zip(m.params, values))
            top = values[-1] + rng.randint(1, 4)
            levels = LevelSet((0, *values, top))
            segment = rng.randrange(levels.segments())
            lo, hi = levels.values[segment], levels.values[segment + 1]
            stripped = strip_tests(m, segment, levels, gamma)
            states = sorted(m.states)
            for _ in range(8):
                q, q2 = rng.choice(states), rng.choice(states)
                for v_start, v_goal in ((lo, hi), (hi, lo)):
                    got = _interval_search(
                        stripped.machine, Config(q, v_start),
                        Config(q2, v_goal), lo, hi, strict=False) is not None
                    want = direct(m, gamma, Config(q, v_start),
                                  Config(q2, v_goal), lo, hi, strict=False)
                    assert got == want
                for v in (lo, hi):
                    got = _interval_search(
                        stripped.machine, Config(q, v), Config(q2, v),
                        lo, hi, strict=True) is not None
                    want = direct(m, gamma, Config(q, v), Config(q2, v),
                                  lo, hi, strict=True)
                    assert got == want
                tried += 1
        assert tried >= 100


class TestFoldConstants:
    def test_zero_test_machine_unchanged(self):
        m = CounterMachine.build([("q", "=0", "q"), ("q", "+1", "q")], initial="q")
        folded, pinned = fold_constants(m)
        assert folded is m and pinned == {}

    def test_single_constant(self):
        m = CounterMachine.build([("q", "=c:5", "q2")], initial="q")
        folded, pinned = fold_constants(m)
        assert pinned == {"xc5": 5}
        op = folded.transitions[0].op
        assert op.rel == "=" and op.param == "xc5"

    def test_shared_constant(self):
        m = CounterMachine.build([("q", "=c:5", "a"), ("q", ">c:5", "b")],
                                 initial="q")
        folded, pinned = fold_constants(m)
        assert list(pinned.values()) == [5]
        names = {t.op.param for t in folded.transitions}
        assert len(names) == 1

    def test_solver_equivalence_with_pinning(self):
        m = CounterMachine.build(
            [("q", "+1", "q"), ("q", "=c:2", "win")], initial="q")
        folded, pinned = fold_constants(m)
        w = parametric_reach(folded, "win", 4, pinned=pinned)
        assert w is not None and w.gamma[next(iter(pinned))] == 2


class TestDefaultBound:
    def test_formula(self):
        m = CounterMachine.build([], initial="q")
        assert default_bound(m) == 16

    def test_with_params(self):
        m = CounterMachine.build([("a", "=x:x", "b")], initial="a", params=["x"])
        assert default_bound(m, multiplier=1) == 8 * 3

    def test_monotone_in_states(self):
        small = CounterMachine.build([("a", "+1", "b")], initial="a")
        big = CounterMachine.build([("a", "+1", "b"), ("b", "+1", "c")],
                                   initial="a")
        assert default_bound(big) >= default_bound(small)


class TestEnumerationOrder:
    def test_smallest_maximum_first(self):
        order = list(enumerate_gammas(["x", "y"], {"x": (0, 2), "y": (0, 2)}))
        assert order[0] == {"x": 0, "y": 0}
        maxes = [max(g.values()) for g in order]
        assert maxes == sorted(maxes)


class TestParametricReach:
    def test_climb_to_smallest_gamma(self):
        m = CounterMachine.build([("q", "+1", "q"), ("q", "=x:x", "q2")],
                                 initial="q", params=["x"])
        w = parametric_reach(m, "q2", 3)
        assert w is not None
        assert w.gamma == {"x": 0}
        assert len(w.run) == 1

    def test_unsatisfiable(self):
        m = CounterMachine.build([("q", ">x:x", "q2")], initial="q", params=["x"])
        assert parametric_reach(m, "q2", 4) is None

    def test_target_is_initial(self):
        m = CounterMachine.build([("q", "+1", "q")], initial="q", params=[])
        w = parametric_reach(m, "q", 4)
        assert w is not None and len(w.run) == 0

    def test_rejects_unfolded_constants(self):
        m = CounterMachine.build([("q", "=c:2", "q2")], initial="q")
        with pytest.raises(ClassMismatch):
            parametric_reach(m, "q2", 4)

    def test_rejects_succinct_updates(self):
        m = CounterMachine.build([("q", "+3", "q2")], initial="q")
        with pytest.raises(ClassMismatch):
            parametric_reach(m, "q2", 4)

    def test_needs_distinct_levels(self):
        # q2 requires the counter strictly between the two parameters.
        m = CounterMachine.build(
            [("q", "+1", "q"), ("q", ">x:a", "p1"), ("p1", "<x:b", "q2")],
            initial="q", params=["a", "b"])
        w = parametric_reach(m, "q2", 3)
        assert w is not None
        assert w.gamma["a"] < w.gamma["b"]

    def test_witnesses_validate_and_hit_target(self):
        rng = random.Random(808)
        hits = 0
        for _ in range(60):
            m = random_machine(rng, max_states=4, max_params=2)
            target = rng.choice(sorted(m.states))
            w = parametric_reach(m, target, 3)
            if w is None:
                continue
            hits += 1
            assert w.run.configs[0] == Config(m.initial, 0)
            assert w.run.configs[-1].state == target
            assert validate_run(m, w.gamma, w.run) is None
        assert hits >= 20

    def test_matches_gamma_enumeration_oracle(self):
        rng = random.Random(909)
        bound = 3
        for _ in range(60):
            m = random_machine(rng, max_states=4, max_params=2)
            target = rng.choice(sorted(m.states))
            cap = bound + len(m.states) ** 3
            expected = gamma_reach_oracle(m, target, cap,
                                          all_gammas(m.params, bound))
            assert (parametric_reach(m, target, bound) is not None) == expected

    def test_parameter_renaming_invariance(self):
        rng = random.Random(111)
        for _ in range(30):
            m = random_machine(rng, max_states=4, max_params=2)
            if not m.params:
                continue
            target = rng.choice(sorted(m.states))
            renamed = {x: f"z{i}" for i, x in enumerate(reversed(m.params))}
            triples = []
            for t in m.transitions:
                op = t.op
                if hasattr(op, "param"):
                    op = type(op)(op.rel, renamed[op.param])
                triples.append((t.source, op, t.target))
            m2 = CounterMachine.build(
                triples, initial=m.initial,
                params=[renamed[x] for x in m.params], labels=m.labels,
                extra_states=m.states)
            a = parametric_reach(m, target, 3)
            b = parametric_reach(m2, target, 3)
            assert (a is None) == (b is None)

    def test_values_stay_below_search_ceiling(self):
        rng = random.Random(222)
        for _ in range(30):
            m = random_machine(rng, max_states=3, max_params=1)
            target = rng.choice(sorted(m.states))
            w = parametric_reach(m, target, 2)
            if w is None:
                continue
            ceiling = 2 + len(m.states) ** 3
            assert all(c.value <= ceiling for c in w.run.configs)


class TestPlainRepReach:
    def test_zero_loop(self):
        m = CounterMachine.build([("good", "0", "good")], initial="good")
        assert plain_rep_reach(m, "good", "good")

    def test_decrement_only(self):
        m = CounterMachine.build([("t", "-1", "t")], initial="t")
        assert not plain_rep_reach(m, "t", "t")

    def test_round_trip_loop(self):
        m = CounterMachine.build(
            [("t", "+1", "t"), ("t", "0", "good"), ("good", "0", "t")],
            initial="t")
        assert plain_rep_reach(m, "t", "good", cap=4)

    def test_rejects_tests(self):
        m = CounterMachine.build([("t", "=0", "t")], initial="t")
        with pytest.raises(ClassMismatch):
            plain_rep_reach(m, "t", "t")

    def test_agrees_with_core_oracle(self):
        from flatmc.machines import rep_reach_oracle
        rng = random.Random(606)
        for _ in range(40):
            states = [f"s{i}" for i in range(rng.randint(1, 4))]
            triples = [(rng.choice(states), rng.choice(["+1", "-1", "0"]),
                        rng.choice(states))
                       for _ in range(rng.randint(1, 6))]
            m = CounterMachine.build(triples, initial=states[0],
                                     extra_states=states)
            start = rng.choice(states)
            good = rng.choice(states)
            rebased = CounterMachine.build(triples, initial=start,
                                           extra_states=states)
            expected = rep_reach_oracle(rebased, {}, [good], 12) is not None
            assert plain_rep_reach(m, start, good, cap=12) == expected
