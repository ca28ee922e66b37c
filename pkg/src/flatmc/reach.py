"""Reachability decision procedures for one-counter machines.

The central solver decides, for a unary machine with parameterized tests,
whether a target state is reachable under some bounded parameter
instantiation. It realizes the guess-and-verify structure of the underlying
NP procedure deterministically: enumerate candidate parameter values, split
the counter range into levels at those values, and search a graph whose nodes
are (state, level) pairs. Edges within a level are single value-preserving
steps; edges between levels are runs through the open interval separating
them, checked on a machine whose tests have been resolved for that interval.

Every positive answer ships a concrete run that is re-validated before it is
returned.
"""

from __future__ import annotations

import itertools
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import Optional

from flatmc.machines import (
    ClassMismatch,
    Config,
    ConstTest,
    CounterMachine,
    Gamma,
    LassoRun,
    MachineClass,
    MachineError,
    ParamTest,
    Run,
    Update,
    classify,
    fresh_name,
    rep_reach_oracle,
    successors,
    validate_run,
)

# Multiplier for derived counter caps; validated against the oracles in tests.
DEFAULT_MULTIPLIER = 8


def default_bound(machine: CounterMachine, multiplier: int = DEFAULT_MULTIPLIER) -> int:
    """A heuristic default for parameter bounds and counter caps:
    |Q|^3 * (|X| + 2) * multiplier. This is a practical default, not the
    theoretical worst-case bound, whose constants are unspecified."""
    return (len(machine.states) ** 3) * (len(machine.params) + 2) * multiplier


def _require_unary_zero_tests(machine: CounterMachine, who: str) -> None:
    for t in machine.transitions:
        if isinstance(t.op, Update) and abs(t.op.delta) > 1:
            raise ClassMismatch(f"{who} requires unary updates, got {t}")
        if isinstance(t.op, ConstTest) and t.op != ConstTest("=", 0):
            raise ClassMismatch(
                f"{who} requires constants to be folded first, got {t}")


def _require_plain_oca(machine: CounterMachine, who: str) -> None:
    if classify(machine) is not MachineClass.OCA:
        raise ClassMismatch(f"{who} requires a plain OCA, got "
                            f"{classify(machine).value}")


# ---------------------------------------------------------------------------
# Interval-restricted run checks
# ---------------------------------------------------------------------------

def _interval_search(machine: CounterMachine, start: Config, goal: Config,
                     lo: int, hi: int, strict: bool) -> Optional[Run]:
    """A shortest run from `start` to `goal` whose intermediate configurations
    all have values strictly between lo and hi. With `strict`, at least one
    intermediate configuration is required."""
    if not strict and start == goal:
        return Run((start,), ())
    parents: dict[Config, tuple[Config, int]] = {}
    seen = {start}
    queue = deque([start])

    def rebuild(end: Config, step: int, prev: Config) -> Run:
        configs = [prev]
        steps = []
        while configs[-1] != start:
            before, via = parents[configs[-1]]
            configs.append(before)
            steps.append(via)
        configs.reverse()
        steps.reverse()
        return Run(tuple(configs) + (end,), tuple(steps) + (step,))

    while queue:
        here = queue.popleft()
        for step, there in successors(machine, {}, here):
            if there == goal and (not strict or here != start):
                return rebuild(there, step, here)
            if lo < there.value < hi and there not in seen:
                seen.add(there)
                parents[there] = (here, step)
                queue.append(there)
    return None


def interval_run(machine: CounterMachine, source: str, target: str,
                 v_start: int, v_end: int) -> bool:
    """Is there a run from (source, v_start) to (target, v_end) whose
    intermediate counter values lie strictly between the two endpoint values?
    A single configuration counts when source == target and v_start == v_end.
    """
    _require_plain_oca(machine, "interval_run")
    lo, hi = min(v_start, v_end), max(v_start, v_end)
    return _interval_search(machine, Config(source, v_start),
                            Config(target, v_end), lo, hi, strict=False) is not None


def interval_return(machine: CounterMachine, source: str, target: str,
                    v_start: int, v_other: int) -> bool:
    """Like interval_run, but the run ends back at value v_start; v_other only
    bounds the excursion."""
    _require_plain_oca(machine, "interval_return")
    lo, hi = min(v_start, v_other), max(v_start, v_other)
    return _interval_search(machine, Config(source, v_start),
                            Config(target, v_start), lo, hi, strict=False) is not None


# ---------------------------------------------------------------------------
# Levels and test stripping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    """Strictly increasing counter values d_0 < d_1 < ... < d_{n+1} with
    d_0 = 0; the interior values d_1..d_n carry the parameters and the last
    value is the search ceiling."""
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise MachineError("a level set needs at least bottom and top")
        if self.values[0] != 0:
            raise MachineError("level sets start at 0")
        if any(a >= b for a, b in zip(self.values, self.values[1:])):
            raise MachineError("level values must be strictly increasing")

    @property
    def interior(self) -> tuple[int, ...]:
        return self.values[1:-1]

    @property
    def top(self) -> int:
        return self.values[-1]

    def segments(self) -> int:
        """Number of open intervals between consecutive levels."""
        return len(self.values) - 1


@dataclass(frozen=True)
class StrippedMachine:
    """A test-free unary machine equivalent to the original inside one open
    interval between levels, with a map from its transition indices back to
    the original ones."""
    machine: CounterMachine
    origin: tuple[int, ...]


def strip_tests(machine: CounterMachine, segment: int, levels: LevelSet,
                assignment: Mapping[str, int]) -> StrippedMachine:
    """Resolve all tests of `machine` for runs inside the open interval
    between levels `segment` and `segment + 1`.

    Parameters are identified with the interior levels through `assignment`,
    which must map them bijectively onto levels d_1..d_n. Inside the interval,
    zero tests and equality tests can never fire and are dropped, as are
    inequality tests that are false throughout; inequality tests that hold
    throughout become 0-updates. Counter updates are kept unchanged.
    """
    _require_unary_zero_tests(machine, "strip_tests")
    if not 0 <= segment < levels.segments():
        raise MachineError(f"segment {segment} out of range")
    interior = levels.interior
    level_index: dict[str, int] = {}
    seen_levels = set()
    for x in machine.params:
        if x not in assignment:
            raise MachineError(f"assignment missing parameter {x!r}")
        value = assignment[x]
        if value not in interior or value in seen_levels:
            raise MachineError(
                "assignment does not identify parameters bijectively with levels")
        seen_levels.add(value)
        level_index[x] = interior.index(value) + 1
    if len(seen_levels) != len(interior):
        raise MachineError(
            "assignment does not identify parameters bijectively with levels")
    kept: list[tuple[str, Update, str]] = []
    origin: list[int] = []
    for i, t in enumerate(machine.transitions):
        op = t.op
        if isinstance(op, Update):
            kept.append((t.source, op, t.target))
            origin.append(i)
        elif isinstance(op, ConstTest):
            continue  # only =0 here, which never fires strictly inside
        else:
            j = level_index[op.param]
            if op.rel == "=":
                continue
            holds_inside = (j <= segment) if op.rel == ">" else (j >= segment + 1)
            if holds_inside:
                kept.append((t.source, Update(0), t.target))
                origin.append(i)
    stripped = CounterMachine.build(
        kept, initial=machine.initial, params=(), labels=machine.labels,
        extra_states=machine.states)
    return StrippedMachine(stripped, tuple(origin))


# ---------------------------------------------------------------------------
# Constant folding
# ---------------------------------------------------------------------------

def fold_constants(machine: CounterMachine) -> tuple[CounterMachine, dict[str, int]]:
    """Replace every constant test other than =0 by a test against a fresh
    parameter pinned to that constant. The result is of class OCA(P) when the
    input had unary updates; pinned parameters are honored by parametric_reach
    (fixed, not enumerated)."""
    consts = sorted({t.op.const for t in machine.transitions
                     if isinstance(t.op, ConstTest) and t.op != ConstTest("=", 0)})
    if not consts:
        return machine, {}
    taken = set(machine.params)
    pinned: dict[str, int] = {}
    name_of: dict[int, str] = {}
    for c in consts:
        name = fresh_name(f"xc{c}", taken)
        taken.add(name)
        name_of[c] = name
        pinned[name] = c
    triples = []
    for t in machine.transitions:
        if isinstance(t.op, ConstTest) and t.op != ConstTest("=", 0):
            triples.append((t.source, ParamTest(t.op.rel, name_of[t.op.const]),
                            t.target))
        else:
            triples.append((t.source, t.op, t.target))
    folded = CounterMachine.build(
        triples, initial=machine.initial,
        params=tuple(machine.params) + tuple(name_of[c] for c in consts),
        labels=machine.labels, extra_states=machine.states)
    return folded, pinned


# ---------------------------------------------------------------------------
# The level-decomposition reachability solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachWitness:
    """A parameter instantiation together with a concrete run that starts at
    (initial, 0) and ends in the target state; independently re-checkable."""
    gamma: dict[str, int]
    run: Run


def enumerate_gammas(params, ranges: Mapping[str, tuple[int, int]]):
    """All instantiations of `params` within the given inclusive ranges,
    ordered by smallest maximum value first, then by sorted value tuple, then
    positionally. The first witness found under this order is the one
    reported."""
    names = list(params)
    spaces = [range(ranges[x][0], ranges[x][1] + 1) for x in names]
    tuples = sorted(itertools.product(*spaces),
                    key=lambda vs: (max(vs, default=0), tuple(sorted(vs)), vs))
    for vs in tuples:
        yield dict(zip(names, vs))


def parametric_reach(machine: CounterMachine, target: str, bound: int,
                     pinned: Optional[Mapping[str, int]] = None,
                     bounds: Optional[Mapping[str, int]] = None,
                     ceiling: Optional[int] = None) -> Optional[ReachWitness]:
    """Decide whether `target` is reachable for some instantiation with all
    free parameter values <= bound (per-parameter overrides via `bounds`,
    fixed values via `pinned`). Absence is relative to the bound.

    The machine must have unary updates and only =0 constant tests; run
    fold_constants first otherwise. Counter values are explored up to
    `ceiling`, defaulting to max(bound, pinned values) + |Q|^3.
    """
    _require_unary_zero_tests(machine, "parametric_reach")
    if target not in machine.states:
        raise MachineError(f"target {target!r} not in machine")
    if bound < 0:
        raise MachineError("bound must be non-negative")
    pinned = dict(pinned or {})
    bounds = dict(bounds or {})
    for x in (*pinned, *bounds):
        if x not in machine.params:
            raise MachineError(f"unknown parameter {x!r}")
    ranges: dict[str, tuple[int, int]] = {}
    for x in machine.params:
        if x in pinned:
            ranges[x] = (pinned[x], pinned[x])
        else:
            ranges[x] = (0, bounds.get(x, bound))
    highest = max([bound, *pinned.values(), *bounds.values()], default=bound)
    top = ceiling if ceiling is not None else highest + len(machine.states) ** 3
    top = max(top, highest + 1)

    sink = fresh_name("sink", machine.states)
    extended = CounterMachine.build(
        [(t.source, t.op, t.target) for t in machine.transitions]
        + [(target, Update(0), sink), (sink, Update(-1), sink)],
        initial=machine.initial, params=machine.params,
        extra_states=machine.states)

    for gamma in enumerate_gammas(machine.params, ranges):
        run = _level_search(extended, gamma, target, sink, top)
        if run is None:
            continue
        cut = next(i for i, c in enumerate(run.configs) if c.state == sink)
        trimmed = Run(run.configs[:cut], run.steps[:cut - 1])
        defect = validate_run(machine, gamma, trimmed)
        if defect is not None or trimmed.configs[-1].state != target:
            raise AssertionError(
                f"solver produced an invalid witness: {defect}")
        return ReachWitness(dict(gamma), trimmed)
    return None


def _level_search(machine: CounterMachine, gamma: Gamma, target: str,
                  sink: str, top: int) -> Optional[Run]:
    """Search for a run from (initial, 0) to (sink, 0) whose configurations
    touch the level values at the joints, with excursions strictly between
    adjacent levels in between."""
    level_values = sorted({0, top, *gamma.values()})
    levels = LevelSet(tuple(level_values))
    index_of = {v: i for i, v in enumerate(level_values)}

    stripped: dict[int, StrippedMachine] = {}

    def stripped_for(segment: int) -> StrippedMachine:
        if segment not in stripped:
            stripped[segment] = _strip_for_search(machine, segment, levels, gamma)
        return stripped[segment]

    # Macro nodes are (state, level value). Edges either stay on the level
    # (one value-preserving step of the real machine) or traverse one open
    # interval (a run of the stripped machine, mapped back).
    start = Config(machine.initial, 0)
    goal = Config(sink, 0)
    if start == goal:
        return Run((start,), ())
    parents: dict[Config, tuple[Config, tuple[Config, ...], tuple[int, ...]]] = {}
    seen = {start}
    queue = deque([start])

    def rebuild(end: Config) -> Run:
        chunks = []
        node = end
        while node != start:
            prev, configs, steps = parents[node]
            chunks.append((configs, steps))
            node = prev
        chunks.reverse()
        all_configs: list[Config] = [start]
        all_steps: list[int] = []
        for configs, steps in chunks:
            all_configs.extend(configs)
            all_steps.extend(steps)
        return Run(tuple(all_configs), tuple(all_steps))

    def offer(node: Config, prev: Config, configs, steps) -> Optional[Run]:
        if node == goal:
            parents[node] = (prev, tuple(configs), tuple(steps))
            return rebuild(node)
        if node not in seen:
            seen.add(node)
            parents[node] = (prev, tuple(configs), tuple(steps))
            queue.append(node)
        return None

    while queue:
        here = queue.popleft()
        idx = index_of[here.value]
        for step, conf in successors(machine, gamma, here):
            if conf.value != here.value:
                continue
            found = offer(conf, here, [conf], [step])
            if found is not None:
                return found
        for segment in (idx, idx - 1):
            if not 0 <= segment < levels.segments():
                continue
            lo, hi = level_values[segment], level_values[segment + 1]
            strip = stripped_for(segment)
            for exit_conf, run in _segment_exits(strip, here, lo, hi).items():
                mapped = [strip.origin[s] for s in run.steps]
                found = offer(exit_conf, here, run.configs[1:], mapped)
                if found is not None:
                    return found
    return None


def _strip_for_search(machine: CounterMachine, segment: int, levels: LevelSet,
                      gamma: Gamma) -> StrippedMachine:
    """strip_tests generalized for the solver: parameters sharing a value are
    merged into one level, and a parameter may sit on the bottom or top level.
    Inside the open interval between levels `segment` and `segment + 1`, a
    comparison with the level at index j is decided by j alone."""
    kept: list[tuple[str, Update, str]] = []
    origin: list[int] = []
    index_of = {v: j for j, v in enumerate(levels.values)}
    for i, t in enumerate(machine.transitions):
        op = t.op
        if isinstance(op, Update):
            kept.append((t.source, op, t.target))
            origin.append(i)
        elif isinstance(op, ConstTest):
            continue  # only =0 here; 0 is a level, never strictly inside
        else:
            if op.rel == "=":
                continue  # interior values never equal a level value
            j = index_of[gamma[op.param]]
            holds_inside = (j <= segment) if op.rel == ">" else (j >= segment + 1)
            if holds_inside:
                kept.append((t.source, Update(0), t.target))
                origin.append(i)
    strippedm = CounterMachine.build(kept, initial=machine.initial, params=(),
                                     extra_states=machine.states)
    return StrippedMachine(strippedm, tuple(origin))


def _segment_exits(strip: StrippedMachine, start: Config, lo: int,
                   hi: int) -> dict[Config, Run]:
    """Shortest runs of the stripped machine from `start` through the open
    interval (lo, hi) to each reachable configuration back on a boundary
    value. Exits to the start's own value require at least one interior
    configuration (value-preserving steps on the level are handled by the
    caller); exits to the opposite boundary may be direct."""
    machine = strip.machine
    exits: dict[Config, Run] = {}
    parents: dict[Config, tuple[Config, int]] = {}
    seen = {start}
    queue = deque([start])

    def rebuild(prev: Config, step: int, end: Config) -> Run:
        configs = [prev]
        steps = []
        while configs[-1] != start:
            before, via = parents[configs[-1]]
            configs.append(before)
            steps.append(via)
        configs.reverse()
        steps.reverse()
        return Run(tuple(configs) + (end,), tuple(steps) + (step,))

    while queue:
        here = queue.popleft()
        for step, there in successors(machine, {}, here):
            if there.value in (lo, hi):
                if here == start and there.value == start.value:
                    continue
                if there not in exits:
                    exits[there] = rebuild(here, step, there)
            elif lo < there.value < hi and there not in seen:
                seen.add(there)
                parents[there] = (here, step)
                queue.append(there)
    return exits


# ---------------------------------------------------------------------------
# Repeated reachability for test-free machines
# ---------------------------------------------------------------------------

def plain_rep_lasso(machine: CounterMachine, start: str, good: str,
                    cap: Optional[int] = None) -> Optional[LassoRun]:
    """A lasso witnessing an infinite run from (start, 0) that visits `good`
    infinitely often, for machines without any tests. None if there is none
    within the counter cap (default 8 * |Q|^3)."""
    for t in machine.transitions:
        if not isinstance(t.op, Update):
            raise ClassMismatch(
                f"plain_rep_lasso requires a test-free machine, got {t}")
    if start not in machine.states or good not in machine.states:
        raise MachineError("unknown state")
    if cap is None:
        cap = DEFAULT_MULTIPLIER * len(machine.states) ** 3
    rebased = replace(machine, initial=start)
    return rep_reach_oracle(rebased, {}, [good], cap)


def plain_rep_reach(machine: CounterMachine, start: str, good: str,
                    cap: Optional[int] = None) -> bool:
    return plain_rep_lasso(machine, start, good, cap) is not None
