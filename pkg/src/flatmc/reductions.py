"""Reductions chaining model checking down to parameterized reachability.

Repeated reachability reduces to plain reachability by storing a revisited
counter value in a fresh parameter (or, for runs whose counter diverges,
jumping to a state from which the test-stripped machine loops forever).
Model checking a flat sentence reduces to repeated reachability of a tableau
product whose registers become parameters. Machines with binary-encoded
updates reduce to unary ones by expanding each large update into a gadget
that emits a binary counting sequence, with the specification rewritten to
ignore the inserted positions and to enforce the counting.

Each construction keeps enough provenance to translate a witness of the
reduced problem back into a self-certifying witness of the original one.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional

from flatmc.formulas import (
    And,
    Formula,
    FormulaError,
    Freeze,
    LassoWord,
    Neg,
    Next,
    Or,
    Prop,
    RegTest,
    Release,
    Until,
    evaluate,
    flat_violation,
    globally,
    is_sentence,
    nnf,
    render,
    rename_registers,
    subformulas,
    true_formula,
)
from flatmc.machines import (
    ClassMismatch,
    Config,
    CounterMachine,
    LassoRun,
    MachineClass,
    MachineError,
    ParamTest,
    Run,
    Update,
    classify,
    fresh_name,
    successors,
    validate_lasso,
)
from flatmc.reach import (
    ReachWitness,
    fold_constants,
    parametric_reach,
    plain_rep_lasso,
)


# ---------------------------------------------------------------------------
# Repeated reachability to reachability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuchiInstance:
    machine: CounterMachine
    accepting: frozenset[str]


@dataclass(frozen=True)
class BuchiReduction:
    """The reachability instance equivalent to repeating `accept_state`, plus
    the provenance to translate a reachability witness back into a lasso."""
    machine: CounterMachine
    target: str
    source: CounterMachine
    accept_state: str
    y: str
    origin: Mapping[int, int]       # new machine transition -> source transition
    store_index: int                # index of the (accept, =y, store) transition
    chain_entries: frozenset[str]   # states with an infinite high run to accept
    stripped: CounterMachine        # the test-free divergence machine
    stripped_origin: tuple[int, ...]     # stripped transition -> source transition
    rep_cap: int


@dataclass(frozen=True)
class DivergenceContext:
    """Shared analysis of the test-free divergence machine: for each state,
    whether an infinite run from counter 0 visits a given state infinitely
    often. Computed once per machine and reused across accept states."""
    machine: CounterMachine
    origin: tuple[int, ...]
    cap: int
    component: Mapping[Config, int]
    cyclic: frozenset[int]
    reverse: Mapping[Config, tuple[Config, ...]]

    def loop_entries(self, accept_state: str) -> frozenset[str]:
        anchors = [Config(accept_state, v) for v in range(self.cap + 1)
                   if self.component.get(Config(accept_state, v)) in self.cyclic]
        reached = set(anchors)
        queue = deque(anchors)
        while queue:
            here = queue.popleft()
            for back in self.reverse.get(here, ()):
                if back not in reached:
                    reached.add(back)
                    queue.append(back)
        return frozenset(q for q in self.machine.states
                         if Config(q, 0) in reached)


def _strip_for_divergence(machine: CounterMachine):
    """Remove all tests an eventually-high run cannot take (=0, =x, <x) and
    replace >x by a free step; keep updates. Returns the test-free machine
    and its transition provenance."""
    triples = []
    origin = []
    for i, t in enumerate(machine.transitions):
        if isinstance(t.op, Update):
            triples.append((t.source, t.op, t.target))
            origin.append(i)
        elif isinstance(t.op, ParamTest) and t.op.rel == ">":
            triples.append((t.source, Update(0), t.target))
            origin.append(i)
    stripped = CounterMachine.build(triples, initial=machine.initial,
                                    extra_states=machine.states)
    return stripped, tuple(origin)


def divergence_context(machine: CounterMachine,
                       rep_cap: Optional[int] = None) -> DivergenceContext:
    """Analyze the test-free divergence machine of `machine` up to a counter
    cap: a configuration can be revisited (at the same or a higher value) iff
    it lies on a cycle of the configuration graph extended with downward
    edges (q, v+1) -> (q, v), which are sound because test-free runs can be
    replayed shifted upward."""
    stripped, origin = _strip_for_divergence(machine)
    if rep_cap is None:
        rep_cap = 8 * len(stripped.states) ** 3
    forward: dict[Config, list[Config]] = {}
    reverse: dict[Config, list[Config]] = {}
    for q in stripped.states:
        for v in range(rep_cap + 1):
            here = Config(q, v)
            outs = [c for _i, c in successors(stripped, {}, here)
                    if c.value <= rep_cap]
            if v > 0:
                outs.append(Config(q, v - 1))
            forward[here] = outs
            for there in outs:
                reverse.setdefault(there, []).append(here)
    component, cyclic = _cyclic_components(forward)
    return DivergenceContext(machine=stripped, origin=origin, cap=rep_cap,
                             component=component, cyclic=frozenset(cyclic),
                             reverse={c: tuple(cs) for c, cs in reverse.items()})


def _cyclic_components(forward: Mapping[Config, list]) -> tuple[dict, set]:
    """Iterative Tarjan: strongly connected components of the configuration
    graph, and the set of component ids containing a cycle."""
    index: dict[Config, int] = {}
    low: dict[Config, int] = {}
    on_stack: set[Config] = set()
    stack: list[Config] = []
    component: dict[Config, int] = {}
    sizes: dict[int, int] = {}
    counter = 0
    next_component = 0
    for root in forward:
        if root in index:
            continue
        work = [(root, iter(forward[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = counter
                    counter += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(forward[succ])))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                size = 0
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component[member] = next_component
                    size += 1
                    if member == node:
                        break
                sizes[next_component] = size
                next_component += 1
    cyclic = {cid for cid, size in sizes.items() if size > 1}
    for node, outs in forward.items():
        if node in outs:
            cyclic.add(component[node])
    return component, cyclic


def buchi_to_reach(machine: CounterMachine, accept_state: str,
                   rep_cap: Optional[int] = None,
                   context: Optional[DivergenceContext] = None) -> BuchiReduction:
    """Build a machine with a distinguished target state that is reachable iff
    `accept_state` can be visited infinitely often in `machine`.

    A fresh parameter y stores a counter value at a visit of the accept
    state; a copy of the machine then has to revisit it with the same value.
    For runs whose counter diverges, a chain of strict greater-than tests
    over every parameter lets the target be entered from any state that can
    loop forever through the accept state once all tests are dropped. With no
    parameters, a dummy one is added so the chain is nonempty.
    """
    if classify(machine) not in (MachineClass.OCA, MachineClass.OCA_P):
        raise ClassMismatch(
            "buchi_to_reach requires unary updates and zero tests only")
    if accept_state not in machine.states:
        raise MachineError(f"accepting state {accept_state!r} not in machine")

    if context is None:
        context = divergence_context(machine, rep_cap)
    stripped = context.machine
    stripped_origin = context.origin
    chain_entries = context.loop_entries(accept_state)

    taken = set(machine.states)
    hat = {}
    for q in sorted(machine.states):
        hat[q] = fresh_name(f"{q}_hat", taken)
        taken.add(hat[q])
    store = fresh_name("s", taken)
    taken.add(store)
    target = fresh_name("s_hat", taken)
    taken.add(target)

    params = list(machine.params)
    if not params:
        params.append(fresh_name("xdummy", ()))
    chain = []
    for i in range(1, len(params) + 1):
        chain.append(fresh_name(f"t{i}", taken))
        taken.add(chain[-1])
    y = fresh_name("y", params)

    triples: list = []
    origin: dict[int, int] = {}
    for i, t in enumerate(machine.transitions):
        origin[len(triples)] = i
        triples.append((t.source, t.op, t.target))
    store_index = len(triples)
    triples.append((accept_state, ParamTest("=", y), store))
    for i, t in enumerate(machine.transitions):
        if t.source == accept_state:
            origin[len(triples)] = i
            triples.append((store, t.op, hat[t.target]))
    for i, t in enumerate(machine.transitions):
        origin[len(triples)] = i
        triples.append((hat[t.source], t.op, hat[t.target]))
    triples.append((hat[accept_state], ParamTest("=", y), target))
    for t in sorted(chain_entries):
        triples.append((t, Update(0), chain[0]))
    for i, x in enumerate(params):
        triples.append((chain[i], ParamTest(">", x),
                        chain[i + 1] if i + 1 < len(chain) else target))

    built = CounterMachine.build(
        triples, initial=machine.initial,
        params=tuple(params) + (y,), labels=machine.labels,
        extra_states=set(machine.states) | set(hat.values()) | {store, target})
    return BuchiReduction(machine=built, target=target, source=machine,
                          accept_state=accept_state, y=y, origin=origin,
                          store_index=store_index, chain_entries=chain_entries,
                          stripped=stripped, stripped_origin=stripped_origin,
                          rep_cap=context.cap)


def buchi_witness_to_lasso(reduction: BuchiReduction,
                           witness: ReachWitness) -> tuple[dict, LassoRun]:
    """Translate a reachability witness for the reduced machine into an
    instantiation of the source parameters and a lasso of the source machine
    in which the loop starts at the accept state."""
    source = reduction.source
    run = witness.run
    gamma = {x: v for x, v in witness.gamma.items() if x in source.params}
    if not run.steps:
        raise MachineError("a run reaching the fresh target cannot be empty")
    last = reduction.machine.transitions[run.steps[-1]]
    if last.op == ParamTest("=", reduction.y):
        # Same-value case: the run stored a counter value at the accept state
        # and revisited it in the copy; replay the copy part in the source.
        k = run.steps.index(reduction.store_index)
        configs = list(run.configs[:k + 1])
        steps = list(run.steps[:k])
        for i in range(k + 1, len(run.steps) - 1):
            step = run.steps[i]
            t = source.transitions[reduction.origin[step]]
            steps.append(reduction.origin[step])
            configs.append(Config(t.target, run.configs[i + 1].value))
        lasso = LassoRun(tuple(configs), tuple(steps), loop_start=k)
    else:
        # Divergence case: the run ends with the free step into the test
        # chain and one strict test per parameter; splice in a loop of the
        # test-free machine, shifted up to the chain entry value.
        chain_len = len(reduction.machine.params)  # chain params plus the 0-step
        cut = len(run.steps) - chain_len
        anchor = run.configs[cut]
        base = None
        cap = reduction.rep_cap
        for _ in range(3):
            base = plain_rep_lasso(reduction.stripped, anchor.state,
                                   reduction.accept_state, cap=cap)
            if base is not None:
                break
            cap *= 4
        if base is None:
            raise AssertionError(
                f"no divergence loop from {anchor.state!r} despite chain entry")
        shift = anchor.value
        configs = run.configs[:cut + 1] + tuple(
            Config(c.state, c.value + shift) for c in base.configs[1:])
        steps = run.steps[:cut] + tuple(
            reduction.stripped_origin[s] for s in base.steps)
        lasso = LassoRun(configs, steps, loop_start=cut + base.loop_start)
    defect = validate_lasso(source, gamma, lasso)
    if defect is not None:
        raise AssertionError(f"witness translation broke: {defect.reason}")
    if lasso.configs[lasso.loop_start].state != reduction.accept_state:
        # The divergence loop may visit the accept state mid-loop only; the
        # stored loops are anchored there, so this indicates a bug.
        raise AssertionError("translated loop does not start at the accept state")
    return gamma, lasso


# ---------------------------------------------------------------------------
# Flat sentences to repeated reachability (tableau product)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McReduction:
    """The product of a machine and the tableau of a flat sentence: some
    accepting state repeats under some instantiation of the register
    parameters iff some run of the source satisfies the sentence."""
    instance: BuchiInstance
    source: CounterMachine
    formula: Formula                 # renamed normal form actually encoded
    step_origin: Mapping[int, int]   # product transition -> source transition


def _require_flat_sentence(phi: Formula) -> None:
    violation = flat_violation(phi)
    if violation is not None:
        offending, polarity = violation
        raise FormulaError(
            f"not flat: freeze under {polarity} occurrence of "
            f"{render(offending)}")
    if not is_sentence(phi):
        raise FormulaError("not a sentence: a register test is unbound")


def _saturate(requirements, labels: frozenset) -> list[frozenset]:
    """All downward-saturated extensions of a requirement set that are
    consistent with a position carrying exactly `labels`, built by splitting
    disjunctive members: a disjunction admits either disjunct, an until is
    either fulfilled now or kept pending, a release either releases now or
    stays armed. Branches choosing a proposition literal the labels refute
    are pruned. Deterministic order."""
    results: list[frozenset] = []
    seen: set[frozenset] = set()

    def admissible(f: Formula) -> bool:
        if isinstance(f, Prop):
            return f.name in labels
        if isinstance(f, Neg):
            return f.body.name not in labels
        return True

    def go(todo: tuple, have: frozenset) -> None:
        while todo:
            f, todo = todo[0], todo[1:]
            if f in have:
                continue
            if not admissible(f):
                return
            have = have | {f}
            if isinstance(f, (Prop, Neg, RegTest, Next)):
                continue
            if isinstance(f, And):
                todo = (f.left, f.right) + todo
            elif isinstance(f, Freeze):
                todo = (f.body,) + todo
            elif isinstance(f, Or):
                go((f.left,) + todo, have)
                go((f.right,) + todo, have)
                return
            elif isinstance(f, Until):
                go((f.right,) + todo, have)
                go((f.left,) + todo, have)
                return
            else:  # Release
                go((f.right, f.left) + todo, have)
                go((f.right,) + todo, have)
                return
        if have not in seen:
            seen.add(have)
            results.append(have)

    go(tuple(requirements), frozenset())
    return results


def _next_requirements(atom) -> frozenset:
    """What the successor position owes: bodies of next-formulas, plus every
    until not fulfilled here and every release not yet released."""
    out = set()
    for f in atom:
        if isinstance(f, Next):
            out.add(f.body)
        elif isinstance(f, Until) and f.right not in atom:
            out.add(f)
        elif isinstance(f, Release) and f.left not in atom:
            out.add(f)
    return frozenset(out)


def _obligations(atom):
    """The parameter tests a product state fires while sitting on one
    position: one equality per freeze chosen in the atom, one comparison per
    register-test literal. Deterministic order."""
    tests = []
    for f in sorted((f for f in atom if isinstance(f, Freeze)),
                    key=lambda f: f.reg):
        tests.append(ParamTest("=", f.reg))
    for f in sorted((f for f in atom if isinstance(f, RegTest)),
                    key=lambda f: (f.reg, f.rel)):
        tests.append(ParamTest(f.rel, f.reg))
    return tests


def flat_mc_to_buchi(machine: CounterMachine, phi: Formula) -> McReduction:
    """Product construction: machine states paired with tableau positions of
    the sentence, each pair expanded into a chain of parameter tests (the
    frozen registers and register tests committed to at this position),
    followed by the machine's own transitions into successor pairs. One
    generalized Buechi set per until, degeneralized by a round-robin counter.

    Atoms that agree on their forwarded obligations and their fired tests
    behave identically, so product states carry only that signature. An until
    is pending exactly when it is forwarded, which is what the fairness sets
    observe.

    Registers are renamed apart first; flatness guarantees each is frozen at
    most once along a run, so a register is faithfully represented by one
    parameter.
    """
    if classify(machine) is not MachineClass.OCA:
        raise ClassMismatch("flat_mc_to_buchi requires a plain OCA")
    _require_flat_sentence(phi)
    renamed = rename_registers(nnf(phi))
    untils = []
    for f in subformulas(renamed):
        if isinstance(f, Until) and f not in untils:
            untils.append(f)
    k = len(untils)

    signatures: dict = {}

    def expansions(requirements: frozenset, state: str) -> list[tuple]:
        """Deduplicated (forwarded obligations, tests) signatures of the
        saturated extensions of `requirements` at a state with the given
        labels."""
        key = (requirements, state)
        got = signatures.get(key)
        if got is None:
            got = []
            seen = set()
            for atom in _saturate(requirements, machine.labels[state]):
                sig = (_next_requirements(atom), tuple(_obligations(atom)))
                if sig not in seen:
                    seen.add(sig)
                    got.append(sig)
            signatures[key] = got
        return got

    def advance(owed: frozenset, index: int) -> int:
        if k == 0:
            return 0
        return index % k + 1 if untils[index - 1] not in owed else index

    entry: dict[tuple, str] = {}
    accepting: set[str] = set()
    triples: list = []
    step_origin: dict[int, int] = {}
    worklist: list[tuple] = []

    def entry_state(macro) -> str:
        got = entry.get(macro)
        if got is None:
            q, (owed, _tests), index = macro
            got = f"n{len(entry)}_{q}"
            entry[macro] = got
            if k == 0 or (index == k and untils[k - 1] not in owed):
                accepting.add(got)
            worklist.append(macro)
        return got

    initial = "mcinit"
    start_index = 1 if k else 0
    for sig in expansions(frozenset((renamed,)), machine.initial):
        triples.append((initial, Update(0),
                        entry_state((machine.initial, sig, start_index))))

    while worklist:
        macro = worklist.pop(0)
        q, (owed, tests), index = macro
        head = entry[macro]
        core = head
        for j, test in enumerate(tests):
            nxt = f"{head}_c{j}"
            triples.append((core, test, nxt))
            core = nxt
        nxt_index = advance(owed, index)
        for i, t in enumerate(machine.transitions):
            if t.source != q:
                continue
            for sig in expansions(owed, t.target):
                step_origin[len(triples)] = i
                triples.append((core, t.op,
                                entry_state((t.target, sig, nxt_index))))

    registers = sorted({f.reg for f in subformulas(renamed)
                        if isinstance(f, Freeze)})
    product = CounterMachine.build(triples, initial=initial,
                                   params=tuple(registers),
                                   extra_states=(initial,))
    return McReduction(
        instance=BuchiInstance(product, frozenset(accepting)),
        source=machine, formula=renamed, step_origin=step_origin)


# ---------------------------------------------------------------------------
# Succinct updates to unary updates
# ---------------------------------------------------------------------------

def bits(z: int) -> int:
    """Number of bits in the binary encoding of |z|."""
    return abs(z).bit_length()


def bit_at(z: int, i: int) -> int:
    """The i-th bit (1-based, least significant first) of |z|."""
    return (abs(z) >> (i - 1)) & 1


@dataclass(frozen=True)
class Gadget:
    """The unary expansion of one large-update transition: a counting loop
    between two delimiter positions."""
    source_transition: int
    sep: str
    entry: str                 # first delimiter state
    ones: tuple[str, ...]      # bit states labeled 1, least significant first
    zeros: tuple[str, ...]     # bit states labeled 0
    exit: str                  # second delimiter state
    sign: int


@dataclass(frozen=True)
class SuccinctReduction:
    machine: CounterMachine
    formula: Formula
    source: CounterMachine
    source_formula: Formula
    lambda_props: frozenset[str]
    bit_zero: str
    bit_one: str
    seps: Mapping[int, str]          # update value -> delimiter proposition
    gadgets: Mapping[int, Gadget]    # source transition index -> gadget
    copy_origin: Mapping[int, int]   # kept transition -> source transition
    exit_origin: Mapping[int, int]   # gadget exit transition -> source transition


def _is_nnf(phi: Formula) -> bool:
    return all(isinstance(f.body, Prop) for f in subformulas(phi)
               if isinstance(f, Neg))


def _disj(parts):
    parts = list(parts)
    result = parts[0]
    for p in parts[1:]:
        result = Or(result, p)
    return result


def _conj(parts):
    parts = list(parts)
    result = parts[0]
    for p in parts[1:]:
        result = And(result, p)
    return result


def _xk(k: int, phi: Formula) -> Formula:
    for _ in range(k):
        phi = Next(phi)
    return phi


def relativize(phi: Formula, lambda_props) -> Formula:
    """The specification transformer of the unary expansion: evaluate `phi`
    only at positions carrying none of `lambda_props`, skipping over the
    inserted ones. Identity when the proposition set is empty. Requires
    negation normal form; preserves flatness."""
    lambda_props = sorted(lambda_props)
    if not lambda_props:
        return phi
    if not _is_nnf(phi):
        raise FormulaError("relativize requires negation normal form")
    lam = _disj(Prop(p) for p in lambda_props)
    notlam = _conj(Neg(Prop(p)) for p in lambda_props)

    def walk(f: Formula) -> Formula:
        if isinstance(f, (Prop, RegTest, Neg)):
            return f
        if isinstance(f, Freeze):
            return Freeze(f.reg, walk(f.body))
        if isinstance(f, And):
            return And(walk(f.left), walk(f.right))
        if isinstance(f, Or):
            return Or(walk(f.left), walk(f.right))
        if isinstance(f, Next):
            return Next(Until(lam, And(notlam, walk(f.body))))
        if isinstance(f, Until):
            # "on a real position" guards: (not-inserted -> left), rendered as
            # (inserted | left) to stay in negation normal form.
            return Until(Or(lam, walk(f.left)), And(notlam, walk(f.right)))
        return Release(And(notlam, walk(f.left)), Or(lam, walk(f.right)))

    return walk(phi)


def _counter_formula(reduction_seps: Mapping[int, str], bit_zero: str,
                     bit_one: str, lambda_props) -> Formula:
    """The conjunction forcing every gadget traversal to count from 1 to |z|
    in least-significant-bit-first binary between its delimiters."""
    lam = _disj(Prop(p) for p in sorted(lambda_props))
    notlam = _conj(Neg(Prop(p)) for p in sorted(lambda_props))
    zero, one = Prop(bit_zero), Prop(bit_one)
    parts = []
    for z in sorted(reduction_seps):
        sep = Prop(reduction_seps[z])
        n = bits(z)
        first = And(notlam, Next(sep))
        last = And(sep, Next(notlam))
        last_but_one = And(sep, Next(Until(Or(zero, one), last)))

        def jump(phi: Formula) -> Formula:
            return _xk(n + 1, phi)

        init = globally(Or(Neg(first), _xk(2, And(one, Next(Until(zero, sep))))))
        fin = globally(Or(Neg(last_but_one), _conj(
            _xk(i, one if bit_at(z, i) else zero) for i in range(1, n + 1))))
        eqsuff = Until(Or(And(zero, jump(zero)), And(one, jump(one))), sep)
        inc = globally(Or(
            Neg(And(sep, And(Neg(last_but_one), Neg(last)))),
            Next(Until(And(one, jump(zero)),
                       And(zero, And(jump(one), Next(eqsuff)))))))
        exit_ = globally(Or(Neg(first), Until(true_formula(), last)))
        parts.append(_conj((init, fin, inc, exit_)))
    return _conj(parts)


def succinct_to_unary(machine: CounterMachine,
                      phi: Formula) -> SuccinctReduction:
    """Replace every update of magnitude >= 2 by a unary gadget that walks a
    binary counter from 1 to |z| between delimiter-labeled positions, and
    rewrite the sentence to skip the inserted positions and to enforce the
    counting. The sentence must be a flat sentence in negation normal form.
    """
    if classify(machine) not in (MachineClass.OCA, MachineClass.OCA_S):
        raise ClassMismatch(
            "succinct_to_unary requires a parameterless machine with "
            "zero tests only")
    _require_flat_sentence(phi)
    if not _is_nnf(phi):
        raise FormulaError("succinct_to_unary requires negation normal form")
    large = sorted({t.op.delta for t in machine.transitions
                    if isinstance(t.op, Update) and abs(t.op.delta) >= 2})
    if not large:
        return SuccinctReduction(
            machine=machine, formula=phi, source=machine, source_formula=phi,
            lambda_props=frozenset(), bit_zero="0", bit_one="1", seps={},
            gadgets={}, copy_origin={i: i for i in range(len(machine.transitions))},
            exit_origin={})

    used_props = set().union(*machine.labels.values()) if machine.labels else set()
    used_props |= {f.name for f in subformulas(phi) if isinstance(f, Prop)}
    bit_zero = fresh_name("0", used_props)
    used_props.add(bit_zero)
    bit_one = fresh_name("1", used_props)
    used_props.add(bit_one)
    seps = {}
    for z in large:
        name = f"sep{z}" if z > 0 else f"sepm{-z}"
        seps[z] = fresh_name(name, used_props)
        used_props.add(seps[z])
    lambda_props = frozenset((bit_zero, bit_one, *seps.values()))

    taken = set(machine.states)
    triples: list = []
    labels = {q: set(ps) for q, ps in machine.labels.items()}
    copy_origin: dict[int, int] = {}
    exit_origin: dict[int, int] = {}
    gadgets: dict[int, Gadget] = {}

    def fresh_state(base: str, props) -> str:
        name = fresh_name(base, taken)
        taken.add(name)
        labels[name] = set(props)
        return name

    for i, t in enumerate(machine.transitions):
        if not (isinstance(t.op, Update) and abs(t.op.delta) >= 2):
            copy_origin[len(triples)] = i
            triples.append((t.source, t.op, t.target))
            continue
        z = t.op.delta
        n = bits(z)
        sep = seps[z]
        entry = fresh_state(f"g{i}_in", (sep,))
        exit_ = fresh_state(f"g{i}_out", (sep,))
        ones = tuple(fresh_state(f"g{i}_one{j}", (bit_one,))
                     for j in range(1, n + 1))
        zeros = tuple(fresh_state(f"g{i}_zero{j}", (bit_zero,))
                      for j in range(1, n + 1))
        triples.append((t.source, Update(0), entry))
        for a in (entry, exit_):
            triples.append((a, Update(0), ones[0]))
            triples.append((a, Update(0), zeros[0]))
        for j in range(n - 1):
            for a in (ones[j], zeros[j]):
                triples.append((a, Update(0), ones[j + 1]))
                triples.append((a, Update(0), zeros[j + 1]))
        step = Update(1 if z > 0 else -1)
        triples.append((ones[-1], step, exit_))
        triples.append((zeros[-1], step, exit_))
        exit_origin[len(triples)] = i
        triples.append((exit_, Update(0), t.target))
        gadgets[i] = Gadget(source_transition=i, sep=sep, entry=entry,
                            ones=ones, zeros=zeros, exit=exit_,
                            sign=1 if z > 0 else -1)

    unary = CounterMachine.build(triples, initial=machine.initial,
                                 labels=labels, extra_states=machine.states)
    translated = relativize(phi, lambda_props)
    counter = _counter_formula(seps, bit_zero, bit_one, lambda_props)
    return SuccinctReduction(
        machine=unary, formula=And(translated, counter), source=machine,
        source_formula=phi, lambda_props=lambda_props, bit_zero=bit_zero,
        bit_one=bit_one, seps=seps, gadgets=gadgets, copy_origin=copy_origin,
        exit_origin=exit_origin)


# ---------------------------------------------------------------------------
# The model-checking pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McWitness:
    """A self-certifying model-checking witness: an instantiation of the
    derived machine's parameters, a lasso of the original machine, and the
    data word it spells (None when the loop gains counter value and the
    formula tests registers, in which case only the structural checks apply).
    """
    gamma: dict[str, int]
    lasso: LassoRun
    word: Optional[LassoWord]
    formula_checked: bool


def _project(run: Run, marks, action) -> tuple[Run, list[int]]:
    """Map a run through a step filter: `action(step)` returns the replacing
    transition index or None to drop the step. Dropped steps keep the current
    projected configuration. Returns the projected run and, for each input
    mark (a configuration index), the corresponding projected index."""
    out_configs = [run.configs[0]]
    out_steps: list[int] = []
    marks = list(marks)
    out_marks = [0] * len(marks)
    for pos, step in enumerate(run.steps):
        mapped = action(step)
        if mapped is not None:
            out_steps.append(mapped)
            out_configs.append(run.configs[pos + 1])
        for m, mark in enumerate(marks):
            if mark == pos + 1:
                out_marks[m] = len(out_configs) - 1
    for m, mark in enumerate(marks):
        if mark == 0:
            out_marks[m] = 0
    return Run(tuple(out_configs), tuple(out_steps)), out_marks


def _project_product(product_run: Run, marks, mc: McReduction):
    """Project a product run onto the source machine of the tableau product:
    chain and initialization steps vanish, machine steps keep their index.
    Configuration values carry over unchanged."""
    source = mc.source
    configs = [Config(source.initial, 0)]
    steps: list[int] = []
    marks = list(marks)
    out_marks = [0] * len(marks)
    for pos, step in enumerate(product_run.steps):
        origin = mc.step_origin.get(step)
        if origin is not None:
            steps.append(origin)
            configs.append(Config(source.transitions[origin].target,
                                  product_run.configs[pos + 1].value))
        for m, mark in enumerate(marks):
            if mark == pos + 1:
                out_marks[m] = len(configs) - 1
    return Run(tuple(configs), tuple(steps)), out_marks


def _contract_gadgets(run: Run, marks, red: SuccinctReduction):
    """Collapse gadget traversals of the unary expansion back into single
    large-update steps of the source machine."""
    source = red.source
    configs = [run.configs[0]]
    steps: list[int] = []
    marks = list(marks)
    out_marks = [0] * len(marks)
    for pos, step in enumerate(run.steps):
        emitted = None
        if step in red.copy_origin:
            emitted = red.copy_origin[step]
        elif step in red.exit_origin:
            emitted = red.exit_origin[step]
        if emitted is not None:
            steps.append(emitted)
            configs.append(Config(source.transitions[emitted].target,
                                  run.configs[pos + 1].value))
        for m, mark in enumerate(marks):
            if mark == pos + 1:
                out_marks[m] = len(configs) - 1
    return Run(tuple(configs), tuple(steps)), out_marks


def _states_on_cycles(machine: CounterMachine) -> frozenset[str]:
    forward = {q: [t.target for _i, t in machine.outgoing(q)]
               for q in machine.states}
    component, cyclic = _cyclic_components(forward)
    return frozenset(q for q in machine.states if component.get(q) in cyclic)


def _register_free(phi: Formula) -> bool:
    return not any(isinstance(f, RegTest) for f in subformulas(phi))


def lasso_word(machine: CounterMachine, lasso: LassoRun) -> LassoWord:
    """The data word spelled by a lasso: state labels paired with counter
    values, the final configuration folded onto the loop entry."""
    entries = [(machine.labels[c.state], c.value) for c in lasso.configs[:-1]]
    return LassoWord(tuple(entries[:lasso.loop_start]),
                     tuple(entries[lasso.loop_start:]))


def model_check(machine: CounterMachine, phi: Formula,
                bound: int) -> Optional[McWitness]:
    """Decide whether some infinite initialized run of `machine` satisfies
    the flat sentence `phi`, searching instantiations of all derived
    parameters up to `bound`. A returned witness has been re-validated: the
    lasso against the machine, and the spelled word against the formula
    whenever the word is exactly periodic (or the formula ignores counter
    values).
    """
    _require_flat_sentence(phi)
    cls = classify(machine)
    if cls not in (MachineClass.OCA, MachineClass.OCA_S):
        raise ClassMismatch(
            "model_check expects a parameterless machine with zero tests only")
    normal = nnf(phi)
    if cls is MachineClass.OCA_S:
        succinct = succinct_to_unary(machine, normal)
    else:
        succinct = None
    work = succinct.machine if succinct else machine
    work_phi = succinct.formula if succinct else normal
    mc = flat_mc_to_buchi(work, work_phi)
    product, accepting = mc.instance.machine, mc.instance.accepting
    scale = max((abs(t.op.delta) for t in machine.transitions
                 if isinstance(t.op, Update)), default=1)
    ceiling = bound + scale * len(machine.states) ** 3 + 2 * len(product.params) + 2
    context = divergence_context(product, ceiling)
    # A state can only repeat if it lies on a cycle of the transition graph.
    cycle_states = _states_on_cycles(product)
    for accept_state in sorted(accepting):
        if accept_state not in cycle_states:
            continue
        reduction = buchi_to_reach(product, accept_state, context=context)
        folded, pinned = fold_constants(reduction.machine)
        witness = parametric_reach(folded, reduction.target, bound,
                                   pinned=pinned, ceiling=ceiling)
        if witness is None:
            continue
        _, product_lasso = buchi_witness_to_lasso(reduction, witness)
        lasso = _translate_lasso(product_lasso, mc, succinct)
        defect = validate_lasso(machine, {}, lasso)
        if defect is not None:
            raise AssertionError(
                f"model_check produced an invalid lasso: {defect.reason}")
        word: Optional[LassoWord] = None
        checked = False
        if lasso.loop_delta == 0 or _register_free(phi):
            word = lasso_word(machine, lasso)
            checked = True
            if not evaluate(word, 0, {}, phi):
                raise AssertionError(
                    "model_check witness fails the formula re-check")
        return McWitness(gamma=dict(witness.gamma), lasso=lasso, word=word,
                         formula_checked=checked)
    return None


def _translate_lasso(product_lasso: LassoRun, mc: McReduction,
                     succinct: Optional[SuccinctReduction]) -> LassoRun:
    """Turn a product lasso into a lasso of the original machine by unrolling
    two loop iterations, projecting away tableau (and gadget) steps, and
    cutting the projected run at the images of the loop boundaries."""
    unrolled = product_lasso.unroll(2)
    loop_steps = len(product_lasso.steps) - product_lasso.loop_start
    marks = [product_lasso.loop_start,
             product_lasso.loop_start + loop_steps,
             product_lasso.loop_start + 2 * loop_steps]
    projected, marks = _project_product(unrolled, marks, mc)
    if succinct is not None:
        projected, marks = _contract_gadgets(projected, marks, succinct)
    first, second = marks[0], marks[1]
    if second == first:
        raise AssertionError("product loop projects to an empty loop")
    return LassoRun(projected.configs[:second + 1],
                    projected.steps[:second], loop_start=first)
