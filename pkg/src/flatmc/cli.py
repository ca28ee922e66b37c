"""Batch command-line front end.

Commands decide reachability (`reach`), repeated reachability (`buchi`), and
flat freeze LTL model checking (`mc`) on machines given as JSON files, emit
the library's constructions (`translate`), and independently re-check emitted
witnesses (`check`). Exit codes: 0 = property holds and a witness was
emitted, 1 = no witness up to the bound (the bound is echoed), 2 = bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from flatmc import formulas, jsonio
from flatmc.alternating import dump_a2a, machine_to_a2a
from flatmc.formulas import FormulaError, evaluate, flat_violation, is_sentence
from flatmc.machines import (
    ClassMismatch,
    Config,
    CounterMachine,
    MachineError,
    Run,
    validate_lasso,
    validate_run,
)
from flatmc.reach import default_bound, fold_constants, parametric_reach
from flatmc.reductions import (
    buchi_to_reach,
    buchi_witness_to_lasso,
    lasso_word,
    model_check,
    succinct_to_unary,
)


class InputError(Exception):
    """Raised for anything that should exit with code 2."""


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"{path} is not valid JSON: {err}") from err


def _load_machine(path: str) -> CounterMachine:
    try:
        return jsonio.machine_from_data(_load_json(path))
    except MachineError as err:
        raise InputError(f"{path}: {err}") from err


def _load_formula(source: str) -> formulas.Formula:
    text = source
    if os.path.exists(source):
        try:
            with open(source, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as err:
            raise InputError(f"cannot read {source}: {err}") from err
    try:
        return formulas.parse(text)
    except FormulaError as err:
        raise InputError(f"formula: {err}") from err


def _emit_witness(args, data: dict) -> None:
    text = json.dumps(data, indent=2)
    if args.witness:
        with open(args.witness, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    elif not args.json:
        print(text)


def _report(args, verdict: str, bound: Optional[int] = None,
            witness: Optional[dict] = None, **extra) -> None:
    if args.json:
        payload = {"verdict": verdict, **extra}
        if bound is not None:
            payload["bound"] = bound
        if witness is not None:
            payload["witness"] = witness
        print(json.dumps(payload, indent=2))
    else:
        if verdict == "absent":
            print(f"absent up to bound {bound}: no witness with parameter "
                  f"values <= {bound}")
        elif verdict == "present":
            print(f"present (bound {bound})")
        else:
            print(verdict)


def _bound(args, machine: CounterMachine) -> int:
    return args.bound if args.bound is not None else default_bound(machine)


def cmd_reach(args) -> int:
    machine = _load_machine(args.machine)
    if args.target not in machine.states:
        raise InputError(f"target {args.target!r} is not a state")
    bound = _bound(args, machine)
    try:
        folded, pinned = fold_constants(machine)
        witness = parametric_reach(folded, args.target, bound, pinned=pinned,
                                   ceiling=args.cap)
    except ClassMismatch as err:
        raise InputError(str(err)) from err
    if witness is None:
        _report(args, "absent", bound)
        return 1
    gamma = {x: v for x, v in witness.gamma.items() if x in machine.params}
    data = jsonio.witness_to_data(gamma, witness.run)
    _emit_witness(args, data)
    _report(args, "present", bound, witness=data)
    return 0


def cmd_buchi(args) -> int:
    machine = _load_machine(args.machine)
    accepting = [q for q in args.accepting.split(",") if q]
    if not accepting:
        raise InputError("no accepting states given")
    for q in accepting:
        if q not in machine.states:
            raise InputError(f"accepting state {q!r} is not a state")
    bound = _bound(args, machine)
    try:
        folded, pinned = fold_constants(machine)
        for accept_state in sorted(set(accepting)):
            reduction = buchi_to_reach(folded, accept_state, rep_cap=args.cap)
            witness = parametric_reach(reduction.machine, reduction.target,
                                       bound, pinned=pinned, ceiling=args.cap)
            if witness is None:
                continue
            gamma, lasso = buchi_witness_to_lasso(reduction, witness)
            gamma = {x: v for x, v in gamma.items() if x in machine.params}
            certificate = jsonio.witness_to_data(dict(witness.gamma),
                                                 witness.run)
            data = jsonio.witness_to_data(
                gamma, Run(lasso.configs, lasso.steps),
                loop_start=lasso.loop_start, certificate=certificate)
            _emit_witness(args, data)
            _report(args, "present", bound, witness=data,
                    accepting=accept_state)
            return 0
    except ClassMismatch as err:
        raise InputError(str(err)) from err
    _report(args, "absent", bound)
    return 1


def cmd_mc(args) -> int:
    machine = _load_machine(args.machine)
    phi = _load_formula(args.formula)
    violation = flat_violation(phi)
    if violation is not None:
        offending, polarity = violation
        raise InputError(f"not flat: the freeze quantifier occurs under a "
                         f"{polarity} occurrence of "
                         f"{formulas.render(offending)}")
    if not is_sentence(phi):
        raise InputError("not a sentence: some register test is unbound")
    bound = _bound(args, machine)
    try:
        witness = model_check(machine, phi, bound)
    except (ClassMismatch, FormulaError) as err:
        raise InputError(str(err)) from err
    if witness is None:
        _report(args, "absent", bound)
        return 1
    data = jsonio.witness_to_data(
        witness.gamma, Run(witness.lasso.configs, witness.lasso.steps),
        loop_start=witness.lasso.loop_start,
        formula_holds=True if witness.formula_checked else None)
    _emit_witness(args, data)
    _report(args, "present", bound, witness=data)
    return 0


def cmd_translate(args) -> int:
    machine = _load_machine(args.machine)
    try:
        if args.mode == "a2a":
            if not args.target:
                raise InputError("--mode a2a needs --target")
            folded, _pinned = fold_constants(machine)
            translated = machine_to_a2a(folded, args.target)
            print(dump_a2a(translated.automaton), end="")
        elif args.mode == "unary":
            phi = formulas.nnf(_load_formula(args.formula or "true"))
            reduction = succinct_to_unary(machine, phi)
            print(json.dumps({
                "machine": jsonio.machine_to_data(reduction.machine),
                "formula": formulas.render(reduction.formula),
            }, indent=2))
        elif args.mode == "buchi2reach":
            if not args.target:
                raise InputError("--mode buchi2reach needs --target")
            if args.target not in machine.states:
                raise InputError(f"target {args.target!r} is not a state")
            folded, _pinned = fold_constants(machine)
            reduction = buchi_to_reach(folded, args.target, rep_cap=args.cap)
            print(json.dumps({
                "machine": jsonio.machine_to_data(reduction.machine),
                "target": reduction.target,
            }, indent=2))
        else:  # foldconst
            folded, pinned = fold_constants(machine)
            print(json.dumps({
                "machine": jsonio.machine_to_data(folded),
                "pinned": pinned,
            }, indent=2))
    except (ClassMismatch, FormulaError, MachineError) as err:
        raise InputError(str(err)) from err
    return 0


def cmd_check(args) -> int:
    machine = _load_machine(args.machine)
    try:
        witness = jsonio.witness_from_data(_load_json(args.witness))
    except MachineError as err:
        raise InputError(f"{args.witness}: {err}") from err
    for x in machine.params:
        if x not in witness.gamma:
            raise InputError(f"gamma misses parameter {x!r}")
    phi = _load_formula(args.formula) if args.formula else None

    def reject(reason: str) -> int:
        _report(args, f"invalid witness: {reason}")
        return 1

    first = witness.run.configs[0]
    if first != Config(machine.initial, 0):
        return reject("run does not start at (initial, 0)")
    lasso = witness.lasso
    if lasso is not None:
        defect = validate_lasso(machine, witness.gamma, lasso)
    else:
        defect = validate_run(machine, witness.gamma, witness.run)
    if defect is not None:
        return reject(f"step {defect.position}: {defect.reason}")
    if phi is not None:
        if lasso is None:
            return reject("a formula check needs a lasso witness")
        climbing = lasso.loop_delta > 0
        register_tests = any(isinstance(f, formulas.RegTest)
                             for f in formulas.subformulas(phi))
        if climbing and register_tests:
            _report(args, "valid (formula not evaluated: the loop gains "
                          "counter value and the formula tests registers)")
            return 0
        word = lasso_word(machine, lasso)
        if not evaluate(word, 0, {}, phi):
            return reject("the spelled word does not satisfy the formula")
    _report(args, "valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatmc",
        description="Reachability, repeated reachability, and flat freeze "
                    "LTL model checking for one-counter machines with "
                    "parameterized tests.")
    parser.add_argument("--seed", type=int, default=0,
                        help="reserved for reproducibility; all commands are "
                             "deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("machine", help="machine JSON file")
        p.add_argument("--bound", type=int, default=None,
                       help="parameter value bound (default: derived from "
                            "the machine size)")
        p.add_argument("--cap", type=int, default=None,
                       help="counter exploration ceiling override")
        p.add_argument("--json", action="store_true",
                       help="machine-readable report on stdout")
        p.add_argument("--witness", metavar="FILE", default=None,
                       help="write the witness to FILE instead of stdout")

    p = sub.add_parser("reach", help="is the target state reachable?")
    common(p)
    p.add_argument("--target", required=True)
    p.set_defaults(handler=cmd_reach)

    p = sub.add_parser("buchi", help="can some accepting state repeat forever?")
    common(p)
    p.add_argument("--accepting", required=True,
                   help="comma-separated accepting states")
    p.set_defaults(handler=cmd_buchi)

    p = sub.add_parser("mc", help="does some run satisfy the flat sentence?")
    common(p)
    p.add_argument("--formula", required=True,
                   help="formula text, or a path to a formula file")
    p.set_defaults(handler=cmd_mc)

    p = sub.add_parser("translate", help="emit a construction")
    common(p)
    p.add_argument("--mode", required=True,
                   choices=("a2a", "unary", "buchi2reach", "foldconst"))
    p.add_argument("--target", default=None)
    p.add_argument("--formula", default=None)
    p.set_defaults(handler=cmd_translate)

    p = sub.add_parser("check", help="re-check a witness file independently")
    p.add_argument("witness", help="witness JSON file")
    p.add_argument("machine", help="machine JSON file")
    p.add_argument("formula", nargs="?", default=None,
                   help="optional formula the witness claims to satisfy")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MachineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
