"""JSON machine and witness file formats.

Machine files describe a counter machine; unknown keys are rejected so typos
fail loudly. Witness files carry an instantiation plus a run (optionally a
lasso via loop_start) and are designed to be re-checkable against a machine
file without trusting their producer.
"""

from __future__ import annotations

from typing import Any, Optional

from flatmc.machines import (
    Config,
    CounterMachine,
    LassoRun,
    MachineError,
    Run,
    format_op,
    parse_op,
)

_MACHINE_KEYS = {"states", "initial", "params", "labels", "transitions"}
_TRANSITION_KEYS = {"from", "op", "to"}
_WITNESS_KEYS = {"gamma", "run", "loop_start", "formula_holds", "certificate"}
_ENTRY_KEYS = {"state", "value", "via"}


def machine_to_data(machine: CounterMachine) -> dict:
    return {
        "states": sorted(machine.states),
        "initial": machine.initial,
        "params": list(machine.params),
        "labels": {q: sorted(ps) for q, ps in sorted(machine.labels.items())
                   if ps},
        "transitions": [
            {"from": t.source, "op": format_op(t.op), "to": t.target}
            for t in machine.transitions
        ],
    }


def machine_from_data(data: Any) -> CounterMachine:
    if not isinstance(data, dict):
        raise MachineError("machine file must be a JSON object")
    unknown = set(data) - _MACHINE_KEYS
    if unknown:
        raise MachineError(f"unknown machine file keys: {sorted(unknown)}")
    for key in ("states", "initial", "transitions"):
        if key not in data:
            raise MachineError(f"machine file misses {key!r}")
    transitions = []
    for i, entry in enumerate(data["transitions"]):
        if not isinstance(entry, dict) or set(entry) - _TRANSITION_KEYS:
            raise MachineError(f"malformed transition object at index {i}")
        for key in _TRANSITION_KEYS:
            if key not in entry:
                raise MachineError(f"transition {i} misses {key!r}")
        transitions.append((entry["from"], parse_op(entry["op"]), entry["to"]))
    return CounterMachine.build(
        transitions,
        initial=data["initial"],
        params=data.get("params", ()),
        labels=data.get("labels") or None,
        extra_states=data["states"])


def run_to_data(run: Run) -> list[dict]:
    entries = []
    for i, config in enumerate(run.configs):
        via = run.steps[i - 1] if i > 0 else None
        entries.append({"state": config.state, "value": config.value,
                        "via": via})
    return entries


def _run_from_data(data: Any) -> Run:
    if not isinstance(data, list) or not data:
        raise MachineError("witness run must be a nonempty list")
    configs = []
    steps = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or set(entry) - _ENTRY_KEYS:
            raise MachineError(f"malformed run entry at index {i}")
        if "state" not in entry or "value" not in entry:
            raise MachineError(f"run entry {i} misses state or value")
        if not isinstance(entry["value"], int):
            raise MachineError(f"run entry {i} has a non-integer value")
        configs.append(Config(entry["state"], entry["value"]))
        if i > 0:
            via = entry.get("via")
            if not isinstance(via, int):
                raise MachineError(f"run entry {i} misses its transition index")
            steps.append(via)
    return Run(tuple(configs), tuple(steps))


class WitnessFile:
    """Parsed witness: an instantiation plus a run, a lasso when loop_start
    is given, and optional self-description fields."""

    def __init__(self, gamma: dict, run: Run, loop_start: Optional[int],
                 formula_holds: Optional[bool], certificate: Optional[dict]):
        self.gamma = gamma
        self.run = run
        self.loop_start = loop_start
        self.formula_holds = formula_holds
        self.certificate = certificate

    @property
    def lasso(self) -> Optional[LassoRun]:
        if self.loop_start is None:
            return None
        return LassoRun(self.run.configs, self.run.steps, self.loop_start)


def witness_to_data(gamma: dict, run: Run, loop_start: Optional[int] = None,
                    formula_holds: Optional[bool] = None,
                    certificate: Optional[dict] = None) -> dict:
    data: dict = {"gamma": dict(gamma), "run": run_to_data(run)}
    if loop_start is not None:
        data["loop_start"] = loop_start
    if formula_holds is not None:
        data["formula_holds"] = formula_holds
    if certificate is not None:
        data["certificate"] = certificate
    return data


def witness_from_data(data: Any) -> WitnessFile:
    if not isinstance(data, dict):
        raise MachineError("witness file must be a JSON object")
    unknown = set(data) - _WITNESS_KEYS
    if unknown:
        raise MachineError(f"unknown witness file keys: {sorted(unknown)}")
    if "gamma" not in data or "run" not in data:
        raise MachineError("witness file needs gamma and run")
    gamma = data["gamma"]
    if not isinstance(gamma, dict) or not all(
            isinstance(v, int) and v >= 0 for v in gamma.values()):
        raise MachineError("gamma must map parameter names to naturals")
    run = _run_from_data(data["run"])
    loop_start = data.get("loop_start")
    if loop_start is not None and not isinstance(loop_start, int):
        raise MachineError("loop_start must be an integer")
    return WitnessFile(dict(gamma), run, loop_start,
                       data.get("formula_holds"), data.get("certificate"))
