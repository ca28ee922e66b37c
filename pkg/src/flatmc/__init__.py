"""flatmc: reachability, repeated reachability, and flat freeze LTL model
checking for one-counter machines with parameterized tests.

Every solver ships an independently re-checkable witness: a parameter
instantiation plus a run or lasso (and, for model checking, the data word it
spells).
"""

from flatmc.alternating import (
    A2A,
    BLANK,
    FIRST,
    ParameterWord,
    ReachA2A,
    TreeNode,
    construct_accepting_tree,
    decode,
    dump_a2a,
    encode_gamma,
    extract_run,
    machine_to_a2a,
    membership,
    pbf_eval,
    validate_run_tree,
)
from flatmc.formulas import (
    FormulaError,
    FormulaSyntaxError,
    LassoWord,
    evaluate,
    flat_violation,
    is_coflat,
    is_flat,
    is_sentence,
    nnf,
    parse,
    render,
    rename_registers,
)
from flatmc.machines import (
    ClassMismatch,
    Config,
    ConstTest,
    CounterMachine,
    LassoRun,
    MachineClass,
    MachineError,
    ParamTest,
    Run,
    Transition,
    Update,
    bounded_reach_oracle,
    classify,
    machine_size,
    rep_reach_oracle,
    successors,
    validate_lasso,
    validate_run,
)
from flatmc.reach import (
    LevelSet,
    ReachWitness,
    default_bound,
    fold_constants,
    interval_return,
    interval_run,
    parametric_reach,
    plain_rep_lasso,
    plain_rep_reach,
    strip_tests,
)
from flatmc.reductions import (
    BuchiInstance,
    BuchiReduction,
    McWitness,
    buchi_to_reach,
    buchi_witness_to_lasso,
    flat_mc_to_buchi,
    model_check,
    relativize,
    succinct_to_unary,
)

__all__ = [
    "A2A",
    "BLANK",
    "FIRST",
    "BuchiInstance",
    "BuchiReduction",
    "ClassMismatch",
    "Config",
    "ConstTest",
    "CounterMachine",
    "FormulaError",
    "FormulaSyntaxError",
    "LassoRun",
    "LassoWord",
    "LevelSet",
    "MachineClass",
    "MachineError",
    "McWitness",
    "ParamTest",
    "ParameterWord",
    "ReachA2A",
    "ReachWitness",
    "Run",
    "Transition",
    "TreeNode",
    "Update",
    "bounded_reach_oracle",
    "buchi_to_reach",
    "buchi_witness_to_lasso",
    "classify",
    "construct_accepting_tree",
    "decode",
    "default_bound",
    "dump_a2a",
    "encode_gamma",
    "evaluate",
    "extract_run",
    "flat_mc_to_buchi",
    "flat_violation",
    "fold_constants",
    "interval_return",
    "interval_run",
    "is_coflat",
    "is_flat",
    "is_sentence",
    "machine_size",
    "machine_to_a2a",
    "membership",
    "model_check",
    "nnf",
    "parametric_reach",
    "parse",
    "pbf_eval",
    "plain_rep_lasso",
    "plain_rep_reach",
    "relativize",
    "render",
    "rename_registers",
    "rep_reach_oracle",
    "strip_tests",
    "succinct_to_unary",
    "successors",
    "validate_lasso",
    "validate_run",
    "validate_run_tree",
]
