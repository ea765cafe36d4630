"""Attack-tree decoration toolkit.

Decorates every node of an attack tree with an attribute value (probability,
cost, minimum time) by solving the constraint problem built from the tree
structure plus historical data and domain knowledge, and relaxes the problem
when those inputs are inconsistent: either by dropping as few soft
predicates as possible or by shifting inequality bounds a minimal distance.
"""

from .corpus import CorpusEntry, load_corpus
from .domains import AttributeDomain, bottom_up_constraints, builtin_domain, evaluate_bottom_up
from .predicates import (
    ConstraintSet,
    IneqKind,
    IneqPredicate,
    Predicate,
    Provenance,
    classify_ineq,
    holds,
    implies_ineq,
    parse_predicate,
    parse_predicate_file,
    pred_distance,
    set_distance,
)
from .relax_inclusion import InclusionResult, relax_inclusion_exact, relax_inclusion_greedy
from .relax_maxweak import MaxWeakResult, ineq_normalize, relax_maxweak, verify_weakening
from .solver import (
    Classification,
    SolveOutcome,
    SolverConfig,
    Status,
    UnsatCore,
    Verdict,
    classify,
    solve,
    unsat_core,
)
from .tree import (
    AttackTree,
    Refinement,
    check_unique_labels,
    labels_of,
    parse_tree,
    root_label,
    serialize_tree,
)

__version__ = "0.1.0"
