"""Command-line entry point.

In JSON mode (the default) exactly one document is written to stdout and all
diagnostics go to stderr; the same argv and seed always produce the same
stdout bytes.  Exit codes double as a machine-readable verdict:

    0   feasible / determined / relaxed solution produced
    2   bad flags or unreadable input
    10  infeasible, proved by an interval certificate
    11  infeasible, presumed after the restart budget
    12  unknown / not converged
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .corpus import corpus_checksum
from .domains import DomainError, builtin_domain, builtin_domain_names, evaluate_bottom_up
from .predicates import (
    ConstraintSet,
    PredicateSyntaxError,
    parse_predicate_file,
    predicate_to_json,
)
from .relax_inclusion import relax_inclusion_exact, relax_inclusion_greedy
from .relax_maxweak import relax_maxweak
from .solver import SolverConfig, SolverError, Status, Verdict, classify, solve, unsat_core
from .tree import TreeSyntaxError, check_unique_labels, labels_of, parse_tree, tree_to_json

_STATUS_EXIT = {
    Status.FEASIBLE: 0,
    Status.INFEASIBLE_PROVED: 10,
    Status.INFEASIBLE_PRESUMED: 11,
    Status.UNKNOWN: 12,
}


def _emit(doc, fmt):
    if fmt == "json":
        sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        _print_table(doc)


def _print_table(doc, indent=0):
    pad = "  " * indent
    if isinstance(doc, dict):
        for k, v in doc.items():
            if isinstance(v, (dict, list)):
                print(f"{pad}{k}:")
                _print_table(v, indent + 1)
            else:
                print(f"{pad}{k}: {v}")
    elif isinstance(doc, list):
        for v in doc:
            _print_table(v, indent)
    else:
        print(f"{pad}{doc}")


def _load_tree(path):
    with open(path, encoding="utf-8") as fh:
        return parse_tree(fh.read())


def _load_constraints(paths):
    hard, soft = [], []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            cs = parse_predicate_file(fh.read())
        hard.extend(cs.hard)
        soft.extend(cs.soft)
    return ConstraintSet(hard, soft)


def _config(args):
    return SolverConfig(
        seed=args.seed,
        restarts=args.restarts,
        jobs=getattr(args, "jobs", 1),
    )


def _add_problem_args(p):
    p.add_argument("--tree", required=True, help="tree file (.atdsl or JSON)")
    p.add_argument("--domain", required=True, choices=builtin_domain_names())
    p.add_argument(
        "--constraints", nargs="+", required=True, metavar="FILE",
        help="predicate files; soft iteration order follows file order",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--jobs", type=int, default=1)


def build_parser():
    ap = argparse.ArgumentParser(prog="atdecor", description=__doc__.splitlines()[0])
    ap.add_argument(
        "--version", action="version",
        version=f"atdecor {__version__} (corpus sha256 {corpus_checksum()})",
    )
    ap.add_argument("--format", choices=("json", "table"), default="json")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a tree file")
    p.add_argument("--tree", required=True)

    p = sub.add_parser("eval", help="bottom-up evaluation from full leaf values")
    p.add_argument("--tree", required=True)
    p.add_argument("--domain", required=True, choices=builtin_domain_names())
    p.add_argument("--leaves", required=True, help="JSON object {label: value} or @file")

    for name in ("solve", "classify", "core"):
        p = sub.add_parser(name)
        _add_problem_args(p)

    p = sub.add_parser("relax", help="solve the relaxed decoration problem")
    _add_problem_args(p)
    p.add_argument("--method", required=True, choices=("inclusion", "inclusion-exact", "maxweak"))
    p.add_argument("--order", nargs="*", metavar="ID", help="soft id order for greedy inclusion")

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--port", type=int, default=8740)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--snapshot-dir", default=None)
    return ap


def _cmd_parse(args):
    tree = _load_tree(args.tree)
    unique, dups = check_unique_labels(tree)
    doc = {
        "tree": tree_to_json(tree),
        "nodes": tree.node_count(),
        "labels": sorted(labels_of(tree)),
        "unique_labels": unique,
        "duplicates": dups,
    }
    _emit(doc, args.format)
    return 0


def _cmd_eval(args):
    tree = _load_tree(args.tree)
    domain = builtin_domain(args.domain)
    raw = args.leaves
    if raw.startswith("@"):
        with open(raw[1:], encoding="utf-8") as fh:
            raw = fh.read()
    leaves = json.loads(raw)
    valuation = evaluate_bottom_up(tree, domain, leaves)
    _emit({"valuation": valuation, "root": valuation[tree.label]}, args.format)
    return 0


def _cmd_solve(args):
    tree = _load_tree(args.tree)
    out = solve(tree, builtin_domain(args.domain), _load_constraints(args.constraints), _config(args))
    _emit(out.to_json(), args.format)
    return _STATUS_EXIT[out.status]


def _cmd_classify(args):
    tree = _load_tree(args.tree)
    got = classify(tree, builtin_domain(args.domain), _load_constraints(args.constraints), _config(args))
    _emit(got.to_json(), args.format)
    if got.verdict is Verdict.INCONSISTENT:
        return 11 if got.caveat else 10
    return 0


def _cmd_core(args):
    tree = _load_tree(args.tree)
    constraints = _load_constraints(args.constraints)
    domain = builtin_domain(args.domain)
    config = _config(args)
    full = solve(tree, domain, constraints, config)
    core = unsat_core(tree, domain, constraints, config)
    _emit(core.to_json(), args.format)
    return _STATUS_EXIT[full.status]


def _cmd_relax(args):
    tree = _load_tree(args.tree)
    domain = builtin_domain(args.domain)
    constraints = _load_constraints(args.constraints)
    config = _config(args)
    if args.method == "maxweak":
        res = relax_maxweak(tree, domain, constraints, config)
        _emit(res.to_json(), args.format)
        return 0 if res.converged else 12
    if args.method == "inclusion":
        res = relax_inclusion_greedy(tree, domain, constraints, args.order or None, config)
    else:
        res = relax_inclusion_exact(tree, domain, constraints, config)
    _emit(res.to_json(), args.format)
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import build_app

    app = build_app(snapshot_dir=args.snapshot_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "eval": _cmd_eval,
    "solve": _cmd_solve,
    "classify": _cmd_classify,
    "core": _cmd_core,
    "relax": _cmd_relax,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TreeSyntaxError, PredicateSyntaxError, DomainError, SolverError) as exc:
        print(f"atdecor: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"atdecor: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
