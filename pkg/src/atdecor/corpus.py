"""Shipped example corpus: the bank-account running example and the ATM
fraud case study, as data files in the tree DSL and predicate formats.

The ATM entry's canonical soft order puts domain-knowledge relations before
historical point estimates.  Relational knowledge is the more trusted kind
of input, so greedy inclusion admits it first; with that order the greedy
pass reproduces the recorded outcome (everything kept except the
cash-trapping pin).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

from .predicates import ConstraintSet, Provenance, parse_predicate_file
from .tree import AttackTree, parse_tree

_DATA = resources.files(__package__) / "corpus_data"

_FILES = {
    "fig1": {"tree": "fig1.atdsl", "hard": "fig1_hard.pred"},
    "fig2": {"tree": "fig2.atdsl", "hard": "fig2_hard.pred", "variants": "fig2_variants.pred"},
    "atm": {
        "tree": "atm.atdsl",
        "hard": "atm_hard.pred",
        "historical": "atm_historical.pred",
        "knowledge": "atm_knowledge.pred",
        "expected": "atm_expected.json",
    },
}

_DOMAINS = {"fig1": "min-time", "fig2": "min-time", "atm": "prob-independent"}


class CorpusError(KeyError):
    pass


@dataclass
class CorpusEntry:
    name: str
    tree: AttackTree
    domain_name: str
    hard: list
    historical: list = field(default_factory=list)
    knowledge: list = field(default_factory=list)
    variants: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def constraint_set(self, historical=True, knowledge=True, extra_soft=()) -> ConstraintSet:
        soft = []
        if knowledge:
            soft.extend(self.knowledge)
        if historical:
            soft.extend(self.historical)
        soft.extend(extra_soft)
        return ConstraintSet(list(self.hard), soft)


def _read(filename: str) -> str:
    return (_DATA / filename).read_text(encoding="utf-8")


def data_path(filename: str) -> str:
    """Filesystem path of a corpus file (they ship as plain files)."""
    return str(_DATA / filename)


def load_corpus(name: str) -> CorpusEntry:
    """Load "fig1", "fig2" or "atm"; all files are parsed eagerly."""
    try:
        files = _FILES[name]
    except KeyError:
        raise CorpusError(f"unknown corpus entry {name!r} (known: {sorted(_FILES)})") from None
    tree = parse_tree(_read(files["tree"]))
    hard = list(parse_predicate_file(_read(files["hard"])).hard)
    entry = CorpusEntry(
        name=name,
        tree=tree,
        domain_name=_DOMAINS[name],
        hard=hard,
        paths={k: data_path(v) for k, v in files.items()},
    )
    if "historical" in files:
        entry.historical = list(
            parse_predicate_file(_read(files["historical"]), Provenance.SOFT_HISTORICAL).soft
        )
    if "knowledge" in files:
        entry.knowledge = list(
            parse_predicate_file(_read(files["knowledge"]), Provenance.SOFT_DOMAIN_KNOWLEDGE).soft
        )
    if "variants" in files:
        variants = parse_predicate_file(_read(files["variants"])).soft
        entry.variants = {f"p{i + 2}": p for i, p in enumerate(variants)}
        if hard:
            entry.variants["p1"] = hard[0]
    if "expected" in files:
        entry.expected = json.loads(_read(files["expected"]))
    return entry


def corpus_names() -> list[str]:
    return sorted(_FILES)


def corpus_checksum() -> str:
    """SHA-256 over all corpus files, so expected-results drift is detectable."""
    digest = hashlib.sha256()
    for name in sorted({f for files in _FILES.values() for f in files.values()}):
        digest.update(name.encode())
        digest.update(_read(name).encode())
    return digest.hexdigest()
