"""Attack trees: labelled AND/OR/LEAF hierarchies with two text formats.

Two serializations are accepted by parse_tree and distinguished by the first
non-blank character:

  * a small DSL:  node := STRING | ("OR"|"AND") "(" node+ ")" "@" STRING
    Children are separated by whitespace or commas, labels are double-quoted
    UTF-8 strings, and "#" starts a line comment.
  * JSON:         {"label": str, "refinement": "LEAF"|"OR"|"AND",
                   "children": [node...]}

Trees are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class Refinement(Enum):
    LEAF = "LEAF"
    OR = "OR"
    AND = "AND"


class TreeSyntaxError(ValueError):
    """Raised on malformed tree input; carries 1-based line/column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class AttackTree:
    label: str
    refinement: Refinement = Refinement.LEAF
    children: tuple[AttackTree, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.refinement is Refinement.LEAF:
            if self.children:
                raise ValueError(f"leaf node {self.label!r} has children")
        elif not self.children:
            raise ValueError(
                f"{self.refinement.value} node {self.label!r} has no children"
            )

    def __iter__(self):
        yield self
        for child in self.children:
            yield from child

    @property
    def is_leaf(self) -> bool:
        return self.refinement is Refinement.LEAF

    def node_count(self) -> int:
        return sum(1 for _ in self)


def leaf(label: str) -> AttackTree:
    return AttackTree(label)


def or_node(label: str, children) -> AttackTree:
    return AttackTree(label, Refinement.OR, tuple(children))


def and_node(label: str, children) -> AttackTree:
    return AttackTree(label, Refinement.AND, tuple(children))


def root_label(tree: AttackTree) -> str:
    return tree.label


def labels_of(tree: AttackTree) -> set[str]:
    """Set of every node label in the tree, deduplicated."""
    return {node.label for node in tree}


def leaf_labels(tree: AttackTree) -> list[str]:
    """Leaf labels in document (pre-)order."""
    return [node.label for node in tree if node.is_leaf]


def check_unique_labels(tree: AttackTree) -> tuple[bool, list[str]]:
    """True iff no two distinct nodes share a label; duplicates listed otherwise."""
    seen: set[str] = set()
    dups: list[str] = []
    for node in tree:
        if node.label in seen and node.label not in dups:
            dups.append(node.label)
        seen.add(node.label)
    return (not dups, dups)


# ---------------------------------------------------------------------------
# DSL parsing
# ---------------------------------------------------------------------------

_KEYWORDS = {"OR": Refinement.OR, "AND": Refinement.AND}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message):
        raise TreeSyntaxError(message, self.line, self.col)

    def _advance(self, n=1):
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _skip_space(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            elif ch.isspace() or ch == ",":
                self._advance()
            else:
                break

    def tokens(self):
        """Yield (kind, value, line, col); kind is one of str/word/punct/eof."""
        while True:
            self._skip_space()
            if self.pos >= len(self.text):
                yield ("eof", "", self.line, self.col)
                return
            ch = self.text[self.pos]
            line, col = self.line, self.col
            if ch == '"':
                yield ("str", self._string(), line, col)
            elif ch in "()@":
                self._advance()
                yield ("punct", ch, line, col)
            elif ch.isalpha() or ch == "_":
                start = self.pos
                while self.pos < len(self.text) and (
                    self.text[self.pos].isalnum() or self.text[self.pos] == "_"
                ):
                    self._advance()
                yield ("word", self.text[start : self.pos], line, col)
            else:
                self.error(f"unexpected character {ch!r}")

    def _string(self) -> str:
        self._advance()  # opening quote
        out = []
        while True:
            if self.pos >= len(self.text):
                self.error("unterminated string")
            ch = self.text[self.pos]
            if ch == '"':
                self._advance()
                return "".join(out)
            if ch == "\\":
                self._advance()
                if self.pos >= len(self.text):
                    self.error("unterminated escape")
                esc = self.text[self.pos]
                if esc not in ('"', "\\"):
                    self.error(f"unknown escape \\{esc}")
                out.append(esc)
                self._advance()
            else:
                out.append(ch)
                self._advance()


class _DslParser:
    def __init__(self, text: str):
        self._stream = _Tokenizer(text).tokens()
        self.tok = next(self._stream)

    def _next(self):
        self.tok = next(self._stream)

    def error(self, message):
        raise TreeSyntaxError(message, self.tok[2], self.tok[3])

    def expect(self, kind, value=None):
        k, v, _, _ = self.tok
        if k != kind or (value is not None and v != value):
            want = value if value is not None else kind
            got = v if v else k
            self.error(f"expected {want!r}, got {got!r}")
        self._next()
        return v

    def parse(self) -> AttackTree:
        node = self.node()
        if self.tok[0] != "eof":
            self.error(f"trailing input {self.tok[1]!r}")
        return node

    def node(self) -> AttackTree:
        kind, value, line, col = self.tok
        if kind == "str":
            self._next()
            return AttackTree(value)
        if kind == "word":
            if value not in _KEYWORDS:
                self.error(f"unknown node kind {value!r} (expected OR or AND)")
            refinement = _KEYWORDS[value]
            self._next()
            self.expect("punct", "(")
            children = []
            while not (self.tok[0] == "punct" and self.tok[1] == ")"):
                if self.tok[0] == "eof":
                    self.error("unclosed '('")
                children.append(self.node())
            if not children:
                raise TreeSyntaxError(
                    f"{refinement.value} node needs at least one child", line, col
                )
            self.expect("punct", ")")
            self.expect("punct", "@")
            label = self.expect("str")
            return AttackTree(label, refinement, tuple(children))
        self.error("expected a quoted label or OR/AND")


def _quote(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_tree(tree: AttackTree) -> str:
    """Render a tree in the DSL; parse_tree(serialize_tree(t)) == t."""
    if tree.is_leaf:
        return _quote(tree.label)
    inner = ", ".join(serialize_tree(c) for c in tree.children)
    return f"{tree.refinement.value}({inner})@{_quote(tree.label)}"


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------

def tree_from_json(data) -> AttackTree:
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise TreeSyntaxError("tree JSON must be an object")
    try:
        label = data["label"]
    except KeyError:
        raise TreeSyntaxError("tree node missing 'label'") from None
    if not isinstance(label, str):
        raise TreeSyntaxError(f"label must be a string, got {type(label).__name__}")
    kind = data.get("refinement", "LEAF")
    try:
        refinement = Refinement(kind)
    except ValueError:
        raise TreeSyntaxError(f"unknown refinement {kind!r}") from None
    children = tuple(tree_from_json(c) for c in data.get("children", []))
    if refinement is not Refinement.LEAF and not children:
        raise TreeSyntaxError(f"{kind} node {label!r} has no children")
    if refinement is Refinement.LEAF and children:
        raise TreeSyntaxError(f"LEAF node {label!r} has children")
    return AttackTree(label, refinement, children)


def tree_to_json(tree: AttackTree) -> dict:
    return {
        "label": tree.label,
        "refinement": tree.refinement.value,
        "children": [tree_to_json(c) for c in tree.children],
    }


def parse_tree(source: str) -> AttackTree:
    """Parse either accepted format, sniffed from the first non-blank character."""
    stripped = source.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise TreeSyntaxError(exc.msg, exc.lineno, exc.colno) from None
        return tree_from_json(data)
    return _DslParser(source).parse()
