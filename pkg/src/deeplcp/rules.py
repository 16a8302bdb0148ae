"""Semantic-transformation rule DSL: parser and evaluator.

A ruleset assigns every questionnaire attribute an incidence-weight rule.
Concrete syntax (one rule per attribute)::

    rule gender {
      attribute: gender;
      map: "male" -> 0.65; "female" -> 0.35;
      default -> 0.0
    }

Arms are either quoted categorical values or half-open numeric intervals
``[lo, hi)`` (``inf`` allowed as upper bound); each maps to 1..13 weights
in [0, 1] that fill the leading word slots of the attribute's matrix row.
Parsing is total: malformed input yields line-anchored diagnostics, never
an exception.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DeepLcpError, ValueParseError
from .ingest import ATTRIBUTE_COUNT, UNKNOWN, PersonRecord, Schema

SLOTS = 13  # word slots per matrix row


@dataclass(frozen=True)
class CategoricalArm:
    value: str
    weights: tuple


@dataclass(frozen=True)
class NumericArm:
    lo: float
    hi: float  # half-open [lo, hi); hi may be inf
    weights: tuple

    def contains(self, x: float) -> bool:
        return self.lo <= x < self.hi


@dataclass(frozen=True)
class Rule:
    name: str
    attribute: str
    numeric: bool
    arms: tuple
    default_weights: tuple
    category: str = ""
    theme: str = ""

    @property
    def emitted_length(self) -> int:
        """Declared row width: the longest weight sequence of any arm.

        Layout-relevant, so it depends only on the rule text, never on a
        runtime value.
        """
        return max([len(self.default_weights)]
                   + [len(a.weights) for a in self.arms])


@dataclass(frozen=True)
class RuleSet:
    rules: tuple  # schema attribute order

    def rule_for(self, attribute: str) -> Rule:
        return self._by_attr[attribute]

    def __post_init__(self):
        object.__setattr__(self, "_by_attr",
                           {r.attribute: r for r in self.rules})


@dataclass
class Diagnostic:
    line: int
    code: str      # SyntaxError | DuplicateRule | UnknownAttribute |
                   # CoverageError | WeightRangeError | OverlappingIntervals
    message: str

    def __str__(self):
        return f"line {self.line}: {self.code}: {self.message}"


@dataclass
class ParseResult:
    ruleset: RuleSet | None
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.ruleset is not None and not self.diagnostics


class RuleParseFailure(DeepLcpError):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics[:5]))


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>->)
  | (?P<punct>[{};:,\[\)])
  | (?P<number>-?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)
  | (?P<string>"[^"\n]*")
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<bad>.)
""", re.VERBOSE)


@dataclass
class Token:
    kind: str   # arrow | punct | number | string | ident | eof | bad
    text: str
    line: int


def _tokenize(text: str):
    tokens = []
    line = 1
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            continue
        if kind in ("ws", "comment"):
            continue
        tokens.append(Token(kind, m.group(), line))
    tokens.append(Token("eof", "", line))
    return tokens


# ------------------------------------------------------------------ parser

class _Parser:
    """Recursive descent over the token stream with panic-mode recovery:
    on error inside a rule, skip to the next top-level `rule` keyword."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = []

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, expected: str, code: str = "SyntaxError"):
        found = self.cur.text or "end of input"
        self.diagnostics.append(Diagnostic(
            self.cur.line, code, f"expected {expected}, found {found!r}"))

    def expect(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.cur
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        self.error(text or kind)
        return None

    def sync_to_rule(self):
        while not (self.cur.kind == "eof"
                   or (self.cur.kind == "ident" and self.cur.text == "rule")):
            self.advance()

    def parse(self):
        rules = []
        while self.cur.kind != "eof":
            if self.cur.kind == "ident" and self.cur.text == "rule":
                rule = self.parse_rule()
                if rule is not None:
                    rules.append(rule)
                else:
                    self.sync_to_rule()
            else:
                self.error("'rule'")
                self.advance()
                self.sync_to_rule()
        return rules

    def parse_rule(self) -> Rule | None:
        self.expect("ident", "rule")
        name_tok = self.cur
        if name_tok.kind != "ident":
            self.error("rule name")
            return None
        self.advance()
        if self.expect("punct", "{") is None:
            return None

        attribute = None
        arms = []
        default_weights = None
        arm_kinds = set()

        while True:
            tok = self.cur
            if tok.kind == "punct" and tok.text == "}":
                self.advance()
                break
            if tok.kind == "punct" and tok.text == ";":
                self.advance()
                continue
            if tok.kind == "eof":
                self.error("'}'")
                return None
            if tok.kind == "ident" and tok.text == "attribute":
                self.advance()
                if self.expect("punct", ":") is None:
                    return None
                attr_tok = self.cur
                if attr_tok.kind != "ident":
                    self.error("attribute name")
                    return None
                if attribute is not None:
                    self.diagnostics.append(Diagnostic(
                        attr_tok.line, "SyntaxError",
                        f"rule {name_tok.text!r} sets attribute twice"))
                attribute = attr_tok.text
                self.advance()
            elif tok.kind == "ident" and tok.text == "map":
                self.advance()
                if self.expect("punct", ":") is None:
                    return None
                # arms follow, separated by ';', until a non-arm token
            elif tok.kind == "ident" and tok.text == "default":
                self.advance()
                if self.expect("arrow") is None:
                    return None
                weights = self.parse_weights(name_tok.text)
                if weights is None:
                    return None
                if default_weights is not None:
                    self.diagnostics.append(Diagnostic(
                        tok.line, "SyntaxError",
                        f"rule {name_tok.text!r} has two default arms"))
                default_weights = weights
            elif tok.kind == "string":
                arm = self.parse_categorical_arm(name_tok.text)
                if arm is None:
                    return None
                arms.append(arm)
                arm_kinds.add("categorical")
            elif tok.kind == "punct" and tok.text == "[":
                arm = self.parse_numeric_arm(name_tok.text)
                if arm is None:
                    return None
                arms.append(arm)
                arm_kinds.add("numeric")
            else:
                self.error("'attribute', 'map', 'default', an arm, or '}'")
                return None

        if attribute is None:
            self.diagnostics.append(Diagnostic(
                name_tok.line, "SyntaxError",
                f"rule {name_tok.text!r} names no attribute"))
            return None
        if default_weights is None:
            self.diagnostics.append(Diagnostic(
                name_tok.line, "SyntaxError",
                f"rule {name_tok.text!r} has no default arm"))
            return None
        if len(arm_kinds) > 1:
            self.diagnostics.append(Diagnostic(
                name_tok.line, "SyntaxError",
                f"rule {name_tok.text!r} mixes categorical and numeric "
                "arms"))
            return None

        numeric = arm_kinds == {"numeric"}
        if numeric:
            arms = sorted(arms, key=lambda a: a.lo)
            for a, b in zip(arms, arms[1:]):
                if b.lo < a.hi:
                    self.diagnostics.append(Diagnostic(
                        name_tok.line, "OverlappingIntervals",
                        f"rule {name_tok.text!r}: intervals "
                        f"[{a.lo}, {a.hi}) and [{b.lo}, {b.hi}) overlap"))
                    return None
        else:
            seen = set()
            for a in arms:
                if a.value in seen:
                    self.diagnostics.append(Diagnostic(
                        name_tok.line, "SyntaxError",
                        f"rule {name_tok.text!r}: duplicate arm for "
                        f"{a.value!r}"))
                    return None
                seen.add(a.value)

        return Rule(name=name_tok.text, attribute=attribute, numeric=numeric,
                    arms=tuple(arms), default_weights=default_weights)

    def parse_weights(self, rule_name: str) -> tuple | None:
        weights = []
        while True:
            tok = self.cur
            if tok.kind != "number":
                self.error("weight")
                return None
            w = float(tok.text)
            if not 0.0 <= w <= 1.0:
                self.diagnostics.append(Diagnostic(
                    tok.line, "WeightRangeError",
                    f"rule {rule_name!r}: weight {tok.text} outside [0, 1]"))
                return None
            weights.append(w)
            self.advance()
            if self.cur.kind == "punct" and self.cur.text == ",":
                self.advance()
                continue
            break
        if len(weights) > SLOTS:
            self.diagnostics.append(Diagnostic(
                tok.line, "WeightRangeError",
                f"rule {rule_name!r}: {len(weights)} weights exceed "
                f"{SLOTS} slots"))
            return None
        return tuple(weights)

    def parse_categorical_arm(self, rule_name: str):
        tok = self.expect("string")
        if tok is None:
            return None
        if self.expect("arrow") is None:
            return None
        weights = self.parse_weights(rule_name)
        if weights is None:
            return None
        return CategoricalArm(value=tok.text[1:-1], weights=weights)

    def parse_numeric_arm(self, rule_name: str):
        if self.expect("punct", "[") is None:
            return None
        lo_tok = self.cur
        if lo_tok.kind != "number":
            self.error("interval lower bound")
            return None
        self.advance()
        if self.expect("punct", ",") is None:
            return None
        hi_tok = self.cur
        if hi_tok.kind == "number":
            hi = float(hi_tok.text)
        elif hi_tok.kind == "ident" and hi_tok.text == "inf":
            hi = math.inf
        else:
            self.error("interval upper bound")
            return None
        self.advance()
        if self.expect("punct", ")") is None:
            return None
        if self.expect("arrow") is None:
            return None
        weights = self.parse_weights(rule_name)
        if weights is None:
            return None
        lo = float(lo_tok.text)
        if not lo < hi:
            self.diagnostics.append(Diagnostic(
                lo_tok.line, "SyntaxError",
                f"rule {rule_name!r}: empty interval [{lo}, {hi})"))
            return None
        return NumericArm(lo=lo, hi=hi, weights=weights)


def parse_ruleset(text: str, schema: Schema) -> ParseResult:
    """Parse rule-DSL source against a schema. Total: returns diagnostics
    instead of raising, and a RuleSet only when the text is fully valid."""
    parser = _Parser(_tokenize(text))
    parsed = parser.parse()
    diagnostics = parser.diagnostics

    by_attr = {}
    names = set(schema.names)
    for rule in parsed:
        if rule.attribute not in names:
            diagnostics.append(Diagnostic(
                0, "UnknownAttribute",
                f"rule {rule.name!r} targets unknown attribute "
                f"{rule.attribute!r}"))
            continue
        if rule.attribute in by_attr:
            diagnostics.append(Diagnostic(
                0, "DuplicateRule",
                f"attribute {rule.attribute!r} has more than one rule"))
            continue
        spec = schema.attributes[schema.attribute_index(rule.attribute)]
        if rule.arms and rule.numeric != (spec.kind == "numeric"):
            diagnostics.append(Diagnostic(
                0, "SyntaxError",
                f"rule {rule.name!r}: arm kind does not match "
                f"{spec.kind} attribute {rule.attribute!r}"))
            continue
        by_attr[rule.attribute] = Rule(
            name=rule.name, attribute=rule.attribute, numeric=rule.numeric,
            arms=rule.arms, default_weights=rule.default_weights,
            category=spec.category, theme=spec.theme)

    missing = [n for n in schema.names if n not in by_attr]
    if missing:
        diagnostics.append(Diagnostic(
            0, "CoverageError",
            "no rule for attribute(s): " + ", ".join(missing)))

    if diagnostics:
        return ParseResult(ruleset=None, diagnostics=diagnostics)
    ordered = tuple(by_attr[n] for n in schema.names)
    assert len(ordered) == ATTRIBUTE_COUNT
    return ParseResult(ruleset=RuleSet(rules=ordered), diagnostics=[])


def load_ruleset(path, schema: Schema) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        result = parse_ruleset(fh.read(), schema)
    if result.ruleset is None:
        raise RuleParseFailure(result.diagnostics)
    return result.ruleset


# ------------------------------------------------------------ pretty print

def _fmt_weights(weights) -> str:
    return ", ".join(repr(w) for w in weights)


def _fmt_bound(x: float) -> str:
    return "inf" if math.isinf(x) else repr(x)


def pretty_print(ruleset: RuleSet) -> str:
    """Canonical text form; re-parses to an equal RuleSet."""
    out = []
    for rule in ruleset.rules:
        out.append(f"rule {rule.name} {{")
        out.append(f"  attribute: {rule.attribute};")
        if rule.arms:
            arms = []
            for arm in rule.arms:
                if rule.numeric:
                    arms.append(f"[{_fmt_bound(arm.lo)}, {_fmt_bound(arm.hi)})"
                                f" -> {_fmt_weights(arm.weights)}")
                else:
                    arms.append(f'"{arm.value}" -> {_fmt_weights(arm.weights)}')
            out.append("  map: " + "; ".join(arms) + ";")
        out.append(f"  default -> {_fmt_weights(rule.default_weights)}")
        out.append("}")
        out.append("")
    return "\n".join(out)


# -------------------------------------------------------------- evaluation

def _place(weights) -> np.ndarray:
    vec = np.zeros(SLOTS)
    vec[:len(weights)] = weights
    return vec


def apply_rule(rule: Rule, value: str) -> np.ndarray:
    """Weight vector (13 slots) for one cleaned attribute value.

    "unknown" contributes nothing: it maps to the zero vector regardless
    of the rule's default arm.
    """
    if value == UNKNOWN:
        return np.zeros(SLOTS)
    if rule.numeric:
        try:
            x = float(value)
        except ValueError:
            raise ValueParseError(
                f"attribute {rule.attribute!r}: non-numeric value {value!r}")
        for arm in rule.arms:
            if arm.contains(x):
                return _place(arm.weights)
        return _place(rule.default_weights)
    for arm in rule.arms:
        if arm.value == value:
            return _place(arm.weights)
    return _place(rule.default_weights)


def evaluate(ruleset: RuleSet, record: PersonRecord) -> np.ndarray:
    """31x13 array: row i is the weight vector of attribute i."""
    rows = [apply_rule(rule, value)
            for rule, value in zip(ruleset.rules, record.values)]
    return np.stack(rows)
