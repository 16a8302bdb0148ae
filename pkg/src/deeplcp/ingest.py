"""Questionnaire schema, record parsing, and cleaning.

The schema fixes 31 attributes arranged into 18 groups. Groups 0-4 hold
minor risk factors, 5-10 major risk factors, 11-17 symptoms, so the three
category bands have sizes 5/6/7. Records are CSV rows aligned with the
schema; cleaning standardizes case/whitespace, fixes known typos, and
drops irrelevant markers.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

from .errors import CleaningError, HeaderMismatch, SchemaError

UNKNOWN = "unknown"
LABEL_COLUMN = "label"
LABELS = ("affected", "unaffected")

CATEGORIES = ("minor_risk", "major_risk", "symptom")
THEMES = ("thoracic_signs", "cough", "feeding", "consumer",
          "personal_history", "residence")

ATTRIBUTE_COUNT = 31
GROUP_COUNT = 18
# group index range per category: minor 0-4, major 5-10, symptom 11-17
CATEGORY_BANDS = {
    "minor_risk": range(0, 5),
    "major_risk": range(5, 11),
    "symptom": range(11, 18),
}


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str                      # "categorical" | "numeric"
    values: tuple = ()             # categorical: allowed values (unknown implied)
    lo: float = 0.0                # numeric: half-open range [lo, hi)
    hi: float = 0.0
    category: str = ""
    theme: str = ""
    group: int = -1

    def is_valid(self, value: str) -> bool:
        if value == UNKNOWN:
            return True
        if self.kind == "categorical":
            return value in self.values
        try:
            x = float(value)
        except ValueError:
            return False
        return self.lo <= x < self.hi


@dataclass(frozen=True)
class GroupSpec:
    index: int
    category: str
    members: tuple    # attribute indices in schema order


@dataclass(frozen=True)
class Schema:
    attributes: tuple
    groups: tuple

    def attribute_index(self, name: str) -> int:
        return self._index[name]

    def __post_init__(self):
        object.__setattr__(self, "_index",
                           {a.name: i for i, a in enumerate(self.attributes)})

    @property
    def names(self):
        return [a.name for a in self.attributes]


@dataclass(frozen=True)
class PersonRecord:
    values: tuple            # 31 strings, schema order
    label: str | None = None


@dataclass
class ParseIssue:
    line: int
    message: str


@dataclass(frozen=True)
class CleaningConfig:
    irrelevant_markers: frozenset
    typo_dictionary: dict
    case_policy: str = "lower"        # lower | upper | keep
    whitespace_policy: str = "strip"  # strip | collapse | keep


_BLOCK_HEAD = re.compile(r"^(\w+)\s+(\w+)?\s*\{$")
_RANGE = re.compile(r"^\[\s*([-\d.]+)\s*,\s*([-\d.]+|inf)\s*\)$")


def _read_blocks(text: str, path: str = "<schema>"):
    """Yield (kind, name, {key: (value, line)}, head_line) blocks.

    Grammar: `<kind> [<name>] {` then `key: value` lines then `}`.
    Blank lines and `#` comments are skipped.
    """
    lines = text.splitlines()
    i = 0
    n = len(lines)
    while i < n:
        raw = lines[i]
        stripped = raw.split("#", 1)[0].strip()
        i += 1
        if not stripped:
            continue
        m = _BLOCK_HEAD.match(stripped)
        if not m:
            raise SchemaError(f"expected block header, found {stripped!r}",
                              line=i)
        kind, name = m.group(1), m.group(2)
        head_line = i
        body = {}
        closed = False
        while i < n:
            inner = lines[i].split("#", 1)[0].strip()
            i += 1
            if not inner:
                continue
            if inner == "}":
                closed = True
                break
            if ":" not in inner:
                raise SchemaError(f"expected 'key: value', found {inner!r}",
                                  line=i)
            key, value = inner.split(":", 1)
            body[key.strip()] = (value.strip(), i)
        if not closed:
            raise SchemaError("unclosed block", line=head_line)
        yield kind, name, body, head_line


def parse_schema(text: str) -> Schema:
    attributes = []
    seen = set()
    for kind, name, body, head_line in _read_blocks(text):
        if kind != "attribute":
            raise SchemaError(f"unknown block kind {kind!r}", line=head_line)
        if not name:
            raise SchemaError("attribute block needs a name", line=head_line)
        if name in seen:
            raise SchemaError(f"duplicate attribute name {name!r}",
                              line=head_line, field=name)
        seen.add(name)

        def need(key):
            if key not in body:
                raise SchemaError(f"missing key {key!r}", line=head_line,
                                  field=name)
            return body[key]

        akind, line = need("kind")
        if akind not in ("categorical", "numeric"):
            raise SchemaError(f"bad kind {akind!r}", line=line, field=name)
        category, line = need("category")
        if category not in CATEGORIES:
            raise SchemaError(f"bad category {category!r}", line=line,
                              field=name)
        theme, line = need("theme")
        if theme not in THEMES:
            raise SchemaError(f"bad theme {theme!r}", line=line, field=name)
        group_text, line = need("group")
        try:
            group = int(group_text)
        except ValueError:
            raise SchemaError(f"bad group index {group_text!r}", line=line,
                              field=name)
        if not 0 <= group < GROUP_COUNT:
            raise SchemaError(f"group index {group} out of range", line=line,
                              field=name)

        values: tuple = ()
        lo = hi = 0.0
        if akind == "categorical":
            raw, line = need("values")
            values = tuple(v.strip() for v in raw.split(",") if v.strip())
            if not values:
                raise SchemaError("empty values list", line=line, field=name)
            if UNKNOWN in values:
                raise SchemaError(f"{UNKNOWN!r} is reserved", line=line,
                                  field=name)
        else:
            raw, line = need("range")
            m = _RANGE.match(raw)
            if not m:
                raise SchemaError(f"bad range {raw!r}", line=line, field=name)
            lo = float(m.group(1))
            hi = float("inf") if m.group(2) == "inf" else float(m.group(2))
            if not lo < hi:
                raise SchemaError("empty range", line=line, field=name)

        attributes.append(AttributeSpec(
            name=name, kind=akind, values=values, lo=lo, hi=hi,
            category=category, theme=theme, group=group))

    if len(attributes) != ATTRIBUTE_COUNT:
        raise SchemaError(
            f"attribute count is {len(attributes)}, expected "
            f"{ATTRIBUTE_COUNT}")

    members = [[] for _ in range(GROUP_COUNT)]
    for i, attr in enumerate(attributes):
        band = CATEGORY_BANDS[attr.category]
        if attr.group not in band:
            raise SchemaError(
                f"band violation: {attr.category} attribute in group "
                f"{attr.group}", field=attr.name)
        members[attr.group].append(i)

    groups = []
    for g in range(GROUP_COUNT):
        if not members[g]:
            raise SchemaError(f"group {g} is empty")
        if len(members[g]) > 13:
            raise SchemaError(f"group {g} holds more than 13 attributes")
        category = next(c for c, band in CATEGORY_BANDS.items() if g in band)
        groups.append(GroupSpec(index=g, category=category,
                                members=tuple(members[g])))

    return Schema(attributes=tuple(attributes), groups=tuple(groups))


def load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return parse_schema(fh.read())


def parse_records_text(text: str, schema: Schema):
    """Parse CSV text into records and per-row issues."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch("empty file, expected header row")
    header = [h.strip() for h in header]
    has_label = header and header[-1] == LABEL_COLUMN
    expected = schema.names + ([LABEL_COLUMN] if has_label else [])
    if header != expected:
        raise HeaderMismatch(
            f"header {header!r} does not match schema attribute names")
    width = len(expected)

    records, issues = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            issues.append(ParseIssue(
                line=lineno,
                message=f"expected {width} fields, found {len(row)}"))
            continue
        label = None
        values = row
        if has_label:
            label = row[-1].strip()
            values = row[:-1]
            if label not in LABELS:
                issues.append(ParseIssue(
                    line=lineno, message=f"bad label {label!r}"))
                continue
        records.append(PersonRecord(values=tuple(v.strip() for v in values),
                                    label=label))
    return records, issues


def parse_records(path, schema: Schema):
    with open(path, encoding="utf-8") as fh:
        return parse_records_text(fh.read(), schema)


def serialize_records(records, schema: Schema) -> str:
    """Inverse of parse_records_text; includes a label column iff any
    record is labeled."""
    has_label = any(r.label is not None for r in records)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(schema.names + ([LABEL_COLUMN] if has_label else []))
    for r in records:
        row = list(r.values)
        if has_label:
            row.append(r.label if r.label is not None else "")
        writer.writerow(row)
    return out.getvalue()


_WS = re.compile(r"\s+")


def _standardize(value: str, cfg: CleaningConfig) -> str:
    if cfg.whitespace_policy == "strip":
        value = value.strip()
    elif cfg.whitespace_policy == "collapse":
        value = _WS.sub(" ", value).strip()
    if cfg.case_policy == "lower":
        value = value.lower()
    elif cfg.case_policy == "upper":
        value = value.upper()
    return value


def clean_value(value: str, cfg: CleaningConfig) -> str:
    # fixed pass order: standardize, then typo-fix, then irrelevant-drop
    value = _standardize(value, cfg)
    value = cfg.typo_dictionary.get(value, value)
    if value in cfg.irrelevant_markers or value == "":
        value = UNKNOWN
    return value


def clean_record(record: PersonRecord, cfg: CleaningConfig,
                 schema: Schema) -> PersonRecord:
    if len(record.values) != ATTRIBUTE_COUNT:
        raise CleaningError("<record>", f"{len(record.values)} values")
    cleaned = []
    for attr, value in zip(schema.attributes, record.values):
        v = clean_value(value, cfg)
        if not attr.is_valid(v):
            raise CleaningError(attr.name, value)
        cleaned.append(v)
    return PersonRecord(values=tuple(cleaned), label=record.label)


def parse_cleaning(text: str, schema: Schema | None = None) -> CleaningConfig:
    markers = set()
    typos = {}
    case_policy, ws_policy = "lower", "strip"
    for kind, _name, body, head_line in _read_blocks(text):
        if kind == "standardize":
            if "case" in body:
                case_policy = body["case"][0]
            if "whitespace" in body:
                ws_policy = body["whitespace"][0]
            if case_policy not in ("lower", "upper", "keep"):
                raise SchemaError(f"bad case policy {case_policy!r}",
                                  line=head_line)
            if ws_policy not in ("strip", "collapse", "keep"):
                raise SchemaError(f"bad whitespace policy {ws_policy!r}",
                                  line=head_line)
        elif kind == "irrelevant":
            raw, _line = body.get("markers", ("", head_line))
            markers.update(m.strip() for m in raw.split(",") if m.strip())
        elif kind == "typos":
            for key, (value, line) in body.items():
                # stored as `wrong: right` key/value lines
                typos[key] = value
        else:
            raise SchemaError(f"unknown block kind {kind!r}", line=head_line)

    if schema is not None:
        valid = {UNKNOWN}
        for attr in schema.attributes:
            valid.update(attr.values)
        for wrong, right in typos.items():
            numeric_ok = re.fullmatch(r"-?\d+(\.\d+)?", right)
            if right not in valid and not numeric_ok:
                raise SchemaError(
                    f"typo replacement {right!r} is not schema-valid",
                    field=wrong)
    return CleaningConfig(irrelevant_markers=frozenset(markers),
                          typo_dictionary=typos,
                          case_policy=case_policy,
                          whitespace_policy=ws_policy)


def load_cleaning(path, schema: Schema | None = None) -> CleaningConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_cleaning(fh.read(), schema)
