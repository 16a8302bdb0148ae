"""Raw 31x13 semantic matrix construction and lossless 18x13 reduction.

Reduction concatenates each group's member rows into one row: member
attributes keep schema order and receive consecutive column offsets sized
by their rules' declared widths, so the layout is record-independent and
the raw matrix can be reconstructed exactly (`unreduce`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlanOverflow, ShapeError
from .ingest import ATTRIBUTE_COUNT, GROUP_COUNT, PersonRecord, Schema
from .rules import SLOTS, RuleSet, evaluate

RAW_ROWS = ATTRIBUTE_COUNT
REDUCED_ROWS = GROUP_COUNT


@dataclass(frozen=True)
class SemanticMatrix:
    data: np.ndarray          # (31, 13) raw or (18, 13) reduced
    form: str                 # "raw" | "reduced"
    provenance: dict | None = None  # reduced: (row, col) -> (attr, slot)

    def __post_init__(self):
        expected = RAW_ROWS if self.form == "raw" else REDUCED_ROWS
        if self.data.shape != (expected, SLOTS):
            raise ShapeError(
                f"{self.form} matrix must be {expected}x{SLOTS}, got "
                f"{self.data.shape}")
        if np.any(self.data < 0) or np.any(self.data > 1):
            raise ShapeError("matrix entries must lie in [0, 1]")


@dataclass(frozen=True)
class GroupMember:
    attribute: int   # schema attribute index
    offset: int      # starting column in the group row
    length: int      # declared emitted width of the attribute's rule


@dataclass(frozen=True)
class GroupingPlan:
    groups: tuple    # 18 tuples of GroupMember, band order minor/major/symptom


def build_plan(schema: Schema, rules: RuleSet) -> GroupingPlan:
    """Column layout for the reduction, derived from declared rule widths."""
    groups = []
    for group in schema.groups:
        members = []
        offset = 0
        for attr_index in group.members:
            rule = rules.rules[attr_index]
            length = rule.emitted_length
            members.append(GroupMember(attribute=attr_index, offset=offset,
                                       length=length))
            offset += length
        if offset > SLOTS:
            raise PlanOverflow(
                f"group {group.index} needs {offset} slots, only {SLOTS} "
                "available")
        groups.append(tuple(members))
    return GroupingPlan(groups=tuple(groups))


def build_raw_matrix(record: PersonRecord, rules: RuleSet,
                     schema: Schema) -> SemanticMatrix:
    return SemanticMatrix(data=evaluate(rules, record), form="raw")


def reduce_matrix(raw: SemanticMatrix, plan: GroupingPlan) -> SemanticMatrix:
    if raw.form != "raw":
        raise ShapeError("reduce expects a raw matrix")
    data = np.zeros((REDUCED_ROWS, SLOTS))
    provenance = {}
    for row, members in enumerate(plan.groups):
        for m in members:
            data[row, m.offset:m.offset + m.length] = \
                raw.data[m.attribute, :m.length]
            for slot in range(m.length):
                provenance[(row, m.offset + slot)] = (m.attribute, slot)
    return SemanticMatrix(data=data, form="reduced", provenance=provenance)


def unreduce(reduced: SemanticMatrix, plan: GroupingPlan) -> SemanticMatrix:
    """Exact inverse of reduce_matrix for matrices produced by it."""
    if reduced.form != "reduced":
        raise ShapeError("unreduce expects a reduced matrix")
    data = np.zeros((RAW_ROWS, SLOTS))
    for row, members in enumerate(plan.groups):
        for m in members:
            data[m.attribute, :m.length] = \
                reduced.data[row, m.offset:m.offset + m.length]
    return SemanticMatrix(data=data, form="raw")


def transform(record: PersonRecord, rules: RuleSet, schema: Schema,
              plan: GroupingPlan) -> SemanticMatrix:
    return reduce_matrix(build_raw_matrix(record, rules, schema), plan)


def transform_batch(records, rules: RuleSet, schema: Schema,
                    plan: GroupingPlan):
    return [transform(r, rules, schema, plan) for r in records]


def dump_matrix(matrix: SemanticMatrix) -> str:
    """Text grid for debugging and golden files: 6 fractional digits."""
    return "\n".join(
        " ".join(f"{x:.6f}" for x in row) for row in matrix.data) + "\n"


def parse_matrix(text: str, form: str) -> SemanticMatrix:
    rows = [np.array([float(x) for x in line.split()])
            for line in text.strip().splitlines()]
    return SemanticMatrix(data=np.stack(rows), form=form)
