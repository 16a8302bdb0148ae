"""Access to the shipped default schema, cleaning, and rules files."""

from importlib import resources

from .ingest import CleaningConfig, Schema, parse_cleaning, parse_schema
from .rules import RuleParseFailure, RuleSet, parse_ruleset


def _read(name: str) -> str:
    return (resources.files("deeplcp") / "data" / name).read_text(
        encoding="utf-8")


def default_schema_text() -> str:
    return _read("schema.txt")


def default_rules_text() -> str:
    return _read("rules.txt")


def default_cleaning_text() -> str:
    return _read("cleaning.txt")


def default_schema() -> Schema:
    return parse_schema(default_schema_text())


def default_ruleset(schema: Schema | None = None) -> RuleSet:
    schema = schema or default_schema()
    result = parse_ruleset(default_rules_text(), schema)
    if result.ruleset is None:
        raise RuleParseFailure(result.diagnostics)
    return result.ruleset


def default_cleaning(schema: Schema | None = None) -> CleaningConfig:
    return parse_cleaning(default_cleaning_text(), schema or default_schema())
