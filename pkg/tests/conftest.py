import pytest

from deeplcp.defaults import (default_cleaning, default_ruleset,
                              default_schema)
from deeplcp.ingest import UNKNOWN, PersonRecord
from deeplcp.semantic import build_plan


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def rules(schema):
    return default_ruleset(schema)


@pytest.fixture(scope="session")
def plan(schema, rules):
    return build_plan(schema, rules)


@pytest.fixture(scope="session")
def cleaning(schema):
    return default_cleaning(schema)


@pytest.fixture(scope="session")
def fixture_record(schema):
    """Sparse record used by the golden-matrix tests: five answered
    attributes, everything else unknown."""
    values = [UNKNOWN] * len(schema.attributes)
    answers = {"age": "55", "gender": "male", "smoking_status": "current",
               "cigarettes_per_day": "25", "blood_in_sputum": "yes"}
    for name, value in answers.items():
        values[schema.attribute_index(name)] = value
    return PersonRecord(values=tuple(values))
