from pathlib import Path

import pytest

from coevo.grammar import parse_grammar

FIXTURES = Path(__file__).parent / "fixtures" / "domainmodel"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def grammar_v1_text() -> str:
    return (FIXTURES / "grammar_v1.xtext").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def grammar_v2_text() -> str:
    return (FIXTURES / "grammar_v2.xtext").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def grammar_v1(grammar_v1_text):
    return parse_grammar(grammar_v1_text)


@pytest.fixture(scope="session")
def grammar_v2(grammar_v2_text):
    return parse_grammar(grammar_v2_text)


@pytest.fixture(scope="session")
def instance_v1() -> str:
    return (FIXTURES / "instance_v1.dmodel").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def instance_migrated() -> str:
    return (FIXTURES / "instance_v1_migrated.dmodel").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def instance_flat() -> str:
    return (FIXTURES / "instance_v2_flat.dmodel").read_text(encoding="utf-8")
