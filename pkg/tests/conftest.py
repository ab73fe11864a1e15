"""
Shared fixtures: shipped grammars, program spaces and stub compilers.
"""
import json
from pathlib import Path

import pytest

from src.core.enumerator import Enumeration
from src.core.harness import LanguageConfig
from src.core.sampler import ProgramSpace
from src.core.treegrammar import RenderRules, compile_to_rtg
from src.utils.parser import load_grammar, parse_grammar

ROOT = Path(__file__).resolve().parent.parent
GRAMMARS = ROOT / "grammars"
CONFIGS = ROOT / "configs"
STUBS = Path(__file__).resolve().parent / "stubs"


def space_of(text: str, separator: str = " ") -> ProgramSpace:
    return ProgramSpace(Enumeration(compile_to_rtg(parse_grammar(text))), RenderRules(separator=separator))


@pytest.fixture
def paren_grammar():
    return load_grammar(GRAMMARS / "paren.cqg")


@pytest.fixture
def binary_grammar():
    return load_grammar(GRAMMARS / "binary.cqg")


@pytest.fixture
def minilang_grammar():
    return load_grammar(GRAMMARS / "minilang.cqg")


@pytest.fixture
def paren_enum(paren_grammar):
    return Enumeration(compile_to_rtg(paren_grammar))


@pytest.fixture
def binary_enum(binary_grammar):
    return Enumeration(compile_to_rtg(binary_grammar))


@pytest.fixture
def minilang_space(minilang_grammar):
    return ProgramSpace(Enumeration(compile_to_rtg(minilang_grammar)))


@pytest.fixture
def stub_config():
    """Factory for a LanguageConfig running one of tests/stubs/<name>.py through the current interpreter."""

    def make(stub: str, timeout: float = 20.0, **fields) -> LanguageConfig:
        return LanguageConfig(
            name=fields.pop("name", stub),
            file_extension=fields.pop("file_extension", "txt"),
            compile_command=("{python}", str(STUBS / f"{stub}.py"), "{file}"),
            timeout=timeout,
            **fields,
        )

    return make


@pytest.fixture
def stub_config_file(tmp_path):
    """Factory writing a language config file for a stub compiler; returns its path."""

    def make(stub: str, name: str = "stub", command=None) -> Path:
        path = tmp_path / f"{stub}.json"
        data = {
            "language": {
                "name": name,
                "extension": "txt",
                "command": command or ["{python}", str(STUBS / f"{stub}.py"), "{file}"],
                "timeout_seconds": 20,
            },
            "render": {"separator": " ", "no_space": []},
        }
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return make
