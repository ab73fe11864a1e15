"""
Integration fixtures: full campaigns against real checkers and compilers.
"""
import shutil

import pytest

from src.core.enumerator import Enumeration
from src.core.sampler import ProgramSpace
from src.core.treegrammar import compile_to_rtg
from src.utils.parser import load_grammar
from tests.conftest import GRAMMARS

WORKERS = 8


@pytest.fixture(scope="session")
def shared_minilang_space():
    """One program space for the whole session; its tables only grow."""
    return ProgramSpace(Enumeration(compile_to_rtg(load_grammar(GRAMMARS / "minilang.cqg"))))


@pytest.fixture
def gcc():
    path = shutil.which("gcc")
    if path is None:
        pytest.skip("gcc not installed")
    return path
