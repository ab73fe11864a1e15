"""
Stand-in compiler for the mini-language in grammars/minilang.cqg.

Two variables, abc and xyz, start as int. `int V` and `bit V` retype a variable.
one and two are int literals; `add` takes two ints and yields int, `les` takes
two ints and yields bit. `set V E` needs E to have V's type, `out E` needs E to
type-check. Exit 0 accepts the program, exit 1 rejects it with a diagnostic.
"""
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import lark
from lark.visitors import Interpreter

MINILANG_GRAMMAR = r"""
    start : stmt ("and" stmt)* "end"

    ?stmt : "int" VAR         -> decl_int
          | "bit" VAR         -> decl_bit
          | "set" VAR expr    -> assign
          | "out" expr        -> out

    ?expr : atom
          | "add" atom atom   -> add
          | "les" atom atom   -> les

    ?atom : VAR               -> var
          | NUM               -> num

    VAR : "abc" | "xyz"
    NUM : "one" | "two"

    %import common.WS
    %ignore WS
"""

# Spawned once per compiled program; parse tables are reused from lark's on-disk cache.
_PARSER = lark.Lark(MINILANG_GRAMMAR, parser="lalr", propagate_positions=True, cache=True)


class MiniLangError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class _TypeChecker(Interpreter):
    def __init__(self):
        self.env: Dict[str, str] = {"abc": "int", "xyz": "int"}

    def start(self, tree):
        for stmt in tree.children:
            self.visit(stmt)

    def decl_int(self, tree):
        self.env[tree.children[0].value] = "int"

    def decl_bit(self, tree):
        self.env[tree.children[0].value] = "bit"

    def assign(self, tree):
        name, expr = tree.children
        got, want = self.visit(expr), self.env[name.value]
        if got != want:
            raise MiniLangError(f"cannot assign {got} to {want} variable '{name.value}'", name.line, name.column)

    def out(self, tree):
        self.visit(tree.children[0])

    def var(self, tree):
        return self.env[tree.children[0].value]

    def num(self, tree):
        return "int"

    def _int_operands(self, tree, op: str):
        for atom in tree.children:
            kind = self.visit(atom)
            if kind != "int":
                raise MiniLangError(f"'{op}' expects int operands, got {kind}", atom.meta.line, atom.meta.column)

    def add(self, tree):
        self._int_operands(tree, "add")
        return "int"

    def les(self, tree):
        self._int_operands(tree, "les")
        return "bit"


def check_program(text: str) -> Optional[str]:
    """None when the program is accepted, otherwise the diagnostic."""
    try:
        _TypeChecker().visit(_PARSER.parse(text))
    except lark.exceptions.UnexpectedInput as e:
        return f"{e.line}:{e.column}: syntax error"
    except MiniLangError as e:
        return str(e)
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Check one program file; exit status 0 accepts it, 1 rejects it, 2 is a usage error."""
    args = sys.argv[1:] if argv is None else list(argv)
    if len(args) != 1 or not Path(args[0]).is_file():
        print("usage: minilang_check.py PROGRAM_FILE", file=sys.stderr)
        return 2
    file = Path(args[0])
    error = check_program(file.read_text(encoding="utf-8"))
    if error is not None:
        print(f"{file.name}:{error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
