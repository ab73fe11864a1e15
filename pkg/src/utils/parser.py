import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import lark
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from src.core.errors import GrammarDefinitionError, GrammarSyntaxError
from src.core.grammar import Grammar, Group, Item, Nonterminal, Terminal, desugar

logger = logging.getLogger(__name__)


# The start directive is `start NAME ;`, so `start` is also a valid rule name.
CQG_GRAMMAR = r"""
    grammar_file : statement*

    ?statement : rule
               | start_directive

    start_directive : NAME NAME ";"
    rule : NAME ":" alternatives ";"

    alternatives : sequence ("|" sequence)*
    sequence : item*
    item : atom QUANTIFIER?

    atom : NAME                   -> nonterminal
         | STRING                 -> terminal
         | "(" alternatives ")"   -> group

    QUANTIFIER : "?" | "*" | "+"
    NAME : /[A-Za-z_][A-Za-z0-9_]*/
    STRING : /"(?:[^"\\\n]|\\.)*"/
    COMMENT : /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_PARSER = lark.Lark(CQG_GRAMMAR, start="grammar_file", parser="lalr")

_UNESCAPE = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}

_TOKEN_NAMES = {
    "SEMICOLON": "';'", "COLON": "':'", "VBAR": "'|'", "LPAR": "'('", "RPAR": "')'",
    "NAME": "a name", "STRING": "a string literal", "QUANTIFIER": "'?', '*' or '+'",
    "$END": "end of input",
}


def decode_literal(token: lark.Token) -> str:
    """Strip quotes and resolve the \\" \\\\ \\n \\t escapes of a STRING token."""
    body = token.value[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            code = body[i + 1]
            if code not in _UNESCAPE:
                raise GrammarSyntaxError(f"unknown escape '\\{code}'", token.line, token.column + i + 1)
            out.append(_UNESCAPE[code])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _CqgTransformer(lark.Transformer):
    def __init__(self):
        super().__init__()
        self.references: List[Tuple[str, int]] = []

    def nonterminal(self, children) -> Nonterminal:
        token = children[0]
        self.references.append((token.value, token.line))
        return Nonterminal(name=token.value)

    def terminal(self, children) -> Terminal:
        return Terminal(literal=decode_literal(children[0]))

    def group(self, children) -> Group:
        return Group(alternatives=children[0])

    def item(self, children) -> Item:
        atom = children[0]
        if len(children) == 1:
            return atom
        quantifier = children[1].value
        if isinstance(atom, Group) and atom.quantifier is None:
            return Group(alternatives=atom.alternatives, quantifier=quantifier)
        return Group(alternatives=((atom,),), quantifier=quantifier)

    def sequence(self, children) -> Tuple[Item, ...]:
        return tuple(children)

    def alternatives(self, children) -> Tuple[Tuple[Item, ...], ...]:
        return tuple(children)

    def rule(self, children):
        name, alternatives = children
        return ("rule", name.value, alternatives, name.line)

    def start_directive(self, children):
        keyword, name = children
        if keyword.value != "start":
            raise GrammarSyntaxError(
                f"unexpected {keyword.value!r}; expected 'start' or a rule", keyword.line, keyword.column
            )
        return ("start", name.value, None, name.line)

    def grammar_file(self, children):
        return list(children)


def _syntax_error(text: str, exc: UnexpectedInput) -> GrammarSyntaxError:
    at_end = isinstance(exc, UnexpectedEOF) or (
        isinstance(exc, UnexpectedToken) and exc.token.type == "$END"
    )
    if at_end:
        lines = text.split("\n")
        line, column = len(lines), len(lines[-1]) + 1
        where = "syntax error at end of input"
    else:
        line, column = exc.line, exc.column
        if isinstance(exc, UnexpectedCharacters):
            where = f"syntax error: unexpected character {text[exc.pos_in_stream]!r}"
        else:
            where = f"syntax error: unexpected {exc.token.value!r}"

    expected = sorted(getattr(exc, "expected", None) or getattr(exc, "allowed", None) or [])
    if expected:
        where += "; expected " + ", ".join(_TOKEN_NAMES.get(name, name) for name in expected)
    return GrammarSyntaxError(where, line, column)


def parse_grammar(text: str) -> Grammar:
    """
    Parse a `.cqg` grammar file into a Grammar, keeping source order of rules,
    alternatives and symbols. EBNF sugar is kept; call `desugar` to remove it.
    """
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as e:
        raise _syntax_error(text, e) from None

    transformer = _CqgTransformer()
    try:
        statements = transformer.transform(tree)
    except VisitError as e:
        raise e.orig_exc from None

    rules: List[Tuple[str, Tuple[Item, ...]]] = []
    defined: Dict[str, int] = {}
    start: Union[str, None] = None
    start_line = None
    for kind, name, alternatives, line in statements:
        if kind == "start":
            if start is not None:
                raise GrammarDefinitionError(f"second start directive '{name}'", line)
            start, start_line = name, line
            continue
        if name in defined:
            raise GrammarDefinitionError(
                f"duplicate definition of '{name}' (first defined on line {defined[name]})", line
            )
        defined[name] = line
        rules.extend((name, alt) for alt in alternatives)

    if not defined:
        raise GrammarDefinitionError("grammar defines no rules")
    for name, line in transformer.references:
        if name not in defined:
            raise GrammarDefinitionError(f"reference to undefined symbol '{name}'", line)
    if start is None:
        start = next(iter(defined))
    elif start not in defined:
        raise GrammarDefinitionError(f"start symbol '{start}' is not defined", start_line)

    return Grammar.from_rules(start, rules)


def load_grammar(path: Union[str, Path]) -> Grammar:
    """Read, parse and desugar a grammar file."""
    path = Path(path)
    grammar = desugar(parse_grammar(path.read_text(encoding="utf-8")))
    logger.info(f"Loaded grammar {path.name}: {len(grammar.nonterminals)} nonterminals, "
                f"{len(grammar.productions)} productions")
    return grammar
