import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import EmptyLanguageError
from src.core.grammar import Grammar, Nonterminal, Terminal, desugar, validate


# ----------------------------------------------------------------------
# Regular tree grammar
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class FixedTerminal:
    literal: str


@dataclass(frozen=True)
class Child:
    nonterminal: str


Slot = Union[FixedTerminal, Child]


@dataclass(frozen=True)
class ConstructorRule:
    constructor_name: str
    lhs: str
    ordinal: int
    template: Tuple[Slot, ...]
    children: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        kids = tuple(slot.nonterminal for slot in self.template if isinstance(slot, Child))
        object.__setattr__(self, "children", kids)

    @property
    def arity(self) -> int:
        return len(self.children)


@dataclass(frozen=True)
class RegularTreeGrammar:
    nonterminals: Tuple[str, ...]
    alphabet: Dict[str, int]       # constructor / terminal symbol -> arity
    productions: Tuple[ConstructorRule, ...]
    start: str

    def __post_init__(self):
        by_lhs: Dict[str, List[ConstructorRule]] = {nt: [] for nt in self.nonterminals}
        for rule in self.productions:
            by_lhs[rule.lhs].append(rule)
        object.__setattr__(self, "_by_lhs", {nt: tuple(rules) for nt, rules in by_lhs.items()})

    def rules_for(self, nt: str) -> Tuple[ConstructorRule, ...]:
        return self._by_lhs[nt]

    def rule(self, constructor_name: str) -> ConstructorRule:
        for rule in self.productions:
            if rule.constructor_name == constructor_name:
                return rule
        raise KeyError(constructor_name)


def compile_to_rtg(g: Grammar) -> RegularTreeGrammar:
    """
    N' = N, S' = S, and one constructor C_<lhs>_<i> per production, whose arity is
    the number of nonterminal occurrences on that production's right-hand side.
    """
    g = desugar(g)
    report = validate(g)
    if report.empty_language:
        raise EmptyLanguageError(g.start, report.unproductive)

    alphabet: Dict[str, int] = {literal: 0 for literal in g.terminals}
    rules = []
    for prod in g.productions:
        template = tuple(
            FixedTerminal(item.literal) if isinstance(item, Terminal) else Child(item.name)
            for item in prod.rhs
        )
        rule = ConstructorRule(
            constructor_name=f"C_{prod.lhs}_{prod.ordinal}",
            lhs=prod.lhs,
            ordinal=prod.ordinal,
            template=template,
        )
        alphabet[rule.constructor_name] = rule.arity
        rules.append(rule)

    return RegularTreeGrammar(
        nonterminals=g.nonterminals,
        alphabet=alphabet,
        productions=tuple(rules),
        start=g.start,
    )


# ----------------------------------------------------------------------
# Derivation trees
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class DerivationTree:
    rule: ConstructorRule
    children: Tuple["DerivationTree", ...] = ()

    @property
    def lhs(self) -> str:
        return self.rule.lhs

    def constructor_count(self) -> int:
        count = 0
        stack = [self]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count

    def terminals(self) -> Iterator[str]:
        """Fixed terminal literals in order, ε contributing nothing."""
        stack: List[Tuple[DerivationTree, int, int]] = [(self, 0, 0)]
        while stack:
            node, pos, kid = stack.pop()
            template = node.rule.template
            while pos < len(template):
                slot = template[pos]
                pos += 1
                if isinstance(slot, FixedTerminal):
                    yield slot.literal
                else:
                    stack.append((node, pos, kid + 1))
                    stack.append((node.children[kid], 0, 0))
                    break

    def pretty(self) -> str:
        if not self.children:
            return self.rule.constructor_name
        return f"{self.rule.constructor_name}({', '.join(c.pretty() for c in self.children)})"


# ----------------------------------------------------------------------
# Rendering
# ----------------------------------------------------------------------
TOKEN_CLASSES = {
    "@ident": re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z"),
    "@number": re.compile(r"[0-9][0-9A-Za-z_.]*\Z"),
}


def token_class(token: str) -> str:
    for name, pattern in TOKEN_CLASSES.items():
        if pattern.match(token):
            return name
    return "@punct"


def _matches(pattern: str, token: str) -> bool:
    if pattern == "@any":
        return True
    if pattern.startswith("@"):
        return token_class(token) == pattern
    return pattern == token


class RenderRules(BaseModel):
    """
    How adjacent tokens are joined. A `no_space` pair is (left, right) where each side
    is a literal token or one of the classes @ident, @number, @punct, @any.
    """
    model_config = ConfigDict(frozen=True)

    separator: str = Field(default=" ", description="Inserted between adjacent rendered tokens")
    no_space: Tuple[Tuple[str, str], ...] = Field(default=(), description="Adjacency exceptions")

    @field_validator("no_space", mode="before")
    @classmethod
    def _pairs(cls, value):
        return tuple(tuple(pair) for pair in value)

    def joins_tight(self, left: str, right: str) -> bool:
        return any(_matches(lp, left) and _matches(rp, right) for lp, rp in self.no_space)


def render_tokens(tokens: Sequence[str], r: RenderRules) -> str:
    out: List[str] = []
    prev: Optional[str] = None
    for token in tokens:
        if not token:
            continue
        if prev is not None and not (r.no_space and r.joins_tight(prev, token)):
            out.append(r.separator)
        out.append(token)
        prev = token
    return "".join(out)


def render(t: DerivationTree, r: RenderRules) -> str:
    return render_tokens(list(t.terminals()), r)


def size_of(p: str) -> int:
    """Byte size of the rendered program (the newline added on write is not counted)."""
    return len(p.encode("utf-8"))
