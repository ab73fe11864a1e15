import logging
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Right-hand-side items
# ----------------------------------------------------------------------
class Terminal(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["terminal"] = "terminal"
    literal: str


class Nonterminal(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["nonterminal"] = "nonterminal"
    name: str


class Group(BaseModel):
    """EBNF sugar: `( alt | alt )` with an optional postfix `?`, `*` or `+`."""
    model_config = ConfigDict(frozen=True)
    kind: Literal["group"] = "group"
    alternatives: Tuple[Tuple["Item", ...], ...]
    quantifier: Optional[Literal["?", "*", "+"]] = None


Item = Union[Terminal, Nonterminal, Group]
Group.model_rebuild()


class Production(BaseModel):
    model_config = ConfigDict(frozen=True)
    lhs: str
    rhs: Tuple[Item, ...] = ()
    ordinal: int = Field(ge=0, description="Index among the productions sharing this lhs")

    @property
    def has_sugar(self) -> bool:
        return any(isinstance(item, Group) for item in self.rhs)

    def nonterminal_refs(self) -> List[str]:
        return [item.name for item in self.rhs if isinstance(item, Nonterminal)]


class Grammar(BaseModel):
    model_config = ConfigDict(frozen=True)
    nonterminals: Tuple[str, ...]
    terminals: Tuple[str, ...]
    productions: Tuple[Production, ...]
    start: str

    @model_validator(mode="after")
    def _check_consistency(self) -> "Grammar":
        if self.start not in self.nonterminals:
            raise ValueError(f"start symbol '{self.start}' is not a nonterminal")
        known_nt = set(self.nonterminals)
        known_t = set(self.terminals)
        next_ordinal: Dict[str, int] = {}
        for prod in self.productions:
            if prod.lhs not in known_nt:
                raise ValueError(f"production lhs '{prod.lhs}' is not a nonterminal")
            expected = next_ordinal.get(prod.lhs, 0)
            if prod.ordinal != expected:
                raise ValueError(f"ordinal {prod.ordinal} of '{prod.lhs}' should be {expected}")
            next_ordinal[prod.lhs] = expected + 1
            for item in _flatten(prod.rhs):
                if isinstance(item, Nonterminal) and item.name not in known_nt:
                    raise ValueError(f"undefined nonterminal '{item.name}'")
                if isinstance(item, Terminal) and item.literal not in known_t:
                    raise ValueError(f"unlisted terminal {item.literal!r}")
        return self

    @classmethod
    def from_rules(cls, start: str, rules: Iterable[Tuple[str, Sequence[Item]]]) -> "Grammar":
        """Build a grammar from (lhs, rhs) pairs, numbering ordinals in the given order."""
        nonterminals: Dict[str, None] = {}
        terminals: Dict[str, None] = {}
        counters: Dict[str, int] = {}
        productions = []
        rules = list(rules)
        for lhs, _ in rules:
            nonterminals.setdefault(lhs, None)
        for lhs, rhs in rules:
            for item in _flatten(rhs):
                if isinstance(item, Terminal):
                    terminals.setdefault(item.literal, None)
            ordinal = counters.get(lhs, 0)
            counters[lhs] = ordinal + 1
            productions.append(Production(lhs=lhs, rhs=tuple(rhs), ordinal=ordinal))
        return cls(
            nonterminals=tuple(nonterminals),
            terminals=tuple(terminals),
            productions=tuple(productions),
            start=start,
        )

    @property
    def has_sugar(self) -> bool:
        return any(p.has_sugar for p in self.productions)

    def productions_for(self, lhs: str) -> List[Production]:
        return [p for p in self.productions if p.lhs == lhs]


class ValidationReport(BaseModel):
    unproductive: FrozenSet[str] = frozenset()
    unreachable: FrozenSet[str] = frozenset()
    empty_language: bool = False

    @property
    def ok(self) -> bool:
        return not self.empty_language


def _flatten(items: Iterable[Item]):
    for item in items:
        yield item
        if isinstance(item, Group):
            for alt in item.alternatives:
                yield from _flatten(alt)


# ----------------------------------------------------------------------
# Desugaring
# ----------------------------------------------------------------------
class _Desugarer:
    def __init__(self, grammar: Grammar):
        self.taken = set(grammar.nonterminals)
        self.counters: Dict[str, int] = {}
        self.rules: List[Tuple[str, Tuple[Item, ...]]] = []

    def fresh(self, lhs: str) -> str:
        k = self.counters.get(lhs, 0)
        name = f"{lhs}__s{k}"
        while name in self.taken:
            k += 1
            name = f"{lhs}__s{k}"
        self.counters[lhs] = k + 1
        self.taken.add(name)
        return name

    def sequence(self, lhs: str, rhs: Sequence[Item]) -> Tuple[Item, ...]:
        """Replace every group in rhs by a fresh nonterminal, emitting its rules."""
        out: List[Item] = []
        for item in rhs:
            if not isinstance(item, Group):
                out.append(item)
                continue
            name = self.fresh(lhs)
            ref = Nonterminal(name=name)
            slot = len(self.rules)
            pending: List[Tuple[Item, ...]] = []
            bodies = [self.sequence(lhs, alt) for alt in item.alternatives]
            if item.quantifier == "?":
                pending.append(())
                pending.extend(bodies)
            elif item.quantifier == "*":
                pending.append(())
                pending.extend(body + (ref,) for body in bodies)
            elif item.quantifier == "+":
                pending.extend(bodies)
                pending.extend(body + (ref,) for body in bodies)
            else:
                pending.extend(bodies)
            # outer group first, so nonterminal order follows naming order
            self.rules[slot:slot] = [(name, body) for body in pending]
            out.append(ref)
        return tuple(out)


def desugar(g: Grammar) -> Grammar:
    """
    Rewrite `?`, `*`, `+` and parenthesized groups into plain alternation.
    Each sugar occurrence becomes one fresh nonterminal named `<lhs>__s<k>`.
    """
    if not g.has_sugar:
        return g

    worker = _Desugarer(g)
    rules: List[Tuple[str, Tuple[Item, ...]]] = []
    for prod in g.productions:
        worker.rules = []
        rhs = worker.sequence(prod.lhs, prod.rhs)
        rules.append((prod.lhs, rhs))
        rules.extend(worker.rules)

    # original nonterminals keep their positions; fresh ones follow in creation order
    ordered = sorted(rules, key=lambda rule: 0 if rule[0] in g.nonterminals else 1)
    result = Grammar.from_rules(g.start, ordered)
    logger.debug(f"Desugared {len(g.productions)} productions into {len(result.productions)}")
    return result


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------
def productive_nonterminals(g: Grammar) -> FrozenSet[str]:
    productive: set = set()
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            if prod.lhs in productive:
                continue
            if all(ref in productive for ref in prod.nonterminal_refs()):
                productive.add(prod.lhs)
                changed = True
    return frozenset(productive)


def dependency_graph(g: Grammar) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(g.nonterminals)
    for prod in g.productions:
        for ref in prod.nonterminal_refs():
            graph.add_edge(prod.lhs, ref)
    return graph


def validate(g: Grammar) -> ValidationReport:
    """Fixpoint productivity and reachability; findings are reported, never raised."""
    g = desugar(g)
    productive = productive_nonterminals(g)
    reachable = {g.start} | nx.descendants(dependency_graph(g), g.start)

    report = ValidationReport(
        unproductive=frozenset(nt for nt in g.nonterminals if nt not in productive),
        unreachable=frozenset(nt for nt in g.nonterminals if nt not in reachable),
        empty_language=g.start not in productive,
    )
    if report.unreachable:
        logger.warning(f"Unreachable nonterminals: {', '.join(_in_order(g, report.unreachable))}")
    if report.unproductive and not report.empty_language:
        logger.warning(f"Unproductive nonterminals: {', '.join(_in_order(g, report.unproductive))}")
    return report


def _in_order(g: Grammar, names: Iterable[str]) -> List[str]:
    wanted = set(names)
    return [nt for nt in g.nonterminals if nt in wanted]


# ----------------------------------------------------------------------
# Printing (inverse of utils.parser.parse_grammar)
# ----------------------------------------------------------------------
_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def quote_literal(literal: str) -> str:
    return '"' + "".join(_ESCAPES.get(ch, ch) for ch in literal) + '"'


def _print_items(items: Sequence[Item]) -> str:
    parts = []
    for item in items:
        if isinstance(item, Terminal):
            parts.append(quote_literal(item.literal))
        elif isinstance(item, Nonterminal):
            parts.append(item.name)
        else:
            inner = " | ".join(_print_items(alt) for alt in item.alternatives)
            parts.append(f"( {inner} ){item.quantifier or ''}")
    return " ".join(parts)


def print_grammar(g: Grammar) -> str:
    lines = [f"start {g.start} ;", ""]
    for nt in g.nonterminals:
        alts = [_print_items(p.rhs) for p in g.productions_for(nt)]
        lines.append(f"{nt} : " + "\n    | ".join(alts) + " ;")
    return "\n".join(lines) + "\n"
