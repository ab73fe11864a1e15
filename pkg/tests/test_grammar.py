import pytest

from src.core.grammar import (
    Grammar,
    Group,
    Nonterminal,
    Terminal,
    desugar,
    print_grammar,
    quote_literal,
    validate,
)
from src.utils.parser import parse_grammar
from tests.conftest import GRAMMARS


def test_from_rules_numbers_ordinals_per_lhs():
    g = Grammar.from_rules("S", [
        ("S", [Terminal(literal="a")]),
        ("T", [Terminal(literal="b")]),
        ("S", [Nonterminal(name="T")]),
    ])

    assert g.nonterminals == ("S", "T")
    assert [(p.lhs, p.ordinal) for p in g.productions] == [("S", 0), ("T", 0), ("S", 1)]


def test_grammar_rejects_undefined_start():
    with pytest.raises(ValueError):
        Grammar(nonterminals=("S",), terminals=(), productions=(), start="T")


def test_desugar_star():
    g = desugar(parse_grammar('S : "a"* ;'))

    assert g.nonterminals == ("S", "S__s0")
    assert [p.rhs for p in g.productions_for("S")] == [(Nonterminal(name="S__s0"),)]
    assert [p.rhs for p in g.productions_for("S__s0")] == [
        (),
        (Terminal(literal="a"), Nonterminal(name="S__s0")),
    ]


def test_desugar_optional():
    g = desugar(parse_grammar('S : "a"? ;'))

    assert [p.rhs for p in g.productions_for("S__s0")] == [(), (Terminal(literal="a"),)]


def test_desugar_plus():
    g = desugar(parse_grammar('S : "a"+ ;'))

    assert [p.rhs for p in g.productions_for("S__s0")] == [
        (Terminal(literal="a"),),
        (Terminal(literal="a"), Nonterminal(name="S__s0")),
    ]


def test_desugar_names_follow_occurrence_order():
    g = desugar(parse_grammar('S : ( "a" | "b" )? "c"* ;'))

    assert g.nonterminals == ("S", "S__s0", "S__s1")
    assert [p.rhs for p in g.productions_for("S")] == [(Nonterminal(name="S__s0"), Nonterminal(name="S__s1"))]
    assert len(g.productions_for("S__s0")) == 3


def test_desugar_skips_names_taken_by_user_rules():
    g = desugar(parse_grammar('S : "a"? S__s0 ; S__s0 : "b" ;'))

    assert "S__s1" in g.nonterminals
    assert [p.rhs for p in g.productions_for("S__s0")] == [(Terminal(literal="b"),)]


def test_desugar_without_sugar_is_identity():
    g = parse_grammar('S : "a" | "(" S ")" ;')

    assert desugar(g) is g


def test_desugar_is_idempotent():
    g = desugar(parse_grammar((GRAMMARS / "c_subset.cqg").read_text(encoding="utf-8")))

    assert desugar(g) == g
    assert not g.has_sugar


def test_validate_unproductive_start():
    report = validate(parse_grammar("S : S ;"))

    assert report.unproductive == frozenset({"S"})
    assert report.empty_language
    assert not report.ok


def test_validate_unreachable():
    report = validate(parse_grammar('S : "a" ; T : "b" ;'))

    assert report.unreachable == frozenset({"T"})
    assert not report.empty_language


def test_validate_clean_grammar(paren_grammar):
    report = validate(paren_grammar)

    assert report.unproductive == frozenset()
    assert report.unreachable == frozenset()
    assert report.ok


def test_validate_unproductive_side_rule_keeps_language():
    report = validate(parse_grammar('S : "a" | T ; T : T "b" ;'))

    assert report.unproductive == frozenset({"T"})
    assert not report.empty_language


@pytest.mark.parametrize("name", ["paren.cqg", "binary.cqg", "minilang.cqg", "c_subset.cqg"])
def test_print_then_parse_round_trip(name):
    g = parse_grammar((GRAMMARS / name).read_text(encoding="utf-8"))

    assert parse_grammar(print_grammar(g)) == g


def test_print_round_trip_with_escapes_and_epsilon():
    g = parse_grammar('start T ;\nS : "\\"" | "a\\\\b" | ;\nT : S "\\n\\t" ( S | "x" )+ ;')

    assert g.start == "T"
    assert parse_grammar(print_grammar(g)) == g


def test_quote_literal():
    assert quote_literal('say "hi"\n') == '"say \\"hi\\"\\n"'


def test_group_keeps_quantifier():
    g = parse_grammar('S : ( "a" "b" | "c" )* ;')
    item = g.productions[0].rhs[0]

    assert isinstance(item, Group)
    assert item.quantifier == "*"
    assert item.alternatives == ((Terminal(literal="a"), Terminal(literal="b")), (Terminal(literal="c"),))
