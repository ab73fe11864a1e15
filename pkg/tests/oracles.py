"""
Brute-force reference implementations used as test oracles.
Nothing here touches src.core.enumerator or src.core.sampler.
"""
import itertools
from collections import Counter
from functools import lru_cache
from typing import Iterator, List, Tuple

from src.core.grammar import Grammar, Nonterminal, desugar
from src.core.treegrammar import DerivationTree, RegularTreeGrammar, RenderRules, render, size_of


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Ordered ways to write total as parts positive summands, lexicographically ascending."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def trees_by_size(rtg: RegularTreeGrammar):
    """Returns trees(nt, k): every tree rooted at nt with exactly k constructors, in enumeration order."""

    @lru_cache(maxsize=None)
    def trees(nt: str, k: int) -> Tuple[DerivationTree, ...]:
        if k < 1:
            return ()
        out: List[DerivationTree] = []
        for rule in rtg.rules_for(nt):
            for sizes in compositions(k - 1, rule.arity):
                pools = [trees(child, size) for child, size in zip(rule.children, sizes)]
                out.extend(DerivationTree(rule, kids) for kids in itertools.product(*pools))
        return tuple(out)

    return trees


def all_trees(rtg: RegularTreeGrammar, max_k: int) -> List[DerivationTree]:
    trees = trees_by_size(rtg)
    return [t for k in range(1, max_k + 1) for t in trees(rtg.start, k)]


def leftmost_derivations(g: Grammar, max_steps: int) -> Counter:
    """Multiset of words (tokens joined by one space) with a leftmost derivation of <= max_steps applications."""
    g = desugar(g)
    words: Counter = Counter()
    frontier = [((Nonterminal(name=g.start),), 0)]
    while frontier:
        form, steps = frontier.pop()
        pos = next((j for j, item in enumerate(form) if isinstance(item, Nonterminal)), None)
        if pos is None:
            words[" ".join(item.literal for item in form if item.literal)] += 1
            continue
        if steps == max_steps:
            continue
        for prod in g.productions_for(form[pos].name):
            frontier.append((form[:pos] + prod.rhs + form[pos + 1:], steps + 1))
    return words


def size_census(rtg: RegularTreeGrammar, rules: RenderRules, lo: int, hi: int, max_k: int) -> List[Tuple[int, str, int]]:
    """(rank, text, size) of every tree of <= max_k constructors whose program size lies in [lo, hi)."""
    out = []
    for rank, tree in enumerate(all_trees(rtg, max_k)):
        text = render(tree, rules)
        if lo <= size_of(text) < hi:
            out.append((rank, text, size_of(text)))
    return out


