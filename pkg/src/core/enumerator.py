import bisect
import logging
import threading
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import networkx as nx

from src.core.errors import IndexOutOfRangeError
from src.core.settings import get_settings
from src.core.treegrammar import ConstructorRule, DerivationTree, RegularTreeGrammar

logger = logging.getLogger(__name__)


class Enumeration:
    """
    Size-indexed enumeration of the derivation trees of a regular tree grammar.

    Size is the constructor count k. Trees are ordered by k, then by constructor
    ordinal, then by the composition of child sizes (lexicographic), then by the
    children's local indices with the first child most significant.

    Tables:
      card[nt][k]        trees rooted at nt with exactly k constructors
      cum[nt][k]         trees rooted at nt with at most k constructors
      tup[rule][j][s]    child tuples for children j..arity-1 totalling s constructors
    """

    def __init__(self, rtg: RegularTreeGrammar, initial_max_k: Optional[int] = None):
        self.rtg = rtg
        self.max_k = 0
        self._card: Dict[str, List[int]] = {nt: [0] for nt in rtg.nonterminals}
        self._cum: Dict[str, List[int]] = {nt: [0] for nt in rtg.nonterminals}
        self._tup: Dict[str, List[List[int]]] = {
            rule.constructor_name: [[] for _ in range(rule.arity)] + [[1]]
            for rule in rtg.productions
        }
        self._lock = threading.Lock()
        self._extend(initial_max_k or get_settings().initial_max_k)

    # ------------------------------------------------------------------
    # Table construction
    # ------------------------------------------------------------------
    def _extend(self, k: int) -> None:
        """Grow every table to cover strata 1..k. Existing entries are never rewritten."""
        if k <= self.max_k:
            return
        with self._lock:
            if k <= self.max_k:
                return
            for size in range(self.max_k + 1, k + 1):
                self._build_stratum(size)
            logger.debug(f"Enumeration tables extended to k={k}")
            self.max_k = k

    def _build_stratum(self, k: int) -> None:
        s = k - 1
        for rule in self.rtg.productions:
            tup = self._tup[rule.constructor_name]
            if s > 0:
                tup[rule.arity].append(0)
            for j in range(rule.arity - 1, -1, -1):
                card = self._card[rule.children[j]]
                rest = tup[j + 1]
                tup[j].append(sum(card[kj] * rest[s - kj] for kj in range(1, s + 1)))
        for nt in self.rtg.nonterminals:
            count = sum(self._tup[r.constructor_name][0][s] for r in self.rtg.rules_for(nt))
            self._card[nt].append(count)
            self._cum[nt].append(self._cum[nt][-1] + count)

    def _ensure(self, k: int) -> None:
        if k > self.max_k:
            self._extend(max(k, 2 * self.max_k))

    # ------------------------------------------------------------------
    # Counting
    # ------------------------------------------------------------------
    def cardinality(self, nt: str, k: int) -> int:
        if nt not in self._card:
            raise KeyError(f"unknown nonterminal '{nt}'")
        if k < 1:
            return 0
        self._ensure(k)
        return self._card[nt][k]

    def total_below(self, k: int) -> int:
        """Number of start trees with at most k constructors."""
        if k <= 0:
            return 0
        self._ensure(k)
        return self._cum[self.rtg.start][k]

    def strata(self, count: int) -> List[int]:
        self._ensure(count)
        return self._card[self.rtg.start][1:count + 1]

    @cached_property
    def _useful_graph(self) -> nx.DiGraph:
        productive: set = set()
        changed = True
        while changed:
            changed = False
            for rule in self.rtg.productions:
                if rule.lhs not in productive and all(c in productive for c in rule.children):
                    productive.add(rule.lhs)
                    changed = True

        graph = nx.DiGraph()
        graph.add_nodes_from(productive)
        for rule in self.rtg.productions:
            if rule.lhs in productive and all(c in productive for c in rule.children):
                graph.add_edges_from((rule.lhs, c) for c in rule.children)
        if self.rtg.start not in graph:
            return nx.DiGraph()
        reachable = {self.rtg.start} | nx.descendants(graph, self.rtg.start)
        return graph.subgraph(reachable).copy()

    @cached_property
    def is_finite(self) -> bool:
        return nx.is_directed_acyclic_graph(self._useful_graph)

    @cached_property
    def max_constructors(self) -> Optional[int]:
        """Largest constructor count of any start tree, None for infinite languages."""
        if not self.is_finite:
            return None
        graph = self._useful_graph
        if not graph:
            return 0
        depth: Dict[str, int] = {}
        for nt in reversed(list(nx.topological_sort(graph))):
            best = 0
            for rule in self.rtg.rules_for(nt):
                if all(c in depth for c in rule.children):
                    best = max(best, 1 + sum(depth[c] for c in rule.children))
            depth[nt] = best
        return depth[self.rtg.start]

    def total(self) -> Optional[int]:
        """Exact number of trees of a finite language, None when infinite."""
        if self.max_constructors is None:
            return None
        return self.total_below(self.max_constructors)

    # ------------------------------------------------------------------
    # Unranking
    # ------------------------------------------------------------------
    def _stratum_of(self, i: int) -> int:
        total = self.total()
        if total is not None and i >= total:
            raise IndexOutOfRangeError(i, total)
        while self._cum[self.rtg.start][self.max_k] <= i:
            self._ensure(self.max_k + 1)
        return bisect.bisect_right(self._cum[self.rtg.start], i)

    def _decompose(self, nt: str, k: int, r: int) -> Tuple[ConstructorRule, List[Tuple[str, int, int]]]:
        """Pick the constructor, child sizes and child local indices of local index r."""
        s = k - 1
        for rule in self.rtg.rules_for(nt):
            count = self._tup[rule.constructor_name][0][s]
            if r < count:
                break
            r -= count
        else:
            raise AssertionError(f"local index out of stratum {k} of '{nt}'")

        tup = self._tup[rule.constructor_name]
        sizes: List[int] = []
        radices: List[int] = []
        prefix = 1
        for j, child in enumerate(rule.children):
            card = self._card[child]
            for kj in range(1, s + 1):
                block = prefix * card[kj] * tup[j + 1][s - kj]
                if r < block:
                    break
                r -= block
            sizes.append(kj)
            radices.append(card[kj])
            prefix *= card[kj]
            s -= kj

        digits = [0] * rule.arity
        for j in range(rule.arity - 1, -1, -1):
            r, digits[j] = divmod(r, radices[j])
        return rule, list(zip(rule.children, sizes, digits))

    def index_to_tree(self, i: int) -> DerivationTree:
        if i < 0:
            raise IndexOutOfRangeError(i, self.total())
        k = self._stratum_of(i)
        local = i - self._cum[self.rtg.start][k - 1]

        frames = [(*self._decompose(self.rtg.start, k, local), [])]
        while True:
            rule, specs, built = frames[-1]
            if len(built) < len(specs):
                frames.append((*self._decompose(*specs[len(built)]), []))
                continue
            frames.pop()
            node = DerivationTree(rule, tuple(built))
            if not frames:
                return node
            frames[-1][2].append(node)

    # ------------------------------------------------------------------
    # Ranking
    # ------------------------------------------------------------------
    def _rank_node(self, rule: ConstructorRule, kids: List[Tuple[int, int]]) -> Tuple[int, int]:
        k = 1 + sum(size for size, _ in kids)
        self._ensure(k)
        s = k - 1
        offset = 0
        for other in self.rtg.rules_for(rule.lhs):
            if other.constructor_name == rule.constructor_name:
                break
            offset += self._tup[other.constructor_name][0][s]

        tup = self._tup[rule.constructor_name]
        prefix = 1
        for j, (size, _) in enumerate(kids):
            card = self._card[rule.children[j]]
            for kj in range(1, size):
                offset += prefix * card[kj] * tup[j + 1][s - kj]
            prefix *= card[size]
            s -= size

        local = 0
        for j, (size, rank) in enumerate(kids):
            local = local * self._card[rule.children[j]][size] + rank
        return k, offset + local

    def tree_to_index(self, t: DerivationTree) -> int:
        """Global rank of t; inverse of index_to_tree."""
        ranks: Dict[int, Tuple[int, int]] = {}
        stack = [(t, False)]
        while stack:
            node, ready = stack.pop()
            if not ready:
                if node.rule not in self.rtg.rules_for(node.lhs):
                    raise ValueError(f"constructor {node.rule.constructor_name} is not in this grammar")
                if tuple(c.lhs for c in node.children) != node.rule.children:
                    raise ValueError(f"children of {node.rule.constructor_name} do not match its arity")
                stack.append((node, True))
                stack.extend((c, False) for c in node.children)
            else:
                ranks[id(node)] = self._rank_node(node.rule, [ranks[id(c)] for c in node.children])

        if t.lhs != self.rtg.start:
            raise ValueError(f"tree is rooted at '{t.lhs}', not the start symbol")
        k, local = ranks[id(t)]
        return self._cum[self.rtg.start][k - 1] + local

