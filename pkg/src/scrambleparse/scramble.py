"""Argument-scrambling data augmentation.

Identifies verbal projections in projective trees, permutes the linear
order of the verb and its argument/adjunct subtrees while keeping all
dominance relations intact, labels each variant with its S/O/V order,
and balances the class distribution of the resulting pool.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .conllu import DepTree, Token, Treebank
from .projectivity import base_label, is_projective

MAX_UNITS_WITHOUT_LIMIT = 8  # 8! = 40320 variants; beyond that require an explicit cap


class OrderLabel(Enum):
    SOV = "SOV"
    OSV = "OSV"
    OVS = "OVS"
    SVO = "SVO"
    VOS = "VOS"
    VSO = "VSO"
    NONTRANSITIVE = "NONTRANSITIVE"


TRANSITIVE_ORDERS = (OrderLabel.SOV, OrderLabel.OSV, OrderLabel.OVS,
                     OrderLabel.SVO, OrderLabel.VOS, OrderLabel.VSO)


@dataclass(frozen=True)
class DeprelMapping:
    """Bridges a label inventory to subject/object roles for order labelling."""
    subject_labels: frozenset[str]
    object_labels: frozenset[str]
    permutable_labels: frozenset[str] | None = None  # None means all labels
    frozen_labels: frozenset[str] = frozenset({"punct"})

    def __post_init__(self):
        if self.subject_labels & self.object_labels:
            raise ValueError("subject and object label sets must be disjoint")


UD_MAPPING = DeprelMapping(subject_labels=frozenset({"nsubj"}),
                           object_labels=frozenset({"obj", "dobj"}))
PG_MAPPING = DeprelMapping(subject_labels=frozenset({"k1"}),
                           object_labels=frozenset({"k2"}),
                           frozen_labels=frozenset({"rsym", "punct"}))

MAPPING_PRESETS = {"ud": UD_MAPPING, "pg": PG_MAPPING}


@dataclass(frozen=True)
class VerbalProjection:
    verb_index: int
    constituent_roots: tuple[int, ...]
    span_map: dict  # unit root (verb included) -> inclusive (lo, hi) span

    @property
    def unit_count(self) -> int:
        return 1 + len(self.constituent_roots)


@dataclass
class PermutationVariant:
    tree: DepTree
    order: OrderLabel
    perm: tuple[int, ...]        # permutation of unit slots, identity = (0, 1, ...)
    positions: tuple[int, ...]   # source token index occupying each new position
    perplexity: float | None = None

    @property
    def is_identity(self) -> bool:
        return self.perm == tuple(range(len(self.perm)))


@dataclass
class PermutationBatch:
    source: DepTree
    projection: VerbalProjection
    variants: list[PermutationVariant]


def _verbal_heads(tree: DepTree, mapping: DeprelMapping) -> list[int]:
    children = tree.children_map()
    role_labels = mapping.subject_labels | mapping.object_labels
    heads = []
    for tok in tree.tokens:
        if tok.upos in ("VERB", "AUX"):
            heads.append(tok.index)
        elif any(base_label(tree.deprel_of(c)) in role_labels for c in children[tok.index]):
            heads.append(tok.index)
    return heads


def extract_projections(tree: DepTree, mapping: DeprelMapping) -> list[VerbalProjection]:
    """One projection per verbal head; constituents are the head's direct
    dependents' full subtrees, minus frozen (and non-permutable) labels."""
    if not is_projective(tree):
        raise ValueError(f"sentence {tree.label()} is non-projective; projectivize first")
    children = tree.children_map()
    projections = []
    for v in _verbal_heads(tree, mapping):
        roots = []
        for c in children[v]:
            lbl = base_label(tree.deprel_of(c))
            if lbl in mapping.frozen_labels:
                continue
            if mapping.permutable_labels is not None and lbl not in mapping.permutable_labels:
                continue
            roots.append(c)
        span_map = {v: (v, v)}
        for r in roots:
            span_map[r] = tree.subtree_span(r)
        spans = sorted(span_map.values())
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo <= hi:
                raise ValueError(f"overlapping constituent spans in {tree.label()}")
        projections.append(VerbalProjection(verb_index=v,
                                            constituent_roots=tuple(roots),
                                            span_map=span_map))
    return projections


def classify_order(tree: DepTree, mapping: DeprelMapping) -> OrderLabel:
    """S/O/V order of the main clause, or NONTRANSITIVE when the main
    verbal head does not have exactly one subject and one object."""
    heads = _verbal_heads(tree, mapping)
    if not heads:
        return OrderLabel.NONTRANSITIVE

    def depth(i: int) -> int:
        d = 0
        node = i
        while node != 0:
            node = tree.head_of(node)
            d += 1
        return d

    main = min(heads, key=lambda i: (depth(i), i))
    children = tree.children_map()[main]
    subjects = [c for c in children if base_label(tree.deprel_of(c)) in mapping.subject_labels]
    objects = [c for c in children if base_label(tree.deprel_of(c)) in mapping.object_labels]
    if len(subjects) != 1 or len(objects) != 1:
        return OrderLabel.NONTRANSITIVE
    order = sorted([(subjects[0], "S"), (objects[0], "O"), (main, "V")])
    return OrderLabel("".join(letter for _, letter in order))


def order_distribution(tb: Treebank, mapping: DeprelMapping) -> dict[OrderLabel, float]:
    """Percentage of each S/O/V order among the transitive sentences."""
    counts = {label: 0 for label in TRANSITIVE_ORDERS}
    total = 0
    for tree in tb:
        label = classify_order(tree, mapping)
        if label is not OrderLabel.NONTRANSITIVE:
            counts[label] += 1
            total += 1
    if total == 0:
        raise ValueError("treebank contains no transitive sentences")
    return {label: 100.0 * c / total for label, c in counts.items()}


def select_representative(tb: Treebank, n: int = 4000, seed: int = 42) -> Treebank:
    """Seeded uniform sample of n trees, kept in corpus order."""
    if n >= len(tb):
        if n > len(tb):
            warnings.warn(f"requested {n} trees but treebank has {len(tb)}; returning all")
        return Treebank(list(tb.trees), source_name=tb.source_name)
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(tb), size=n, replace=False))
    return Treebank([tb[int(i)] for i in picked], source_name=tb.source_name)


def _relinearize(tree: DepTree, slots: list[int], unit_tokens: list[list[int]],
                 perm: tuple[int, ...]) -> tuple[list[Token], tuple[int, ...]]:
    n = len(tree.tokens)
    new_positions = list(range(1, n + 1))
    refill = [idx for u in perm for idx in unit_tokens[u]]
    for slot, old in zip(slots, refill):
        new_positions[slot - 1] = old
    new_index = {old: new for new, old in enumerate(new_positions, start=1)}
    new_index[0] = 0
    tokens = []
    for new_pos, old in enumerate(new_positions, start=1):
        src = tree.token(old)
        tokens.append(replace(src, index=new_pos, head=new_index[src.head]))
    return tokens, tuple(new_positions)


def permute_projection(tree: DepTree, projection: VerbalProjection,
                       limit: int | None = None, *,
                       mapping: DeprelMapping = UD_MAPPING,
                       seed: int = 42) -> PermutationBatch:
    """All linear orderings of a projection's units (capped at ``limit``).

    Each unit keeps its internal token order; heads and labels are
    remapped to the new indices; frozen tokens never move. Every variant
    carries a comment recording its order class and permutation.
    """
    m = projection.unit_count
    if m > MAX_UNITS_WITHOUT_LIMIT and limit is None:
        raise ValueError(f"projection has {m} units ({math.factorial(m)} permutations); "
                         "pass an explicit limit")
    unit_roots = sorted(projection.span_map, key=lambda r: projection.span_map[r])
    unit_tokens = [list(range(projection.span_map[r][0], projection.span_map[r][1] + 1))
                   for r in unit_roots]
    slots = sorted(idx for toks in unit_tokens for idx in toks)

    identity = tuple(range(m))
    total = math.factorial(m)
    if limit is not None and total > limit:
        rng = np.random.default_rng(seed)
        chosen = {identity}
        while len(chosen) < limit:
            chosen.add(tuple(int(x) for x in rng.permutation(m)))
        perms = sorted(chosen)
    else:
        perms = [tuple(p) for p in itertools.permutations(range(m))]

    variants = []
    for perm in perms:
        tokens, positions = _relinearize(tree, slots, unit_tokens, perm)
        variant = tree.with_tokens(tokens)
        order = classify_order(variant, mapping)
        perm_str = ",".join(map(str, perm))
        variant.comments = list(tree.comments) + [
            f"# scramble_order={order.value} perm={perm_str}"]
        variants.append(PermutationVariant(tree=variant, order=order,
                                           perm=perm, positions=positions))
    return PermutationBatch(source=tree, projection=projection, variants=variants)


def pool_skew(labels: list[OrderLabel]) -> float:
    """Max minus min class percentage over the six transitive orders."""
    counts = {label: 0 for label in TRANSITIVE_ORDERS}
    total = 0
    for lbl in labels:
        if lbl is not OrderLabel.NONTRANSITIVE:
            counts[lbl] += 1
            total += 1
    if total == 0:
        return 0.0
    pcts = [100.0 * c / total for c in counts.values()]
    return max(pcts) - min(pcts)


def balance_orders(batches: list[PermutationBatch], budget: int,
                   include_identity: bool = False) -> Treebank:
    """Round-robin over the six order classes, lowest perplexity first.

    Repeatedly takes the cheapest unused variant of the currently
    least-represented class until the budget is reached or the pool runs
    dry. Identity permutations are dropped by default (the source trees
    are kept in the training data anyway); variants from non-transitive
    clauses fill any budget left after the six classes are exhausted.
    """
    pools: dict[OrderLabel, list[PermutationVariant]] = {l: [] for l in TRANSITIVE_ORDERS}
    leftovers: list[PermutationVariant] = []
    for batch in batches:
        for v in batch.variants:
            if v.is_identity and not include_identity:
                continue
            if v.order is OrderLabel.NONTRANSITIVE:
                leftovers.append(v)
            else:
                pools[v.order].append(v)

    def cost(v: PermutationVariant):
        return (v.perplexity if v.perplexity is not None else math.inf, v.perm)

    for pool in pools.values():
        pool.sort(key=cost, reverse=True)  # cheapest last, popped first
    leftovers.sort(key=cost, reverse=True)

    chosen: list[PermutationVariant] = []
    taken = {label: 0 for label in TRANSITIVE_ORDERS}
    while len(chosen) < budget and any(pools.values()):
        label = min((l for l in TRANSITIVE_ORDERS if pools[l]),
                    key=lambda l: (taken[l], TRANSITIVE_ORDERS.index(l)))
        chosen.append(pools[label].pop())
        taken[label] += 1
    while len(chosen) < budget and leftovers:
        chosen.append(leftovers.pop())
    return Treebank([v.tree for v in chosen], source_name="augmented")
