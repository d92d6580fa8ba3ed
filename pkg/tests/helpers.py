"""Shared builders for the test suite: random trees and tiny treebanks."""

from __future__ import annotations

import numpy as np

from scrambleparse.conllu import DepTree, Token, Treebank
from scrambleparse.projectivity import is_projective


def chain_tree(n: int, label: str = "dep") -> DepTree:
    """Left-to-right chain 0 -> 1 -> 2 -> ... -> n (each token heads the next)."""
    tokens = [Token(index=i, form=f"w{i}", upos="X", head=i - 1, deprel=label if i > 1 else "root")
              for i in range(1, n + 1)]
    return DepTree(tokens)


def random_projective_tree(rng: np.random.Generator, n: int,
                           labels=("a", "b", "c", "d"), tags=("N", "V", "X")) -> DepTree:
    """Uniform-ish random projective tree built by recursive interval merging."""

    def build(lo: int, hi: int, heads: dict) -> int:
        if lo == hi:
            return lo
        split = int(rng.integers(lo, hi))
        left = build(lo, split, heads)
        right = build(split + 1, hi, heads)
        if rng.random() < 0.5:
            heads[right] = left
            return left
        heads[left] = right
        return right

    heads: dict[int, int] = {}
    root = build(1, n, heads)
    heads[root] = 0
    tokens = [Token(index=i, form=f"w{i}", upos=str(tags[int(rng.integers(len(tags)))]),
                    head=heads[i],
                    deprel="root" if heads[i] == 0 else str(labels[int(rng.integers(len(labels)))]))
              for i in range(1, n + 1)]
    tree = DepTree(tokens)
    assert is_projective(tree)
    return tree


def random_nonprojective_tree(rng: np.random.Generator, n_lifts: int = 1,
                              block: int = 6) -> DepTree:
    """Tree with ``n_lifts`` non-interacting non-projective arcs.

    Built from independent clauses (one per lift) hanging off the root,
    each occupying a contiguous block, so lifting chains never interact.
    Every token gets a unique deprel, which makes the head+path decoding
    unambiguous.
    """
    heads: dict[int, int] = {}
    n = block * n_lifts
    for b in range(n_lifts):
        base = b * block
        # Chain inside the block: base+1 <- base+2 ... ; block head attaches to root.
        heads[base + 1] = 0 if b == 0 else 1
        for i in range(2, block + 1):
            heads[base + i] = base + i - 1
    # In each block, reattach the last token under an early node so the arc
    # crosses the middle of the chain: head(base+block) = base+1 is fine and
    # projective (chain suffix)... instead create a crossing pair:
    # attach token base+3 to base+5's subtree? Simplest known-nonprojective
    # gadget: arcs (i -> i+2) and (i+1 -> i+3):
    trees = []
    for b in range(n_lifts):
        base = b * block
        heads[base + 3] = base + 1          # arc 1 -> 3
        heads[base + 4] = base + 2          # arc 2 -> 4 crosses it
    tokens = [Token(index=i, form=f"w{i}", upos="X", head=heads[i],
                    deprel=f"r{i}" if heads[i] != 0 else "root")
              for i in range(1, n + 1)]
    tree = DepTree(tokens)
    assert not is_projective(tree)
    return tree


def toy_treebank() -> Treebank:
    """Three tiny hand-built sentences used across module tests."""
    t1 = DepTree([Token(1, "ana", upos="N", head=2, deprel="s"),
                  Token(2, "runs", upos="V", head=0, deprel="root")])
    t2 = DepTree([Token(1, "bo", upos="N", head=3, deprel="s"),
                  Token(2, "jam", upos="N", head=3, deprel="o"),
                  Token(3, "eats", upos="V", head=0, deprel="root")])
    t3 = DepTree([Token(1, "cats", upos="N", head=2, deprel="s"),
                  Token(2, "sleep", upos="V", head=0, deprel="root"),
                  Token(3, ".", upos="PUNCT", head=2, deprel="punct")])
    return Treebank([t1, t2, t3])


def transitive_tree(order: str = "SOV", with_io: bool = False) -> DepTree:
    """Hand-built clause in the given S/O/V order with case markers."""
    chunks = {"S": [("Ram", "NOUN", "nsubj"), ("ne", "ADP", "case")],
              "O": [("kitab", "NOUN", "obj")],
              "V": [("di", "VERB", "root")]}
    seq = [chunks[c] for c in order]
    if with_io:
        at = order.index("O")
        seq.insert(at, [("Gopal", "NOUN", "iobj"), ("ko", "ADP", "case")])
    seq.append([(".", "PUNCT", "punct")])
    pos = 0
    head_pos = {}
    for ci, chunk in enumerate(seq):
        head_pos[ci] = pos + 1
        pos += len(chunk)
    verb_chunk = next(ci for ci, chunk in enumerate(seq) if chunk[0][2] == "root")
    tokens = []
    pos = 0
    for ci, chunk in enumerate(seq):
        for j, (form, upos, deprel) in enumerate(chunk):
            pos += 1
            if deprel == "root":
                head = 0
            elif j == 0:
                head = head_pos[verb_chunk]
            else:
                head = head_pos[ci]
            tokens.append(Token(index=pos, form=form, upos=upos, head=head, deprel=deprel))
    return DepTree(tokens)
