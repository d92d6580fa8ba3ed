"""Witten-Bell smoothed n-gram language model for ranking permutations.

Probability of a word given a context interpolates the maximum-likelihood
estimate with the next-shorter context, weighted by the number of
distinct continuation types:

    P(w | c) = (count(c, w) + T(c) * P(w | c')) / (count(c) + T(c))

where c' drops the oldest context token and T(c) is the number of
distinct words seen after c. The empty-context base case interpolates
with the uniform distribution over the vocabulary. Tokens seen exactly
once in the corpus additionally contribute an <unk> event in the same
context, which reserves observed mass for out-of-vocabulary words.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .serialize import load_blob, save_blob

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MAGIC = b"NGLM1"


@dataclass
class NGramModel:
    order: int
    counts: dict = field(repr=False)          # context tuple -> Counter of next tokens
    context_totals: dict = field(repr=False)  # context tuple -> total event count
    distinct: dict = field(repr=False)        # context tuple -> distinct continuation types
    vocab: frozenset

    @property
    def event_vocab_size(self) -> int:
        return len(self.vocab) - 1  # BOS is context-only, never predicted

    def _interp(self, word: str, context: tuple) -> float:
        if context:
            total = self.context_totals.get(context)
            if not total:
                return self._interp(word, context[1:])
            types = self.distinct[context]
            backoff = self._interp(word, context[1:])
            return (self.counts[context].get(word, 0) + types * backoff) / (total + types)
        total = self.context_totals[()]
        types = self.distinct[()]
        uniform = 1.0 / self.event_vocab_size
        return (self.counts[()].get(word, 0) + types * uniform) / (total + types)

    def prob(self, word: str, context=()) -> float:
        """Smoothed P(word | context); OOV words and context tokens map to <unk>."""
        if word not in self.vocab or word == BOS:
            word = UNK
        context = tuple(w if w in self.vocab else UNK for w in context)
        if self.order == 1:
            context = ()
        else:
            context = context[-(self.order - 1):]
        return self._interp(word, context)

    def logprob(self, sentence: list[str]) -> float:
        """Natural-log probability of a sentence including the </s> event."""
        history = [BOS] * (self.order - 1) + list(sentence)
        total = 0.0
        for i, word in enumerate(list(sentence) + [EOS]):
            total += math.log(self.prob(word, history[i:i + self.order - 1]))
        return total

    def save(self, path, meta: dict | None = None) -> None:
        save_blob(path, MAGIC, {
            "order": self.order,
            "counts": {ctx: dict(c) for ctx, c in self.counts.items()},
            "vocab": sorted(self.vocab),
            "meta": meta or {},
        })

    @classmethod
    def load(cls, path) -> "NGramModel":
        payload = load_blob(path, MAGIC)
        counts = {ctx: Counter(c) for ctx, c in payload["counts"].items()}
        return cls(order=payload["order"],
                   counts=counts,
                   context_totals={ctx: sum(c.values()) for ctx, c in counts.items()},
                   distinct={ctx: len(c) for ctx, c in counts.items()},
                   vocab=frozenset(payload["vocab"]))


def train_lm(corpus: list[list[str]], order: int = 3) -> NGramModel:
    """Train a Witten-Bell model on tokenized sentences."""
    if not corpus:
        raise ValueError("training corpus is empty")
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in [1, 5], got {order}")
    freq = Counter(tok for sent in corpus for tok in sent)
    hapax = {w for w, c in freq.items() if c == 1}

    counts: dict[tuple, Counter] = defaultdict(Counter)
    for sent in corpus:
        history = [BOS] * (order - 1) + list(sent)
        for i, word in enumerate(list(sent) + [EOS]):
            context = history[i:i + order - 1]
            for k in range(order):
                ctx = tuple(context[len(context) - k:])
                counts[ctx][word] += 1
                if word in hapax:
                    counts[ctx][UNK] += 1
    vocab = frozenset(freq) | {BOS, EOS, UNK}
    counts = dict(counts)
    return NGramModel(order=order,
                      counts=counts,
                      context_totals={ctx: sum(c.values()) for ctx, c in counts.items()},
                      distinct={ctx: len(c) for ctx, c in counts.items()},
                      vocab=vocab)


def perplexity(model: NGramModel, sentence: list[str]) -> float:
    """exp of the average negative log-probability per event (tokens + </s>)."""
    if not sentence:
        raise ValueError("cannot score an empty sentence")
    n_events = len(sentence) + 1
    return math.exp(-model.logprob(sentence) / n_events)


def filter_by_perplexity(batch, model: NGramModel, k: int | None = None):
    """Keep the k lowest-perplexity variants of a permutation batch.

    k defaults to the number of permuted units of the batch's projection.
    Ties break on the lexicographic order of the permutation, so the
    result is deterministic. Returns a new batch; scores are recorded on
    the surviving variants.
    """
    from .scramble import PermutationBatch

    if k is None:
        k = batch.projection.unit_count
    scored = []
    for v in batch.variants:
        ppl = perplexity(model, [t.form for t in v.tree.tokens])
        scored.append((ppl, v.perm, v))
    scored.sort(key=lambda item: (item[0], item[1]))
    survivors = []
    for ppl, _, v in scored[:k]:
        v.perplexity = ppl
        survivors.append(v)
    return PermutationBatch(source=batch.source, projection=batch.projection,
                            variants=survivors)


def read_corpus(path) -> list[list[str]]:
    """One whitespace-tokenized sentence per line; blank lines ignored."""
    sentences = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            toks = line.split()
            if toks:
                sentences.append(toks)
    return sentences
