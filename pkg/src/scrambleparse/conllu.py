"""CoNLL-U reading and writing plus the dependency tree data types.

Trees are plain value objects: a sentence is a list of 1-indexed tokens,
each pointing at a head (0 is the artificial root). Multiword-token
ranges ("1-2") and empty nodes ("1.1") are skipped on input; enhanced
dependencies are not modelled (column 9 is written as "_").
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

N_COLUMNS = 10


class ConlluParseError(ValueError):
    """Malformed CoNLL-U input; message carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TreeValidationError(ValueError):
    """A sentence that parses but does not form a valid dependency tree."""


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    head: int = 0
    deprel: str = "dep"
    misc: str = "_"


@dataclass
class DepTree:
    tokens: list[Token]
    sentence_id: str | None = None
    comments: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.tokens)

    def token(self, index: int) -> Token:
        return self.tokens[index - 1]

    def head_of(self, index: int) -> int:
        return self.tokens[index - 1].head

    def deprel_of(self, index: int) -> str:
        return self.tokens[index - 1].deprel

    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def upos_tags(self) -> list[str]:
        return [t.upos for t in self.tokens]

    def arcs(self) -> set[tuple[int, int, str]]:
        return {(t.head, t.index, t.deprel) for t in self.tokens}

    def children_map(self) -> dict[int, list[int]]:
        """Head index -> dependents in surface order. Key 0 is the root."""
        out: dict[int, list[int]] = {i: [] for i in range(len(self.tokens) + 1)}
        for t in self.tokens:
            out[t.head].append(t.index)
        return out

    def descendants(self, index: int) -> set[int]:
        """All tokens in the subtree rooted at ``index``, excluding it."""
        children = self.children_map()
        out: set[int] = set()
        stack = list(children[index])
        while stack:
            node = stack.pop()
            if node in out:
                continue
            out.add(node)
            stack.extend(children[node])
        return out

    def subtree_span(self, index: int) -> tuple[int, int]:
        """Inclusive (lo, hi) interval covered by ``index`` and its subtree."""
        nodes = self.descendants(index) | {index}
        return min(nodes), max(nodes)

    def with_tokens(self, tokens: list[Token]) -> "DepTree":
        return DepTree(tokens=tokens, sentence_id=self.sentence_id,
                       comments=list(self.comments))

    def label(self) -> str:
        """Identifier used in error messages."""
        if self.sentence_id:
            return self.sentence_id
        head = " ".join(t.form for t in self.tokens[:5])
        return f'"{head}..."' if len(self.tokens) > 5 else f'"{head}"'


@dataclass
class Treebank:
    trees: list[DepTree]
    source_name: str = ""

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]


def validate_tree(tree: DepTree, single_root: bool = False) -> list[str]:
    """Return a list of invariant violations; empty means the tree is valid.

    Violations are data, not exceptions: callers that want hard failures
    raise on a non-empty result.
    """
    violations = []
    n = len(tree.tokens)
    for pos, tok in enumerate(tree.tokens, start=1):
        if tok.index != pos:
            violations.append(f"index gap: token at position {pos} has index {tok.index}")
        if not tok.form:
            violations.append(f"empty form at token {pos}")
        if not tok.deprel:
            violations.append(f"empty deprel at token {pos}")
        if tok.head == tok.index:
            violations.append(f"self-loop at token {tok.index}")
        elif not 0 <= tok.head <= n:
            violations.append(f"head out of range at token {tok.index}")
    if violations:
        return violations

    roots = [t.index for t in tree.tokens if t.head == 0]
    if n > 0 and not roots:
        violations.append("no root attachment")
    if single_root and len(roots) > 1:
        violations.append("multiple roots: tokens " + ",".join(map(str, roots)))

    # Cycle check: walk each token towards the root.
    flagged: set[int] = set()
    for start in range(1, n + 1):
        seen: list[int] = []
        node = start
        while node != 0:
            if node in seen:
                cycle = seen[seen.index(node):]
                if not flagged & set(cycle):
                    flagged.update(cycle)
                    violations.append("cycle involving " + ",".join(map(str, sorted(cycle))))
                break
            seen.append(node)
            node = tree.tokens[node - 1].head
    return violations


def _parse_token_line(line: str, line_no: int) -> Token | None:
    cols = line.split("\t")
    if len(cols) != N_COLUMNS:
        raise ConlluParseError(f"expected {N_COLUMNS} tab-separated columns, got {len(cols)}",
                               line_no)
    raw_id = cols[0]
    if "-" in raw_id or "." in raw_id:
        warnings.warn(f"line {line_no}: skipping multiword/empty node line '{raw_id}'")
        return None
    try:
        index = int(raw_id)
    except ValueError:
        raise ConlluParseError(f"non-integer token id '{raw_id}'", line_no) from None
    try:
        head = int(cols[6])
    except ValueError:
        raise ConlluParseError(f"non-integer head '{cols[6]}'", line_no) from None
    return Token(index=index, form=cols[1], lemma=cols[2], upos=cols[3], xpos=cols[4],
                 feats=cols[5], head=head, deprel=cols[7], misc=cols[9])


def _finish_sentence(tokens: list[Token], comments: list[str]) -> DepTree:
    sent_id = None
    for c in comments:
        if c.startswith("# sent_id"):
            _, _, value = c.partition("=")
            sent_id = value.strip()
    tree = DepTree(tokens=tokens, sentence_id=sent_id, comments=comments)
    violations = validate_tree(tree)
    if violations:
        raise TreeValidationError(f"sentence {tree.label()}: " + "; ".join(violations))
    return tree


def parse_conllu(text: str, source_name: str = "") -> Treebank:
    """Parse CoNLL-U text into a Treebank, validating every sentence."""
    trees: list[DepTree] = []
    tokens: list[Token] = []
    comments: list[str] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            if tokens or comments:
                trees.append(_finish_sentence(tokens, comments))
                tokens, comments = [], []
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        tok = _parse_token_line(line, line_no)
        if tok is not None:
            tokens.append(tok)
    if tokens or comments:
        trees.append(_finish_sentence(tokens, comments))
    return Treebank(trees=trees, source_name=source_name)


def write_conllu(tb: Treebank) -> str:
    """Serialize a Treebank to canonical 10-column CoNLL-U text."""
    blocks = []
    for tree in tb:
        lines = list(tree.comments)
        for t in tree.tokens:
            lines.append("\t".join([str(t.index), t.form, t.lemma, t.upos, t.xpos,
                                    t.feats, str(t.head), t.deprel, "_", t.misc]))
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks) + ("\n" if blocks else "")


def load_treebank(path) -> Treebank:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f.read(), source_name=str(path))


def dump_treebank(tb: Treebank, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_conllu(tb))


def retag(tree: DepTree, tags: list[str]) -> DepTree:
    """Copy of ``tree`` with upos replaced position-wise by ``tags``."""
    if len(tags) != len(tree.tokens):
        raise ValueError("tag sequence length does not match sentence length")
    return tree.with_tokens([replace(t, upos=g) for t, g in zip(tree.tokens, tags)])
