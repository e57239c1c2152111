"""Reading and writing trees in Newick format.

Grammar accepted::

    tree    -> subtree ";"
    subtree -> leaf | "(" subtree ("," subtree)* ")" [label] [":" length]
    leaf    -> label [":" length]

Whitespace outside labels is ignored, ``[...]`` comments are skipped and
labels may be single-quoted (a doubled quote inside a quoted label is a
literal quote). Rooted input is read as unrooted: the edges on either side of
a degree-2 node are merged and their lengths summed.
"""

from __future__ import annotations

import warnings
from typing import Optional

from .core import PhyloTree, Split, TaxonSet, TreeError

__all__ = ["NewickError", "parse_newick", "write_newick", "read_newick_file", "normalize_newick", "format_length"]

_PUNCT = set("(),:;[]'")


class NewickError(TreeError):
    """Malformed Newick input. ``pos`` is a character offset into the text."""

    def __init__(self, message, text=None, pos=None):
        self.pos = pos
        self.line = self.column = None
        if text is not None and pos is not None:
            self.line = text.count("\n", 0, pos) + 1
            self.column = pos - (text.rfind("\n", 0, pos) + 1) + 1
            message = f"{message} (line {self.line}, column {self.column})"
        super().__init__(message)


class _Node:
    __slots__ = ("children", "label", "length")

    def __init__(self, children, label, length):
        self.children = children
        self.label = label
        self.length = length


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, msg, pos=None):
        return NewickError(msg, self.text, self.pos if pos is None else pos)

    def skip(self):
        text, n = self.text, len(self.text)
        while self.pos < n:
            c = text[self.pos]
            if c.isspace():
                self.pos += 1
            elif c == "[":
                end = text.find("]", self.pos)
                if end < 0:
                    raise self.error("unterminated comment")
                self.pos = end + 1
            else:
                break

    def peek(self):
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, c):
        if self.peek() != c:
            got = self.peek() or "end of input"
            raise self.error(f"expected {c!r}, found {got!r}")
        self.pos += 1

    def at_end(self):
        return self.peek() == ""

    def label(self):
        self.skip()
        text = self.text
        if self.pos < len(text) and text[self.pos] == "'":
            start = self.pos
            self.pos += 1
            out = []
            while True:
                end = text.find("'", self.pos)
                if end < 0:
                    raise self.error("unterminated quoted label", start)
                out.append(text[self.pos:end])
                if text.startswith("''", end):
                    out.append("'")
                    self.pos = end + 2
                else:
                    self.pos = end + 1
                    return "".join(out)
        start = self.pos
        while self.pos < len(text):
            c = text[self.pos]
            if c in _PUNCT or c.isspace():
                break
            self.pos += 1
        return text[start:self.pos] or None

    def length(self):
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and not (
            self.text[self.pos] in _PUNCT or self.text[self.pos].isspace()
        ):
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            value = float(token)
        except ValueError:
            raise self.error(f"bad branch length {token!r}", start) from None
        if value != value or value in (float("inf"), float("-inf")):
            raise self.error(f"bad branch length {token!r}", start)
        if value < 0:
            raise self.error(f"negative branch length {token!r}", start)
        return value

    def subtree(self):
        start = self.pos
        if self.peek() == "(":
            self.pos += 1
            children = [self.subtree()]
            while self.peek() == ",":
                self.pos += 1
                children.append(self.subtree())
            if self.peek() != ")":
                got = self.peek() or "end of input"
                raise self.error(f"unbalanced parentheses: expected ',' or ')', found {got!r}")
            self.pos += 1
            label = self.label()
            return _Node(children, label, self.length())
        label = self.label()
        if label is None:
            got = self.peek() or "end of input"
            raise self.error(f"expected a leaf label, found {got!r}", start)
        return _Node(None, label, self.length())

    def tree(self):
        start = self.pos
        root = self.subtree()
        self.expect(";")
        return root, start


def _build(root: _Node, taxa: Optional[TaxonSet], text, start):
    leaves = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.children is None:
            leaves.append(node.label)
        else:
            stack.extend(node.children)
    seen = set()
    for lab in leaves:
        if lab in seen:
            raise NewickError(f"duplicate leaf label {lab!r}", text, start)
        seen.add(lab)
    if taxa is None:
        taxa = TaxonSet(sorted(leaves))
    elif seen != set(taxa.labels):
        missing = sorted(set(taxa.labels) - seen)
        extra = sorted(seen - set(taxa.labels))
        raise NewickError(
            f"leaf set does not match taxon set (missing {missing}, unexpected {extra})", text, start
        )
    k = len(taxa)
    full = (1 << k) - 1
    edge_len = {}  # canonical mask -> summed length
    missing = [False, False]  # [internal edge missing length, leaf missing length]
    leaf_has_length = False

    def visit(node):
        nonlocal leaf_has_length
        if node.children is None:
            mask = 1 << taxa.index(node.label)
        else:
            mask = 0
            for child in node.children:
                mask |= visit(child)
        if node is root:
            return mask
        canon = mask ^ full if mask & 1 else mask
        size = bin(canon).count("1")
        if node.children is None:
            if node.length is None:
                missing[1] = True
            else:
                leaf_has_length = True
        elif node.length is None and min(size, k - size) >= 2:
            missing[0] = True
        if canon and canon != full:
            edge_len[canon] = edge_len.get(canon, 0.0) + (node.length or 0.0)
        return mask

    visit(root)
    internal = {}
    pendant = {}
    for canon, length in edge_len.items():
        size = bin(canon).count("1")
        if size == 1 or size == k - 1:
            leaf_mask = canon if size == 1 else canon ^ full
            pendant[taxa.labels[leaf_mask.bit_length() - 1]] = length
        else:
            internal[Split(canon, k)] = length
    if missing[0] or (missing[1] and leaf_has_length):
        warnings.warn("missing branch lengths read as 0.0", stacklevel=3)
    if not leaf_has_length and not any(pendant.values()):
        pendant = None
    tree = PhyloTree(taxa, internal, pendant)
    return tree, taxa


def parse_newick(text: str, taxa: Optional[TaxonSet] = None) -> list:
    """Parse one or more semicolon-terminated Newick trees.

    Parameters
    ----------
    text : str
        Newick text. Trees may be separated by arbitrary whitespace.
    taxa : TaxonSet, optional
        If given, every tree's leaf set must equal it. Otherwise the taxon set
        is the sorted leaf labels of the first tree, shared by every later tree
        with the same leaf set.

    Returns
    -------
    list of PhyloTree
    """
    parser = _Parser(text)
    trees = []
    shared = taxa
    while not parser.at_end():
        root, start = parser.tree()
        if taxa is None and shared is not None:
            leaves = _leaf_labels(root)
            use = shared if set(leaves) == set(shared.labels) and len(leaves) == len(shared) else None
        else:
            use = shared
        tree, used = _build(root, use, text, start)
        if shared is None:
            shared = used
        trees.append(tree)
    return trees


def _leaf_labels(root):
    out = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.children is None:
            out.append(node.label)
        else:
            stack.extend(node.children)
    return out


def read_newick_file(path, taxa: Optional[TaxonSet] = None) -> list:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_newick(text, taxa)
    except NewickError as exc:
        raise NewickError(f"{path}: {exc}") from None


def format_length(x: float) -> str:
    """Shortest round-trip decimal for ``x``; integral values drop the ``.0``."""
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def _quote(label: str) -> str:
    if any(c in _PUNCT or c.isspace() for c in label):
        return "'" + label.replace("'", "''") + "'"
    return label


def write_newick(tree: PhyloTree) -> str:
    """Serialise ``tree`` as a Newick string.

    The tree is drawn from the node adjacent to taxon 0. Children are ordered
    by their smallest taxon index, so the output is canonical for a given
    taxon order. Leaf lengths are written only when the tree has pendant
    lengths; internal lengths are always written.
    """
    taxa = tree.taxa
    k = len(taxa)
    # Canonical masks exclude taxon 0, so the clades form a laminar family.
    clades = sorted(tree.internal, key=lambda s: bin(s.mask).count("1"))
    children = {}
    parent_of = {}
    for i, s in enumerate(clades):
        parent = None
        for t in clades[i + 1:]:
            if s.mask & t.mask == s.mask and t.mask != s.mask:
                parent = t
                break
        parent_of[s] = parent
        children.setdefault(parent, []).append(s)

    def lowest(mask):
        return (mask & -mask).bit_length()

    def leaf(i):
        lab = taxa.labels[i]
        out = _quote(lab)
        if tree.pendant is not None:
            out += ":" + format_length(tree.pendant[lab])
        return out

    def render(parent, mask):
        items = []
        covered = 0
        for c in children.get(parent, []):
            items.append((lowest(c.mask), "c", c))
            covered |= c.mask
        rest = mask & ~covered
        for i in range(k):
            if rest >> i & 1:
                items.append((i + 1, "l", i))
        items.sort(key=lambda x: x[0])
        parts = []
        for _, kind, obj in items:
            if kind == "l":
                parts.append(leaf(obj))
            else:
                parts.append(render(obj, obj.mask) + ":" + format_length(tree.internal[obj]))
        return "(" + ",".join(parts) + ")"

    if k == 1:
        return leaf(0) + ";"
    return render(None, (1 << k) - 1) + ";"


def normalize_newick(text: str) -> str:
    """Canonical form of every tree in ``text``, one tree per line.

    Internal node labels and comments are dropped, rooted input is unrooted
    and children are reordered, so a second pass leaves the output unchanged.
    """
    return "".join(write_newick(t) + "\n" for t in parse_newick(text))
