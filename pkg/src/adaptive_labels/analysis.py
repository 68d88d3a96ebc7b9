"""Semantic-structure analysis of label vectors.

Compares distances between learned label vectors with path distances in a
reference class hierarchy (per-class Kendall tau-b, averaged), and builds
average-linkage dendrograms exported as Newick text.
"""
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, DimensionError


class HierarchyTree:
    """Rooted tree given by parent links. Node names are arbitrary strings."""

    def __init__(self, edges):
        self.parent = {}
        self.children = defaultdict(list)
        nodes = {}
        for parent, child in edges:
            if child in self.parent:
                raise DataError(f"node {child!r} has more than one parent")
            if parent == child:
                raise DataError(f"self-loop at {child!r}")
            self.parent[child] = parent
            self.children[parent].append(child)
            nodes[parent] = None
            nodes[child] = None
        self.nodes = list(nodes)
        roots = [n for n in self.nodes if n not in self.parent]
        if len(roots) != 1:
            raise DataError(f"hierarchy must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        self.depth = {self.root: 0}
        stack = [self.root]
        while stack:
            node = stack.pop()
            for c in self.children.get(node, ()):
                self.depth[c] = self.depth[node] + 1
                stack.append(c)
        if len(self.depth) != len(self.nodes):
            raise DataError("hierarchy contains a cycle detached from the root")

    @property
    def leaves(self):
        return [n for n in self.nodes if not self.children.get(n)]

    def edges(self):
        out = []
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            for c in self.children.get(node, ()):
                out.append((node, c))
                queue.append(c)
        return out

    def path_length(self, a, b):
        da, db = self.depth[a], self.depth[b]
        steps = 0
        while da > db:
            a, da, steps = self.parent[a], da - 1, steps + 1
        while db > da:
            b, db, steps = self.parent[b], db - 1, steps + 1
        while a != b:
            a, b, steps = self.parent[a], self.parent[b], steps + 2
        return steps


def read_hierarchy(path):
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'parent<TAB>child'")
            edges.append((parts[0], parts[1]))
    if not edges:
        raise DataError(f"{path}: empty hierarchy")
    return HierarchyTree(edges)


def write_hierarchy(path, tree):
    with open(path, "w", encoding="utf-8") as fh:
        for parent, child in tree.edges():
            fh.write(f"{parent}\t{child}\n")


def mapped_classes(tree, class_names):
    """Indices of ``class_names`` that name a leaf of ``tree``."""
    leaves = set(tree.leaves)
    return [i for i, name in enumerate(class_names) if name in leaves]


def tree_distances(tree, class_names):
    leaves = set(tree.leaves)
    for name in class_names:
        if name not in leaves:
            raise DataError(f"class {name!r} is not a leaf of the hierarchy")
    n = len(class_names)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = tree.path_length(class_names[i], class_names[j])
    return D


def label_distances(vectors):
    """Plain Euclidean distances between label vectors."""
    V = np.asarray(getattr(vectors, "vectors", vectors), dtype=np.float64)
    return kernels.pairwise_distance(V, V, 0.0)


def kendall_tau_b(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"kendall_tau_b: lengths {a.shape} and {b.shape} differ")
    if a.size < 2:
        raise DimensionError("kendall_tau_b needs at least two observations")
    conc, disc, ties_a, ties_b = kernels.tau_b_counts(a, b)
    n0 = a.size * (a.size - 1) // 2
    denom = (n0 - ties_a) * (n0 - ties_b)
    # A fully tied vector carries no ordering; score it as no correlation.
    if denom == 0:
        return 0.0
    return (conc - disc) / math.sqrt(denom)


def per_class_tau(learned, reference):
    learned = np.asarray(learned, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if learned.shape != reference.shape or learned.ndim != 2 or learned.shape[0] != learned.shape[1]:
        raise DimensionError(f"distance matrices differ: {learned.shape} vs {reference.shape}")
    n = learned.shape[0]
    taus = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        taus[i] = kendall_tau_b(reference[i, keep], learned[i, keep])
    return taus


def correlation_score(learned, reference):
    """Mean over classes of tau-b between each class's distance rows."""
    return float(np.mean(per_class_tau(learned, reference)))


@dataclass
class Dendrogram:
    """Merge list ``(id_a, id_b, height, size)``; cluster ``n + k`` is formed by row ``k``."""

    merges: np.ndarray
    names: list

    @property
    def heights(self):
        return self.merges[:, 2]

    def clusters(self):
        """Map each merge's leaf set (frozenset of names) to its height."""
        n = len(self.names)
        members = {i: frozenset([self.names[i]]) for i in range(n)}
        out = {}
        for k, (a, b, h, _) in enumerate(self.merges):
            members[n + k] = members[int(a)] | members[int(b)]
            out[members[n + k]] = float(h)
        return out


def average_linkage(dist, names=None):
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise DimensionError(f"distance matrix must be square, got {dist.shape}")
    n = dist.shape[0]
    if n < 2:
        raise DimensionError("average linkage needs at least two items")
    if names is None:
        names = [str(i) for i in range(n)]
    return Dendrogram(kernels.average_linkage(dist), list(names))


_NEWICK_SPECIAL = set(" \t()[]':;,")


def _newick_name(name):
    if any(ch in _NEWICK_SPECIAL for ch in name):
        return "'" + name.replace("'", "''") + "'"
    return name


def _fmt(x):
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def export_newick(dendro):
    n = len(dendro.names)
    merges = dendro.merges

    def height(node):
        return 0.0 if node < n else float(merges[node - n, 2])

    def render(node):
        if node < n:
            return _newick_name(dendro.names[node])
        a, b, h = int(merges[node - n, 0]), int(merges[node - n, 1]), merges[node - n, 2]
        parts = [f"{render(c)}:{_fmt(h - height(c))}" for c in (a, b)]
        return "(" + ",".join(parts) + ")"

    return render(n + len(merges) - 1) + ";"


@dataclass
class NewickNode:
    name: str = ""
    length: float = 0.0
    children: list = None


def parse_newick(text):
    """Parse a Newick string into :class:`NewickNode` objects."""
    text = text.strip()
    pos = 0

    def peek():
        return text[pos] if pos < len(text) else ""

    def read_name():
        nonlocal pos
        if peek() == "'":
            pos += 1
            out = []
            while True:
                if pos >= len(text):
                    raise DataError("unterminated quoted name")
                if text[pos] == "'":
                    if text[pos + 1:pos + 2] == "'":
                        out.append("'")
                        pos += 2
                        continue
                    pos += 1
                    return "".join(out)
                out.append(text[pos])
                pos += 1
        start = pos
        while pos < len(text) and text[pos] not in "(),:;":
            pos += 1
        return text[start:pos]

    def read_node():
        nonlocal pos
        node = NewickNode(children=[])
        if peek() == "(":
            pos += 1
            node.children.append(read_node())
            while peek() == ",":
                pos += 1
                node.children.append(read_node())
            if peek() != ")":
                raise DataError(f"expected ')' at offset {pos}")
            pos += 1
        node.name = read_name()
        if peek() == ":":
            pos += 1
            start = pos
            while pos < len(text) and text[pos] not in "(),;":
                pos += 1
            node.length = float(text[start:pos])
        return node

    root = read_node()
    if peek() != ";":
        raise DataError("Newick text must end with ';'")
    return root


def newick_clusters(root):
    """Leaf-set to height map for a parsed ultrametric tree (leaves at 0)."""
    out = {}

    def walk(node):
        if not node.children:
            return frozenset([node.name]), 0.0
        sets, heights = [], []
        for c in node.children:
            s, h = walk(c)
            sets.append(s)
            heights.append(h + c.length)
        members = frozenset().union(*sets)
        out[members] = float(np.mean(heights))
        return members, out[members]

    walk(root)
    return out
