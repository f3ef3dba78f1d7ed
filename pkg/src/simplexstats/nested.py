"""Nested Dirichlet model on a rooted tree of components.

The model groups the K parts of a composition under a rooted tree whose
leaves are the components. Every internal node splits its mass among its
children according to an independent Dirichlet draw; a leaf's proportion is
the product of branch fractions along its root path. Each non-root node
carries one concentration parameter (the weight of the edge above it), so an
internal node with children weights (a_1..a_k) sends its mass through a
Dirichlet(a_1..a_k) split.

The flat tree (root with K leaf children) recovers the plain Dirichlet model.

Trees have a text form, e.g. ``((AQ1,OQ):8.1,(AQ2,TQ):11.2)``: parentheses
group children, an optional ``:value`` after a node is its edge weight, and
the root carries none. Children are kept in a canonical order (by smallest
contained component index) so structurally equal trees compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dirichlet
from .composition import CompositionDataset, validate
from .errors import (
    DimensionMismatchError,
    DomainError,
    InputError,
    TreeFormatError,
    TreeStructureError,
)
from .numerics import Tolerance, _lgamma_core

__all__ = [
    "TreeNode",
    "NestingTree",
    "NddParams",
    "SubtreeBlock",
    "SubtreeDecomposition",
    "NddFitResult",
    "SubtreeFit",
    "flat_tree",
    "parse_tree",
    "render_tree",
    "decompose",
    "reconstruct",
    "log_density",
    "mle",
    "sample",
    "leaf_means",
    "delta_method_ses",
]


@dataclass(frozen=True)
class TreeNode:
    """One node: a leaf holds a component index, an internal node children.

    ``alpha`` is the concentration on the edge joining this node to its
    parent; the root has none.
    """

    component: int | None = None
    children: tuple["TreeNode", ...] = ()
    alpha: float | None = None

    def __post_init__(self):
        if (self.component is None) == (len(self.children) == 0):
            raise TreeStructureError(
                "a node is either a leaf with a component index or an "
                "internal node with children"
            )
        if self.component is not None and self.component < 0:
            raise TreeStructureError("component indices must be nonnegative")
        if self.children and len(self.children) < 2:
            raise TreeStructureError("internal nodes need at least 2 children")
        if self.alpha is not None and not (
            np.isfinite(self.alpha) and self.alpha > 0.0
        ):
            raise TreeStructureError("edge weights must be finite and positive")

    @property
    def is_leaf(self) -> bool:
        return self.component is not None

    def min_leaf(self) -> int:
        if self.is_leaf:
            return self.component
        return min(c.min_leaf() for c in self.children)

    def leaf_indices(self) -> tuple[int, ...]:
        if self.is_leaf:
            return (self.component,)
        out: list[int] = []
        for c in self.children:
            out.extend(c.leaf_indices())
        return tuple(sorted(out))


def _canonical(node: TreeNode) -> TreeNode:
    if node.is_leaf:
        return node
    kids = tuple(sorted((_canonical(c) for c in node.children), key=TreeNode.min_leaf))
    return TreeNode(component=None, children=kids, alpha=node.alpha)


@dataclass(frozen=True)
class NestingTree:
    """A rooted component tree, canonicalized and validated.

    ``leaf_names`` optionally names component i as leaf_names[i]; unnamed
    trees bind to data positionally.
    """

    root: TreeNode
    leaf_names: tuple[str, ...] | None = None

    def __post_init__(self):
        root = self.root
        if root.is_leaf:
            raise TreeStructureError("the root must be an internal node")
        if root.alpha is not None:
            raise TreeStructureError("the root cannot carry an edge weight")
        root = _canonical(root)
        object.__setattr__(self, "root", root)
        leaves = root.leaf_indices()
        k = len(leaves)
        if leaves != tuple(range(k)):
            raise TreeStructureError(
                f"leaves must cover component indices 0..{k - 1} exactly once, "
                f"got {leaves}"
            )
        if self.leaf_names is not None:
            names = tuple(str(s) for s in self.leaf_names)
            if len(names) != k:
                raise DimensionMismatchError(
                    f"{len(names)} leaf names for {k} components"
                )
            if len(set(names)) != k:
                raise TreeStructureError("leaf names must be unique")
            object.__setattr__(self, "leaf_names", names)

    @property
    def n_components(self) -> int:
        return len(self.root.leaf_indices())

    @property
    def is_flat(self) -> bool:
        return all(c.is_leaf for c in self.root.children)

    def component_name(self, index: int) -> str:
        if self.leaf_names is not None:
            return self.leaf_names[index]
        return f"c{index + 1}"

    def internal_nodes(self) -> tuple[tuple[str, TreeNode], ...]:
        """Internal nodes in pre-order with stable labels root, N1, N2, ..."""
        out: list[tuple[str, TreeNode]] = []
        counter = 1

        def walk(node: TreeNode, is_root: bool):
            nonlocal counter
            if is_root:
                out.append(("root", node))
            else:
                out.append((f"N{counter}", node))
                counter += 1
            for c in node.children:
                if not c.is_leaf:
                    walk(c, False)

        walk(self.root, True)
        return tuple(out)

    def strip_alphas(self) -> "NestingTree":
        def strip(node: TreeNode) -> TreeNode:
            if node.is_leaf:
                return TreeNode(component=node.component)
            return TreeNode(children=tuple(strip(c) for c in node.children))

        return NestingTree(root=strip(self.root), leaf_names=self.leaf_names)

    def is_same_shape(self, other: "NestingTree") -> bool:
        return self.strip_alphas().root == other.strip_alphas().root

    def render(self, include_alphas: bool = True) -> str:
        return render_tree(self, include_alphas=include_alphas)


def flat_tree(k: int, leaf_names: tuple[str, ...] | None = None) -> NestingTree:
    """The tree with all K components directly under the root."""
    if k < 2:
        raise DomainError(f"need at least 2 components, got {k}")
    kids = tuple(TreeNode(component=j) for j in range(k))
    return NestingTree(root=TreeNode(children=kids), leaf_names=leaf_names)


# ---------------------------------------------------------------------------
# Text format


_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_CHARS = _NAME_START | set("0123456789.-")
_WEIGHT_CHARS = set("0123456789.eE+-")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.names: list[str] = []

    def error(self, message: str):
        raise TreeFormatError(message, position=self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def parse_name(self) -> str:
        start = self.pos
        if self.peek() not in _NAME_START:
            self.error("expected a component name")
        while self.peek() in _NAME_CHARS:
            self.pos += 1
        return self.text[start : self.pos]

    def parse_weight(self) -> float | None:
        self.skip_ws()
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip_ws()
        start = self.pos
        while self.peek() in _WEIGHT_CHARS:
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            value = float(token)
        except ValueError:
            self.pos = start
            self.error(f"bad edge weight {token!r}")
        if not np.isfinite(value) or value <= 0.0:
            self.pos = start
            self.error(f"edge weights must be positive, got {token}")
        return value

    def parse_node(self) -> TreeNode:
        self.skip_ws()
        if self.peek() == "(":
            self.take("(")
            children = [self.parse_node()]
            self.skip_ws()
            while self.peek() == ",":
                self.take(",")
                children.append(self.parse_node())
                self.skip_ws()
            self.take(")")
            if len(children) < 2:
                self.error("groups need at least 2 children")
            alpha = self.parse_weight()
            return TreeNode(children=tuple(children), alpha=alpha)
        name = self.parse_name()
        if name in self.names:
            self.error(f"component {name!r} appears twice")
        self.names.append(name)
        alpha = self.parse_weight()
        return TreeNode(component=self.names.index(name), alpha=alpha)


def parse_tree(text: str) -> NestingTree:
    """Parse the parenthesized tree format.

    Component indices are assigned by first appearance in the text; use the
    leaf names to bind the tree to a dataset's columns.
    """
    if not isinstance(text, str) or not text.strip():
        raise TreeFormatError("empty tree text")
    p = _Parser(text)
    node = p.parse_node()
    p.skip_ws()
    if p.pos != len(text):
        p.error("trailing characters after the tree")
    if node.is_leaf:
        raise TreeFormatError("a tree needs at least 2 components")
    if node.alpha is not None:
        raise TreeFormatError("the root cannot carry an edge weight")
    return NestingTree(root=node, leaf_names=tuple(p.names))


def render_tree(tree: NestingTree, include_alphas: bool = True) -> str:
    """Canonical text for a tree; parse_tree(render_tree(t)) reproduces t."""

    def fmt(node: TreeNode, is_root: bool) -> str:
        if node.is_leaf:
            body = tree.component_name(node.component)
        else:
            body = "(" + ",".join(fmt(c, False) for c in node.children) + ")"
        if include_alphas and not is_root and node.alpha is not None:
            body += f":{node.alpha!s}"
        return body

    return fmt(tree.root, True)


# ---------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class NddParams:
    """A fully weighted nesting tree: every non-root node has its
    concentration set."""

    tree: NestingTree

    def __post_init__(self):
        def check(node: TreeNode, is_root: bool):
            if not is_root and node.alpha is None:
                raise TreeStructureError(
                    "every non-root node needs an edge weight; "
                    f"missing on {render_tree(self.tree, include_alphas=False)}"
                )
            for c in node.children:
                check(c, False)

        check(self.tree.root, True)

    @property
    def n_components(self) -> int:
        return self.tree.n_components

    def subtree_params(self) -> tuple[tuple[str, tuple[str, ...], dirichlet.DirichletParams], ...]:
        """(label, child labels, Dirichlet over the children) per internal
        node, in pre-order."""
        labels = _internal_labels(self.tree)
        out = []
        for label, node in labels:
            child_labels = _child_labels(self.tree, node, labels)
            alphas = np.array([c.alpha for c in node.children], dtype=float)
            out.append((label, child_labels, dirichlet.DirichletParams(alpha=alphas)))
        return tuple(out)


def _internal_labels(tree: NestingTree) -> tuple[tuple[str, TreeNode], ...]:
    return tree.internal_nodes()


def _child_labels(
    tree: NestingTree,
    node: TreeNode,
    labels: tuple[tuple[str, TreeNode], ...],
) -> tuple[str, ...]:
    """Labels of a node's children: component names for leaves, N# for
    internal children (matched by position in the pre-order listing)."""
    by_id = {id(n): lab for lab, n in labels}
    out = []
    for c in node.children:
        if c.is_leaf:
            out.append(tree.component_name(c.component))
        else:
            out.append(by_id[id(c)])
    return tuple(out)


def leaf_means(params: NddParams) -> np.ndarray:
    """Expected composition: product of branch mean fractions along each
    root-to-leaf path."""
    k = params.n_components
    out = np.empty(k, dtype=float)

    def walk(node: TreeNode, acc: float):
        if node.is_leaf:
            out[node.component] = acc
            return
        alphas = np.array([c.alpha for c in node.children], dtype=float)
        fracs = alphas / alphas.sum()
        for c, f in zip(node.children, fracs):
            walk(c, acc * f)

    walk(params.tree.root, 1.0)
    return out


# ---------------------------------------------------------------------------
# Decomposition


@dataclass(frozen=True)
class SubtreeBlock:
    """The branch compositions observed at one internal node."""

    label: str
    child_labels: tuple[str, ...]
    matrix: np.ndarray  # (n, k_children), rows sum to 1
    mass: np.ndarray  # (n,) share of total mass reaching this node

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        s = np.asarray(self.mass, dtype=float).copy()
        s.flags.writeable = False
        object.__setattr__(self, "mass", s)


@dataclass(frozen=True)
class SubtreeDecomposition:
    """All subtree blocks of a dataset under one tree, in pre-order."""

    tree: NestingTree
    blocks: tuple[SubtreeBlock, ...]

    @property
    def n_observations(self) -> int:
        return self.blocks[0].matrix.shape[0]

    def block(self, label: str) -> SubtreeBlock:
        for blk in self.blocks:
            if blk.label == label:
                return blk
        raise InputError(f"no subtree labeled {label!r}")


def _bind_matrix(tree: NestingTree, data) -> np.ndarray:
    """Dataset columns in tree component order; plain arrays bind
    positionally."""
    if isinstance(data, CompositionDataset):
        if tree.leaf_names is not None:
            if set(tree.leaf_names) != set(data.components):
                raise InputError(
                    f"tree components {sorted(tree.leaf_names)} do not match "
                    f"dataset components {sorted(data.components)}"
                )
            perm = [data.component_index(nm) for nm in tree.leaf_names]
            return data.matrix[:, perm]
        matrix = data.matrix
    else:
        matrix = validate(np.asarray(data, dtype=float))
        if matrix.ndim == 1:
            matrix = matrix[None, :]
    if matrix.shape[1] != tree.n_components:
        raise DimensionMismatchError(
            f"{matrix.shape[1]} columns vs {tree.n_components} tree components"
        )
    return matrix


def decompose(tree: NestingTree, data) -> SubtreeDecomposition:
    """Branch compositions at every internal node.

    Each block row holds the children's shares of the node's mass, so rows
    sum to one; the block's ``mass`` is the node's share of the whole.
    """
    matrix = _bind_matrix(tree, data)
    labels = _internal_labels(tree)
    blocks: list[SubtreeBlock] = []

    def mass_of(node: TreeNode) -> np.ndarray:
        if node.is_leaf:
            return matrix[:, node.component]
        return np.sum([mass_of(c) for c in node.children], axis=0)

    for label, node in labels:
        node_mass = mass_of(node)
        child_mass = np.column_stack([mass_of(c) for c in node.children])
        blocks.append(
            SubtreeBlock(
                label=label,
                child_labels=_child_labels(tree, node, labels),
                matrix=child_mass / node_mass[:, None],
                mass=node_mass,
            )
        )
    return SubtreeDecomposition(tree=tree, blocks=tuple(blocks))


def reconstruct(decomposition: SubtreeDecomposition) -> np.ndarray:
    """Invert decompose: rebuild compositions in tree component order."""
    tree = decomposition.tree
    n = decomposition.n_observations
    k = tree.n_components
    out = np.empty((n, k), dtype=float)
    blocks = iter(decomposition.blocks)

    def walk(node: TreeNode, mass: np.ndarray):
        blk = next(blocks)
        for j, child in enumerate(node.children):
            child_mass = blk.matrix[:, j] * mass
            if child.is_leaf:
                out[:, child.component] = child_mass
            else:
                walk(child, child_mass)

    walk(tree.root, np.ones(n))
    return out


# ---------------------------------------------------------------------------
# Density, likelihood, sampling


def log_density(params: NddParams, x) -> float | np.ndarray:
    """Log density of compositions under the nested model.

    By the change of variables from leaf space to stacked branch coordinates,
    this is the sum of the subtree Dirichlet log-densities minus
    sum_i (k_i - 1) log s_i, with s_i the mass share at internal node i.
    """
    arr = np.asarray(x, dtype=float) if not isinstance(x, CompositionDataset) else x
    decomp = decompose(params.tree, arr)
    subparams = params.subtree_params()
    n = decomp.n_observations
    total = np.zeros(n, dtype=float)
    for (label, _children, dpar), blk in zip(subparams, decomp.blocks):
        a = dpar.alpha
        const = _lgamma_core(np.asarray(a.sum())) - _lgamma_core(a).sum()
        total += const + ((a - 1.0) * np.log(blk.matrix)).sum(axis=1)
        total -= (len(a) - 1.0) * np.log(blk.mass)
    single = not isinstance(x, CompositionDataset) and np.asarray(x).ndim == 1
    return float(total[0]) if single else total


@dataclass(frozen=True)
class SubtreeFit:
    """One internal node's fit and its share of the total log-likelihood."""

    label: str
    child_labels: tuple[str, ...]
    fit: dirichlet.FitResult
    log_likelihood: float  # includes this node's change-of-variables term


@dataclass(frozen=True)
class NddFitResult:
    """Maximum-likelihood fit of a nested model."""

    params: NddParams
    subtree_fits: tuple[SubtreeFit, ...]
    log_likelihood: float
    converged: bool


def mle(tree: NestingTree, data, tol: Tolerance = Tolerance()) -> NddFitResult:
    """Fit every subtree by Dirichlet maximum likelihood.

    The branch compositions at distinct internal nodes are independent, so
    the joint fit splits into one Dirichlet fit per internal node. The
    reported total is the leaf-space log-likelihood: each subtree's term
    carries its own change-of-variables correction.
    """
    decomp = decompose(tree, data)
    fits: list[SubtreeFit] = []
    for blk in decomp.blocks:
        fit = dirichlet.mle(blk.matrix, tol=tol)
        jac = (blk.matrix.shape[1] - 1.0) * np.log(blk.mass).sum()
        fits.append(
            SubtreeFit(
                label=blk.label,
                child_labels=blk.child_labels,
                fit=fit,
                log_likelihood=fit.log_likelihood - jac,
            )
        )

    by_label = {f.label: f for f in fits}
    labels = _internal_labels(tree)
    by_id = {id(node): lab for lab, node in labels}

    def rebuild(node: TreeNode, alpha: float | None) -> TreeNode:
        if node.is_leaf:
            return TreeNode(component=node.component, alpha=alpha)
        fit = by_label[by_id[id(node)]]
        kids = tuple(
            rebuild(c, float(a))
            for c, a in zip(node.children, fit.fit.params.alpha)
        )
        return TreeNode(children=kids, alpha=alpha)

    fitted_tree = NestingTree(
        root=rebuild(tree.root, None), leaf_names=tree.leaf_names
    )
    return NddFitResult(
        params=NddParams(tree=fitted_tree),
        subtree_fits=tuple(fits),
        log_likelihood=float(sum(f.log_likelihood for f in fits)),
        converged=all(f.fit.converged for f in fits),
    )


def sample(params: NddParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n compositions: independent branch splits multiplied down the
    tree. Branches are visited in pre-order, children in canonical order."""
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    k = params.n_components
    out = np.empty((n, k), dtype=float)

    def walk(node: TreeNode, mass: np.ndarray):
        alphas = np.array([c.alpha for c in node.children], dtype=float)
        splits = dirichlet.sample(
            dirichlet.DirichletParams(alpha=alphas), n, rng
        )
        for j, child in enumerate(node.children):
            child_mass = splits[:, j] * mass
            if child.is_leaf:
                out[:, child.component] = child_mass
            else:
                walk(child, child_mass)

    walk(params.tree.root, np.ones(n))
    return out


def delta_method_ses(params: NddParams, n: int) -> np.ndarray:
    """Asymptotic standard errors of the leaf means for a sample of size n.

    A leaf mean is the product of independent branch-mean estimates along its
    path, so its relative variance is, to first order, the sum of the branch
    estimates' relative variances: Var(p_j) = p_j^2 * sum_i Var(m_i)/m_i^2.
    Branch variances come from each subtree's inverse information.
    """
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    k = params.n_components
    p = leaf_means(params)
    rel_var = np.zeros(k, dtype=float)

    def walk(node: TreeNode, acc: float):
        alphas = np.array([c.alpha for c in node.children], dtype=float)
        dpar = dirichlet.DirichletParams(alpha=alphas)
        ses = dirichlet.mean_standard_errors(dpar, n)
        means = dpar.mean
        for j, child in enumerate(node.children):
            term = acc + (ses[j] / means[j]) ** 2
            if child.is_leaf:
                rel_var[child.component] = term
            else:
                walk(child, term)

    walk(params.tree.root, 0.0)
    return p * np.sqrt(rel_var)
