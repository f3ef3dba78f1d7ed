"""Search over candidate nesting trees for a compositional dataset.

Three stages: enumerate every distinct tree shape over the components,
screen out shapes that contradict the signs of the sample correlation
matrix, and fit the survivors to pick the one with the highest
log-likelihood.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import nested
from .composition import CompositionDataset, sample_correlation
from .errors import InputError, NumericalError
from .nested import NddParams, NestingTree, TreeNode
from .numerics import Tolerance

__all__ = [
    "TreeCandidate",
    "enumerate_trees",
    "filter_impossible",
    "select_tree",
    "MAX_COMPONENTS",
]

# Enumeration is exhaustive and the tree count grows fast with K
# (4, 26, 236, 2752, 39208 for K = 3..7), so cap the component count.
MAX_COMPONENTS = 8


@dataclass(frozen=True)
class TreeCandidate:
    """One tree shape moving through the search pipeline.

    log_likelihood is filled by select_tree; filtered marks shapes ruled
    out by the correlation-sign screen, with the witnessing node, leaf
    pair, and outside leaf recorded.
    """

    tree: NestingTree
    log_likelihood: float | None = None
    converged: bool = True
    filtered: bool = False
    filter_reason: str = ""
    witness: tuple[str, tuple[str, str], str] | None = None


def _partitions(items: list):
    """Every partition of items into unordered nonempty blocks."""
    if len(items) == 1:
        yield [items]
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def _subtrees(leaves: tuple[int, ...]) -> list[TreeNode]:
    """All rooted trees on the given leaves with internal degree >= 2."""
    if len(leaves) == 1:
        return [TreeNode(component=leaves[0])]
    out = []
    for blocks in _partitions(list(leaves)):
        if len(blocks) < 2:
            continue
        options = [_subtrees(tuple(b)) for b in blocks]
        for combo in itertools.product(*options):
            out.append(TreeNode(children=tuple(combo)))
    return out


def enumerate_trees(
    k: int, components: tuple[str, ...] | None = None
) -> list[TreeCandidate]:
    """Every distinct nesting tree over k components, flat tree included.

    Trees are canonicalized, so the result has no duplicates; it is sorted
    by rendered form, which fixes the tie-break order used downstream.
    """
    if not (2 <= k <= MAX_COMPONENTS):
        raise InputError(
            f"component count must be between 2 and {MAX_COMPONENTS}, got {k}"
        )
    if components is None:
        components = tuple(f"c{j + 1}" for j in range(k))
    components = tuple(components)
    if len(components) != k:
        raise InputError(
            f"expected {k} component names, got {len(components)}"
        )
    trees = [
        NestingTree(root=root, leaf_names=components)
        for root in _subtrees(tuple(range(k)))
    ]
    trees.sort(key=lambda t: t.render(include_alphas=False))
    return [TreeCandidate(tree=t) for t in trees]


def _validate_correlation(corr: np.ndarray, k: int) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (k, k):
        raise InputError(
            f"correlation matrix must be {k}x{k}, got {corr.shape}"
        )
    if not np.allclose(corr, corr.T, atol=1.0e-8):
        raise InputError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1.0e-6):
        raise InputError("correlation matrix must have unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1.0e-8):
        raise InputError("correlation entries must lie in [-1, 1]")
    return corr


def filter_impossible(
    candidates: list[TreeCandidate], corr: np.ndarray
) -> list[TreeCandidate]:
    """Flag trees whose nesting contradicts the correlation signs.

    Components nested under a common node share their sign of correlation
    with every component outside that node. A candidate is filtered when
    some outside leaf w correlates positively with one leaf under a node
    and negatively with another; the first such witness (in pre-order node
    order, then index order) is recorded. Zero correlations are compatible
    with either sign, and the flat tree is never filtered because its only
    internal node has no outside leaves.
    """
    if not candidates:
        return []
    k = candidates[0].tree.n_components
    corr = _validate_correlation(corr, k)
    out = []
    for cand in candidates:
        tree = cand.tree
        hit = None
        for label, node in tree.internal_nodes():
            inside = sorted(node.leaf_indices())
            outside = sorted(set(range(k)) - set(inside))
            if not outside:
                continue
            for u, v in itertools.combinations(inside, 2):
                for w in outside:
                    if corr[w, u] * corr[w, v] < 0.0:
                        hit = (label, (u, v), w)
                        break
                if hit:
                    break
            if hit:
                break
        if hit is None:
            out.append(cand)
        else:
            label, (u, v), w = hit
            name = tree.component_name
            reason = (
                f"corr({name(w)},{name(u)}) = {corr[w, u]:+.3f} and "
                f"corr({name(w)},{name(v)}) = {corr[w, v]:+.3f} disagree in "
                f"sign, but {name(u)} and {name(v)} are nested together "
                f"under {label}"
            )
            out.append(
                replace(
                    cand,
                    filtered=True,
                    filter_reason=reason,
                    witness=(label, (name(u), name(v)), name(w)),
                )
            )
    return out


def _parameter_count(tree: NestingTree) -> int:
    return sum(len(node.children) for _, node in tree.internal_nodes())


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, CompositionDataset):
        return data.matrix
    return np.asarray(data, dtype=float)


def select_tree(
    data,
    candidates: list[TreeCandidate],
    tol: Tolerance = Tolerance(),
    criterion: str = "loglik",
) -> tuple[NddParams, list[TreeCandidate]]:
    """Fit every surviving candidate and rank them.

    data may be a dataset (all rows pooled) or a plain matrix. Returns the
    best fit's parameters and the full ranking, best first. criterion is
    "loglik" (default) or "aic", which penalizes trees with more edges;
    ties and fit failures fall back to the enumeration order, and failed
    fits rank last with their log_likelihood left unset.
    """
    if criterion not in ("loglik", "aic"):
        raise InputError(f"criterion must be 'loglik' or 'aic', got {criterion!r}")
    x = _as_matrix(data)
    survivors = [c for c in candidates if not c.filtered]
    if not survivors:
        raise InputError("no surviving candidate trees to fit")

    fitted: list[tuple[float, int, TreeCandidate, NddParams | None]] = []
    for order, cand in enumerate(survivors):
        try:
            fit = nested.mle(cand.tree, x, tol=tol)
        except (NumericalError, InputError):
            fitted.append((np.inf, order, cand, None))
            continue
        ll = fit.log_likelihood
        score = -ll if criterion == "loglik" else 2.0 * _parameter_count(cand.tree) - 2.0 * ll
        fitted.append(
            (
                score,
                order,
                replace(cand, log_likelihood=ll, converged=fit.converged),
                fit.params,
            )
        )

    fitted.sort(key=lambda item: (item[0], item[1]))
    ranking = [item[2] for item in fitted]
    best_params = fitted[0][3]
    if best_params is None:
        raise NumericalError("every candidate tree failed to fit")
    return best_params, ranking


def search(
    dataset: CompositionDataset,
    tol: Tolerance = Tolerance(),
    criterion: str = "loglik",
) -> tuple[NddParams, list[TreeCandidate]]:
    """End-to-end search on a dataset: enumerate, screen on the pooled
    sample correlation, fit the survivors on the pooled rows."""
    cands = enumerate_trees(dataset.n_components, dataset.components)
    corr = sample_correlation(dataset)
    cands = filter_impossible(cands, corr)
    best, ranking = select_tree(dataset, cands, tol=tol, criterion=criterion)
    skipped = [c for c in cands if c.filtered]
    return best, ranking + skipped
