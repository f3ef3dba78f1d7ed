"""Tree enumeration, correlation screening, and model selection."""

import itertools

import numpy as np
import pytest

from simplexstats import nested, treesearch
from simplexstats.composition import CompositionDataset
from simplexstats.errors import InputError
from simplexstats.nested import NddParams, parse_tree
from simplexstats.treesearch import (
    enumerate_trees,
    filter_impossible,
    search,
    select_tree,
)

# Pooled sample correlations of the four maze quadrants, order TQ, AQ1, OQ,
# AQ2. The single positive entry is the (AQ1, OQ) pair.
QUADRANT_CORR = np.array(
    [
        [1.00, -0.66, -0.51, -0.32],
        [-0.66, 1.00, 0.15, -0.25],
        [-0.51, 0.15, 1.00, -0.27],
        [-0.32, -0.25, -0.27, 1.00],
    ]
)
QUADRANTS = ("TQ", "AQ1", "OQ", "AQ2")


def _brute_force_shapes(k: int) -> set:
    """Independent enumeration through restricted-growth set partitions."""

    def partitions(items):
        if len(items) == 1:
            yield [items]
            return
        first, rest = items[0], items[1:]
        for smaller in partitions(rest):
            for i in range(len(smaller)):
                yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1 :]
            yield [[first]] + smaller

    def shapes(leaves):
        if len(leaves) == 1:
            yield str(leaves[0])
            return
        for part in partitions(list(leaves)):
            if len(part) == 1:
                continue
            for combo in itertools.product(*(shapes(tuple(b)) for b in part)):
                yield "(" + ",".join(sorted(combo, key=_block_key)) + ")"

    def _block_key(rendered):
        digits = [int(c) for c in rendered if c.isdigit()]
        return min(digits)

    return set(shapes(tuple(range(k))))


@pytest.mark.parametrize("k,count", [(2, 1), (3, 4), (4, 26), (5, 236)])
def test_enumeration_counts(k, count):
    cands = enumerate_trees(k)
    assert len(cands) == count
    renders = {c.tree.render(include_alphas=False) for c in cands}
    assert len(renders) == count


@pytest.mark.parametrize("k", [2, 3, 4])
def test_enumeration_matches_brute_force_shapes(k):
    ours = set()
    for cand in enumerate_trees(k):
        text = cand.tree.render(include_alphas=False)
        for j in range(k):
            text = text.replace(f"c{j + 1}", str(j))
        ours.add(text)
    assert ours == _brute_force_shapes(k)


def test_enumeration_includes_flat_tree_and_respects_names():
    cands = enumerate_trees(3, components=("x", "y", "z"))
    renders = [c.tree.render(include_alphas=False) for c in cands]
    assert "(x,y,z)" in renders
    assert renders == sorted(renders)


def test_enumeration_guards():
    with pytest.raises(InputError):
        enumerate_trees(1)
    with pytest.raises(InputError):
        enumerate_trees(treesearch.MAX_COMPONENTS + 1)
    with pytest.raises(InputError):
        enumerate_trees(3, components=("a", "b"))


def test_filter_rejects_cherry_with_sign_conflict():
    # TQ and AQ1 cannot share a node: OQ correlates negatively with TQ but
    # positively with AQ1.
    cands = enumerate_trees(4, components=QUADRANTS)
    flagged = filter_impossible(cands, QUADRANT_CORR)
    by_render = {c.tree.render(include_alphas=False): c for c in flagged}
    cherry = by_render["((TQ,AQ1),OQ,AQ2)"]
    assert cherry.filtered
    assert cherry.witness is not None
    pair_names = set(cherry.witness[1])
    assert pair_names == {"TQ", "AQ1"}
    assert cherry.witness[2] == "OQ"
    assert "OQ" in cherry.filter_reason


def test_filter_keeps_compatible_trees():
    cands = enumerate_trees(4, components=QUADRANTS)
    flagged = filter_impossible(cands, QUADRANT_CORR)
    by_render = {c.tree.render(include_alphas=False): c for c in flagged}
    assert not by_render["(TQ,AQ1,OQ,AQ2)"].filtered
    assert not by_render["((TQ,AQ2),(AQ1,OQ))"].filtered
    survivors = [c for c in flagged if not c.filtered]
    assert 0 < len(survivors) < len(flagged)


def test_filter_treats_zero_correlation_as_compatible():
    corr = np.eye(3)
    cands = enumerate_trees(3)
    flagged = filter_impossible(cands, corr)
    assert not any(c.filtered for c in flagged)


def test_filter_validates_matrix():
    cands = enumerate_trees(3)
    with pytest.raises(InputError):
        filter_impossible(cands, np.eye(4))
    bad = np.eye(3)
    bad[0, 1] = 0.5
    with pytest.raises(InputError):
        filter_impossible(cands, bad)
    huge = np.eye(3)
    huge[0, 1] = huge[1, 0] = 1.5
    with pytest.raises(InputError):
        filter_impossible(cands, huge)


def test_select_tree_ranks_by_log_likelihood():
    params = NddParams(
        tree=parse_tree("((AQ1:11.6,OQ:10.3):8.1,(AQ2:5.6,TQ:9.2):11.2)")
    )
    x = nested.sample(params, 1000, np.random.default_rng(7))
    cands = enumerate_trees(4, components=("AQ1", "OQ", "AQ2", "TQ"))
    best, ranking = select_tree(x, cands)
    assert best.tree.is_same_shape(params.tree)
    logliks = [c.log_likelihood for c in ranking if c.log_likelihood is not None]
    assert logliks == sorted(logliks, reverse=True)
    assert ranking[0].tree.is_same_shape(params.tree)


def test_select_tree_aic_penalizes_extra_edges():
    # Data truly flat: the flat tree has K parameters, nested shapes more, so
    # AIC must prefer flat even though nesting can only raise the likelihood.
    rng = np.random.default_rng(11)
    x = rng.dirichlet([5.0, 4.0, 3.0], size=400)
    cands = enumerate_trees(3)
    best_aic, ranking = select_tree(x, cands, criterion="aic")
    assert best_aic.tree.is_flat

    def edges(tree):
        return sum(len(node.children) for _, node in tree.internal_nodes())

    scores = [
        2.0 * edges(c.tree) - 2.0 * c.log_likelihood
        for c in ranking
        if c.log_likelihood is not None
    ]
    assert scores == sorted(scores)


def test_select_tree_rejects_bad_inputs():
    cands = enumerate_trees(3)
    rng = np.random.default_rng(13)
    x = rng.dirichlet([2.0, 2.0, 2.0], size=10)
    with pytest.raises(InputError):
        select_tree(x, cands, criterion="bic")
    all_filtered = [
        treesearch.TreeCandidate(tree=c.tree, filtered=True, filter_reason="test")
        for c in cands
    ]
    with pytest.raises(InputError):
        select_tree(x, all_filtered)


def test_search_end_to_end_recovers_generating_tree():
    params = NddParams(
        tree=parse_tree("((AQ1:11.6,OQ:10.3):8.1,(AQ2:5.6,TQ:9.2):11.2)")
    )
    x = nested.sample(params, 1000, np.random.default_rng(17))
    ds = CompositionDataset.from_arrays(
        x, ["g"] * 1000, components=("AQ1", "OQ", "AQ2", "TQ")
    )
    best, ranking = search(ds)
    assert best.tree.is_same_shape(params.tree)
    assert len(ranking) == 26
    # screened-out shapes sit at the very end of the ranking
    filtered_flags = [c.filtered for c in ranking]
    first_filtered = filtered_flags.index(True) if True in filtered_flags else len(ranking)
    assert all(filtered_flags[first_filtered:])
