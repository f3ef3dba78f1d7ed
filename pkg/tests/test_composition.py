"""Dataset handling, validation, and log-ratio transforms."""

import numpy as np
import pytest

from simplexstats.composition import (
    Composition,
    CompositionDataset,
    SufficientStats,
    alr,
    clr,
    sample_correlation,
    ternary_coordinates,
    validate,
)
from simplexstats.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    EmptyGroupError,
    InputError,
    NotNormalizedError,
    TooFewComponentsError,
    ZeroComponentError,
)


def _toy_dataset():
    matrix = np.array(
        [
            [0.5, 0.3, 0.2],
            [0.4, 0.4, 0.2],
            [0.25, 0.5, 0.25],
            [0.3, 0.3, 0.4],
            [0.2, 0.45, 0.35],
        ]
    )
    labels = ["a", "a", "b", "b", "b"]
    return CompositionDataset.from_arrays(matrix, labels, components=("x", "y", "z"))


def test_validate_accepts_rows_on_the_simplex():
    out = validate(np.array([[0.2, 0.8], [0.5, 0.5]]))
    assert out.shape == (2, 2)


def test_validate_rejects_zero_and_unnormalized():
    with pytest.raises(ZeroComponentError):
        validate(np.array([0.0, 1.0]))
    with pytest.raises(NotNormalizedError):
        validate(np.array([0.6, 0.6]))


def test_validate_tolerance_is_configurable():
    x = np.array([0.5, 0.5004])
    with pytest.raises(NotNormalizedError):
        validate(x)
    out = validate(x, sum_tolerance=1e-3)
    assert out.shape == (2,)


def test_composition_wraps_single_vector_only():
    c = Composition(np.array([0.1, 0.9]))
    assert c.n_components == 2
    with pytest.raises(DimensionMismatchError):
        Composition(np.array([[0.1, 0.9]]))


def test_sufficient_stats_from_matrix():
    x = np.array([[0.2, 0.8], [0.4, 0.6]])
    s = SufficientStats.from_matrix(x)
    assert s.n == 2
    assert np.allclose(s.mean_log, np.log(x).mean(axis=0))
    assert np.allclose(s.mean, x.mean(axis=0))
    assert np.allclose(s.mean_sq, (x * x).mean(axis=0))


def test_dataset_groups_keep_first_appearance_order():
    ds = _toy_dataset()
    assert ds.groups == ("a", "b")
    assert ds.n_observations == 5
    assert ds.n_components == 3
    assert ds.group_matrix("a").shape == (2, 3)
    assert ds.group_matrix("b").shape == (3, 3)


def test_dataset_default_component_names():
    ds = CompositionDataset.from_arrays(np.array([[0.5, 0.5]]), ["g"])
    assert ds.components == ("c1", "c2")


def test_dataset_component_index_and_errors():
    ds = _toy_dataset()
    assert ds.component_index("y") == 1
    with pytest.raises(InputError):
        ds.component_index("nope")
    with pytest.raises(EmptyGroupError):
        ds.group_matrix("missing")


def test_dataset_rejects_mismatched_labels():
    with pytest.raises(DimensionMismatchError):
        CompositionDataset.from_arrays(np.array([[0.5, 0.5]]), ["a", "b"])


def test_dataset_needs_two_components():
    with pytest.raises(TooFewComponentsError):
        CompositionDataset.from_arrays(np.array([[1.0]]), ["a"])


def test_clr_rows_sum_to_zero():
    x = np.array([[0.2, 0.3, 0.5], [0.1, 0.6, 0.3]])
    z = clr(x)
    assert np.allclose(z.sum(axis=1), 0.0, atol=1e-14)
    assert np.allclose(z, np.log(x) - np.log(x).mean(axis=1, keepdims=True))


def test_alr_against_reference_component():
    x = np.array([0.2, 0.3, 0.5])
    z = alr(x)
    assert np.allclose(z, [np.log(0.2 / 0.5), np.log(0.3 / 0.5)])
    z0 = alr(x, ref=0)
    assert np.allclose(z0, [np.log(0.3 / 0.2), np.log(0.5 / 0.2)])


def test_sample_correlation_pooled_matches_numpy():
    ds = _toy_dataset()
    ref = np.corrcoef(ds.matrix, rowvar=False)
    assert np.allclose(sample_correlation(ds), ref, atol=1e-12)


def test_sample_correlation_within_group_centers_each_group():
    ds = _toy_dataset()
    centered = []
    for g in ds.groups:
        sub = ds.group_matrix(g)
        centered.append(sub - sub.mean(axis=0))
    ref = np.corrcoef(np.vstack(centered), rowvar=False)
    assert np.allclose(sample_correlation(ds, pooled=False), ref, atol=1e-12)


def test_sample_correlation_needs_variation():
    with pytest.raises(DegenerateDataError):
        sample_correlation(np.array([[0.5, 0.5]]))
    with pytest.raises(DegenerateDataError):
        sample_correlation(np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_ternary_coordinates_near_vertices():
    eps = 1e-9
    near = np.full((3, 3), eps)
    np.fill_diagonal(near, 1.0 - 2.0 * eps)
    xy = ternary_coordinates(near)
    expected = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])
    assert np.allclose(xy, expected, atol=1e-8)


def test_ternary_coordinates_center():
    xy = ternary_coordinates(np.array([1.0, 1.0, 1.0]) / 3.0)
    assert np.allclose(xy, [0.5, np.sqrt(3.0) / 6.0])


def test_ternary_coordinates_needs_three_parts():
    with pytest.raises(DimensionMismatchError):
        ternary_coordinates(np.array([0.5, 0.5]))
