"""Prompt-template averaging into per-class weight vectors."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lovm.datastore import EmbeddingMatrix
from lovm.ensemble import ensemble_class_weights
from lovm.errors import BundleError


def prompts(rows, labels, dim=None):
    rows = np.asarray(rows, dtype=np.float64)
    return EmbeddingMatrix(dim or rows.shape[1], rows, tuple(labels))


def random_prompts(rng, num_classes=3, per_class=3, dim=6):
    rows = rng.normal(size=(num_classes * per_class, dim))
    labels = [(c, f"t{t}") for c in range(num_classes) for t in range(per_class)]
    return prompts(rows, labels)


def test_two_basis_templates_average():
    m = prompts([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
                [(0, "a"), (0, "b"), (1, "a"), (1, "b")])
    out = ensemble_class_weights(m, 2)
    r = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(out.rows[0], [r, r], atol=1e-5)
    np.testing.assert_allclose(out.rows[1], [0.0, 1.0], atol=1e-5)


def test_single_template_is_normalized_copy():
    m = prompts([[3.0, 4.0], [0.0, 2.0]], [(0, "t"), (1, "t")])
    out = ensemble_class_weights(m, 2)
    np.testing.assert_allclose(out.rows[0], [0.6, 0.8], atol=1e-12)


def test_repeated_template_equals_single():
    single = prompts([[2.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [(0, "t"), (1, "t")])
    tripled = prompts(
        [[2.0, 1.0, 0.0]] * 3 + [[0.0, 0.0, 1.0]],
        [(0, "a"), (0, "b"), (0, "c"), (1, "a")],
    )
    np.testing.assert_allclose(
        ensemble_class_weights(single, 2).rows,
        ensemble_class_weights(tripled, 2).rows,
        atol=1e-12,
    )


def test_output_shape_and_labels():
    rng = np.random.default_rng(0)
    out = ensemble_class_weights(random_prompts(rng, num_classes=4), 4)
    assert out.rows.shape == (4, 6)
    assert [ci for ci, _ in out.row_labels] == [0, 1, 2, 3]
    assert out.unit_norm


@given(st.integers(0, 2**32 - 1))
def test_rows_unit_norm(seed):
    rng = np.random.default_rng(seed)
    out = ensemble_class_weights(random_prompts(rng), 3)
    np.testing.assert_allclose(np.linalg.norm(out.rows, axis=1), 1.0, atol=1e-5)


@given(st.integers(0, 2**32 - 1))
def test_template_order_within_class_irrelevant(seed):
    rng = np.random.default_rng(seed)
    m = random_prompts(rng)
    base = ensemble_class_weights(m, 3).rows
    # shuffle rows globally; class labels travel with their rows
    perm = rng.permutation(m.num_rows)
    shuffled = EmbeddingMatrix(m.dim, m.rows[perm], tuple(m.row_labels[i] for i in perm))
    np.testing.assert_allclose(ensemble_class_weights(shuffled, 3).rows, base, atol=1e-7)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_scaling_one_template_no_effect(seed, scale):
    rng = np.random.default_rng(seed)
    m = random_prompts(rng)
    base = ensemble_class_weights(m, 3).rows
    rows = m.rows.copy()
    rows[rng.integers(0, m.num_rows)] *= scale
    scaled = EmbeddingMatrix(m.dim, rows, m.row_labels)
    np.testing.assert_allclose(ensemble_class_weights(scaled, 3).rows, base, atol=1e-6)


def test_cancelling_templates_rejected():
    m = prompts([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]], [(0, "a"), (0, "b"), (1, "a")])
    with pytest.raises(BundleError, match="cancel"):
        ensemble_class_weights(m, 2)


def test_zero_template_rejected():
    m = prompts([[0.0, 0.0], [0.0, 1.0]], [(0, "a"), (1, "a")])
    with pytest.raises(BundleError):
        ensemble_class_weights(m, 2)


def test_missing_class_rejected():
    m = prompts([[1.0, 0.0], [0.0, 1.0]], [(0, "a"), (2, "a")])
    with pytest.raises(BundleError, match="class index 1"):
        ensemble_class_weights(m, 3)


def test_too_few_classes_rejected():
    m = prompts([[1.0, 0.0]], [(0, "a")])
    with pytest.raises(BundleError):
        ensemble_class_weights(m, 1)
