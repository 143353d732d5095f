"""Collapse per-class template embeddings into one unit weight vector per class.

Each template row is normalized to the unit sphere first, the per-class mean
is taken, and the mean is normalized again. Averaging before the first
normalization would let long templates dominate; both steps are load-bearing.
"""

from __future__ import annotations

import numpy as np

from .datastore import EmbeddingMatrix, l2_normalize
from .errors import BundleError


def ensemble_class_weights(class_prompts: EmbeddingMatrix, num_classes: int) -> EmbeddingMatrix:
    """Build the (num_classes x dim) classifier weight matrix.

    Row c of the result is the renormalized mean of the unit-normalized
    template embeddings labeled with class c. Raises if a class has no
    template rows or its templates cancel out (mean norm below 1e-8).
    """
    if num_classes < 2:
        raise BundleError(f"need at least 2 classes, got {num_classes}")
    unit = l2_normalize(class_prompts)
    indices = unit.class_indices()
    weights = np.empty((num_classes, unit.dim), dtype=np.float64)
    for c in range(num_classes):
        rows = unit.rows[indices == c]
        if rows.shape[0] == 0:
            raise BundleError(f"class_prompts: no template rows for class index {c}")
        mean = rows.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-8:
            raise BundleError(
                f"class_prompts: templates for class index {c} cancel out (mean norm {norm:.3g})"
            )
        weights[c] = mean / norm
    labels = tuple((c, f"class_{c}") for c in range(num_classes))
    return EmbeddingMatrix(dim=unit.dim, rows=weights, row_labels=labels, unit_norm=True)
