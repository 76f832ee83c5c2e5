"""Similarity kernel over seed embeddings."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from variantlab.errors import ConfigurationError

# Diagonal regularizer keeping the kernel positive definite when seeds are
# near-duplicates; also the conditional variance floor a duplicate decays to.
KERNEL_EPSILON = 1e-6


def embedding_matrix(embeddings: Mapping[str, Sequence[float]]) -> tuple[list[str], np.ndarray]:
    """Stack embeddings into a matrix with a stable (sorted) id order."""
    if not embeddings:
        raise ConfigurationError("no embeddings given")
    ids = sorted(embeddings)
    dims = {len(embeddings[i]) for i in ids}
    if len(dims) != 1:
        raise ConfigurationError(f"embedding dimensions differ: {sorted(dims)}")
    matrix = np.asarray([embeddings[i] for i in ids], dtype=np.float64)
    return ids, matrix


def build_kernel(vectors: np.ndarray, epsilon: float = KERNEL_EPSILON) -> np.ndarray:
    """Gram matrix of unit vectors plus epsilon on the diagonal.

    Off-diagonal entries are cosine similarities (the inputs are unit norm),
    clipped to [-1, 1] against float drift. The result is symmetric positive
    definite for epsilon > 0.
    """
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ConfigurationError(f"expected a non-empty 2-d embedding matrix, got shape {vectors.shape}")
    gram = vectors @ vectors.T
    np.clip(gram, -1.0, 1.0, out=gram)
    gram = (gram + gram.T) / 2.0
    return gram + epsilon * np.eye(vectors.shape[0])
