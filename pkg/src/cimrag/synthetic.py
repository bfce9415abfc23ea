"""Synthetic corpora for benchmarks and experiments.

Two generators: a plain random corpus for stress tests, and a clustered
corpus whose documents share a dense per-cluster component on top of a
sparse per-document signature. The clustered layout is deliberately hard
for an untrained projection under analog noise and leaves room for a
noise-aware head to improve retrieval.
"""

from __future__ import annotations

import numpy as np

from .crossbar import EmbeddingMatrix


def make_random_corpus(n_docs, n_queries, din, seed=0, query_jitter=0.01):
    """Uniform random unit documents plus jittered copies as queries.

    Returns (matrix, query_bases, target_ids) where target_ids[i] is the
    document each query was derived from.
    """
    rng = np.random.default_rng(seed)
    docs = rng.standard_normal((n_docs, din))
    docs /= np.linalg.norm(docs, axis=1, keepdims=True)
    targets = rng.integers(0, n_docs, n_queries)
    queries = docs[targets] + query_jitter * rng.standard_normal((n_queries, din))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    matrix = EmbeddingMatrix(vectors=docs.astype(np.float32), ids=list(range(n_docs)))
    return matrix, queries.astype(np.float32), targets


def make_clustered_corpus(
    n_clusters,
    docs_per_cluster,
    n_queries,
    din,
    alpha2=0.97,
    n_spikes=8,
    seed=0,
    query_jitter=0.01,
):
    """Clustered documents: dense shared center plus sparse signature.

    Each document is alpha * center[c] + beta * spikes, renormalized, with
    alpha^2 = alpha2 the energy fraction in the shared cluster direction.
    The sparse part places n_spikes random +/-1 entries. Queries are
    jittered copies of random documents.

    Returns (matrix, query_bases, target_ids, labels) where labels[i] is
    the cluster index of document i.
    """
    if not 0.0 < alpha2 < 1.0:
        raise ValueError(f"alpha2 must lie in (0, 1), got {alpha2}")
    rng = np.random.default_rng(seed)
    alpha = np.sqrt(alpha2)
    beta = np.sqrt(1.0 - alpha2)
    centers = rng.standard_normal((n_clusters, din))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    docs = np.empty((n_clusters * docs_per_cluster, din))
    labels = np.repeat(np.arange(n_clusters), docs_per_cluster)
    for i, c in enumerate(labels):
        spikes = np.zeros(din)
        idx = rng.choice(din, n_spikes, replace=False)
        spikes[idx] = rng.choice([-1.0, 1.0], n_spikes) / np.sqrt(n_spikes)
        v = alpha * centers[c] + beta * spikes
        docs[i] = v / np.linalg.norm(v)
    targets = rng.integers(0, len(docs), n_queries)
    queries = docs[targets] + query_jitter * rng.standard_normal((n_queries, din))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    matrix = EmbeddingMatrix(vectors=docs.astype(np.float32), ids=list(range(len(docs))))
    return matrix, queries.astype(np.float32), targets, labels
