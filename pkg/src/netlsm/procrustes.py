"""Orthogonal Procrustes alignment with scaling and translation.

Latent positions are identifiable only up to rotation, reflection,
translation, and (with a free slope) scale, so estimated configurations are
aligned to ground truth before any error metric is computed.  Alignment is a
single rigid-plus-scale motion applied jointly; reflections are allowed since
distances cannot distinguish them.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ProcrustesResult", "procrustes_align"]


@dataclass(frozen=True)
class ProcrustesResult:
    rotation: np.ndarray
    scale: float
    translation: np.ndarray
    aligned: np.ndarray
    residual_rmse: float


def procrustes_align(source, target):
    """Best-fit (Q, s, t) minimizing ||s * source @ Q + t - target||_F.

    Q ranges over orthogonal matrices (reflections permitted), s > 0, and t
    is a free translation.  A degenerate source (all rows identical) gets
    scale 1, identity rotation, and translation to the target centroid.
    """
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.shape != tgt.shape:
        raise ValueError("source and target must have identical shapes")
    n, d = src.shape
    if n < d:
        raise ValueError("need at least as many rows as columns")
    mu_s = src.mean(axis=0)
    mu_t = tgt.mean(axis=0)
    a = src - mu_s
    b = tgt - mu_t
    norm_a2 = float(np.sum(a * a))
    if norm_a2 == 0.0:
        q = np.eye(d)
        s = 1.0
        t = mu_t - mu_s
    else:
        u, sing, vt = np.linalg.svd(a.T @ b)
        q = u @ vt
        s = float(np.sum(sing) / norm_a2)
        if s <= 0.0:
            s = 1.0  # source and target uncorrelated; keep the scale neutral
        t = mu_t - s * mu_s @ q
    aligned = s * src @ q + t
    rmse = float(np.sqrt(np.mean((aligned - tgt) ** 2)))
    return ProcrustesResult(rotation=q, scale=s, translation=t, aligned=aligned, residual_rmse=rmse)
