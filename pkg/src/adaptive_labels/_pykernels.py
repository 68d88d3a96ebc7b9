"""Pure-Python (numpy) implementations of the numerical kernels.

Every function here has a twin of the same name and signature in the
compiled ``_ckernels`` extension. Arrays are float64 / int64, C-contiguous.
"""
import numpy as np


def pairwise_distance(Z, C, eps):
    diff = Z[:, None, :] - C[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff) + eps)


def pairwise_distance_backward(G, Z, C, D):
    # d D_ij / d z_i = (z_i - c_j) / D_ij
    W = G / D
    gZ = W.sum(axis=1)[:, None] * Z - W @ C
    gC = W.sum(axis=0)[:, None] * C - W.T @ Z
    return gZ, gC


def repel(Z, labels, tol):
    """Sum of cosine similarities over unordered cross-class pairs.

    Returns ``(loss, grad, skipped)`` where ``skipped`` counts rows whose
    norm is at or below ``tol``.
    """
    m = Z.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    ok = norms > tol
    skipped = int(m - ok.sum())
    U = np.zeros_like(Z)
    U[ok] = Z[ok] / norms[ok, None]
    S = U @ U.T
    mask = (labels[:, None] != labels[None, :]) & ok[:, None] & ok[None, :]
    loss = float(np.triu(np.where(mask, S, 0.0), k=1).sum())
    # d/dz_i sum_j cos(z_i, z_j) = sum_j (u_j - cos_ij u_i) / |z_i|
    Mf = mask.astype(np.float64)
    grad = np.zeros_like(Z)
    inner = Mf @ U - (Mf * S).sum(axis=1)[:, None] * U
    grad[ok] = inner[ok] / norms[ok, None]
    return loss, grad, skipped


def class_sums(Z, labels, n_classes):
    sums = np.zeros((n_classes, Z.shape[1]))
    np.add.at(sums, labels, Z)
    counts = np.bincount(labels, minlength=n_classes).astype(np.int64)
    return sums, counts


def tau_b_counts(a, b):
    """Concordant, discordant, tied-in-a and tied-in-b pair counts."""
    iu = np.triu_indices(a.shape[0], k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    prod = sa * sb
    return (int((prod > 0).sum()), int((prod < 0).sum()),
            int((sa == 0).sum()), int((sb == 0).sum()))


def average_linkage(D):
    """Agglomerative clustering with average linkage.

    Returns an ``(n-1, 4)`` array of merges ``(id_a, id_b, height, size)``
    with ``id_a < id_b``; new clusters take ids ``n, n+1, ...``.
    """
    n = D.shape[0]
    dist = np.array(D, dtype=np.float64)
    np.fill_diagonal(dist, np.inf)
    ids = list(range(n))
    sizes = [1] * n
    active = list(range(n))
    out = np.zeros((n - 1, 4))
    for step in range(n - 1):
        best = None
        for ai in range(len(active)):
            p = active[ai]
            for bi in range(ai + 1, len(active)):
                q = active[bi]
                key = (dist[p, q], min(ids[p], ids[q]), max(ids[p], ids[q]))
                if best is None or key < best[0]:
                    best = (key, p, q)
        (h, lo, hi), p, q = best
        np_, nq = sizes[p], sizes[q]
        merged = (np_ * dist[p] + nq * dist[q]) / (np_ + nq)
        dist[p, :] = merged
        dist[:, p] = merged
        dist[p, p] = np.inf
        dist[q, :] = np.inf
        dist[:, q] = np.inf
        out[step] = (lo, hi, h, np_ + nq)
        ids[p] = n + step
        sizes[p] = np_ + nq
        active.remove(q)
    return out
