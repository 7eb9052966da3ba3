"""Slow reference implementations used only as test oracles."""

import itertools
from collections import deque

import numpy as np
from scipy.spatial.distance import cdist


def classic_dbscan(points, eps, min_pts):
    """Textbook DBSCAN expansion; neighbourhoods are closed and include the point.

    Returns ``(labels, core)``.  Border points take the first cluster that
    reaches them, which is the order-dependent part of the classic algorithm.
    """
    n = len(points)
    dist = cdist(points, points)
    nbrs = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in nbrs])
    labels = np.full(n, -1)
    cluster = -1
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        cluster += 1
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in nbrs[p]:
                if labels[q] == -1:
                    labels[q] = cluster
                    queue.append(q)
    return labels, core


def brute_pairwise(pred, truth):
    """Pairwise precision/recall/F by enumerating every unordered pair."""
    pred = list(pred)
    truth = list(truth)
    # expand noise (-1) into singletons
    nxt = max(pred, default=0) + 1
    for i, p in enumerate(pred):
        if p < 0:
            pred[i] = nxt
            nxt += 1
    tp = same_pred = same_true = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        sp = pred[i] == pred[j]
        st = truth[i] == truth[j]
        same_pred += sp
        same_true += st
        tp += sp and st
    p = tp / same_pred if same_pred else 0.0
    r = tp / same_true if same_true else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def brute_bcubed(pred, truth):
    pred = np.asarray(pred).copy()
    truth = np.asarray(truth)
    noise = pred < 0
    pred[noise] = pred.max(initial=0) + 1 + np.arange(noise.sum())
    ps, rs = [], []
    for i in range(len(pred)):
        c = pred == pred[i]
        t = truth == truth[i]
        both = np.sum(c & t)
        ps.append(both / c.sum())
        rs.append(both / t.sum())
    p, r = float(np.mean(ps)), float(np.mean(rs))
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


def brute_dpc(rho, points):
    """delta / nearest-higher by direct definition with index tie-breaking."""
    n = len(rho)
    dist = cdist(points, points)
    key = [(-rho[i], i) for i in range(n)]
    delta = np.empty(n)
    nn = np.full(n, -1)
    for i in range(n):
        higher = [j for j in range(n) if key[j] < key[i]]
        if not higher:
            delta[i] = dist.max()
            continue
        j = min(higher, key=lambda j: (dist[i, j], j))
        nn[i] = j
        delta[i] = dist[i, j]
    return delta, nn
