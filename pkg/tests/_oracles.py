"""Independent reference implementations used only by the tests.

The fusion oracle solves the same convex problem in different coordinates:
``U[:, j] = c - sum_{i<j} V[:, i]``, so the penalty is a plain group lasso on
``V`` and accelerated proximal gradient (with adaptive restart) applies
directly. It shares no code with the package.
"""
from itertools import combinations

import numpy as np


def pg_oracle(X, w, gamma, mask=None, tol=1e-10, max_iter=500_000):
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    M = np.ones_like(X) if mask is None else np.asarray(mask, dtype=float)
    Xo = np.where(M > 0, X, 0.0)

    def to_U(c, V):
        return c[:, None] - np.concatenate([np.zeros((n, 1)), np.cumsum(V, axis=1)], axis=1)

    def grad(c, V):
        R = M * (to_U(c, V) - Xo)
        return R.sum(axis=1), -np.cumsum(R[:, ::-1], axis=1)[:, ::-1][:, 1:]

    A = np.hstack([np.ones((p, 1)), -np.tril(np.ones((p, p - 1)), -1)])
    step = 1.0 / float(np.linalg.norm(A, 2) ** 2)
    c = np.array([Xo[i, M[i] > 0].mean() for i in range(n)])
    V = np.zeros((n, p - 1))
    yc, yV, th = c.copy(), V.copy(), 1.0
    for _ in range(max_iter):
        gc, gV = grad(yc, yV)
        cn = yc - step * gc
        Z = yV - step * gV
        nz = np.linalg.norm(Z, axis=0)
        t = step * gamma * w
        Vn = Z * np.where(nz > t, 1.0 - t / np.maximum(nz, 1e-300), 0.0)
        thn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * th * th))
        if np.sum((yc - cn) * (cn - c)) + np.sum((yV - Vn) * (Vn - V)) > 0:
            thn, yc, yV = 1.0, cn, Vn
        else:
            b = (th - 1.0) / thn
            yc, yV = cn + b * (cn - c), Vn + b * (Vn - V)
        dx = np.sqrt(np.sum((cn - c) ** 2) + np.sum((Vn - V) ** 2))
        c, V, th = cn, Vn, thn
        if dx < tol * (1.0 + np.linalg.norm(V) + np.linalg.norm(c)):
            break
    return to_U(c, V)


def oracle_objective(X, U, w, gamma, mask=None):
    """Second, loop-based evaluation of the (masked) objective."""
    X = np.asarray(X, float)
    total = 0.0
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            if mask is None or mask[i, j]:
                total += 0.5 * (X[i, j] - U[i, j]) ** 2
    for k in range(X.shape[1] - 1):
        total += gamma * w[k] * np.sqrt(sum((U[i, k] - U[i, k + 1]) ** 2 for i in range(X.shape[0])))
    return total


def set_partitions(items):
    """All set partitions of ``items`` as label tuples."""
    items = list(items)
    if not items:
        yield ()
        return

    def rec(i, labels, k):
        if i == len(items):
            yield tuple(labels)
            return
        for lab in range(k + 1):
            yield from rec(i + 1, labels + [lab], max(k, lab + 1))

    yield from rec(0, [], 0)


def brute_pairs(x, y):
    a = b = c = d = 0
    for i, j in combinations(range(len(x)), 2):
        s1, s2 = x[i] == x[j], y[i] == y[j]
        a += s1 and s2
        b += s1 and not s2
        c += s2 and not s1
        d += not s1 and not s2
    return a, b, c, d


def brute_scores(x, y):
    from math import comb, log
    a, b, c, d = brute_pairs(x, y)
    N = len(x)
    rand = (a + d) / (a + b + c + d)
    jac = 1.0 if a + b + c == 0 else a / (a + b + c)
    # ARI from the standard contingency formula, written independently
    gx, gy = sorted(set(x)), sorted(set(y))
    nij = [[sum(1 for k in range(N) if x[k] == u and y[k] == v) for v in gy] for u in gx]
    ai = [sum(r) for r in nij]
    bj = [sum(col) for col in zip(*nij)]
    idx = sum(comb(v, 2) for r in nij for v in r)
    sa, sb, tot = sum(comb(v, 2) for v in ai), sum(comb(v, 2) for v in bj), comb(N, 2)
    exp = sa * sb / tot
    mx = 0.5 * (sa + sb)
    ari = 1.0 if mx == exp else (idx - exp) / (mx - exp)
    hx = -sum(v / N * log(v / N) for v in ai)
    hy = -sum(v / N * log(v / N) for v in bj)
    mi = sum(v / N * log(v * N / (ai[i] * bj[j]))
             for i, r in enumerate(nij) for j, v in enumerate(r) if v)
    return {"rand": rand, "adjusted_rand": ari, "jaccard": jac,
            "variation_of_information": hx + hy - 2 * mi}
