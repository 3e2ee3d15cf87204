"""Shared constructions for the test suite."""

import numpy as np

from tracekit import SparseSymmetricMatrix


def random_psd(n, rng, scale=1.0):
    V = np.linalg.qr(rng.standard_normal((n, n)))[0]
    lam = rng.uniform(0.1, scale, n)
    A = (V * lam) @ V.T
    return (A + A.T) / 2


def ring_adjacency(n):
    rows, cols, vals = [], [], []
    for i in range(n):
        j = (i + 1) % n
        rows += [i, j]
        cols += [j, i]
        vals += [1.0, 1.0]
    return SparseSymmetricMatrix.from_coo(n, rows, cols, vals)
