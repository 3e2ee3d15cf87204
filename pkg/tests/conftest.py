import pathlib

import numpy as np
import pytest

from tracekit import (
    dense_operator,
    diagonal_operator,
    identity_operator,
    lanczos_function_operator,
)

from helpers import random_psd, ring_adjacency

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def k3_path():
    return str(FIXTURES / "k3.mtx")


@pytest.fixture(scope="session")
def operator_fleet():
    """Small operators of every shipped kind, with exact traces."""
    rng = np.random.default_rng(42)
    fleet = []

    diag = 1.0 / np.arange(1, 65.0) ** 2
    fleet.append(("diag_decay", diagonal_operator(diag), float(diag.sum())))

    A = random_psd(40, rng)
    fleet.append(("dense_psd", dense_operator(A, psd=True), float(np.trace(A))))

    v = rng.standard_normal(50)
    R1 = np.outer(v, v)
    fleet.append(("rank_one", dense_operator(R1, psd=True), float(v @ v)))

    fleet.append(("identity", identity_operator(32), 32.0))

    ring = ring_adjacency(30)
    fleet.append(("ring_graph", ring.to_operator(), 0.0))

    K = random_psd(36, rng) + 0.5 * np.eye(36)
    base = dense_operator(K, psd=True)
    exp_op = lanczos_function_operator(base, "exp", steps=36)
    w = np.linalg.eigvalsh(K)
    fleet.append(("lanczos_exp", exp_op, float(np.exp(w).sum())))

    return fleet
