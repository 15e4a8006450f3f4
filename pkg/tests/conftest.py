import numpy as np
import pytest

from critsurf import CalibrationConfig, calibrate_eta, generate_null_ensemble


@pytest.fixture(scope="session")
def cs25():
    config = CalibrationConfig(n=25, k=5, replicates=4000, master_seed=501)
    return calibrate_eta(generate_null_ensemble(config), 0.05)


@pytest.fixture(scope="session")
def cs60():
    config = CalibrationConfig(n=60, k=6, replicates=4000, master_seed=2024)
    return calibrate_eta(generate_null_ensemble(config), 0.05)


@pytest.fixture(scope="session")
def cs100():
    config = CalibrationConfig(n=100, k=10, replicates=20000, master_seed=77)
    return calibrate_eta(generate_null_ensemble(config), 0.05)


@pytest.fixture(scope="session")
def cs400():
    config = CalibrationConfig(n=400, k=20, replicates=4000, master_seed=640)
    return calibrate_eta(generate_null_ensemble(config), 0.05)


def brute_force_counts(r, s):
    """Double-loop oracle for the cumulative rank counts."""
    n = len(r)
    counts = np.zeros((n + 1, n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            counts[i, j] = sum(1 for t in range(n) if r[t] <= i and s[t] <= j)
    return counts
