import numpy as np
import pytest

from penlsq import DesignMatrix, Problem


def normalized_gaussian_design(n: int, p: int, seed: int) -> DesignMatrix:
    """Gaussian design with columns rescaled so (1/n)|x_j|_2^2 = 1 exactly."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X *= np.sqrt(n) / np.linalg.norm(X, axis=0)
    return DesignMatrix(X)


def orthonormal_design(n: int) -> DesignMatrix:
    """n-by-n design with (1/n) X^T X = I: sqrt(n) times the identity."""
    return DesignMatrix(np.sqrt(n) * np.eye(n))


def planted_problem(n: int, p: int, support, amplitude: float = 1.0,
                    sigma: float = 1.0, design_seed: int = 0,
                    sign_seed: int = 1):
    """Problem with mean X beta*, beta* supported on `support` with random
    signs; returns (problem, beta_star)."""
    design = normalized_gaussian_design(n, p, design_seed)
    support = sorted(int(j) for j in support)
    beta = np.zeros(p)
    signs = np.random.default_rng(sign_seed).choice([-1.0, 1.0], size=len(support))
    beta[support] = amplitude * signs
    problem = Problem(design=design, mean=design.entries @ beta, sigma=sigma)
    return problem, beta


@pytest.fixture
def small_design():
    return normalized_gaussian_design(12, 8, seed=3)
