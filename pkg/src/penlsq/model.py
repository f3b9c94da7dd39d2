"""Observation model: designs, noisy observations, and the scaled norm.

Throughout the library the prediction-error metric is the scaled norm
``||u|| = sqrt((1/n) sum_i u_i^2)``, under which a design matrix with
``(1/n) X^T X = I`` behaves like an isometry. Observations are drawn as
``y = f + xi`` with ``xi_i`` iid ``N(0, sigma^2)`` from a counter-based
generator, so a (problem, seed) pair reproduces ``y`` bit for bit and
replications indexed by distinct seeds are order-independent.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

__all__ = [
    "DesignMatrix",
    "Problem",
    "Observation",
    "ColumnNormalization",
    "scaled_norm",
    "check_column_normalization",
    "sample_observation",
    "problem_to_dict",
    "problem_from_dict",
]

_MAX_SEED = 2**64


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    return arr


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = arr.copy()
    out.setflags(write=False)
    return out


def scaled_norm(u) -> float:
    """Root-mean-square norm ``sqrt((1/n) sum_i u_i^2)`` of a vector."""
    arr = _as_float_array(u, "u", 1)
    return float(np.sqrt(arr.dot(arr) / arr.size))


@dataclasses.dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Dense n-by-p design matrix with validated, read-only entries."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = _as_float_array(self.entries, "entries", 2)
        object.__setattr__(self, "entries", _frozen_copy(entries))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]


def as_design(X) -> DesignMatrix:
    """Coerce an array-like or DesignMatrix to a DesignMatrix."""
    if isinstance(X, DesignMatrix):
        return X
    return DesignMatrix(np.asarray(X, dtype=float))


class ColumnNormalization(NamedTuple):
    """Result of a column-normalization check."""

    ok: bool
    worst: float


def check_column_normalization(X, tol: float = 1e-8) -> ColumnNormalization:
    """Check ``max_j (1/n)|x_j|_2^2 <= 1`` and report the worst diagonal.

    Several tuning recipes assume the diagonal of ``(1/n) X^T X`` is bounded
    by one; this does not rescale, it only reports.
    """
    design = as_design(X)
    diag = np.einsum("ij,ij->j", design.entries, design.entries) / design.n
    worst = float(diag.max())
    return ColumnNormalization(ok=bool(worst <= 1.0 + tol), worst=worst)


@dataclasses.dataclass(frozen=True, eq=False)
class Problem:
    """A fixed-design regression problem ``y = mean + noise``.

    Attributes:
        design: DesignMatrix (or array coerced to one) of shape (n, p).
        mean: deterministic mean vector f of length n. Any vector is
            allowed; it need not lie in the column span of the design.
        sigma: noise standard deviation, strictly positive.
    """

    design: DesignMatrix
    mean: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        design = as_design(self.design)
        mean = _as_float_array(self.mean, "mean", 1)
        if mean.shape[0] != design.n:
            raise ValueError(
                f"mean has length {mean.shape[0]}, design has {design.n} rows"
            )
        sigma = float(self.sigma)
        if not np.isfinite(sigma) or sigma <= 0:
            raise ValueError(f"sigma must be finite and positive, got {self.sigma}")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "mean", _frozen_copy(mean))
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def p(self) -> int:
        return self.design.p


@dataclasses.dataclass(frozen=True, eq=False)
class Observation:
    """One draw ``y = mean + noise`` together with the seed that produced it.

    Constructed by :func:`sample_observation`, which guarantees the identity
    ``y = mean + noise`` exactly as stored. ``noise`` is retained for
    diagnostics (event checks operate on it directly).
    """

    y: np.ndarray
    noise: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        y = _as_float_array(self.y, "y", 1)
        noise = _as_float_array(self.noise, "noise", 1)
        if y.shape != noise.shape:
            raise ValueError("y and noise must have the same length")
        seed = int(self.seed)
        if not 0 <= seed < _MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "y", _frozen_copy(y))
        object.__setattr__(self, "noise", _frozen_copy(noise))
        object.__setattr__(self, "seed", seed)


def sample_observation(problem: Problem, seed: int) -> Observation:
    """Draw ``y = f + xi`` with ``xi_i`` iid ``N(0, sigma^2)``.

    The noise comes from numpy's counter-based Philox generator keyed by
    ``seed``. Identical (problem, seed) pairs reproduce the observation bit
    for bit regardless of how many draws happened before, which makes
    replication streams order-independent and safe to parallelize.
    """
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    noise = problem.sigma * rng.standard_normal(problem.n)
    return Observation(y=problem.mean + noise, noise=noise, seed=seed)


def problem_to_dict(problem: Problem, observation: Observation | None = None) -> dict:
    """Serialize a problem (and optionally one observation) to a JSON dict.

    Layout: ``{"n", "p", "X" (row-major nested lists), "f", "sigma"}`` plus
    ``{"seed", "y"}`` when an observation is attached.
    """
    doc = {
        "n": problem.n,
        "p": problem.p,
        "X": problem.design.entries.tolist(),
        "f": problem.mean.tolist(),
        "sigma": problem.sigma,
    }
    if observation is not None:
        if observation.y.shape[0] != problem.n:
            raise ValueError("observation length does not match problem size")
        doc["seed"] = observation.seed
        doc["y"] = observation.y.tolist()
    return doc


def problem_from_dict(doc: dict) -> tuple[Problem, Observation | None]:
    """Inverse of :func:`problem_to_dict`.

    The noise vector is reconstructed as ``y - f``. ``y`` itself round-trips
    bit for bit through JSON's shortest-repr floats.
    """
    if not isinstance(doc, dict):
        raise ValueError("problem document must be a JSON object")
    for key in ("n", "p", "X", "f", "sigma"):
        if key not in doc:
            raise ValueError(f"problem document is missing field '{key}'")
    design = DesignMatrix(np.asarray(doc["X"], dtype=float))
    if design.n != int(doc["n"]) or design.p != int(doc["p"]):
        raise ValueError(
            f"X has shape {design.entries.shape}, document says "
            f"({doc['n']}, {doc['p']})"
        )
    problem = Problem(design=design, mean=np.asarray(doc["f"], dtype=float),
                      sigma=float(doc["sigma"]))
    observation = None
    if "y" in doc:
        if "seed" not in doc:
            raise ValueError("problem document has 'y' but no 'seed'")
        y = _as_float_array(np.asarray(doc["y"], dtype=float), "y", 1)
        if y.shape[0] != problem.n:
            raise ValueError(f"y has length {y.shape[0]}, expected {problem.n}")
        observation = Observation(y=y, noise=y - problem.mean, seed=int(doc["seed"]))
    return problem, observation
