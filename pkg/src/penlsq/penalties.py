"""Penalty norms, their dual norms, subgradients, and proximal operators.

Every penalty is a positively scaled norm ``F(beta) = scale * N(beta)``:

* :class:`L1` -- ``lambda * |beta|_1``;
* :class:`GroupL2` -- ``lambda * sum_k |beta_{G_k}|_2`` over a partition into
  equal-size groups;
* :class:`SortedL1` -- ``A * sum_j mu_j |beta|_(j)`` with non-increasing
  positive weights applied to the non-increasing rearrangement of ``|beta|``;
* :class:`ConeNorm` -- the norm generated by a polyhedral cone of positive
  vectors, ``N(beta) = inf {sqrt(sum_j beta_j^2 / a_j) : a in hull(E)}`` over
  the extremal points E of the cone's unit l1-section.

``dual_norm`` is always the dual norm of the full penalty (scale included),
so ``F(beta) = max {v.beta : dual_norm(v) <= 1}``. ``prox(v, step)`` solves
``argmin_b 0.5*|b - v|_2^2 + step * F(b)`` exactly (up to a documented inner
tolerance for :class:`ConeNorm`). ``subgradient(beta)`` returns one element
of the subdifferential of F at beta, dual-norm one on nonzero inputs.
"""

from __future__ import annotations

import dataclasses
from abc import ABC, abstractmethod
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "GroupPartition",
    "SlopeWeights",
    "PolyhedralCone",
    "Penalty",
    "L1",
    "GroupL2",
    "SortedL1",
    "ConeNorm",
    "eval_penalty",
    "dual_norm",
    "prox",
    "subgradient",
    "slope_weights",
    "decomposition_check",
    "DecompositionCheck",
    "penalty_to_dict",
    "penalty_from_dict",
]


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    return arr


def _check_step(step: float) -> float:
    step = float(step)
    if not np.isfinite(step) or step < 0:
        raise ValueError(f"step must be finite and nonnegative, got {step}")
    return step


def _check_scale(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and positive, got {value}")
    return value


@dataclasses.dataclass(frozen=True)
class GroupPartition:
    """Partition of coordinates {0, ..., p-1} into M groups of equal size T."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        try:
            groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"groups must be sequences of integers: {exc}") from None
        if not groups:
            raise ValueError("partition must have at least one group")
        sizes = {len(g) for g in groups}
        if len(sizes) != 1 or 0 in sizes:
            raise ValueError(f"groups must share one nonzero size, got sizes {sorted(sizes)}")
        flat = [j for g in groups for j in g]
        p = len(flat)
        if sorted(flat) != list(range(p)):
            raise ValueError("groups must partition {0, ..., p-1} without overlap or gaps")
        object.__setattr__(self, "groups", groups)
        perm = np.asarray(flat, dtype=np.intp)
        perm.setflags(write=False)
        object.__setattr__(self, "_perm", perm)

    @property
    def M(self) -> int:
        return len(self.groups)

    @property
    def T(self) -> int:
        return len(self.groups[0])

    @property
    def p(self) -> int:
        return self.M * self.T

    @classmethod
    def contiguous(cls, p: int, M: int) -> "GroupPartition":
        """Split {0, ..., p-1} into M consecutive blocks; requires M | p."""
        p, M = int(p), int(M)
        if p <= 0 or M <= 0 or p % M:
            raise ValueError(f"need M dividing p, got p={p}, M={M}")
        T = p // M
        return cls(tuple(tuple(range(k * T, (k + 1) * T)) for k in range(M)))

    def block_view(self, v: np.ndarray) -> np.ndarray:
        """Gather v into an (M, T) array, row k holding v on group k."""
        return v[self._perm].reshape(self.M, self.T)

    def scatter(self, blocks: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`block_view`."""
        out = np.empty(self.p, dtype=float)
        out[self._perm] = np.asarray(blocks, dtype=float).ravel()
        return out

    def block_norms(self, v: np.ndarray) -> np.ndarray:
        """Euclidean norm of v restricted to each group, shape (M,)."""
        return np.linalg.norm(self.block_view(v), axis=1)


@dataclasses.dataclass(frozen=True, eq=False)
class SlopeWeights:
    """Positive, non-increasing weight sequence for the sorted-l1 norm."""

    mu: np.ndarray

    def __post_init__(self) -> None:
        mu = _as_vector(self.mu, "mu").copy()
        if np.any(mu <= 0):
            raise ValueError("mu must be strictly positive")
        if np.any(np.diff(mu) > 0):
            raise ValueError("mu must be non-increasing")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        cummu = np.cumsum(mu)
        cummu.setflags(write=False)
        object.__setattr__(self, "_cummu", cummu)

    @property
    def p(self) -> int:
        return self.mu.shape[0]


def slope_weights(p: int, n: int, sigma: float) -> SlopeWeights:
    """Weights ``mu_j = sigma * sqrt(log(2p/j) / n)`` for j = 1, ..., p."""
    p, n = int(p), int(n)
    if p <= 0 or n <= 0:
        raise ValueError(f"p and n must be positive, got p={p}, n={n}")
    sigma = _check_scale(sigma, "sigma")
    j = np.arange(1, p + 1, dtype=float)
    return SlopeWeights(sigma * np.sqrt(np.log(2.0 * p / j) / n))


@dataclasses.dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """Finitely generated cone of positive vectors, described by the extremal
    points of its unit l1-section.

    Each extremal point is nonnegative with l1-norm at most one, and every
    coordinate must be covered by some extremal point (otherwise the induced
    norm would be infinite somewhere). The origin, though extremal for the
    closed section, is excluded: it contributes nothing to the norm or its
    dual.

    Admissibility of a support S (the property that makes the induced norm
    split as ``N(beta) = N(beta_S) + N(beta_{S^c})``) is declared, not
    verified: either through an explicit list of admissible sets or, for
    cones built from a partition, as "any union of whole groups".
    """

    extremal_points: np.ndarray
    partition: GroupPartition | None = None
    admissible_sets: tuple[frozenset[int], ...] | None = None

    def __post_init__(self) -> None:
        E = np.asarray(self.extremal_points, dtype=float)
        if E.ndim != 2 or E.size == 0:
            raise ValueError(f"extremal_points must be a nonempty 2-d array, got shape {E.shape}")
        if not np.all(np.isfinite(E)):
            raise ValueError("extremal_points must have finite entries")
        if np.any(E < 0):
            raise ValueError("extremal_points must be nonnegative")
        l1 = E.sum(axis=1)
        if np.any(l1 > 1.0 + 1e-12):
            raise ValueError("each extremal point must have l1-norm at most 1")
        if np.any(l1 == 0):
            raise ValueError("extremal_points must not include the origin")
        if not np.all(np.any(E > 0, axis=0)):
            raise ValueError("every coordinate must be covered by some extremal point")
        E = E.copy()
        E.setflags(write=False)
        object.__setattr__(self, "extremal_points", E)
        if self.admissible_sets is not None:
            object.__setattr__(
                self,
                "admissible_sets",
                tuple(frozenset(int(j) for j in s) for s in self.admissible_sets),
            )
        # Disjoint extremal supports make the norm separable across supports,
        # which unlocks closed-form evaluation and a one-sweep dual projection.
        disjoint = bool(np.all(np.count_nonzero(E > 0, axis=0) == 1))
        object.__setattr__(self, "_disjoint", disjoint)
        inv = np.where(E > 0, 1.0, 0.0)
        np.divide(inv, E, out=inv, where=E > 0)
        inv.setflags(write=False)
        object.__setattr__(self, "_inv", inv)

    @property
    def m(self) -> int:
        return self.extremal_points.shape[0]

    @property
    def p(self) -> int:
        return self.extremal_points.shape[1]

    @property
    def has_disjoint_supports(self) -> bool:
        return self._disjoint

    @classmethod
    def from_partition(cls, partition: GroupPartition) -> "PolyhedralCone":
        """Cone of block-constant positive vectors on a partition.

        The extremal points are ``(1/T) * 1_{G_k}``; the induced norm is
        ``sqrt(T) * sum_k |beta_{G_k}|_2``.
        """
        E = np.zeros((partition.M, partition.p))
        for k, g in enumerate(partition.groups):
            E[k, list(g)] = 1.0 / partition.T
        return cls(E, partition=partition)

    def is_admissible(self, S) -> bool:
        fs = frozenset(int(j) for j in S)
        if any(j < 0 or j >= self.p for j in fs):
            raise ValueError("S contains indices outside {0, ..., p-1}")
        if self.admissible_sets is not None and fs in self.admissible_sets:
            return True
        if self.partition is not None:
            return all(
                fs.isdisjoint(g) or fs.issuperset(g) for g in self.partition.groups
            )
        return False


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    # shift invariance; keeps the pivot search from cancelling at large inputs
    v = v - v.max()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def _project_diag_quadratic(z: np.ndarray, a: np.ndarray, bound: float) -> np.ndarray:
    """Project z onto {x : sum_j a_j x_j^2 <= bound^2} with a >= 0.

    The projection is ``x_j = z_j / (1 + tau * a_j)`` with tau >= 0 chosen so
    the constraint is active; ``phi(tau) = sum_j a_j z_j^2 / (1+tau*a_j)^2``
    is strictly decreasing, so the root is found by bisection-safe brentq.
    """
    az2 = a * z * z
    val = az2.sum()
    c2 = bound * bound
    if val <= c2:
        return z

    def phi(tau: float) -> float:
        return float(np.sum(az2 / np.square(1.0 + tau * a))) - c2

    hi = 1.0
    while phi(hi) > 0:
        hi *= 2.0
        if hi > 1e18:  # pragma: no cover - constraint bound must be positive
            raise RuntimeError("projection root bracketing failed")
    tau = brentq(phi, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return z / (1.0 + tau * a)


def _isotonic_non_increasing(z: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators fit of a non-increasing sequence to z."""
    vals: list[float] = []
    cnts: list[int] = []
    for zi in z:
        v, c = float(zi), 1
        while vals and vals[-1] < v:
            c_prev = cnts.pop()
            v = (vals.pop() * c_prev + v * c) / (c_prev + c)
            c += c_prev
        vals.append(v)
        cnts.append(c)
    return np.repeat(vals, cnts)


class Penalty(ABC):
    """Interface shared by all penalties; see the module docstring."""

    kind: str

    @property
    @abstractmethod
    def scale(self) -> float:
        """Multiplier in F = scale * N (lambda, or A for the sorted-l1 norm)."""

    @property
    def p(self) -> int | None:
        """Required input dimension, or None when any dimension is accepted."""
        return None

    def _check_dim(self, v: np.ndarray, name: str) -> np.ndarray:
        if self.p is not None and v.shape[0] != self.p:
            raise ValueError(f"{name} has length {v.shape[0]}, penalty expects {self.p}")
        return v

    @abstractmethod
    def value(self, beta) -> float:
        """F(beta)."""

    @abstractmethod
    def dual_norm(self, v) -> float:
        """Dual norm of the full penalty at v."""

    @abstractmethod
    def prox(self, v, step: float) -> np.ndarray:
        """argmin_b 0.5*|b - v|_2^2 + step * F(b)."""

    @abstractmethod
    def subgradient(self, beta) -> np.ndarray:
        """One element of the subdifferential of F at beta."""


@dataclasses.dataclass(frozen=True)
class L1(Penalty):
    """F(beta) = lam * |beta|_1. Dimension-agnostic."""

    lam: float
    kind = "l1"

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", _check_scale(self.lam, "lambda"))

    @property
    def scale(self) -> float:
        return self.lam

    def value(self, beta) -> float:
        beta = _as_vector(beta, "beta")
        return self.lam * float(np.abs(beta).sum())

    def dual_norm(self, v) -> float:
        v = _as_vector(v, "v")
        return float(np.abs(v).max()) / self.lam

    def prox(self, v, step: float) -> np.ndarray:
        v = _as_vector(v, "v")
        thr = _check_step(step) * self.lam
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)

    def subgradient(self, beta) -> np.ndarray:
        beta = _as_vector(beta, "beta")
        return self.lam * np.sign(beta)


@dataclasses.dataclass(frozen=True, eq=False)
class GroupL2(Penalty):
    """F(beta) = lam * sum_k |beta_{G_k}|_2 over an equal-size partition."""

    partition: GroupPartition
    lam: float
    kind = "group"

    def __post_init__(self) -> None:
        if not isinstance(self.partition, GroupPartition):
            raise ValueError("partition must be a GroupPartition")
        object.__setattr__(self, "lam", _check_scale(self.lam, "lambda"))

    @property
    def scale(self) -> float:
        return self.lam

    @property
    def p(self) -> int:
        return self.partition.p

    def value(self, beta) -> float:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        return self.lam * float(self.partition.block_norms(beta).sum())

    def dual_norm(self, v) -> float:
        v = self._check_dim(_as_vector(v, "v"), "v")
        return float(self.partition.block_norms(v).max()) / self.lam

    def prox(self, v, step: float) -> np.ndarray:
        v = self._check_dim(_as_vector(v, "v"), "v")
        thr = _check_step(step) * self.lam
        blocks = self.partition.block_view(v)
        norms = np.linalg.norm(blocks, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.maximum(0.0, 1.0 - thr / norms)
        factor = np.where(norms > 0, factor, 0.0)
        return self.partition.scatter(blocks * factor[:, None])

    def subgradient(self, beta) -> np.ndarray:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        blocks = self.partition.block_view(beta)
        norms = np.linalg.norm(blocks, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = blocks / norms[:, None]
        scaled = np.where(norms[:, None] > 0, scaled, 0.0)
        return self.lam * self.partition.scatter(scaled)


@dataclasses.dataclass(frozen=True, eq=False)
class SortedL1(Penalty):
    """F(beta) = a_scale * sum_j mu_j |beta|_(j), |beta|_(1) >= |beta|_(2) >= ...

    The dual unit ball is described by the partial-sum constraints
    ``sum_{j<=k} |v|_(j) <= a_scale * sum_{j<=k} mu_j`` for every k.
    """

    a_scale: float
    weights: SlopeWeights
    kind = "slope"

    def __post_init__(self) -> None:
        object.__setattr__(self, "a_scale", _check_scale(self.a_scale, "A"))
        if not isinstance(self.weights, SlopeWeights):
            raise ValueError("weights must be a SlopeWeights")

    @property
    def scale(self) -> float:
        return self.a_scale

    @property
    def p(self) -> int:
        return self.weights.p

    def value(self, beta) -> float:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        mag = np.sort(np.abs(beta))[::-1]
        return self.a_scale * float(mag.dot(self.weights.mu))

    def dual_norm(self, v) -> float:
        v = self._check_dim(_as_vector(v, "v"), "v")
        partial = np.cumsum(np.sort(np.abs(v))[::-1])
        return float((partial / self.weights._cummu).max()) / self.a_scale

    def prox(self, v, step: float) -> np.ndarray:
        v = self._check_dim(_as_vector(v, "v"), "v")
        w = _check_step(step) * self.a_scale * self.weights.mu
        mag = np.abs(v)
        order = np.argsort(-mag, kind="stable")
        fitted = np.maximum(_isotonic_non_increasing(mag[order] - w), 0.0)
        out = np.empty_like(v)
        out[order] = fitted
        return np.sign(v) * out

    def subgradient(self, beta) -> np.ndarray:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        order = np.argsort(-np.abs(beta), kind="stable")
        out = np.empty_like(beta)
        out[order] = self.a_scale * self.weights.mu
        return out * np.sign(beta)


class _ConeMinimum(NamedTuple):
    value: float
    weights: np.ndarray  # simplex weights over extremal points


@dataclasses.dataclass(frozen=True, eq=False)
class ConeNorm(Penalty):
    """F(beta) = lam * N_A(beta) for a cone-generated norm N_A.

    ``N_A(beta) = min over hull(E) of sqrt(sum_j beta_j^2 / a_j)`` (terms with
    beta_j = 0 dropped, infeasible weights give +inf). Cones with pairwise
    disjoint extremal supports admit a closed form; otherwise (or when
    ``method="generic"`` forces it) a multistart projected-gradient solve over
    the simplex of extremal weights is used.
    """

    cone: PolyhedralCone
    lam: float
    kind = "cone"

    def __post_init__(self) -> None:
        if not isinstance(self.cone, PolyhedralCone):
            raise ValueError("cone must be a PolyhedralCone")
        object.__setattr__(self, "lam", _check_scale(self.lam, "lambda"))

    @property
    def scale(self) -> float:
        return self.lam

    @property
    def p(self) -> int:
        return self.cone.p

    # -- evaluation ---------------------------------------------------------

    def _closed_form(self, beta: np.ndarray) -> _ConeMinimum:
        # Disjoint supports: the inner minimum splits across extremal points,
        # each block contributing sqrt(q_k) with q_k = sum beta_j^2 / a_j.
        q = self.cone._inv @ (beta * beta)
        roots = np.sqrt(q)
        total = float(roots.sum())
        if total == 0.0:
            return _ConeMinimum(0.0, np.full(self.cone.m, 1.0 / self.cone.m))
        return _ConeMinimum(total, roots / total)

    def _generic_minimum(
        self, beta: np.ndarray, tol: float, max_iters: int, starts: int
    ) -> _ConeMinimum:
        E = self.cone.extremal_points
        support = beta != 0.0
        if not support.any():
            return _ConeMinimum(0.0, np.full(self.cone.m, 1.0 / self.cone.m))
        b2 = beta[support] ** 2
        Es = E[:, support]

        def q_of(w: np.ndarray) -> float:
            a = Es.T @ w
            if np.any(a <= 0):
                return np.inf
            return float(np.sum(b2 / a))

        def grad_of(w: np.ndarray) -> np.ndarray:
            a = Es.T @ w
            return -(Es @ (b2 / (a * a)))

        m = self.cone.m
        rng = np.random.default_rng(0)
        starts = max(int(starts), 1)
        inits = [np.full(m, 1.0 / m)]
        inits.extend(np.eye(m))
        while len(inits) < 1 + m + starts:
            inits.append(rng.dirichlet(np.ones(m)))

        best = _ConeMinimum(np.inf, inits[0])
        for w0 in inits:
            w = _project_simplex(np.asarray(w0, dtype=float))
            q = q_of(w)
            if not np.isfinite(q):
                w = _project_simplex(w + 1e-3)
                q = q_of(w)
                if not np.isfinite(q):
                    continue
            eta, stall = 1.0, 0
            for _ in range(max_iters):
                g = grad_of(w)
                if not np.all(np.isfinite(g)):
                    # a support coordinate's denominator collapsed; this
                    # start is pinned at a boundary blow-up, others cover it
                    break
                moved = False
                while eta > 1e-18:
                    cand = _project_simplex(w - eta * g)
                    qc = q_of(cand)
                    if np.isfinite(qc) and qc <= q:
                        stall = stall + 1 if q - qc <= 1e-15 * (1.0 + abs(q)) else 0
                        w, q = cand, qc
                        moved = True
                        eta = min(eta * 1.3, 1e12)
                        break
                    eta *= 0.5
                if not moved or stall >= 3:
                    break
            if q < best.value:
                best = _ConeMinimum(q, w)
        if not np.isfinite(best.value):  # pragma: no cover - coverage is validated
            raise RuntimeError("cone norm evaluation failed to find a feasible weight")
        return _ConeMinimum(float(np.sqrt(best.value)), best.weights)

    def _minimum(self, beta: np.ndarray, method: str, tol: float,
                 max_iters: int, starts: int) -> _ConeMinimum:
        if method not in ("auto", "closed_form", "generic"):
            raise ValueError(f"unknown method {method!r}")
        if method == "closed_form" and not self.cone.has_disjoint_supports:
            raise ValueError("closed_form requires disjoint extremal supports")
        if method == "generic" or not self.cone.has_disjoint_supports:
            return self._generic_minimum(beta, tol, max_iters, starts)
        return self._closed_form(beta)

    def value(self, beta, *, method: str = "auto", tol: float = 1e-8,
              max_iters: int = 2000, starts: int = 8) -> float:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        return self.lam * self._minimum(beta, method, tol, max_iters, starts).value

    def dual_norm(self, v) -> float:
        v = self._check_dim(_as_vector(v, "v"), "v")
        return float(np.sqrt((self.cone.extremal_points @ (v * v)).max())) / self.lam

    def prox(self, v, step: float, *, method: str = "auto", tol: float = 1e-10,
             max_sweeps: int = 100000) -> np.ndarray:
        """Moreau route: prox(v) = v - proj onto the scaled dual ball.

        The dual ball of step*F is the intersection over extremal points a of
        {z : sum_j a_j z_j^2 <= (step*lam)^2}; Dykstra's algorithm alternates
        exact single-constraint projections. Cones built from a partition
        reduce to blockwise shrinkage with threshold step*lam*sqrt(T).
        """
        v = self._check_dim(_as_vector(v, "v"), "v")
        bound = _check_step(step) * self.lam
        if bound == 0.0:
            return v.copy()
        if method not in ("auto", "generic"):
            raise ValueError(f"unknown method {method!r}")
        if method == "auto" and self.cone.partition is not None:
            part = self.cone.partition
            thr = bound * np.sqrt(part.T)
            blocks = part.block_view(v)
            norms = np.linalg.norm(blocks, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.maximum(0.0, 1.0 - thr / norms)
            factor = np.where(norms > 0, factor, 0.0)
            return part.scatter(blocks * factor[:, None])
        E = self.cone.extremal_points
        z = v.copy()
        corr = np.zeros((self.cone.m, v.size))
        for _ in range(max_sweeps):
            move = 0.0
            for k in range(self.cone.m):
                w = z + corr[k]
                z_new = _project_diag_quadratic(w, E[k], bound)
                corr[k] = w - z_new
                move = max(move, float(np.abs(z_new - z).max()))
                z = z_new
            feas = float(np.sqrt((E @ (z * z)).max()))
            if move <= 0.1 * tol and feas <= bound * (1.0 + tol):
                break
        else:
            raise RuntimeError(
                f"dual-ball projection did not reach tolerance {tol} in {max_sweeps} sweeps"
            )
        return v - z

    def subgradient(self, beta) -> np.ndarray:
        beta = self._check_dim(_as_vector(beta, "beta"), "beta")
        mini = self._minimum(beta, "auto", 1e-10, 4000, 8)
        if mini.value == 0.0:
            return np.zeros_like(beta)
        a_star = self.cone.extremal_points.T @ mini.weights
        out = np.zeros_like(beta)
        nz = beta != 0.0
        out[nz] = self.lam * beta[nz] / (a_star[nz] * mini.value)
        return out


# -- functional front door ---------------------------------------------------

def eval_penalty(pen: Penalty, beta) -> float:
    """F(beta) for any penalty."""
    return pen.value(beta)


def dual_norm(pen: Penalty, v) -> float:
    """Dual norm of the full penalty at v."""
    return pen.dual_norm(v)


def prox(pen: Penalty, v, step: float) -> np.ndarray:
    """Proximal operator of step * F at v."""
    return pen.prox(v, step)


def subgradient(pen: Penalty, beta) -> np.ndarray:
    """One subgradient of F at beta."""
    return pen.subgradient(beta)


class DecompositionCheck(NamedTuple):
    ok: bool
    residual: float


def decomposition_check(cone: PolyhedralCone, S, beta,
                        tol: float = 1e-6) -> DecompositionCheck:
    """Check ``N(beta) = N(beta_S) + N(beta_{S^c})`` for a declared-admissible S.

    Raises ValueError when S is not declared admissible for the cone.
    """
    if not cone.is_admissible(S):
        raise ValueError("S is not declared admissible for this cone")
    beta = _as_vector(beta, "beta")
    if beta.shape[0] != cone.p:
        raise ValueError(f"beta has length {beta.shape[0]}, cone expects {cone.p}")
    pen = ConeNorm(cone, 1.0)
    mask = np.zeros(cone.p, dtype=bool)
    mask[list(int(j) for j in S)] = True
    whole = pen.value(beta)
    parts = pen.value(np.where(mask, beta, 0.0)) + pen.value(np.where(mask, 0.0, beta))
    residual = abs(whole - parts)
    return DecompositionCheck(ok=bool(residual <= tol * (1.0 + whole)), residual=residual)


# -- serialization ------------------------------------------------------------

def penalty_to_dict(pen: Penalty) -> dict:
    """JSON document for a penalty; inverse of :func:`penalty_from_dict`."""
    if isinstance(pen, L1):
        return {"kind": "l1", "lambda": pen.lam}
    if isinstance(pen, GroupL2):
        return {
            "kind": "group",
            "lambda": pen.lam,
            "partition": [list(g) for g in pen.partition.groups],
        }
    if isinstance(pen, SortedL1):
        return {"kind": "slope", "A": pen.a_scale, "mu": pen.weights.mu.tolist()}
    if isinstance(pen, ConeNorm):
        doc = {
            "kind": "cone",
            "lambda": pen.lam,
            "extremal_points": pen.cone.extremal_points.tolist(),
        }
        if pen.cone.partition is not None:
            doc["partition"] = [list(g) for g in pen.cone.partition.groups]
        if pen.cone.admissible_sets is not None:
            doc["admissible_sets"] = [sorted(s) for s in pen.cone.admissible_sets]
        return doc
    raise ValueError(f"unknown penalty type {type(pen).__name__}")


def penalty_from_dict(doc: dict) -> Penalty:
    """Build a penalty from its JSON document."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("penalty document must be an object with a 'kind' field")
    kind = doc["kind"]

    def need(key: str):
        if key not in doc:
            raise ValueError(f"penalty document of kind '{kind}' is missing field '{key}'")
        return doc[key]

    if kind == "l1":
        return L1(lam=float(need("lambda")))
    if kind == "group":
        return GroupL2(partition=GroupPartition(tuple(map(tuple, need("partition")))),
                       lam=float(need("lambda")))
    if kind == "slope":
        return SortedL1(a_scale=float(need("A")),
                        weights=SlopeWeights(np.asarray(need("mu"), dtype=float)))
    if kind == "cone":
        partition = None
        if "partition" in doc:
            partition = GroupPartition(tuple(map(tuple, doc["partition"])))
        admissible = None
        if "admissible_sets" in doc:
            admissible = tuple(frozenset(s) for s in doc["admissible_sets"])
        cone = PolyhedralCone(np.asarray(need("extremal_points"), dtype=float),
                              partition=partition, admissible_sets=admissible)
        return ConeNorm(cone=cone, lam=float(need("lambda")))
    raise ValueError(f"unknown penalty kind '{kind}'")
