"""Restricted-eigenvalue constants, tuning recipes, and oracle bounds.

The restricted-eigenvalue (RE) family measures how far a design is from
degenerate on a cone of "mostly supported on S" directions:

* RE: ``kappa(S, c0)^2 = min ||X d||^2 / |d|_2^2`` over
  ``|d_{S^c}|_1 <= c0 |d_S|_1``;
* group RE: the same with block l2 norms in the cone;
* WRE: the sorted-l1 weighted cone
  ``sum_{j>s} mu_j d*_j <= c0 (sum_{j<=s} mu_j^2)^{1/2} |d|_2``;
* cone-q: ``q_A(S, c0)^2 = min ||X d||^2 / ||d_S||_A^2`` over
  ``||d_{S^c}||_A <= c0 ||d_S||_A``.

These minima are nonconvex; the estimator here is multistart projected
gradient with exactly feasible witnesses, so every reported value is an
honest upper bound on the true constant (``status`` records when it is
exact instead, e.g. orthonormal designs where the ratio is identically 1).

``recommended_tuning`` evaluates the minimal tuning each penalty's theory
permits; ``oracle_bound`` assembles the error bounds (squared, root with an
optional confidence term, and expectation form) from a support, a tuning,
and an RE estimate. ``||X d||`` is always the scaled norm.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import ndtri

from .model import as_design, scaled_norm
from .penalties import ConeNorm, GroupPartition, PolyhedralCone, SlopeWeights

__all__ = [
    "ConeSpec",
    "ReEstimate",
    "OracleBound",
    "SparseApproximation",
    "re_type_constant",
    "recommended_tuning",
    "oracle_bound",
    "best_sparse_approximation",
]

_KINDS = ("re", "group_re", "wre", "cone_q")


@dataclasses.dataclass(frozen=True, eq=False)
class ConeSpec:
    """Which RE-type constant to compute, and over which cone.

    Use the factory classmethods; field requirements depend on kind:
    ``re`` needs S (coordinates), ``group_re`` needs partition and S (group
    indices), ``wre`` needs s and weights, ``cone_q`` needs cone and S
    (coordinates). c0 > 0 always.
    """

    kind: str
    c0: float
    S: tuple[int, ...] | None = None
    s: int | None = None
    partition: GroupPartition | None = None
    weights: SlopeWeights | None = None
    cone: PolyhedralCone | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        c0 = float(self.c0)
        if not np.isfinite(c0) or c0 <= 0:
            raise ValueError(f"c0 must be finite and positive, got {self.c0}")
        object.__setattr__(self, "c0", c0)
        if self.kind == "wre":
            if self.s is None or self.weights is None:
                raise ValueError("wre spec needs s and weights")
            s = int(self.s)
            if not 1 <= s <= self.weights.p:
                raise ValueError(f"s must be in 1..{self.weights.p}, got {self.s}")
            object.__setattr__(self, "s", s)
        else:
            if not self.S:
                raise ValueError(f"{self.kind} spec needs a nonempty S")
            S = tuple(sorted(int(j) for j in self.S))
            if len(set(S)) != len(S) or S[0] < 0:
                raise ValueError("S must be distinct nonnegative indices")
            object.__setattr__(self, "S", S)
        if self.kind == "group_re" and self.partition is None:
            raise ValueError("group_re spec needs a partition")
        if self.kind == "cone_q" and self.cone is None:
            raise ValueError("cone_q spec needs a cone")

    @classmethod
    def re(cls, S, c0: float = 3.0) -> "ConeSpec":
        return cls(kind="re", c0=c0, S=tuple(S))

    @classmethod
    def group_re(cls, partition: GroupPartition, S, c0: float = 3.0) -> "ConeSpec":
        return cls(kind="group_re", c0=c0, S=tuple(S), partition=partition)

    @classmethod
    def wre(cls, s: int, weights: SlopeWeights, c0: float = 3.0) -> "ConeSpec":
        return cls(kind="wre", c0=c0, s=s, weights=weights)

    @classmethod
    def cone_q(cls, cone: PolyhedralCone, S, c0: float = 3.0) -> "ConeSpec":
        return cls(kind="cone_q", c0=c0, S=tuple(S), cone=cone)

    def support_label(self) -> str:
        """S for the CSV report: indices joined by ';', or the level s."""
        if self.kind == "wre":
            return str(self.s)
        return ";".join(str(j) for j in self.S)


@dataclasses.dataclass(frozen=True, eq=False)
class ReEstimate:
    """Estimated constant with its feasible witness.

    ``value**2 = ||X witness||^2 / denominator`` holds by construction
    (the value is recomputed from the witness), the witness lies exactly in
    the cone, and the estimate is an upper bound on the true constant unless
    status is "exact".
    """

    value: float
    witness: np.ndarray
    starts: int
    status: str
    spec: ConeSpec


def _coord_mask(p: int, S: tuple[int, ...]) -> np.ndarray:
    if max(S) >= p:
        raise ValueError(f"S contains index {max(S)} but p={p}")
    mask = np.zeros(p, dtype=bool)
    mask[list(S)] = True
    return mask


def _project_re_orthant(w: np.ndarray, on_S: np.ndarray, c0: float) -> np.ndarray:
    """Project w >= 0 onto {m >= 0 : sum_{S^c} m <= c0 sum_S m} (exact).

    KKT: off-support coordinates soft-threshold at nu, support coordinates
    grow by c0*nu, with nu the root of the piecewise-linear slack.
    """
    ws, wc = w[on_S], w[~on_S]
    slack = c0 * ws.sum() - wc.sum()
    out = w.copy()
    if slack >= 0:
        return out
    u = np.sort(wc)[::-1]
    csum = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    denom = k + c0 * c0 * on_S.sum()
    nu_cand = (csum - c0 * ws.sum()) / denom
    # valid once exactly the k largest off-support entries exceed nu
    upper = u
    lower = np.append(u[1:], 0.0)
    ok = (nu_cand <= upper) & (nu_cand >= lower) & (nu_cand >= 0)
    nu = float(nu_cand[ok][0]) if ok.any() else float(nu_cand[-1])
    out[~on_S] = np.maximum(wc - nu, 0.0)
    out[on_S] = ws + c0 * nu
    return out


def _project_re(z: np.ndarray, on_S: np.ndarray, c0: float) -> np.ndarray:
    m = _project_re_orthant(np.abs(z), on_S, c0)
    signs = np.sign(z)
    signs[signs == 0] = 1.0
    return signs * m


def _project_group_re(z: np.ndarray, partition: GroupPartition,
                      on_S_groups: np.ndarray, c0: float) -> np.ndarray:
    blocks = partition.block_view(z)
    r = np.linalg.norm(blocks, axis=1)
    m = _project_re_orthant(r, on_S_groups, c0)
    out = np.zeros_like(blocks)
    for k in range(partition.M):
        if r[k] > 0:
            out[k] = blocks[k] * (m[k] / r[k])
        elif m[k] > 0:
            out[k, 0] = m[k]  # direction free when the block was zero
    return partition.scatter(out)


def _wre_margin(d: np.ndarray, s: int, mu: np.ndarray, c0: float) -> float:
    """Cone residual: <= 0 means feasible."""
    mag = np.sort(np.abs(d))[::-1]
    lhs = float(mu[s:].dot(mag[s:]))
    rhs = c0 * float(np.sqrt(np.sum(mu[:s] ** 2))) * float(np.linalg.norm(d))
    return lhs - rhs


def _coneq_margin(d: np.ndarray, on_S: np.ndarray, norm: ConeNorm, c0: float) -> float:
    n_s = norm.value(np.where(on_S, d, 0.0))
    n_c = norm.value(np.where(on_S, 0.0, d))
    return n_c - c0 * n_s


def _retract_by_mixing(d: np.ndarray, anchor: np.ndarray, margin) -> np.ndarray:
    """Mix d toward a strictly feasible anchor until the margin is <= 0.

    Bisection keeps the feasible endpoint, so the result is exactly feasible.
    """
    if margin(d) <= 0:
        return d
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        cand = (1.0 - mid) * d + mid * anchor
        if margin(cand) <= 0:
            hi = mid
        else:
            lo = mid
    return (1.0 - hi) * d + hi * anchor


def _normalize(d: np.ndarray) -> np.ndarray | None:
    nrm = float(np.linalg.norm(d))
    if nrm <= 1e-300:
        return None
    return d / nrm


class _ReProblem:
    """One RE-type minimization: objective, feasibility map, membership."""

    def __init__(self, X, spec: ConeSpec):
        self.design = as_design(X)
        self.spec = spec
        p = self.design.p
        if spec.kind == "re":
            self.on_S = _coord_mask(p, spec.S)
        elif spec.kind == "group_re":
            if spec.partition.p != p:
                raise ValueError(f"partition covers p={spec.partition.p}, design has p={p}")
            if max(spec.S) >= spec.partition.M:
                raise ValueError(f"S names group {max(spec.S)} but M={spec.partition.M}")
            self.on_S_groups = np.zeros(spec.partition.M, dtype=bool)
            self.on_S_groups[list(spec.S)] = True
            coords = [j for k in spec.S for j in spec.partition.groups[k]]
            self.on_S = _coord_mask(p, tuple(coords))
        elif spec.kind == "wre":
            if spec.weights.p != p:
                raise ValueError(f"weights cover p={spec.weights.p}, design has p={p}")
            self.on_S = None
        else:
            if spec.cone.p != p:
                raise ValueError(f"cone covers p={spec.cone.p}, design has p={p}")
            self.on_S = _coord_mask(p, spec.S)
            self.norm = ConeNorm(spec.cone, 1.0)
        self.M = self.design.entries.T @ self.design.entries / self.design.n

    # objective is ||X d||^2 for RE kinds, the q_A ratio for cone_q
    def value(self, d: np.ndarray) -> float:
        quad = float(d.dot(self.M @ d))
        if self.spec.kind != "cone_q":
            return quad
        n_s = self.norm.value(np.where(self.on_S, d, 0.0))
        if n_s == 0.0:
            return np.inf
        return quad / (n_s * n_s)

    def gradient(self, d: np.ndarray) -> np.ndarray:
        g_quad = 2.0 * (self.M @ d)
        if self.spec.kind != "cone_q":
            return g_quad
        d_s = np.where(self.on_S, d, 0.0)
        n_s = self.norm.value(d_s)
        ratio = float(d.dot(self.M @ d)) / (n_s * n_s)
        g_norm = 2.0 * n_s * self.norm.subgradient(d_s)
        return (g_quad - ratio * g_norm) / (n_s * n_s)

    def feasible(self, d: np.ndarray) -> np.ndarray | None:
        spec = self.spec
        if spec.kind == "re":
            d = _project_re(d, self.on_S, spec.c0)
        elif spec.kind == "group_re":
            d = _project_group_re(d, spec.partition, self.on_S_groups, spec.c0)
        elif spec.kind == "wre":
            mag = np.abs(d)
            keep = np.argsort(-mag, kind="stable")[: spec.s]
            anchor = np.zeros_like(d)
            anchor[keep] = d[keep]
            if not anchor.any():
                return None
            d = _retract_by_mixing(
                d, anchor, lambda x: _wre_margin(x, spec.s, spec.weights.mu, spec.c0)
            )
        else:
            anchor = np.where(self.on_S, d, 0.0)
            if self.norm.value(anchor) == 0.0:
                return None
            d = _retract_by_mixing(
                d, anchor, lambda x: _coneq_margin(x, self.on_S, self.norm, spec.c0)
            )
        return _normalize(d)

    def membership_residual(self, d: np.ndarray) -> float:
        spec = self.spec
        if spec.kind == "re":
            return max(0.0, float(np.abs(d[~self.on_S]).sum()
                                  - spec.c0 * np.abs(d[self.on_S]).sum()))
        if spec.kind == "group_re":
            r = spec.partition.block_norms(d)
            return max(0.0, float(r[~self.on_S_groups].sum()
                                  - spec.c0 * r[self.on_S_groups].sum()))
        if spec.kind == "wre":
            return max(0.0, _wre_margin(d, spec.s, spec.weights.mu, spec.c0))
        return max(0.0, _coneq_margin(d, self.on_S, self.norm, spec.c0))

    def denominator(self, d: np.ndarray) -> float:
        if self.spec.kind != "cone_q":
            return float(d.dot(d))
        n_s = self.norm.value(np.where(self.on_S, d, 0.0))
        return n_s * n_s

    def coordinate_starts(self) -> list[np.ndarray]:
        p = self.design.p
        if self.spec.kind == "wre":
            idx = range(min(self.spec.s, p))
        else:
            idx = [j for j in range(p) if self.on_S[j]]
        starts = []
        for j in idx:
            e = np.zeros(p)
            e[j] = 1.0
            starts.append(e)
        return starts


def _orthonormal_exact(problem: _ReProblem) -> ReEstimate | None:
    spec = problem.spec
    if spec.kind == "cone_q":
        return None
    p = problem.design.p
    if float(np.abs(problem.M - np.eye(p)).max()) > 1e-12:
        return None
    # ratio ||X d||^2 / |d|^2 is identically 1; any cone point witnesses it
    witness = problem.coordinate_starts()[0]
    return ReEstimate(value=1.0, witness=witness, starts=0, status="exact", spec=spec)


def re_type_constant(X, spec: ConeSpec, budget: int = 256,
                     seed: int = 0) -> ReEstimate:
    """Multistart projected-gradient estimate of an RE-type constant.

    ``budget`` counts the starts (coordinate directions in S first, then
    seeded Gaussian starts). The witness is exactly feasible and the value is
    recomputed from it, so the result is an upper bound on the true constant.
    Ties across starts resolve by (value, start index), making concurrent
    evaluation order-irrelevant.
    """
    budget = int(budget)
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    problem = _ReProblem(X, spec)
    exact = _orthonormal_exact(problem)
    if exact is not None:
        return exact

    rng = np.random.default_rng(seed)
    starts = problem.coordinate_starts()[:budget]
    while len(starts) < budget:
        starts.append(rng.standard_normal(problem.design.p))

    best_val, best_d, best_idx = np.inf, None, -1
    for idx, d0 in enumerate(starts):
        d = _normalize(d0)
        if d is None:
            continue
        d = problem.feasible(d)
        if d is None:
            continue
        val = problem.value(d)
        eta, stall = 0.5, 0
        for _ in range(400):
            g = problem.gradient(d)
            moved = False
            while eta > 1e-14:
                cand = problem.feasible(d - eta * g)
                if cand is not None:
                    v_c = problem.value(cand)
                    if v_c < val:
                        stall = stall + 1 if val - v_c <= 1e-13 * (1 + abs(val)) else 0
                        d, val = cand, v_c
                        moved = True
                        eta *= 1.5
                        break
                eta *= 0.5
            if not moved or stall >= 5:
                break
        if val < best_val and problem.membership_residual(d) <= 1e-9:
            best_val, best_d, best_idx = val, d, idx

    if best_d is None:  # pragma: no cover - coordinate starts are feasible
        raise RuntimeError("no feasible point found in the cone")
    quad = float(best_d.dot(problem.M @ best_d))
    value = float(np.sqrt(quad / problem.denominator(best_d)))
    residual = problem.membership_residual(best_d)
    if residual > 1e-9:  # pragma: no cover - feasibility is by construction
        raise RuntimeError(f"witness violates cone membership by {residual}")
    return ReEstimate(value=value, witness=best_d, starts=len(starts),
                      status="multistart-estimate", spec=spec)


def recommended_tuning(kind: str, *, X=None, sigma: float | None = None,
                       n: int | None = None, p: int | None = None,
                       partition: GroupPartition | None = None,
                       cone: PolyhedralCone | None = None) -> float:
    """Minimal tuning permitted by each penalty's theory.

    l1: ``2 sigma sqrt(2 log(p)/n)`` (requires p >= 2);
    group: ``(2 sigma/sqrt(n)) (sqrt(T) + psi* sqrt(2 log 2M))`` with
    ``psi* = max_k smax(X_{G_k})/sqrt(n)``;
    cone: ``(2 sigma/sqrt(n)) (1 + sqrt(2 log(2|E|)))``;
    slope: ``A = 8`` (dimensionless).
    """
    if kind == "slope":
        return 8.0
    if sigma is None:
        raise ValueError("sigma is required")
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if X is not None:
        design = as_design(X)
        n = design.n if n is None else n
        p = design.p if p is None else p
    if n is None:
        raise ValueError("n is required (directly or via X)")
    n = int(n)
    if kind == "l1":
        if p is None:
            raise ValueError("p is required for the l1 tuning")
        p = int(p)
        if p < 2:
            raise ValueError(f"the l1 tuning needs p >= 2, got p={p}")
        return float(2.0 * sigma * np.sqrt(2.0 * np.log(p) / n))
    if kind == "group":
        if partition is None or X is None:
            raise ValueError("the group tuning needs X and partition")
        A = as_design(X).entries
        psi = max(
            float(np.linalg.svd(A[:, list(g)], compute_uv=False)[0])
            for g in partition.groups
        ) / np.sqrt(n)
        return float((2.0 * sigma / np.sqrt(n)) * (
            np.sqrt(partition.T) + psi * np.sqrt(2.0 * np.log(2.0 * partition.M))
        ))
    if kind == "cone":
        if cone is None:
            raise ValueError("the cone tuning needs the cone")
        return float((2.0 * sigma / np.sqrt(n)) * (
            1.0 + np.sqrt(2.0 * np.log(2.0 * cone.m))
        ))
    raise ValueError(f"unknown penalty kind '{kind}'")


@dataclasses.dataclass(frozen=True, eq=False)
class SparseApproximation:
    beta: np.ndarray
    error: float


def best_sparse_approximation(f, X, support) -> SparseApproximation:
    """Least-squares fit of f on the columns in ``support``.

    Minimum-norm solution under rank deficiency; error in the scaled norm.
    """
    design = as_design(X)
    f = np.asarray(f, dtype=float)
    S = sorted(int(j) for j in support)
    if not S:
        raise ValueError("support must be nonempty")
    if S[0] < 0 or S[-1] >= design.p:
        raise ValueError(f"support indices must lie in 0..{design.p - 1}")
    cols = design.entries[:, S]
    coef, *_ = np.linalg.lstsq(cols, f, rcond=None)
    beta = np.zeros(design.p)
    beta[S] = coef
    return SparseApproximation(beta=beta, error=scaled_norm(f - cols @ coef))


@dataclasses.dataclass(frozen=True)
class OracleBound:
    """Error bounds assembled from a support, a tuning, and an RE estimate.

    ``squared_bound`` = approx^2 + (9/4)(remainder core)^2 (the event-
    conditional form); ``root_bound`` = approx + (3/2)-remainder, plus
    ``sigma Phi^{-1}(1-delta)/sqrt(n)`` when delta is given;
    ``expectation_bound`` adds ``sigma/sqrt(2 pi n)`` instead;
    ``corollary_squared_bound`` (delta only) = 3 approx^2 + 3 remainder^2 +
    6 sigma^2 log(1/delta)/n. A zero RE estimate yields +inf by convention.
    """

    squared_bound: float
    root_bound: float
    expectation_bound: float
    corollary_squared_bound: float | None
    approximation_error: float
    remainder: float


def oracle_bound(kind: str, problem, support, lam_or_A: float, re_estimate,
                 delta: float | None = None) -> OracleBound:
    """See :class:`OracleBound`. ``support`` is a coordinate index set for
    l1/cone/slope kinds (slope uses its size as the sparsity level) and a
    ``(partition, group_indices)`` pair for the group kind."""
    sigma, n, p = problem.sigma, problem.n, problem.p
    scale = float(lam_or_A)
    if scale <= 0:
        raise ValueError(f"lambda_or_A must be positive, got {lam_or_A}")
    re_val = re_estimate.value if isinstance(re_estimate, ReEstimate) else float(re_estimate)
    if re_val < 0:
        raise ValueError(f"re_estimate must be nonnegative, got {re_val}")

    if kind == "group":
        partition, groups = support
        groups = sorted(int(k) for k in groups)
        coords = [j for k in groups for j in partition.groups[k]]
        size = len(groups)
    elif kind in ("l1", "cone", "slope"):
        coords = sorted(int(j) for j in support)
        size = len(coords)
    else:
        raise ValueError(f"unknown penalty kind '{kind}'")

    approx = best_sparse_approximation(problem.mean, problem.design, coords).error

    if re_val == 0.0:
        remainder = np.inf
    elif kind == "l1" or kind == "group":
        remainder = 1.5 * scale * np.sqrt(size) / re_val
    elif kind == "cone":
        remainder = 1.5 * scale / re_val
    else:  # slope
        s = size
        remainder = (1.5 * sigma * scale / re_val) * np.sqrt(
            s * np.log(2.0 * np.e * p / s) / n
        )

    squared = approx * approx + remainder * remainder
    root = approx + remainder
    expectation = root + sigma / np.sqrt(2.0 * np.pi * n)
    corollary = None
    if delta is not None:
        delta = float(delta)
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {delta}")
        root = root + sigma * float(ndtri(1.0 - delta)) / np.sqrt(n)
        corollary = (3.0 * approx * approx + 3.0 * remainder * remainder
                     + 6.0 * sigma * sigma * np.log(1.0 / delta) / n)
    return OracleBound(
        squared_bound=float(squared),
        root_bound=float(root),
        expectation_bound=float(expectation),
        corollary_squared_bound=None if corollary is None else float(corollary),
        approximation_error=float(approx),
        remainder=float(remainder),
    )
