"""Dual-ball geometry of the penalized least-squares fit.

For penalty F the set ``C = {u : dual_norm(X^T u / n) <= 1}`` is the image
of the dual feasible region in observation space: the first-order condition
of ``(1/n)|y - X b|_2^2 + 2 F(b)`` reads ``X^T (y - X beta_hat) / n`` is a
subgradient of F, so the residual always lies in C and is in fact the
Euclidean projection of y onto it. Two structural facts about the fit
``mu(y) = X beta_hat(y)`` are certified here numerically:

* projection identity: ``mu(y) = y - P_C(y)``, checked for L1/GroupL2 by an
  independent route (Dykstra's algorithm over C's explicit slab/cylinder
  constraints) and for SortedL1/ConeNorm through the variational
  characterization of the projection (dual feasibility of the residual plus
  sampled inequalities ``(y - theta) . (theta - u') >= 0``);
* contraction: ``||mu(y) - mu(y')|| <= ||y - y'||`` in the scaled norm, with
  the firm refinement ``||mu(y)-mu(y')||^2 <= ||y-y'||^2 -
  (1/n)|P_C(y)-P_C(y')|_2^2`` when projections are available.

Reports carry ``worst_slack``, the largest observed violation of the
certified inequality (negative = satisfied with room); a check passes when it
does not exceed the tolerance.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.optimize import brentq

from .model import as_design, scaled_norm
from .penalties import GroupL2, L1, Penalty
from .solvers import SolverConfig, SolverResult, solve

__all__ = [
    "GeometryReport",
    "DualBall",
    "dual_ball_project",
    "projection_identity_check",
    "contraction_check",
    "merge_reports",
    "tight_solver_config",
]


@dataclasses.dataclass(frozen=True)
class GeometryReport:
    """Outcome of a geometry check over one or more instances."""

    check: str
    instances: int
    worst_slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "instances": self.instances,
            "worst_slack": self.worst_slack,
            "pass": self.passed,
        }


def merge_reports(reports) -> GeometryReport:
    """Combine same-named reports: instances add, the worst slack wins."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report to merge")
    names = {r.check for r in reports}
    if len(names) != 1:
        raise ValueError(f"cannot merge reports of different checks: {sorted(names)}")
    return GeometryReport(
        check=reports[0].check,
        instances=sum(r.instances for r in reports),
        worst_slack=max(r.worst_slack for r in reports),
        passed=all(r.passed for r in reports),
    )


def tight_solver_config(y, max_iters: int = 200000) -> SolverConfig:
    """Solver config for geometry checks.

    Fitted-value error is bounded by sqrt(gap), so certifying 1e-6
    discrepancies needs gaps around 1e-13; this targets a bit below that
    while staying above the floating-point gap floor.
    """
    y = np.asarray(y, dtype=float)
    return SolverConfig(max_iters=max_iters,
                        gap_tol=5e-14 * (1.0 + float(y.dot(y)) / y.size))


class _Slab:
    """{u : |a . u| <= c}."""

    def __init__(self, a: np.ndarray, c: float):
        self.a = a
        self.c = c
        self.asq = float(a.dot(a))

    def project(self, u: np.ndarray) -> np.ndarray:
        v = float(self.a.dot(u))
        if abs(v) <= self.c:
            return u
        return u - ((v - np.sign(v) * self.c) / self.asq) * self.a

    def distance(self, u: np.ndarray) -> float:
        return max(0.0, abs(float(self.a.dot(u))) - self.c) / np.sqrt(self.asq)


class _Cylinder:
    """{u : |B^T u|_2 <= c} via the eigendecomposition of B^T B."""

    def __init__(self, B: np.ndarray, c: float):
        self.c = c
        eigval, Q = np.linalg.eigh(B.T @ B)
        self.eigval = np.maximum(eigval, 0.0)
        self.BQ = B @ Q

    def project(self, u: np.ndarray) -> np.ndarray:
        z = self.BQ.T @ u
        val = float(z.dot(z))
        c2 = self.c * self.c
        if val <= c2:
            return u
        lam = self.eigval
        z2 = z * z

        def phi(tau: float) -> float:
            return float(np.sum(z2 / np.square(1.0 + tau * lam))) - c2

        hi = 1.0
        while phi(hi) > 0:
            hi *= 2.0
            if hi > 1e18:  # pragma: no cover - null components carry no mass
                raise RuntimeError("cylinder projection bracketing failed")
        tau = brentq(phi, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                     maxiter=200)
        return u - self.BQ @ (tau * z / (1.0 + tau * lam))

    def distance(self, u: np.ndarray) -> float:
        w = self.project(u)
        return float(np.linalg.norm(w - u))


class DualBall:
    """C = {u in R^n : dual_norm(X^T u / n) <= 1} for a norm penalty.

    Membership and boundary sampling work for every penalty kind; the
    explicit constraint list needed by Dykstra projection exists for L1
    (one slab per column, ``|x_j . u| <= n lambda``) and GroupL2 (one
    cylinder per group, ``|X_{G_k}^T u|_2 <= n lambda``).
    """

    def __init__(self, X, pen: Penalty):
        design = as_design(X)
        if pen.p is not None and pen.p != design.p:
            raise ValueError(f"penalty expects dimension {pen.p}, design has p={design.p}")
        self.design = design
        self.pen = pen
        A = design.entries
        bound = pen.scale * design.n
        if isinstance(pen, L1):
            self.constraints = [_Slab(A[:, j].copy(), bound) for j in range(design.p)]
        elif isinstance(pen, GroupL2):
            self.constraints = [
                _Cylinder(A[:, list(g)], bound) for g in pen.partition.groups
            ]
        else:
            self.constraints = None

    @property
    def projectable(self) -> bool:
        return self.constraints is not None

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        dn = self.pen.dual_norm(self.design.entries.T @ u / self.design.n)
        return bool(dn <= 1.0 + tol)

    def sample_point(self, rng: np.random.Generator) -> np.ndarray:
        """A point of C: a standard Gaussian pulled back to the ball."""
        g = rng.standard_normal(self.design.n)
        dn = self.pen.dual_norm(self.design.entries.T @ g / self.design.n)
        return g / max(1.0, dn)


def dual_ball_project(y, ball: DualBall, tol: float = 1e-8,
                      max_sweeps: int = 100000) -> np.ndarray:
    """Euclidean projection of y onto the dual ball by Dykstra's algorithm.

    ``tol`` targets the Euclidean distance to the true projection; the loop
    stops once a full sweep moves the iterate by at most tol/20 and every
    constraint is within tol/2 (Euclidean distance). Raises RuntimeError at
    the sweep cap.
    """
    if not ball.projectable:
        raise ValueError(
            f"no explicit constraint list for penalty kind '{ball.pen.kind}'; "
            "use the variational-inequality route instead"
        )
    u = np.asarray(y, dtype=float).copy()
    cons = ball.constraints
    corr = np.zeros((len(cons), u.size))
    for _ in range(max_sweeps):
        start = u.copy()
        for k, con in enumerate(cons):
            w = u + corr[k]
            u = con.project(w)
            corr[k] = w - u
        if float(np.abs(u - start).max()) <= 0.05 * tol:
            if max(con.distance(u) for con in cons) <= 0.5 * tol:
                return u
    raise RuntimeError(f"Dykstra projection did not converge in {max_sweeps} sweeps")


def projection_identity_check(problem, observation, pen: Penalty, *,
                              solver_cfg: SolverConfig | None = None,
                              tol: float = 1e-6, dykstra_tol: float = 1e-8,
                              n_samples: int = 1000, sample_seed: int = 0,
                              result: SolverResult | None = None) -> GeometryReport:
    """Certify ``X beta_hat = y - P_C(y)`` on one observation.

    L1/GroupL2: ``worst_slack`` is the scaled-norm discrepancy between the
    solver's fitted values and ``y - u`` with u the Dykstra projection.

    SortedL1/ConeNorm: ``worst_slack`` is the larger of the residual's dual
    infeasibility ``dual_norm(X^T r / n) - 1`` and the worst sampled
    variational-inequality violation ``-(1/n)(y - r) . (r - u')`` over
    ``n_samples`` points u' of C.
    """
    y = observation.y
    X = problem.design
    if result is None:
        result = solve(y, X, pen, cfg=solver_cfg or tight_solver_config(y))
    ball = DualBall(X, pen)
    if ball.projectable:
        u = dual_ball_project(y, ball, tol=dykstra_tol)
        slack = scaled_norm(result.fitted - (y - u))
        name = "projection-identity"
    else:
        r = y - result.fitted
        slack = pen.dual_norm(X.entries.T @ r / problem.n) - 1.0
        rng = np.random.default_rng(sample_seed)
        for _ in range(int(n_samples)):
            u_prime = ball.sample_point(rng)
            slack = max(slack, -float(result.fitted.dot(r - u_prime)) / problem.n)
        name = "projection-identity-vi"
    return GeometryReport(check=name, instances=1, worst_slack=float(slack),
                          passed=bool(slack <= tol))


def contraction_check(X, pen: Penalty, pairs, *,
                      solver_cfg: SolverConfig | None = None, tol: float = 1e-6,
                      dykstra_tol: float = 1e-8,
                      firm: bool | None = None) -> list[GeometryReport]:
    """Certify 1-Lipschitz contraction of ``y -> X beta_hat(y)`` on pairs.

    Args:
        X: fixed design.
        pen: penalty.
        pairs: iterable of (y, y') vectors.
        firm: also check the firm refinement (needs a projectable dual
            ball); None means "when available".

    Returns one report for the contraction and, when enabled, one for the
    firm inequality (squared scaled norms, Dykstra projections).
    """
    design = as_design(X)
    A = design.entries
    ball = DualBall(design, pen)
    if firm is None:
        firm = ball.projectable
    elif firm and not ball.projectable:
        raise ValueError(f"firm check needs a projectable dual ball, not kind '{pen.kind}'")
    smax = np.linalg.norm(A, 2)
    lipschitz = 2.0 * smax * smax / design.n

    worst_contr = -np.inf
    worst_firm = -np.inf
    count = 0
    for y, y_prime in pairs:
        y = np.asarray(y, dtype=float)
        y_prime = np.asarray(y_prime, dtype=float)
        cfg = solver_cfg or tight_solver_config(y)
        res = solve(y, design, pen, cfg=cfg, lipschitz=lipschitz)
        res_p = solve(y_prime, design, pen, cfg=cfg, lipschitz=lipschitz,
                      beta0=res.beta_hat)
        d_mu = scaled_norm(res.fitted - res_p.fitted)
        d_y = scaled_norm(y - y_prime)
        worst_contr = max(worst_contr, d_mu - d_y)
        if firm:
            u = dual_ball_project(y, ball, tol=dykstra_tol)
            u_p = dual_ball_project(y_prime, ball, tol=dykstra_tol)
            du = u - u_p
            worst_firm = max(
                worst_firm, d_mu * d_mu - (d_y * d_y - float(du.dot(du)) / design.n)
            )
        count += 1
    if count == 0:
        raise ValueError("pairs must be nonempty")
    reports = [GeometryReport("contraction", count, float(worst_contr),
                              bool(worst_contr <= tol))]
    if firm:
        reports.append(GeometryReport("firm-nonexpansiveness", count,
                                      float(worst_firm), bool(worst_firm <= tol)))
    return reports
