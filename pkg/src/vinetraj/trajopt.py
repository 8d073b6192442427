"""Constrained iLQR with an augmented-Lagrangian outer loop.

Problem::

    min  sum_k |z_k - zbar_k|^2_Q + sum_k |u_k - ubar_k|^2_R
    s.t. z_{k+1} = [f_k(z_k, u_k); z_k[0:18]],  z_0 = z_rest
         u_min <= u_k <= u_max
         z_min <= z_k <= z_max            (k >= 1, finite entries only)
         z_k[i] = value                   (listed equalities)

Dynamics hold exactly because every iterate is a rollout. Box and equality
constraints enter the stage costs as augmented-Lagrangian terms; all of them
act on single coordinates, so their Hessians are diagonal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import AUG_DIM, CONTROL_DIM, STATE_DIM, FloatArray, InvalidInputError, Trajectory
from .model import DynModel, jacobians, predict
from .reference import ReferenceSet

log = logging.getLogger(__name__)

_SHIFT = np.eye(AUG_DIM - STATE_DIM, AUG_DIM)


class InvalidProblemError(ValueError):
    pass


class SolverDivergedError(RuntimeError):
    def __init__(self, message: str, stats: "SolveStats | None" = None):
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True)
class Equality:
    """``z[timestep][index] == value`` (0-based timestep and index)."""

    timestep: int
    index: int
    value: float


@dataclass(frozen=True)
class SolverOptions:
    mu0: float = 10.0
    phi: float = 10.0
    shrink: float = 4.0
    mu_max: float = 1e8
    max_outer: int = 20
    max_inner: int = 100
    ls_factor: float = 0.5
    ls_steps: int = 12
    armijo: float = 1e-4
    reg0: float = 1e-6
    reg_factor: float = 10.0
    reg_max: float = 1e8
    cost_tol: float = 1e-6  # relative
    constraint_tol: float = 1e-3


@dataclass(eq=False)
class TrajOptProblem:
    model: DynModel | Sequence[DynModel]
    z_ref: FloatArray
    u_ref: FloatArray
    Q: FloatArray
    R: FloatArray
    z_rest: FloatArray
    u_min: FloatArray = field(default_factory=lambda: np.full(CONTROL_DIM, -np.inf))
    u_max: FloatArray = field(default_factory=lambda: np.full(CONTROL_DIM, np.inf))
    z_min: FloatArray = field(default_factory=lambda: np.full(AUG_DIM, -np.inf))
    z_max: FloatArray = field(default_factory=lambda: np.full(AUG_DIM, np.inf))
    equalities: Sequence[Equality] = ()

    def __post_init__(self) -> None:
        self.z_ref = np.asarray(self.z_ref, dtype=float)
        self.u_ref = np.asarray(self.u_ref, dtype=float).reshape(-1, CONTROL_DIM)
        N = self.z_ref.shape[0]
        if self.z_ref.shape != (N, AUG_DIM) or self.u_ref.shape[0] != N - 1 or N < 2:
            raise InvalidProblemError("references must be (N, 27) and (N-1, 3) with N >= 2")
        self.Q = np.broadcast_to(np.asarray(self.Q, dtype=float), (AUG_DIM,)).copy()
        self.R = np.broadcast_to(np.asarray(self.R, dtype=float), (CONTROL_DIM,)).copy()
        if np.any(self.Q < 0) or np.any(self.R <= 0):
            raise InvalidProblemError("need Q >= 0 and R > 0")
        for name, dim in (("u_min", CONTROL_DIM), ("u_max", CONTROL_DIM), ("z_min", AUG_DIM), ("z_max", AUG_DIM)):
            setattr(self, name, np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (dim,)).copy())
        if np.any(self.u_min > self.u_max) or np.any(self.z_min > self.z_max):
            raise InvalidProblemError("lower bound exceeds upper bound")
        self.z_rest = np.asarray(self.z_rest, dtype=float)
        if self.z_rest.shape != (AUG_DIM,):
            raise InvalidProblemError("z_rest must have 27 entries")
        self.equalities = tuple(self.equalities)
        for eq in self.equalities:
            if not (1 <= eq.timestep < N and 0 <= eq.index < AUG_DIM):
                raise InvalidProblemError(f"equality {eq} outside horizon 1..{N - 1}")
        if isinstance(self.model, DynModel):
            self.models = [self.model] * (N - 1)
        else:
            self.models = list(self.model)
            if len(self.models) != N - 1:
                raise InvalidProblemError(f"model schedule needs {N - 1} entries")

    @classmethod
    def from_reference(cls, model, refs: ReferenceSet, **kwargs) -> "TrajOptProblem":
        return cls(model, refs.z_bar, refs.u_bar, **kwargs)

    @property
    def N(self) -> int:
        return self.z_ref.shape[0]

    @property
    def dt(self) -> float:
        return self.models[0].dt


@dataclass
class SolveStats:
    iterations: int = 0
    outer_iterations: int = 0
    final_cost: float = float("nan")
    max_violation: float = float("inf")
    cost_history: list[float] = field(default_factory=list)
    al_history: list[list[float]] = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "outer_iterations": self.outer_iterations,
            "final_cost": self.final_cost,
            "max_violation": self.max_violation,
            "converged": self.converged,
            "cost_history": self.cost_history,
        }


# ------------------------------------------------------------------ costs


def cost(Z, U, problem: TrajOptProblem) -> float:
    """Weighted squared tracking error of states and controls."""
    Z = np.asarray(Z, dtype=float)
    U = np.asarray(U, dtype=float).reshape(-1, CONTROL_DIM)
    if Z.shape != problem.z_ref.shape or U.shape != problem.u_ref.shape:
        raise InvalidInputError("trajectory length does not match the problem horizon")
    dz = Z - problem.z_ref
    du = U - problem.u_ref
    return float(np.sum(dz * dz * problem.Q) + np.sum(du * du * problem.R))


def linearize_step(model: DynModel, z, u) -> tuple[FloatArray, FloatArray]:
    """Jacobians ``(27x27, 27x3)`` of ``z -> [f(z, u); z[0:18]]``."""
    fz, fu = jacobians(model, z, u)
    Fz = np.vstack([fz, _SHIFT])
    Fu = np.vstack([fu, np.zeros((AUG_DIM - STATE_DIM, CONTROL_DIM))])
    return Fz, Fu


def al_update(lam, mu, c, prev_violation=None, equality=False, phi: float = 10.0,
              shrink: float = 4.0, mu_max: float = np.inf):
    """Multiplier and penalty update for constraint values ``c``.

    Inequalities (``c <= 0``) keep ``lam >= 0``. A penalty grows by ``phi`` when
    its violation is positive and did not shrink by ``shrink`` since
    ``prev_violation``. Returns ``(lam, mu, violation)``.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(mu <= 0):
        raise InvalidInputError("penalties must be positive")
    equality = np.broadcast_to(np.asarray(equality, dtype=bool), c.shape)
    new_lam = lam + mu * c
    new_lam = np.where(equality, new_lam, np.maximum(new_lam, 0.0))
    violation = np.where(equality, np.abs(c), np.maximum(c, 0.0))
    if prev_violation is None:
        stalled = np.zeros(c.shape, dtype=bool)
    else:
        stalled = (violation > 0) & (violation > np.asarray(prev_violation) / shrink)
    new_mu = np.where(stalled, np.minimum(mu * phi, mu_max), mu)
    return new_lam, new_mu, violation


class _Constraints:
    """All constraints of a problem, as four box families plus equalities.

    Each family is stored as a masked ``(rows, dim)`` array of bounds with
    matching multiplier and penalty arrays.
    """

    def __init__(self, problem: TrajOptProblem, mu0: float):
        N = problem.N
        self.u_hi = np.tile(problem.u_max, (N - 1, 1))
        self.u_lo = np.tile(problem.u_min, (N - 1, 1))
        self.z_hi = np.tile(problem.z_max, (N, 1))
        self.z_lo = np.tile(problem.z_min, (N, 1))
        self.z_hi[0] = np.inf
        self.z_lo[0] = -np.inf
        self.masks = {
            "u_hi": np.isfinite(self.u_hi),
            "u_lo": np.isfinite(self.u_lo),
            "z_hi": np.isfinite(self.z_hi),
            "z_lo": np.isfinite(self.z_lo),
        }
        self.eq_k = np.array([e.timestep for e in problem.equalities], dtype=int)
        self.eq_i = np.array([e.index for e in problem.equalities], dtype=int)
        self.eq_v = np.array([e.value for e in problem.equalities], dtype=float)
        shapes = {"u_hi": self.u_hi.shape, "u_lo": self.u_lo.shape,
                  "z_hi": self.z_hi.shape, "z_lo": self.z_lo.shape, "eq": self.eq_v.shape}
        self.lam = {k: np.zeros(s) for k, s in shapes.items()}
        self.mu = {k: np.full(s, mu0) for k, s in shapes.items()}
        self.prev = {k: None for k in shapes}

    def values(self, Z, U) -> dict[str, FloatArray]:
        """Constraint values; masked-out entries are set to -1 (inactive, satisfied)."""
        with np.errstate(invalid="ignore"):
            vals = {
                "u_hi": U - self.u_hi,
                "u_lo": self.u_lo - U,
                "z_hi": Z - self.z_hi,
                "z_lo": self.z_lo - Z,
            }
        for k, m in self.masks.items():
            vals[k] = np.where(m, vals[k], -1.0)
        vals["eq"] = Z[self.eq_k, self.eq_i] - self.eq_v if len(self.eq_v) else np.zeros(0)
        return vals

    def max_violation(self, Z, U) -> float:
        vals = self.values(Z, U)
        worst = 0.0
        for k, c in vals.items():
            if c.size:
                v = np.abs(c) if k == "eq" else np.maximum(c, 0.0)
                worst = max(worst, float(v.max()))
        return worst

    def _active(self, key: str, c):
        if key == "eq":
            return np.ones(c.shape)
        return ((c > 0) | (self.lam[key] > 0)).astype(float)

    def penalty(self, Z, U) -> float:
        total = 0.0
        for key, c in self.values(Z, U).items():
            if c.size:
                act = self._active(key, c)
                total += float(np.sum(self.lam[key] * c + 0.5 * act * self.mu[key] * c * c))
        return total

    def expansion(self, Z, U):
        """Gradient and diagonal Hessian of the penalty w.r.t. ``Z`` and ``U``."""
        gz = np.zeros_like(Z)
        hz = np.zeros_like(Z)
        gu = np.zeros_like(U)
        hu = np.zeros_like(U)
        vals = self.values(Z, U)
        for key, sign, g, h in (("u_hi", 1.0, gu, hu), ("u_lo", -1.0, gu, hu),
                                ("z_hi", 1.0, gz, hz), ("z_lo", -1.0, gz, hz)):
            c = vals[key]
            act = self._active(key, c) * self.masks[key]
            g += sign * (self.lam[key] + act * self.mu[key] * c) * self.masks[key]
            h += act * self.mu[key]
        if len(self.eq_v):
            c = vals["eq"]
            np.add.at(gz, (self.eq_k, self.eq_i), self.lam["eq"] + self.mu["eq"] * c)
            np.add.at(hz, (self.eq_k, self.eq_i), self.mu["eq"])
        return gz, hz, gu, hu

    def update(self, Z, U, opts: SolverOptions) -> None:
        for key, c in self.values(Z, U).items():
            if not c.size:
                continue
            lam, mu, viol = al_update(self.lam[key], self.mu[key], c, self.prev[key],
                                      equality=(key == "eq"), phi=opts.phi,
                                      shrink=opts.shrink, mu_max=opts.mu_max)
            if key != "eq":
                lam = lam * self.masks[key]
            self.lam[key], self.mu[key], self.prev[key] = lam, mu, viol


# ------------------------------------------------------------------ solver


def _rollout(models, z0, U, Z_nom=None, K=None, d=None, alpha=1.0):
    """Forward pass; with gains, applies ``u = U + alpha d + K (z - Z_nom)``."""
    N = U.shape[0] + 1
    Z = np.empty((N, AUG_DIM))
    U_new = np.empty_like(U)
    Z[0] = z0
    for k in range(N - 1):
        u = U[k] if K is None else U[k] + alpha * d[k] + K[k] @ (Z[k] - Z_nom[k])
        U_new[k] = u
        Z[k + 1, :STATE_DIM] = predict(models[k], Z[k], u)
        Z[k + 1, STATE_DIM:] = Z[k, : AUG_DIM - STATE_DIM]
        if not np.all(np.isfinite(Z[k + 1])):
            Z[k + 1 :] = np.nan
            break
    return Z, U_new


class _Solver:
    def __init__(self, problem: TrajOptProblem, opts: SolverOptions):
        self.p = problem
        self.opts = opts
        self.con = _Constraints(problem, opts.mu0)
        self.reg = opts.reg0

    def objective(self, Z, U) -> float:
        if not np.all(np.isfinite(Z)):
            return float("inf")
        return cost(Z, U, self.p) + self.con.penalty(Z, U)

    def backward(self, Z, U):
        p, N = self.p, self.p.N
        gz, hz, gu, hu = self.con.expansion(Z, U)
        lx = 2.0 * p.Q * (Z - p.z_ref) + gz
        lxx = 2.0 * p.Q + hz
        lu = 2.0 * p.R * (U - p.u_ref) + gu
        luu = 2.0 * p.R + hu
        K = np.zeros((N - 1, CONTROL_DIM, AUG_DIM))
        d = np.zeros((N - 1, CONTROL_DIM))
        Vx = lx[-1].copy()
        Vxx = np.diag(lxx[-1])
        dV = np.zeros(2)
        reg_eye = self.reg * np.eye(AUG_DIM)
        for k in range(N - 2, -1, -1):
            Fz, Fu = linearize_step(p.models[k], Z[k], U[k])
            Qx = lx[k] + Fz.T @ Vx
            Qu = lu[k] + Fu.T @ Vx
            VF = Vxx @ Fz
            Qxx = np.diag(lxx[k]) + Fz.T @ VF
            Qux = Fu.T @ VF
            Quu = np.diag(luu[k]) + Fu.T @ Vxx @ Fu
            Vreg = Vxx + reg_eye
            Quu_r = np.diag(luu[k]) + Fu.T @ Vreg @ Fu
            Qux_r = Fu.T @ Vreg @ Fz
            try:
                chol = scipy.linalg.cho_factor(Quu_r)
            except np.linalg.LinAlgError:
                return None
            Kk = -scipy.linalg.cho_solve(chol, Qux_r)
            dk = -scipy.linalg.cho_solve(chol, Qu)
            K[k], d[k] = Kk, dk
            dV += (dk @ Qu, 0.5 * dk @ Quu @ dk)
            Vx = Qx + Kk.T @ Quu @ dk + Kk.T @ Qu + Qux.T @ dk
            Vxx = Qxx + Kk.T @ Quu @ Kk + Kk.T @ Qux + Qux.T @ Kk
            Vxx = 0.5 * (Vxx + Vxx.T)
        return K, d, dV

    def inner(self, Z, U, J, stats: SolveStats):
        """iLQR on the current augmented Lagrangian. Returns the last accepted
        iterate and whether the loop stopped on its tolerance."""
        opts = self.opts
        history = [J]
        settled = False
        for _ in range(opts.max_inner):
            out = self.backward(Z, U)
            if out is None:
                self.reg *= opts.reg_factor
                if self.reg > opts.reg_max:
                    break
                continue
            K, d, dV = out
            expected = dV[0] + dV[1]
            if -expected <= 1e-12 * max(abs(J), 1.0):
                settled = True
                break
            alpha, accepted = 1.0, False
            for _ in range(opts.ls_steps):
                Zn, Un = _rollout(self.p.models, self.p.z_rest, U, Z, K, d, alpha)
                Jn = self.objective(Zn, Un)
                if np.isfinite(Jn) and Jn <= J + opts.armijo * (alpha * dV[0] + alpha**2 * dV[1]):
                    accepted = True
                    break
                alpha *= opts.ls_factor
            stats.iterations += 1
            if not accepted:
                self.reg *= opts.reg_factor
                if self.reg > opts.reg_max:
                    break
                continue
            self.reg = max(self.reg / opts.reg_factor, opts.reg0)
            decrease = J - Jn
            Z, U, J = Zn, Un, Jn
            history.append(J)
            stats.cost_history.append(cost(Z, U, self.p))
            if decrease < opts.cost_tol * max(abs(J), 1e-12):
                settled = True
                break
        stats.al_history.append(history)
        return Z, U, J, settled


def solve(problem: TrajOptProblem, U_init=None, options: SolverOptions = SolverOptions()):
    """Optimise the control sequence. Returns ``(Trajectory, SolveStats)``.

    ``U_init`` defaults to the control reference.
    """
    U = np.array(problem.u_ref if U_init is None else U_init, dtype=float).reshape(-1, CONTROL_DIM)
    if U.shape != problem.u_ref.shape:
        raise InvalidInputError(f"U_init must be ({problem.N - 1}, 3)")
    solver = _Solver(problem, options)
    stats = SolveStats()
    Z, U = _rollout(problem.models, problem.z_rest, U)
    J = solver.objective(Z, U)
    if not np.isfinite(J):
        raise SolverDivergedError("initial rollout is not finite", stats)

    best = None
    for outer in range(options.max_outer):
        stats.outer_iterations = outer + 1
        Z, U, J, settled = solver.inner(Z, U, J, stats)
        viol = solver.con.max_violation(Z, U)
        if best is None or viol < best[2] - 1e-12 or viol <= options.constraint_tol:
            best = (Z, U, viol)
        if viol <= options.constraint_tol:
            stats.converged = settled
            break
        solver.con.update(Z, U, options)
        solver.reg = options.reg0
        J = solver.objective(Z, U)
        log.debug("outer %d: violation %.3g, cost %.6g", outer, viol, cost(Z, U, problem))

    Z, U, viol = best
    # the augmented Lagrangian only drives box violations below tolerance;
    # project onto the box and re-roll so the returned controls respect it exactly
    clipped = np.clip(U, problem.u_min, problem.u_max)
    if not np.array_equal(clipped, U):
        Z, U = _rollout(problem.models, problem.z_rest, clipped)
        viol = solver.con.max_violation(Z, U)
    stats.final_cost = cost(Z, U, problem)
    stats.max_violation = viol
    if not np.isfinite(stats.final_cost):
        raise SolverDivergedError("solution cost is not finite", stats)
    return Trajectory(problem.dt, Z, U), stats
