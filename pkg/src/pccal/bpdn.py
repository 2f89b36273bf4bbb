"""Basis-pursuit denoising for PC coefficients, with cross-validated budget.

Solves   min ||e||_1   subject to   ||E - Psi e||_2 <= delta

by root finding on the Pareto curve: a sequence of LASSO subproblems

    min ||E - Psi e||_2  subject to  ||e||_1 <= tau

is solved with a spectral projected gradient method (Barzilai-Borwein steps,
nonmonotone line search, exact sort-based projection onto the l1 ball), and
tau is driven by Newton steps on phi(tau) = ||r(tau)||_2 - delta using the
dual slope phi'(tau) = -||Psi^T r||_inf / ||r||_2.

The residual budget delta, when not supplied, is chosen by k-fold
cross-validation over a grid of candidates relative to the training-data
norm, with the sqrt(N / N_train) rescaling applied before the final fit on
the full ensemble.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import PCBasis
from .ensemble import DesignEnsemble
from .errors import DomainError, ShapeError, SolverError

__all__ = [
    "BpdnConfig",
    "BpdnSolution",
    "BpdnReport",
    "measurement_matrix",
    "project_l1_ball",
    "solve_bpdn",
    "cross_validate_delta",
    "fit_ensemble",
]

_STEP_MIN = 1e-16
_STEP_MAX = 1e5
_LS_GAMMA = 1e-4          # sufficient-decrease constant
_LS_MAX_BACKTRACKS = 12
_F_HISTORY = 8            # nonmonotone line-search window


def default_delta_grid() -> np.ndarray:
    """20 log-spaced candidate budgets from 1e-4 to 0.5, relative to ||E||_2."""
    return np.logspace(np.log10(1e-4), np.log10(0.5), 20)


@dataclass
class BpdnConfig:
    """Solver and cross-validation settings.

    delta is an absolute residual budget; leave it None to select one by
    cross-validation over delta_grid (values relative to the l2 norm of the
    data being fit). The seed only shuffles fold membership.
    """

    delta: Optional[float] = None
    cv_folds: int = 4
    delta_grid: np.ndarray = field(default_factory=default_delta_grid)
    max_iters: int = 4000
    opt_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        self.delta_grid = np.asarray(self.delta_grid, dtype=float)
        if self.delta is None:
            if self.delta_grid.size == 0:
                raise DomainError("delta_grid must be nonempty when delta is absent")
            if (self.delta_grid < 0).any() or (np.diff(self.delta_grid) <= 0).any():
                raise DomainError("delta_grid must be nonnegative and strictly increasing")
        elif self.delta < 0:
            raise DomainError(f"delta must be nonnegative, got {self.delta}")
        if self.cv_folds < 2:
            raise DomainError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.max_iters < 1 or self.opt_tol <= 0:
            raise DomainError("max_iters must be >= 1 and opt_tol > 0")


@dataclass(frozen=True)
class BpdnSolution:
    """Result of one BPDN solve.

    pareto holds the (tau, residual_norm) pair recorded after each Newton
    round; residuals are nonincreasing as tau grows.
    """

    coefficients: np.ndarray
    residual_norm: float
    l1_norm: float
    iterations: int
    converged: bool
    pareto: tuple = ()


@dataclass(frozen=True)
class BpdnReport:
    """Final fit plus the cross-validation table that produced it."""

    coefficients: np.ndarray
    chosen_delta: float
    residual_norm: float
    l1_norm: float
    iterations: int
    converged: bool
    cv_errors: Optional[np.ndarray] = None    # (folds, len(delta_grid))
    delta_grid: Optional[np.ndarray] = None   # relative candidates
    chosen_relative: Optional[float] = None
    seed: Optional[int] = None


def measurement_matrix(basis: PCBasis, nodes) -> np.ndarray:
    """Basis functions evaluated at each node: Psi[q, k] = psi_k(xi_q)."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != basis.dim:
        raise ShapeError(
            f"nodes have shape {nodes.shape}, expected (N, {basis.dim})"
        )
    return basis.eval_many(nodes)


def project_l1_ball(v: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection onto {x : ||x||_1 <= tau} via the exact sort method."""
    if tau < 0:
        raise DomainError(f"l1 radius must be nonnegative, got {tau}")
    a = np.abs(v)
    if a.sum() <= tau:
        return v.copy()
    if tau == 0.0:
        return np.zeros_like(v)
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - tau
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u > css / k)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _lasso_spg(Psi, E, tau, x, gstep, rgap_tol, max_iters):
    """Approximately solve min 0.5||E - Psi x||^2 s.t. ||x||_1 <= tau.

    Returns (x, r, grad, iterations, gstep). Stops on a relative duality gap
    below rgap_tol, a stalled line search, or the iteration cap.
    """
    x = project_l1_ball(x, tau)
    r = E - Psi @ x
    grad = -(Psi.T @ r)
    f = 0.5 * float(r @ r)
    f_hist = [f]
    iters = 0
    while iters < max_iters:
        gnorm_dual = float(np.abs(grad).max()) if grad.size else 0.0
        gap = float(r @ (r - E)) + tau * gnorm_dual
        if abs(gap) <= rgap_tol * max(1.0, f):
            break
        # Nonmonotone backtracking along the projected-gradient arc.
        f_max = max(f_hist)
        step = gstep
        ls_ok = False
        for _ in range(_LS_MAX_BACKTRACKS):
            x_new = project_l1_ball(x - step * grad, tau)
            s = x_new - x
            gts = float(grad @ s)
            if gts >= 0.0:
                break  # arc no longer descends; shrink and retry
            r_new = E - Psi @ x_new
            f_new = 0.5 * float(r_new @ r_new)
            if f_new <= f_max + _LS_GAMMA * gts:
                ls_ok = True
                break
            step *= 0.5
        iters += 1
        if not ls_ok:
            break
        grad_new = -(Psi.T @ r_new)
        y = grad_new - grad
        sty = float(s @ y)
        gstep = min(_STEP_MAX, max(_STEP_MIN, float(s @ s) / sty)) if sty > 0 else _STEP_MAX
        x, r, grad, f = x_new, r_new, grad_new, f_new
        f_hist.append(f)
        if len(f_hist) > _F_HISTORY:
            f_hist.pop(0)
    return x, r, grad, iters, gstep


def solve_bpdn(Psi, E, delta, max_iters: int = 20000,
               opt_tol: float = 1e-5) -> BpdnSolution:
    """Minimize ||e||_1 subject to ||E - Psi e||_2 <= delta.

    Converges when the residual norm is within opt_tol * max(1, ||E||_2)
    below delta or within delta * opt_tol above it (so the feasibility
    contract ||r|| <= delta * (1 + opt_tol) always holds on success). If the
    iteration budget runs out, or the least-squares residual floor lies
    above delta, the best iterate is returned with converged=False.
    """
    Psi = np.asarray(Psi, dtype=float)
    E = np.asarray(E, dtype=float)
    if Psi.ndim != 2 or E.shape != (Psi.shape[0],):
        raise ShapeError(f"incompatible shapes Psi {Psi.shape}, E {E.shape}")
    if delta < 0:
        raise DomainError(f"delta must be nonnegative, got {delta}")
    bnorm = float(np.linalg.norm(E))
    tol = opt_tol * max(1.0, bnorm)
    # Overshoot above delta is capped harder than the root tolerance so the
    # returned residual always satisfies ||r|| <= delta * (1 + opt_tol).
    over_tol = tol if delta == 0.0 else min(tol, delta * opt_tol)

    def at_root(phi: float) -> bool:
        return -tol <= phi <= over_tol

    if bnorm <= delta:
        return BpdnSolution(np.zeros(Psi.shape[1]), bnorm, 0.0, 0, True)

    x = np.zeros(Psi.shape[1])
    tau = 0.0
    gstep = 1.0
    total = 0
    converged = False
    phi = bnorm - delta
    stalls = 0
    pareto = []
    while total < max_iters:
        rgap_tol = max(0.1 * opt_tol, min(0.1, 0.1 * abs(phi) / max(1.0, bnorm)))
        x, r, grad, used, gstep = _lasso_spg(
            Psi, E, tau, x, gstep, rgap_tol, min(max_iters - total, 3000)
        )
        total += max(used, 1)
        rnorm = float(np.linalg.norm(r))
        pareto.append((tau, rnorm))
        phi_prev, phi = phi, rnorm - delta
        if at_root(phi):
            converged = True
            break
        gnorm_dual = float(np.abs(grad).max())
        if gnorm_dual <= 1e-13 * max(1.0, rnorm):
            # Residual cannot decrease further (least-squares floor).
            converged = rnorm <= delta + over_tol
            break
        stalls = stalls + 1 if phi_prev - phi < 0.02 * abs(phi) else 0
        if stalls >= 2 and phi > 0:
            # Newton rounds are crawling: check whether delta is below the
            # attainable residual floor, in which case the constraint is
            # infeasible and the least-squares solution is the tau->inf limit.
            ls, *_ = np.linalg.lstsq(Psi, E, rcond=None)
            floor = float(np.linalg.norm(E - Psi @ ls))
            if floor > delta + tol:
                return BpdnSolution(
                    coefficients=ls,
                    residual_norm=floor,
                    l1_norm=float(np.abs(ls).sum()),
                    iterations=total,
                    converged=False,
                )
            stalls = 0
        tau_new = tau + phi * rnorm / gnorm_dual
        if phi > 0 and tau_new <= tau * (1 + 1e-14):
            break  # Newton step too small to make progress
        tau = max(tau_new, 0.0)
    rnorm = float(np.linalg.norm(E - Psi @ x))
    return BpdnSolution(
        coefficients=x,
        residual_norm=rnorm,
        l1_norm=float(np.abs(x).sum()),
        iterations=total,
        converged=converged or at_root(rnorm - delta),
        pareto=tuple(pareto),
    )


def cross_validate_delta(basis: PCBasis, ensemble: DesignEnsemble,
                         config: BpdnConfig, n_workers: int = 1) -> BpdnReport:
    """Pick delta by k-fold cross-validation, then fit the full ensemble.

    For each candidate (relative to the training-fold norm) the validation
    residual ||E_val - Psi_val e||_2 is recorded; the candidate minimizing
    the mean across folds wins and is rescaled by sqrt(N / N_train) before
    the final full-data fit. Fold membership is shuffled by config.seed.
    """
    if ensemble.n_rows < config.cv_folds:
        raise DomainError(
            f"ensemble has {ensemble.n_rows} rows but cv_folds={config.cv_folds}"
        )
    Psi = measurement_matrix(basis, ensemble.nodes)
    E = ensemble.values
    n = ensemble.n_rows
    rng = np.random.default_rng(config.seed)
    folds = np.array_split(rng.permutation(n), config.cv_folds)
    grid = config.delta_grid

    cv_errors = np.empty((config.cv_folds, grid.size))
    cv_converged = np.zeros((config.cv_folds, grid.size), dtype=bool)
    train_norms = np.empty(config.cv_folds)
    train_sizes = np.empty(config.cv_folds)

    def run_cell(f, j):
        val_idx = folds[f]
        train_idx = np.setdiff1d(np.arange(n), val_idx, assume_unique=False)
        sol = solve_bpdn(
            Psi[train_idx], E[train_idx],
            delta=float(grid[j]) * float(np.linalg.norm(E[train_idx])),
            max_iters=config.max_iters, opt_tol=config.opt_tol,
        )
        resid = float(np.linalg.norm(E[val_idx] - Psi[val_idx] @ sol.coefficients))
        return f, j, resid, sol.converged

    for f, val_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(n), val_idx)
        train_norms[f] = np.linalg.norm(E[train_idx])
        train_sizes[f] = train_idx.size

    cells = [(f, j) for f in range(config.cv_folds) for j in range(grid.size)]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda c: run_cell(*c), cells))
    else:
        results = [run_cell(f, j) for f, j in cells]
    for f, j, resid, ok in results:
        cv_errors[f, j] = resid
        cv_converged[f, j] = ok

    if not cv_converged.any():
        raise SolverError(
            "no cross-validation fit converged at any candidate delta",
            diagnostics={"cv_errors": cv_errors, "delta_grid": grid},
        )

    chosen_j = int(np.argmin(cv_errors.mean(axis=0)))
    chosen_rel = float(grid[chosen_j])
    # Rescale the training-size budget to the full sample before refitting.
    n_train = float(train_sizes.mean())
    delta_full = chosen_rel * float(train_norms.mean()) * np.sqrt(n / n_train)
    final = solve_bpdn(Psi, E, delta_full,
                       max_iters=config.max_iters, opt_tol=config.opt_tol)
    return BpdnReport(
        coefficients=final.coefficients,
        chosen_delta=delta_full,
        residual_norm=final.residual_norm,
        l1_norm=final.l1_norm,
        iterations=final.iterations,
        converged=final.converged,
        cv_errors=cv_errors,
        delta_grid=grid.copy(),
        chosen_relative=chosen_rel,
        seed=config.seed,
    )


def fit_ensemble(basis: PCBasis, ensemble: DesignEnsemble,
                 config: Optional[BpdnConfig] = None,
                 n_workers: int = 1) -> BpdnReport:
    """Fit an ensemble with BPDN, cross-validating delta unless one is given."""
    config = config or BpdnConfig()
    if config.delta is None:
        return cross_validate_delta(basis, ensemble, config, n_workers=n_workers)
    Psi = measurement_matrix(basis, ensemble.nodes)
    sol = solve_bpdn(Psi, ensemble.values, config.delta,
                     max_iters=config.max_iters, opt_tol=config.opt_tol)
    return BpdnReport(
        coefficients=sol.coefficients,
        chosen_delta=config.delta,
        residual_norm=sol.residual_norm,
        l1_norm=sol.l1_norm,
        iterations=sol.iterations,
        converged=sol.converged,
        seed=config.seed,
    )
