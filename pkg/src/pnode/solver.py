"""The filtering loop: predict, calibrate, estimate error, update.

Per step, the solver extrapolates the mean, estimates the diffusion from
the ODE residual at the predicted mean (quasi-MLE with a unit-diffusion
innovation), scales the process noise by that estimate, forms the local
error, and decides acceptance with a PI controller. Updates run through
the configured operator scheme; only the ODE-role residual ever feeds
calibration and step control. Everything is carried in square-root form
through the step-size preconditioner.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import infoops, prior
from .errors import StepUnderflow
from .infoops import Joint, OperatorScheme, Partitioned
from .statespace import GaussianSqrt, _smooth_core, condition, triangularize

MAX_CONSECUTIVE_REJECTIONS = 20
ERROR_FLOOR = 1e-10
STEP_SAFETY = 0.95
STEP_CLAMP = (0.2, 10.0)


@dataclass
class SolverConfig:
    approx: str = infoops.EK1
    order: int = 3
    dt: Optional[float] = None
    rtol: Optional[float] = None
    atol: Optional[float] = None
    scheme: Optional[OperatorScheme] = None
    smooth: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.dt is not None:
            if self.dt <= 0:
                raise ValueError("fixed mode needs dt > 0")
            if self.rtol is not None or self.atol is not None:
                raise ValueError("give either dt or (rtol, atol), not both")
        else:
            if self.rtol is None or self.atol is None:
                raise ValueError("adaptive mode needs rtol and atol")
            if self.rtol <= 0 or self.atol <= 0:
                raise ValueError("adaptive mode needs rtol, atol > 0")

    @property
    def adaptive(self) -> bool:
        return self.dt is None


@dataclass
class SolveStats:
    n_feval: int = 0
    n_steps_accepted: int = 0
    n_steps_rejected: int = 0
    wall_time: float = 0.0


@dataclass
class Solution:
    times: np.ndarray
    filtered: list
    local_diffusions: np.ndarray
    stats: SolveStats
    d: int
    q: int
    smoothed: Optional[list] = None
    # Per-node step artifacts (index n holds the step into node n; entry 0 is None).
    transitions: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    # Filled by the smoothing pass, consumed by the sampler.
    gains: Optional[list] = None
    cond_factors: Optional[list] = None

    def solution_means(self) -> np.ndarray:
        """Posterior means of the solution block Y0, per node."""
        states = self.smoothed if self.smoothed is not None else self.filtered
        return np.array([s.mean[: self.d] for s in states])

    def solution_stds(self) -> np.ndarray:
        """Marginal standard deviations of the solution block Y0, per node."""
        states = self.smoothed if self.smoothed is not None else self.filtered
        return np.array([s.marginal_std()[: self.d] for s in states])


def _tri_pseudo_solve(rfac: np.ndarray, rhs: np.ndarray):
    """Solve rfac^T w = rhs (rfac upper triangular), zeroing dead pivots."""
    m = rhs.shape[0]
    diag = np.abs(np.diag(rfac))
    pivot_tol = 1e-14 * (diag.max() if m else 0.0)
    w = np.zeros(m)
    degenerate = False
    for i in range(m):
        acc = rhs[i] - rfac[:i, i] @ w[:i]
        if diag[i] <= pivot_tol:
            degenerate = True
        else:
            w[i] = acc / rfac[i, i]
    return w, degenerate


def local_diffusion(residual: np.ndarray, innovation_unit_factor: np.ndarray) -> float:
    """Quasi-MLE diffusion estimate sigma^2 = z^T Sbar^-1 z / m.

    ``innovation_unit_factor`` is the right factor of Sbar = H Q_unit H^T,
    the innovation covariance under unit diffusion; ``residual`` is the
    ODE-role residual only.
    """
    residual = np.asarray(residual, dtype=float)
    m = residual.shape[0]
    w, _ = _tri_pseudo_solve(innovation_unit_factor, residual)
    return float(w @ w) / m


def local_error(sigma2: float, h_row_norms: np.ndarray, scale: np.ndarray) -> float:
    """RMS of the calibrated per-coordinate error against the tolerance scale."""
    ratio = math.sqrt(sigma2) * np.asarray(h_row_norms) / np.asarray(scale)
    return float(np.sqrt(np.mean(ratio**2)))


def step_control(
    eps: float,
    eps_prev: float,
    h: float,
    q: int,
    min_step: float = 0.0,
    safety: float = STEP_SAFETY,
    clamp: tuple = STEP_CLAMP,
):
    """PI controller: accept iff eps <= 1, propose the next step size."""
    alpha = 0.7 / (q + 1)
    beta = 0.4 / (q + 1)
    e = max(eps, ERROR_FLOOR)
    ep = max(eps_prev, ERROR_FLOOR)
    factor = min(max(safety * e**-alpha * ep**beta, clamp[0]), clamp[1])
    h_next = h * factor
    if h_next < min_step:
        raise StepUnderflow(f"step size underflow: h_next = {h_next:.3e}")
    return eps <= 1.0, h_next


def default_scheme(problem, config: SolverConfig, ops=("ode",)) -> OperatorScheme:
    """Build the operator scheme for a problem from operator names.

    ``ops`` is a subset of {"ode", "chainrule", "conservation"}. Presence
    of "conservation" selects a partitioned update (ODE first), otherwise
    the operators are stacked jointly.
    """
    ops = tuple(ops)
    unknown = set(ops) - {"ode", "chainrule", "conservation"}
    if unknown:
        raise ValueError(f"unknown operators: {sorted(unknown)}")
    d, q = problem.d, config.order
    if problem.mass is not None:
        ode_op = infoops.dae_operator(problem.mass, problem.f, problem.jac, d, q)
    elif problem.order == 2:
        ode_op = infoops.ode2_operator(
            problem.f, problem.jac, problem.jac_dy, config.approx, d, q
        )
    else:
        ode_op = infoops.ode1_operator(problem.f, problem.jac, config.approx, d, q)
    operators = [ode_op]
    if "chainrule" in ops:
        if problem.order != 1 or problem.mass is not None:
            raise ValueError("chain-rule operator needs an explicit first-order problem")
        operators.append(
            infoops.chainrule_operator(problem.f, problem.jac, problem.jac_jff, d, q)
        )
    if "conservation" in ops:
        if problem.invariants is None:
            raise ValueError(f"{problem.name} has no invariants")
        inv = problem.invariants
        operators.append(
            infoops.invariant_operator(inv.g, inv.dg_dy, inv.dg_dydot, d, q, inv.dim)
        )
        return Partitioned(tuple(operators))
    return Joint(tuple(operators))


def solve(problem, config: SolverConfig, t_eval=None) -> Solution:
    """Run the filter over the problem's time span.

    ``t_eval``: optional times the grid must contain exactly (steps are
    clamped to land on them); the adaptive grid still refines in between.
    """
    t_start = time.perf_counter()
    q = config.order
    d = problem.d
    scheme = config.scheme
    if scheme is None:
        scheme = default_scheme(problem, config)
    plan = infoops.compose(scheme)

    t0, t_end = problem.tspan
    span = t_end - t0
    eye_d = np.eye(d)
    _, _, abar, _, qbar_sqrt = prior.preconditioner(q, 1.0)
    abar_full = np.kron(abar, eye_d)
    qbar_sqrt_full = np.kron(qbar_sqrt, eye_d)
    tpowers = np.array([q - i + 0.5 for i in range(q + 1)])
    tfacts = np.array([math.factorial(q - i) for i in range(q + 1)], dtype=float)

    stats = SolveStats()
    state = prior.initial_state(problem, q)
    times = [t0]
    filtered = [state]
    diffusions = []
    transitions = [None]
    predicted = [None]

    # Step targets the grid must hit exactly.
    targets = [t_end]
    if t_eval is not None:
        targets = sorted(set(float(t) for t in t_eval) | {float(t_end)})
        targets = [t for t in targets if t > t0 + 1e-15 * max(abs(span), 1.0)]
    if not config.adaptive:
        n_fixed = math.ceil(span / config.dt - 1e-12)
        fixed_grid = [t0 + k * config.dt for k in range(1, n_fixed)] + [t_end]
        targets = sorted(set(targets) | set(fixed_grid))

    min_step = 1e-14 * span
    h = config.dt if not config.adaptive else 0.01 * span
    eps_prev = 1.0
    rejections = 0
    t = t0
    target_idx = 0
    tiny = 1e-12 * max(abs(span), 1.0)

    while t < t_end - tiny:
        while targets[target_idx] <= t + tiny:
            target_idx += 1
        target = targets[target_idx]
        h_try = min(h, target - t)
        t_new = target if h_try >= target - t - tiny else t + h_try

        tdiag = h_try**tpowers / tfacts
        tfull = np.repeat(tdiag, d)
        tinv = 1.0 / tfull

        mean_bar = state.mean * tinv
        r_bar = state.rfactor * tinv[None, :]
        mean_pred = tfull * (abar_full @ mean_bar)

        try:
            z = plan.ode_operator.evaluate(t_new, mean_pred)
            h_mat = plan.ode_operator.linearize(t_new, mean_pred)
            stats.n_feval += plan.ode_operator.eval_cost + plan.ode_operator.lin_cost
        except infoops.NonFiniteField:
            stats.n_feval += plan.ode_operator.eval_cost
            stats.n_steps_rejected += 1
            rejections += 1
            if rejections > MAX_CONSECUTIVE_REJECTIONS:
                raise StepUnderflow(
                    f"aborted at t = {t:.6g}: {rejections} consecutive rejections"
                ) from None
            h = h_try / 2.0
            continue

        # Unit-diffusion process-noise factor in plain coordinates.
        q_sqrt_unit = qbar_sqrt_full * tfull[None, :]
        qh = q_sqrt_unit @ h_mat.T
        sbar_factor = triangularize(qh)
        sigma2 = local_diffusion(z, sbar_factor)

        if config.adaptive:
            row_norms = np.linalg.norm(qh, axis=0)
            y_scale = np.maximum(np.abs(state.mean[:d]), np.abs(mean_pred[:d]))
            scale = config.atol + config.rtol * y_scale
            eps = local_error(sigma2, row_norms, scale)
            accept, h_next = step_control(eps, eps_prev, h_try, q, min_step=min_step)
        else:
            eps = 0.0
            accept, h_next = True, config.dt

        if not accept:
            stats.n_steps_rejected += 1
            rejections += 1
            if rejections > MAX_CONSECUTIVE_REJECTIONS:
                raise StepUnderflow(
                    f"aborted at t = {t:.6g}: {rejections} consecutive rejections"
                )
            h = h_next
            continue

        r_pred_bar = triangularize(
            np.vstack([r_bar @ abar_full.T, math.sqrt(sigma2) * qbar_sqrt_full])
        )
        pred_state = GaussianSqrt(mean_pred, r_pred_bar * tfull[None, :])

        if plan.joint:
            residuals = [-z]
            h_rows = [h_mat]
            for op in plan.auxiliaries:
                residuals.append(-op.evaluate(t_new, mean_pred))
                h_rows.append(op.linearize(t_new, mean_pred))
                stats.n_feval += op.eval_cost + op.lin_cost
            new_state, _, _ = condition(
                pred_state, np.vstack(h_rows), np.concatenate(residuals)
            )
        else:
            new_state, _, _ = condition(pred_state, h_mat, -z)
            for op in plan.auxiliaries:
                z_aux = op.evaluate(t_new, new_state.mean)
                h_aux = op.linearize(t_new, new_state.mean)
                stats.n_feval += op.eval_cost + op.lin_cost
                new_state, _, _ = condition(new_state, h_aux, -z_aux)

        a_plain = tfull[:, None] * abar_full * tinv[None, :]
        times.append(t_new)
        filtered.append(new_state)
        predicted.append(pred_state)
        transitions.append(a_plain)
        diffusions.append(sigma2)
        stats.n_steps_accepted += 1
        state = new_state
        t = t_new
        rejections = 0
        if config.adaptive:
            eps_prev = eps
            h = h_next

    stats.wall_time = time.perf_counter() - t_start
    solution = Solution(
        times=np.array(times),
        filtered=filtered,
        local_diffusions=np.array(diffusions),
        stats=stats,
        d=d,
        q=q,
        transitions=transitions,
        predicted=predicted,
    )
    if config.smooth:
        smooth(solution)
    return solution


def smooth(solution: Solution) -> Solution:
    """Rauch-Tung-Striebel backward pass over the stored step artifacts.

    The smoothed state at the final node is the filtered state itself.
    Gains and backward conditional factors are retained for sampling.
    """
    n = len(solution.filtered)
    smoothed = [None] * n
    gains = [None] * n
    cond_factors = [None] * n
    smoothed[-1] = solution.filtered[-1]
    for k in range(n - 2, -1, -1):
        smoothed[k], gains[k], cond_factors[k] = _smooth_core(
            solution.filtered[k],
            solution.predicted[k + 1],
            smoothed[k + 1],
            solution.transitions[k + 1],
        )
    solution.smoothed = smoothed
    solution.gains = gains
    solution.cond_factors = cond_factors
    return solution


def sample(solution: Solution, n_samples: int, seed: int) -> np.ndarray:
    """Joint posterior trajectories over the grid, shape (n_samples, N, D).

    Backward sampling: draw the final node from the smoothing marginal,
    then walk backwards through the stored gains and conditional factors.
    Deterministic given the seed.
    """
    if solution.smoothed is None or solution.gains is None:
        smooth(solution)
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    rng = np.random.default_rng(seed)
    n = len(solution.smoothed)
    dim = solution.smoothed[0].dim
    out = np.empty((n_samples, n, dim))
    last = solution.smoothed[-1]
    out[:, -1, :] = last.mean + rng.standard_normal((n_samples, dim)) @ last.rfactor
    for k in range(n - 2, -1, -1):
        gain = solution.gains[k]
        cfac = solution.cond_factors[k]
        mean_k = solution.filtered[k].mean
        pred_mean = solution.predicted[k + 1].mean
        drift = mean_k + (out[:, k + 1, :] - pred_mean) @ gain.T
        out[:, k, :] = drift + rng.standard_normal((n_samples, dim)) @ cfac
    return out
