"""Constrained trajectory optimization by differential dynamic programming.

The finite-horizon problem

    min  0.5 |x_N - xref_N|^2_L  +  sum_i 0.5 (|x_i - xref_i|^2_Q
                                              + |u_i - uref_i|^2_R) dt
    s.t. x_{i+1} = f(x_i, u_i),   c(x_i) <= 0

is solved with an augmented-Lagrangian outer loop around a Gauss-Newton
(iLQR-style) inner loop. Each inequality row at each node carries a
multiplier lam >= 0 and shares a penalty weight mu; the stage cost is
augmented with

    (max(0, lam + mu * c)^2 - lam^2) / (2 mu)

whose gradient max(0, lam + mu*c) * dc/dx and Gauss-Newton Hessian
mu * dc/dx^T dc/dx (active rows) fold into the Riccati recursion unchanged.
After the inner loop converges, multipliers are projected
(lam <- max(0, lam + mu*c)) and mu grows while violations persist.

States are always defined by rollout: returned trajectories satisfy
x_{i+1} = f(x_i, u_i) exactly.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np


@dataclass
class OcpProblem:
    """Problem data handed to the solver.

    dynamics(x, u) -> x_next and dynamics_jacobians(x, u) -> (A, B) define
    the discrete model. constraints / constraints_jacobian, when present,
    evaluate the full stacked trajectory at once: (N, n_x) -> (N, n_c) and
    (N, n_x) -> (N, n_c, n_x). References may be a single vector (held
    constant over the horizon) or a full trajectory.
    """

    horizon: int
    dt: float
    dynamics: Callable
    dynamics_jacobians: Callable
    q_diag: np.ndarray
    r_diag: np.ndarray
    terminal_diag: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray
    constraints: Optional[Callable] = None
    constraints_jacobian: Optional[Callable] = None
    n_constraints: int = 0

    def __post_init__(self):
        self.q_diag = np.asarray(self.q_diag, dtype=float)
        self.r_diag = np.asarray(self.r_diag, dtype=float)
        self.terminal_diag = np.asarray(self.terminal_diag, dtype=float)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if np.any(self.q_diag < 0.0) or np.any(self.terminal_diag < 0.0):
            raise ValueError("state weights must be non-negative")
        if np.any(self.r_diag <= 0.0):
            raise ValueError("input weights must be positive")
        if (self.constraints is None) != (self.constraints_jacobian is None):
            raise ValueError("constraints and constraints_jacobian come together")
        if self.constraints is not None and self.n_constraints < 1:
            raise ValueError("n_constraints must be set with the constraint handle")
        self.x_ref = np.broadcast_to(
            np.asarray(self.x_ref, dtype=float), (self.horizon + 1, self.n_x)
        ).copy()
        self.u_ref = np.broadcast_to(
            np.asarray(self.u_ref, dtype=float), (self.horizon, self.n_u)
        ).copy()

    @property
    def n_x(self):
        return self.q_diag.shape[0]

    @property
    def n_u(self):
        return self.r_diag.shape[0]


@dataclass
class SolverSettings:
    """Iteration caps, tolerances and schedules for the solver."""

    max_outer: int = 8
    max_inner: int = 40
    mu_init: float = 1.0
    mu_growth: float = 10.0
    tol_constraint: float = 1e-3
    tol_cost: float = 1e-4
    reg_init: float = 1e-6
    reg_min: float = 1e-8
    reg_max: float = 1e8
    reg_up: float = 10.0
    reg_down: float = 0.5
    n_line_search: int = 11
    armijo: float = 1e-4

    def __post_init__(self):
        positive = (
            "max_outer", "max_inner", "mu_init", "tol_constraint", "tol_cost",
            "reg_init", "reg_min", "reg_max", "n_line_search", "armijo",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mu_growth <= 1.0 or self.reg_up <= 1.0:
            raise ValueError("growth factors must exceed 1")
        if not 0.0 < self.reg_down < 1.0:
            raise ValueError("reg_down must lie in (0, 1)")

    @property
    def line_search_betas(self):
        return 0.5 ** np.arange(self.n_line_search)


class TraceEntry(NamedTuple):
    """One accepted iterate: outer loop index, AL objective, true cost, violation."""

    outer: int
    al_cost: float
    cost: float
    violation: float


@dataclass
class SolveResult:
    """Optimized trajectory plus convergence statistics."""

    states: np.ndarray  # (horizon+1, n_x), states[i+1] = f(states[i], inputs[i])
    inputs: np.ndarray  # (horizon, n_u)
    cost: float
    max_violation: float
    iterations: int
    outer_iterations: int
    converged: bool
    trace: list
    multipliers: Optional[np.ndarray] = None
    penalty: float = 0.0


def rollout(problem: OcpProblem, x0, inputs):
    """Integrate the discrete dynamics under an input sequence."""
    states = np.empty((problem.horizon + 1, problem.n_x))
    states[0] = x0
    for i in range(problem.horizon):
        states[i + 1] = problem.dynamics(states[i], inputs[i])
    return states


def trajectory_cost(states, inputs, problem: OcpProblem):
    """Quadratic tracking cost of a trajectory."""
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if states.shape != (problem.horizon + 1, problem.n_x):
        raise ValueError(f"state trajectory shape {states.shape} mismatches problem")
    if inputs.shape != (problem.horizon, problem.n_u):
        raise ValueError(f"input trajectory shape {inputs.shape} mismatches problem")
    dx = states - problem.x_ref
    du = inputs - problem.u_ref
    stage = 0.5 * problem.dt * (
        np.sum(dx[:-1] ** 2 @ problem.q_diag) + np.sum(du**2 @ problem.r_diag)
    )
    terminal = 0.5 * np.sum(problem.terminal_diag * dx[-1] ** 2)
    return float(stage + terminal)


def _constraint_values(problem: OcpProblem, states):
    return problem.constraints(states) if problem.constraints is not None else None


def _max_violation(values):
    """Worst violation over nodes 1..N (the initial state is given)."""
    if values is None:
        return 0.0
    return float(max(0.0, np.max(values[1:])))


def _al_penalty(values, multipliers, mu):
    """Augmented-Lagrangian penalty summed over nodes 1..N."""
    if values is None:
        return 0.0
    shifted = np.maximum(0.0, multipliers[1:] + mu * values[1:])
    return float(np.sum(shifted**2 - multipliers[1:] ** 2) / (2.0 * mu))


def al_objective(states, inputs, problem, multipliers, mu):
    """True cost plus the multiplier-shifted constraint penalty."""
    values = _constraint_values(problem, states)
    return trajectory_cost(states, inputs, problem) + _al_penalty(
        values, multipliers, mu
    )


def update_multipliers(multipliers, mu, values, settings: SolverSettings):
    """Project multipliers and grow the penalty while violations persist.

    lam' = max(0, lam + mu * c) per row per node; the initial node keeps a
    zero multiplier since its state is not a decision variable.
    """
    new = np.maximum(0.0, multipliers + mu * values)
    new[0] = 0.0
    grown = mu * settings.mu_growth if _max_violation(values) > settings.tol_constraint else mu
    return new, grown


def backward_pass(states, inputs, problem: OcpProblem, multipliers, mu, reg):
    """Riccati-style recursion on the augmented cost.

    Returns (k, K, dv1, dv2) with the expected objective change of a step
    scaled by beta being beta*dv1 + beta^2*dv2, or None when the
    regularized input Hessian is not positive definite at some node.
    """
    H = problem.horizon
    n_x, n_u = problem.n_x, problem.n_u
    dt = problem.dt
    dx = states - problem.x_ref
    du = inputs - problem.u_ref

    if problem.constraints is not None:
        cvals = problem.constraints(states)
        cjacs = problem.constraints_jacobian(states)
        shifted = np.maximum(0.0, multipliers + mu * cvals)
    else:
        cvals = cjacs = shifted = None

    def al_terms(i):
        """Gradient and Gauss-Newton Hessian of the node-i penalty."""
        if cvals is None or i == 0:
            return 0.0, 0.0
        a = shifted[i]
        C = cjacs[i]
        grad = C.T @ a
        hess = mu * (C.T * (a > 0.0)) @ C
        return grad, hess

    k_seq = np.empty((H, n_u))
    K_seq = np.empty((H, n_u, n_x))
    grad_N, hess_N = al_terms(H)
    Vx = problem.terminal_diag * dx[H] + grad_N
    Vxx = np.diag(problem.terminal_diag) + hess_N
    dv1 = 0.0
    dv2 = 0.0
    reg_eye = reg * np.eye(n_u)

    for i in range(H - 1, -1, -1):
        A, B = problem.dynamics_jacobians(states[i], inputs[i])
        grad_i, hess_i = al_terms(i)
        lx = dt * problem.q_diag * dx[i] + grad_i
        lu = dt * problem.r_diag * du[i]
        Qx = lx + A.T @ Vx
        Qu = lu + B.T @ Vx
        Qxx = np.diag(dt * problem.q_diag) + hess_i + A.T @ Vxx @ A
        Qux = B.T @ Vxx @ A
        Quu = np.diag(dt * problem.r_diag) + B.T @ Vxx @ B + reg_eye
        try:
            chol = np.linalg.cholesky(Quu)
        except np.linalg.LinAlgError:
            return None
        rhs = np.column_stack([Qu, Qux])
        sol = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        k = -sol[:, 0]
        K = -sol[:, 1:]
        k_seq[i] = k
        K_seq[i] = K
        dv1 += k @ Qu
        dv2 += 0.5 * k @ Quu @ k
        Vx = Qx + K.T @ Quu @ k + K.T @ Qu + Qux.T @ k
        Vxx = Qxx + K.T @ Quu @ K + K.T @ Qux + Qux.T @ K
        Vxx = 0.5 * (Vxx + Vxx.T)
    return k_seq, K_seq, dv1, dv2


def forward_pass(
    states, inputs, gains, problem: OcpProblem, multipliers, mu, al_cost, settings
):
    """Backtracking line search over the feedback rollout.

    Accepts the first step scale achieving sufficient decrease of the
    augmented objective; returns None when every scale fails.
    """
    k_seq, K_seq, dv1, dv2 = gains
    for beta in settings.line_search_betas:
        new_states = np.empty_like(states)
        new_states[0] = states[0]
        new_inputs = np.empty_like(inputs)
        try:
            for i in range(problem.horizon):
                new_inputs[i] = (
                    inputs[i]
                    + beta * k_seq[i]
                    + K_seq[i] @ (new_states[i] - states[i])
                )
                new_states[i + 1] = problem.dynamics(new_states[i], new_inputs[i])
        except (ValueError, FloatingPointError):
            continue
        if not (np.all(np.isfinite(new_states)) and np.all(np.isfinite(new_inputs))):
            continue
        new_cost = al_objective(new_states, new_inputs, problem, multipliers, mu)
        expected = beta * dv1 + beta**2 * dv2
        if expected < 0.0:
            accept = new_cost <= al_cost + settings.armijo * expected
        else:
            accept = new_cost <= al_cost
        if accept:
            return new_states, new_inputs, new_cost, beta
    return None


def solve(
    problem: OcpProblem,
    x0,
    u_init,
    settings: Optional[SolverSettings] = None,
    multipliers=None,
    penalty=None,
):
    """Run the augmented-Lagrangian DDP loop from an initial input sequence.

    multipliers/penalty warm-start the outer loop (e.g. shifted from the
    previous receding-horizon solve). Never raises on hitting iteration
    caps: the best iterate is returned with converged=False.
    """
    if settings is None:
        settings = SolverSettings()
    x0 = np.asarray(x0, dtype=float)
    inputs = np.array(u_init, dtype=float)
    if inputs.shape != (problem.horizon, problem.n_u):
        raise ValueError(
            f"u_init shape {inputs.shape} != {(problem.horizon, problem.n_u)}"
        )
    states = rollout(problem, x0, inputs)
    n_c = problem.n_constraints
    if multipliers is None:
        lam = np.zeros((problem.horizon + 1, n_c)) if n_c else None
    else:
        lam = np.array(multipliers, dtype=float)
    mu = settings.mu_init if penalty is None else float(penalty)
    reg = settings.reg_init

    cost = trajectory_cost(states, inputs, problem)
    values = _constraint_values(problem, states)
    violation = _max_violation(values)
    al_cost = cost + _al_penalty(values, lam, mu)
    trace = [TraceEntry(0, al_cost, cost, violation)]
    iterations = 0
    outer_used = 0
    converged = False

    for outer in range(1, settings.max_outer + 1):
        outer_used = outer
        inner_converged = False
        inner = 0
        while inner < settings.max_inner:
            gains = backward_pass(states, inputs, problem, lam, mu, reg)
            if gains is None:
                if reg >= settings.reg_max:
                    break
                reg = min(settings.reg_max, reg * settings.reg_up)
                continue
            inner += 1
            iterations += 1
            if abs(gains[2] + gains[3]) < settings.tol_cost:
                inner_converged = True
                break
            step = forward_pass(
                states, inputs, gains, problem, lam, mu, al_cost, settings
            )
            if step is None:
                if reg >= settings.reg_max:
                    break
                reg = min(settings.reg_max, reg * settings.reg_up)
                continue
            states, inputs, new_al_cost, _ = step
            reg = max(settings.reg_min, reg * settings.reg_down)
            cost = trajectory_cost(states, inputs, problem)
            values = _constraint_values(problem, states)
            violation = _max_violation(values)
            trace.append(TraceEntry(outer, new_al_cost, cost, violation))
            improvement = al_cost - new_al_cost
            al_cost = new_al_cost
            if improvement < settings.tol_cost:
                inner_converged = True
                break
        values = _constraint_values(problem, states)
        violation = _max_violation(values)
        if inner_converged and violation <= settings.tol_constraint:
            converged = True
            break
        if n_c == 0:
            converged = inner_converged
            break
        if outer < settings.max_outer:
            lam, mu = update_multipliers(lam, mu, values, settings)
            al_cost = cost + _al_penalty(values, lam, mu)

    return SolveResult(
        states=states,
        inputs=inputs,
        cost=cost,
        max_violation=violation,
        iterations=iterations,
        outer_iterations=outer_used,
        converged=converged,
        trace=trace,
        multipliers=lam,
        penalty=mu,
    )
