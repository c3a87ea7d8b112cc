"""Elliptic translator profiles via the regularized family.

The translator equation g~^{ab} D_a D_b u = c with the contact-angle boundary
condition determines u only up to an additive constant, with the speed fixed
by the flux balance

    c3 = - (boundary integral of phi) / (domain integral of (1 - |Du|^2)^{-1/2}).

The solver replaces the unknown constant by the zeroth-order term eps * u and
drives eps -> 0 along a geometric schedule, warm-starting each damped Newton
solve from the previous one shifted by the predicted constant growth
c3 (1/eps_next - 1/eps_prev).  The area mean of eps * u_eps tracks the speed;
the final profile is recentered to zero area mean and the speed is recomputed
from the flux-balance quadrature as a cross-check.

Newton uses the exact Jacobian (including the derivative of g~^{ab} with
respect to Du and the nonlinear boundary closure) with backtracking damping
that keeps iterates space-like.  On Newton failure the contact angle is
homotoped from zero to its target value and the schedule restarted.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ContinuationError, NewtonError, SpacelikeViolationError
from .grid import ContactAngle, CurvilinearGrid, GridFunction
from .operators import assemble_operator_matrix, boundary_gradient_data, contact_ghost, flow_operator


@dataclasses.dataclass
class NewtonConfig:
    max_iter: int = 40
    tol: float = 1e-10
    damping: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if not (0.0 < self.damping < 1.0):
            raise ValueError("damping must lie in (0, 1)")


@dataclasses.dataclass
class ContinuationSchedule:
    eps0: float = 1.0
    ratio: float = 0.5
    eps_min: float = 1e-6
    cauchy_tol: float = 1e-8   # early exit once speed estimates settle; 0 disables
    newton: NewtonConfig = dataclasses.field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not (self.eps0 > self.eps_min > 0.0):
            raise ValueError("need eps0 > eps_min > 0")
        if not (0.0 < self.ratio < 1.0):
            raise ValueError("need 0 < ratio < 1")

    def eps_values(self):
        out = []
        eps = self.eps0
        while eps >= self.eps_min:
            out.append(eps)
            eps *= self.ratio
        return out


@dataclasses.dataclass
class TranslatorSolution:
    profile: GridFunction          # zero area mean
    c3: float
    eps_trace: list                # (eps, max_nodes |eps u_eps - c3|)
    eps_trace_mean: list           # (eps, |area-mean(eps u_eps) - c3|)
    residuals: dict
    grid_shape: tuple
    newton_iterations: list

    def to_record(self):
        return {
            "c3": self.c3,
            "eps_trace": [[e, d] for e, d in self.eps_trace],
            "eps_trace_mean": [[e, d] for e, d in self.eps_trace_mean],
            "residuals": self.residuals,
            "grid": list(self.grid_shape),
            "newton_iterations": self.newton_iterations,
        }


def solve_regularized(eps, init, phi, grid: CurvilinearGrid,
                      newton: NewtonConfig | None = None, phi_vals=None,
                      source=None):
    """Damped Newton solve of g~^{ab} D_a D_b u = eps u (+ source) with the
    contact-angle boundary closure.

    The solution level grows like 1/eps, so internally Newton acts on the
    zero-mean part w with the constant level A = area-mean(init) split off:
    the operator sees only derivatives, hence the residual is
    F(w) - eps w - eps A and the large constant never enters a stencil
    difference.  ``source`` (a nodal field, default zero) supports
    manufactured-solution testing.  Returns (values, info); raises
    NewtonError on stagnation and SpacelikeViolationError if no damped step
    stays space-like.
    """
    newton = newton or NewtonConfig()
    if phi_vals is None:
        phi_vals = phi.values_on(grid)
    u0 = (init.values if isinstance(init, GridFunction) else np.asarray(init, float))
    A = float(grid.mean(u0))
    w = u0 - A
    N = w.size
    ident = sp.identity(N, format="csc")

    def residual(wv):
        out = flow_operator(wv, grid, phi_vals) - eps * wv - eps * A
        return out if source is None else out - source

    R = residual(w)
    norms = [float(np.max(np.abs(R)))]
    iters = 0
    while norms[-1] > newton.tol:
        if iters >= newton.max_iter:
            raise NewtonError(
                f"Newton: no convergence in {newton.max_iter} iterations "
                f"(eps = {eps:.3e}, residual = {norms[-1]:.3e})")
        L, _ = assemble_operator_matrix(w, grid, phi_vals, mode="newton")
        J = (L - eps * ident).tocsc()
        delta = splu(J).solve(-R.ravel()).reshape(w.shape)

        t = 1.0
        accepted = False
        for _ in range(newton.max_backtracks):
            try:
                trial = w + t * delta
                R_trial = residual(trial)
            except SpacelikeViolationError:
                t *= newton.damping
                continue
            norm_trial = float(np.max(np.abs(R_trial)))
            if norm_trial < norms[-1] * (1.0 - 1e-4 * t) or norm_trial < newton.tol:
                w, R = trial, R_trial
                norms.append(norm_trial)
                accepted = True
                break
            t *= newton.damping
        if not accepted:
            # the residual evaluation has a rounding floor amplified by the
            # O(1/rho^2) center coefficients; close enough to tol counts
            if norms[-1] <= 100.0 * newton.tol:
                break
            raise NewtonError(
                f"Newton line search failed (eps = {eps:.3e}, residual = {norms[-1]:.3e})")
        iters += 1
        # stagnation: less than 0.1% total reduction over the last 5 steps
        if len(norms) > 5 and norms[-1] > norms[-6] * (1.0 - 1e-3):
            if norms[-1] <= 100.0 * newton.tol:
                break
            raise NewtonError(
                f"Newton stagnation (eps = {eps:.3e}, residual = {norms[-1]:.3e})")
    return A + w, {"iterations": iters, "residual": norms[-1]}


def _solve_with_homotopy(eps, init, phi_vals, grid, newton):
    """Newton solve; on failure, walk the contact angle up from zero."""
    try:
        return solve_regularized(eps, init, None, grid, newton, phi_vals=phi_vals)
    except NewtonError:
        u = np.zeros_like(init if isinstance(init, np.ndarray) else init.values)
        info = None
        for lam in (0.25, 0.5, 0.75, 1.0):
            u, info = solve_regularized(eps, u, None, grid, newton,
                                        phi_vals=lam * phi_vals)
        return u, info


def compute_c3(profile, phi: ContactAngle, grid: CurvilinearGrid):
    """Speed from the flux balance, with the (1-|Du|^2)^(-1/2) volume weight."""
    values = profile.values if isinstance(profile, GridFunction) else np.asarray(profile, float)
    phi_vals = phi.values_on(grid)
    from .geometry import gradient_fields

    ghost, _, _ = contact_ghost(values, grid, phi_vals)
    _, _, du2, _ = gradient_fields(values, grid, ghost)
    denominator = grid.domain_integral(np.ones_like(du2), du2=du2)
    numerator = grid.boundary_integral(phi_vals)
    return -numerator / denominator


def continuation(schedule: ContinuationSchedule, phi: ContactAngle,
                 grid: CurvilinearGrid, init=None) -> TranslatorSolution:
    """Drive eps -> 0, tracking the speed estimate; returns the profile and c3.

    Terminates early once successive speed estimates differ by < 1e-8.
    Raises ContinuationError (with the trace) if the estimates move apart
    three schedule steps in a row.
    """
    phi_vals = phi.values_on(grid)
    u = np.zeros((grid.n_radial, grid.n_angular)) if init is None else \
        (init.values if isinstance(init, GridFunction) else np.asarray(init, float)).copy()

    stats = []       # (eps, mean eps*u, min eps*u, max eps*u)
    newton_iters = []
    c3_prev = None
    eps_prev = None
    widening = 0
    gap_prev = None

    for eps in schedule.eps_values():
        if eps_prev is not None and c3_prev is not None:
            u = u + c3_prev * (1.0 / eps - 1.0 / eps_prev)
        u, info = _solve_with_homotopy(eps, u, phi_vals, grid, schedule.newton)
        newton_iters.append(info["iterations"])
        eu = eps * u
        c3_est = float(grid.mean(eu))
        stats.append((eps, c3_est, float(np.min(eu)), float(np.max(eu))))

        if c3_prev is not None:
            gap = abs(c3_est - c3_prev)
            if schedule.cauchy_tol > 0 and gap < schedule.cauchy_tol:
                eps_prev, c3_prev = eps, c3_est
                break
            if gap_prev is not None and gap > gap_prev:
                widening += 1
                if widening >= 3:
                    raise ContinuationError(
                        "speed estimates are not settling (non-Cauchy sequence)",
                        trace=stats)
            else:
                widening = 0
            gap_prev = gap
        eps_prev, c3_prev = eps, c3_est

    profile_values = u - grid.mean(u)
    profile = GridFunction(profile_values, grid)

    # speed: the estimate's own limit, Richardson-extrapolated (the gap
    # behaves like C * eps along a geometric schedule)
    if len(stats) >= 2:
        e1, m1 = stats[-2][0], stats[-2][1]
        e2, m2 = stats[-1][0], stats[-1][1]
        c3 = m2 + (m2 - m1) * e2 / (e1 - e2)
    else:
        c3 = stats[-1][1]
    eps_trace = [(e, max(abs(mx - c3), abs(mn - c3))) for e, _, mn, mx in stats]
    eps_trace_mean = [(e, abs(m - c3)) for e, m, _, _ in stats]

    # flux-balance quadrature cross-check; the gap is the discrete
    # integration-by-parts mismatch, O(h^2)
    c3_quadrature = compute_c3(profile, phi, grid)

    op = flow_operator(profile_values, grid, phi_vals)
    dnu, dtu, v_bd = boundary_gradient_data(profile_values, grid, phi_vals)
    residuals = {
        "interior_max": float(np.max(np.abs(op - c3))),
        "boundary_max": float(np.max(np.abs(dnu - phi_vals * v_bd))),
        "c3_quadrature": c3_quadrature,
        "c3_cross_check": abs(c3 - c3_quadrature),
    }
    return TranslatorSolution(profile=profile, c3=c3, eps_trace=eps_trace,
                              eps_trace_mean=eps_trace_mean, residuals=residuals,
                              grid_shape=(grid.n_radial, grid.n_angular),
                              newton_iterations=newton_iters)


def translate_solution(solution: TranslatorSolution, t: float) -> GridFunction:
    """The rigidly moving graph profile + c3 * t at time t."""
    return GridFunction(solution.profile.values + solution.c3 * t,
                        solution.profile.grid)
