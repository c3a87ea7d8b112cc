"""Time integration of the contact-angle flow u_t = g~^{ab} D_a D_b u.

Two schemes share the spatial operator from :mod:`slmcf.operators`:

- ``semi_implicit`` (default): backward-Euler step with the coefficients
  g~^{ab} and the nonlinear part of the boundary closure frozen at the
  current state.  Unconditionally stable for the frozen problem; the matrix
  is refreshed every ``refresh_interval`` accepted steps.  A translator orbit
  u(x) + c t is an exact fixed orbit of this scheme, so long-time speed
  estimates carry no time-discretization bias.
- ``explicit``: forward Euler under a CFL bound, kept for debugging and
  cross-checks at small sizes (the center rings make it severely stiff).

A step is rejected and the step size halved whenever the update would push
sup |Du|^2 above 1 - delta_space or break the boundary closure; persistent
rejections surface as StepSizeUnderflowError rather than being clamped.

Each accepted step records the series row
(t, sup|u_t|, sup|Du|^2, area-mean u_t, max|u_t - H v|, osc vs reference)
plus the energy pair E = int v - bdry int u phi and I = int u_t^2 / v, whose
per-step mismatch |dE - dt (I_k + I_{k+1})/2| is the energy-identity
residual used by the verification suite.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ScenarioError, SpacelikeViolationError, StepSizeUnderflowError
from .geometry import mean_curvature_field
from .grid import ContactAngle, CurvilinearGrid, GridFunction
from .operators import (contact_ghost, explicit_stable_dt, flow_operator,
                        linearized_affine)

_DT_FLOOR = 1e-14


@dataclasses.dataclass
class StepperConfig:
    scheme: str = "semi_implicit"
    dt: float | None = None           # default: diameter / (2 n_radial)
    cfl_number: float = 0.8
    tol_speed: float = 1e-7
    max_time: float = 10.0
    delta_space: float = 1e-3
    snapshot_interval: int = 50
    refresh_interval: int = 10
    dense_sample_times: tuple = ()
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.scheme not in ("semi_implicit", "explicit"):
            raise ScenarioError(f"unknown scheme '{self.scheme}'")
        if self.dt is not None and self.dt <= 0:
            raise ScenarioError("dt must be positive")
        if not (0.0 < self.delta_space <= 1e-2):
            raise ScenarioError("delta_space must lie in (0, 1e-2]")
        if self.max_time <= 0:
            raise ScenarioError("max_time must be positive")

    def initial_dt(self, grid: CurvilinearGrid) -> float:
        if self.dt is not None:
            return float(self.dt)
        diameter = 2.0 * grid.domain.inradius
        return diameter / (2.0 * grid.n_radial)


@dataclasses.dataclass
class FlowState:
    u: np.ndarray
    t: float
    u_t: np.ndarray
    sup_du2: float      # running max over the whole run
    sup_ut: float       # running max over the whole run
    H_field: np.ndarray
    step_count: int


@dataclasses.dataclass
class FlowRun:
    grid: CurvilinearGrid
    phi: ContactAngle
    cfg: StepperConfig
    state: FlowState
    converged: bool
    speed_estimate: float
    series: dict
    energy: dict
    snapshots: list
    dense: dict
    monitor_c0: float
    message: str

    @property
    def final_u(self) -> GridFunction:
        return GridFunction(self.state.u, self.grid)


def apply_contact_bc(u: GridFunction, phi: ContactAngle):
    """Ghost row realizing D_N u = phi sqrt((1 - (D_T u)^2)/(1 + phi^2)).

    Returns (ghost_row, d_tangent_u, d_normal_target); the ghost row extends
    the field one ring beyond the boundary so centered stencils satisfy the
    contact-angle condition exactly.
    """
    return contact_ghost(u.values, u.grid, phi.values_on(u.grid))


class _SemiImplicitStepper:
    def __init__(self, u, grid, phi_vals, dt, refresh_interval):
        self.grid = grid
        self.phi_vals = phi_vals
        self.dt = dt
        self.refresh_interval = max(1, int(refresh_interval))
        self.N = u.size
        self._ident = sp.identity(self.N, format="csc")
        self.refresh(u)

    def refresh(self, u):
        L, k, _ = linearized_affine(u, self.grid, self.phi_vals)
        self._L, self._k = L, k
        self._lu = splu((self._ident - self.dt * L).tocsc())
        self.steps_since_refresh = 0

    def set_dt(self, dt, u):
        self.dt = dt
        self.refresh(u)

    def candidate(self, u):
        rhs = u.ravel() + self.dt * self._k
        return self._lu.solve(rhs).reshape(u.shape)

    def after_accept(self, u_new):
        self.steps_since_refresh += 1
        if self.steps_since_refresh >= self.refresh_interval:
            self.refresh(u_new)


class _ExplicitStepper:
    def __init__(self, u, grid, phi_vals, dt, cfl):
        self.grid = grid
        self.phi_vals = phi_vals
        self.cfl = cfl
        q = flow_operator(u, grid, phi_vals, with_fields=True)
        self.dt = min(dt, explicit_stable_dt(q, grid, cfl))

    def set_dt(self, dt, u):
        self.dt = dt

    def candidate(self, u):
        q = flow_operator(u, self.grid, self.phi_vals, with_fields=True)
        dt_cfl = explicit_stable_dt(q, self.grid, self.cfl)
        if self.dt > dt_cfl:
            self.dt = dt_cfl
        return u + self.dt * q["op"]

    def after_accept(self, u_new):
        pass


def _evaluate(u, grid, phi_vals):
    """Operator evaluation with diagnostics; raises on space-like violations."""
    q = flow_operator(u, grid, phi_vals, with_fields=True)
    return q


def step(state: FlowState, cfg: StepperConfig, grid: CurvilinearGrid,
         phi: ContactAngle) -> FlowState:
    """Advance one accepted step from ``state`` (standalone convenience API)."""
    run = run_to_convergence(GridFunction(state.u, grid), phi, grid,
                             dataclasses.replace(cfg, max_steps=1,
                                                 max_time=state.t + 1e30,
                                                 tol_speed=0.0),
                             _resume_t=state.t, _resume_count=state.step_count)
    return run.state


def run_to_convergence(u0, phi: ContactAngle, grid: CurvilinearGrid,
                       cfg: StepperConfig, reference=None,
                       _resume_t=0.0, _resume_count=0) -> FlowRun:
    """Integrate until u_t deviates from its mean by less than tol_speed.

    reference: optional translator solution; the series column
    ``osc_vs_reference`` then records osc(u - (profile + c3 t)), otherwise
    osc(u).  Returns a FlowRun with the final state, the area-weighted mean
    of u_t as speed estimate, the diagnostic series, per-step energy data,
    periodic snapshots and any requested dense snapshot triplets.
    """
    u = (u0.values if isinstance(u0, GridFunction) else np.asarray(u0, dtype=float)).copy()
    phi_vals = phi.values_on(grid)
    dt = cfg.initial_dt(grid)

    if cfg.scheme == "semi_implicit":
        stepper = _SemiImplicitStepper(u, grid, phi_vals, dt, cfg.refresh_interval)
    else:
        stepper = _ExplicitStepper(u, grid, phi_vals, dt, cfg.cfl_number)

    series = {k: [] for k in ("t", "sup_ut", "sup_du2", "mean_ut",
                              "hv_residual", "osc_vs_reference")}
    energy = {"t": [], "E": [], "I": [], "residual": []}
    snapshots = []
    dense_targets = sorted(cfg.dense_sample_times)
    dense = {}
    pending_dense = None
    prev_state_for_dense = None

    def record(t, q, dt_step=None, prev_energy=None):
        u_t = q["op"]
        v = q["v"]
        H = mean_curvature_field(u, grid, q["ghost"])
        sup_ut = float(np.max(np.abs(u_t)))
        sup_du2 = float(np.max(q["du2"]))
        mean_ut = float(grid.mean(u_t))
        hv_res = float(np.max(np.abs(u_t - H * v)))
        if reference is not None:
            ref = reference.profile.values + reference.c3 * t
            diff = u - ref
        else:
            diff = u
        osc = float(np.max(diff) - np.min(diff))
        for key, val in zip(series, (t, sup_ut, sup_du2, mean_ut, hv_res, osc)):
            series[key].append(val)
        E = grid.domain_integral(v) - grid.boundary_integral(u[-1] * phi_vals)
        I = grid.domain_integral(u_t ** 2 / v)
        if prev_energy is None:
            res = 0.0
        else:
            E0, I0 = prev_energy
            res = (E - E0) - dt_step * 0.5 * (I + I0)
        energy["t"].append(t)
        energy["E"].append(E)
        energy["I"].append(I)
        energy["residual"].append(res)
        return u_t, sup_ut, sup_du2, mean_ut, E, I

    t = float(_resume_t)
    q = _evaluate(u, grid, phi_vals)
    u_t, sup_ut0, sup_du2_0, mean_ut, E, I = record(t, q)
    monitor_c0 = sup_ut0 ** 2
    run_sup_ut = sup_ut0
    run_sup_du2 = sup_du2_0
    snapshots.append((t, u.copy()))

    converged = False
    message = ""
    steps = 0
    rejects_in_a_row = 0

    dev = float(np.max(np.abs(u_t - mean_ut)))
    if dev < cfg.tol_speed and cfg.tol_speed > 0:
        converged = True
        message = "initial state already steady"

    while not converged and t < cfg.max_time and steps < cfg.max_steps:
        try:
            u_new = stepper.candidate(u)
            q_new = _evaluate(u_new, grid, phi_vals)
            accept = float(np.max(q_new["du2"])) <= 1.0 - cfg.delta_space
        except SpacelikeViolationError:
            accept = False
        if not accept:
            new_dt = stepper.dt * 0.5
            if new_dt < _DT_FLOOR:
                raise StepSizeUnderflowError(
                    f"time step underflow at t = {t:.6g} (blow-up or bad scenario)")
            stepper.set_dt(new_dt, u)
            rejects_in_a_row += 1
            continue
        rejects_in_a_row = 0

        dt_step = stepper.dt
        u = u_new
        t += dt_step
        steps += 1
        stepper.after_accept(u)

        u_t, sup_ut, sup_du2, mean_ut, E, I = record(
            t, q_new, dt_step=dt_step, prev_energy=(energy["E"][-1], energy["I"][-1]))
        run_sup_ut = max(run_sup_ut, sup_ut)
        run_sup_du2 = max(run_sup_du2, sup_du2)

        if steps % max(1, cfg.snapshot_interval) == 0:
            snapshots.append((t, u.copy()))

        # dense triplets (u_{k-1}, u_k, u_{k+1}) for the |Du|^2 evolution study
        if pending_dense is not None:
            tau, t0, u0_, t1, u1_ = pending_dense
            dense[tau] = ((t0, u0_), (t1, u1_), (t, u.copy()))
            pending_dense = None
        while dense_targets and t >= dense_targets[0] and pending_dense is None:
            tau = dense_targets.pop(0)
            if prev_state_for_dense is not None:
                pending_dense = (tau, prev_state_for_dense[0],
                                 prev_state_for_dense[1], t, u.copy())
        prev_state_for_dense = (t, u.copy())

        dev = float(np.max(np.abs(u_t - mean_ut)))
        if dev < cfg.tol_speed:
            converged = True
            message = f"speed field settled at t = {t:.6g} (dev = {dev:.3e})"

    if not converged and not message:
        message = (f"not converged by max_time = {cfg.max_time} "
                   f"(speed deviation {dev:.3e} > tol {cfg.tol_speed:.1e})")

    if snapshots[-1][0] != t:
        snapshots.append((t, u.copy()))

    q = _evaluate(u, grid, phi_vals)
    state = FlowState(u=u, t=t, u_t=q["op"], sup_du2=run_sup_du2,
                      sup_ut=run_sup_ut,
                      H_field=mean_curvature_field(u, grid, q["ghost"]),
                      step_count=_resume_count + steps)
    speed = float(grid.mean(q["op"]))
    return FlowRun(grid=grid, phi=phi, cfg=cfg, state=state, converged=converged,
                   speed_estimate=speed,
                   series={k: np.asarray(v) for k, v in series.items()},
                   energy={k: np.asarray(v) for k, v in energy.items()},
                   snapshots=snapshots, dense=dense, monitor_c0=monitor_c0,
                   message=message)


@dataclasses.dataclass
class PairRun:
    t: np.ndarray
    osc: np.ndarray
    max_abs: np.ndarray
    run_a: FlowRun
    run_b: FlowRun


def run_pair(u0a, u0b, phi: ContactAngle, grid: CurvilinearGrid,
             cfg: StepperConfig) -> PairRun:
    """Advance two initial data in lockstep (identical step sizes).

    Records osc(u_a - u_b) and max|u_a - u_b| at every shared step; both
    underlying runs are integrated with the same fixed-dt semi-implicit
    scheme so the difference series is sampled on one time grid.
    """
    ua = (u0a.values if isinstance(u0a, GridFunction) else np.asarray(u0a, float)).copy()
    ub = (u0b.values if isinstance(u0b, GridFunction) else np.asarray(u0b, float)).copy()
    phi_vals = phi.values_on(grid)
    dt = cfg.initial_dt(grid)
    sa = _SemiImplicitStepper(ua, grid, phi_vals, dt, cfg.refresh_interval)
    sb = _SemiImplicitStepper(ub, grid, phi_vals, dt, cfg.refresh_interval)

    ts, oscs, maxabs = [0.0], [], []
    diff = ua - ub
    oscs.append(float(np.max(diff) - np.min(diff)))
    maxabs.append(float(np.max(np.abs(diff))))

    t = 0.0
    qa = _evaluate(ua, grid, phi_vals)
    qb = _evaluate(ub, grid, phi_vals)
    while t < cfg.max_time:
        ca = sa.candidate(ua)
        cb = sb.candidate(ub)
        try:
            qa = _evaluate(ca, grid, phi_vals)
            qb = _evaluate(cb, grid, phi_vals)
            ok = (float(np.max(qa["du2"])) <= 1.0 - cfg.delta_space and
                  float(np.max(qb["du2"])) <= 1.0 - cfg.delta_space)
        except SpacelikeViolationError:
            ok = False
        if not ok:
            new_dt = sa.dt * 0.5
            if new_dt < _DT_FLOOR:
                raise StepSizeUnderflowError("time step underflow in pair run")
            sa.set_dt(new_dt, ua)
            sb.set_dt(new_dt, ub)
            continue
        ua, ub = ca, cb
        t += sa.dt
        sa.after_accept(ua)
        sb.after_accept(ub)
        diff = ua - ub
        ts.append(t)
        oscs.append(float(np.max(diff) - np.min(diff)))
        maxabs.append(float(np.max(np.abs(diff))))
        deva = float(np.max(np.abs(qa["op"] - grid.mean(qa["op"]))))
        devb = float(np.max(np.abs(qb["op"] - grid.mean(qb["op"]))))
        if deva < cfg.tol_speed and devb < cfg.tol_speed:
            break

    run_a = _wrap_pair_member(ua, t, qa, grid, phi, cfg)
    run_b = _wrap_pair_member(ub, t, qb, grid, phi, cfg)
    return PairRun(t=np.asarray(ts), osc=np.asarray(oscs),
                   max_abs=np.asarray(maxabs), run_a=run_a, run_b=run_b)


def _wrap_pair_member(u, t, q, grid, phi, cfg):
    state = FlowState(u=u, t=t, u_t=q["op"], sup_du2=float(np.max(q["du2"])),
                      sup_ut=float(np.max(np.abs(q["op"]))),
                      H_field=mean_curvature_field(u, grid, q["ghost"]),
                      step_count=-1)
    return FlowRun(grid=grid, phi=phi, cfg=cfg, state=state, converged=True,
                   speed_estimate=float(grid.mean(q["op"])),
                   series={}, energy={}, snapshots=[(t, u.copy())], dense={},
                   monitor_c0=np.nan, message="pair member")
