"""Independent radial ODE oracles for rotationally symmetric scenarios.

For a constant contact angle on a rotationally symmetric domain (a disk in
the flat chart, or a chart circle r < r0 in a radial metric dr^2 + f^2 dth^2)
the translator profile depends on r alone and the PDE collapses to

    u'' = (1 - u'^2) (c - (f'/f) u'),    u'(0) = 0,
    u'(r0) = -phi / sqrt(1 + phi^2)      (contact angle at the boundary),

with c the translation speed; the regularized family replaces c by eps * u.
Both are solved here by shooting with a high-order adaptive integrator,
entirely independent of the two-dimensional grid discretization.  These
routines provide the reference values for the acceptance experiments.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

_R_START = 1e-8


@dataclasses.dataclass
class RadialOracle:
    c3: float
    r0: float
    profile: callable       # u(r), zero area mean
    slope: callable          # u'(r)
    mean_offset: float


def _f_ratio(metric):
    """f'/f for the metric's radial chart; the flat chart uses f = r."""
    if metric is None or getattr(metric, "chart", "cartesian") == "cartesian":
        return (lambda r: 1.0 / r), (lambda r: r)
    return (lambda r: metric.fp(r) / metric.f(r)), metric.f


def _shoot_slope(c, r0, fratio):
    def rhs(r, y):
        p = y[0]
        return [(1.0 - p * p) * (c - fratio(r) * p)]
    sol = solve_ivp(rhs, [_R_START, r0], [c * _R_START / 2.0],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def translator_oracle(phi_const, r0, metric=None) -> RadialOracle:
    """Shooting solution of the radial translator problem.

    phi_const: constant contact angle; r0: boundary radius; metric: a
    catalog metric with a radial chart, or None/flat for the flat disk.
    """
    fratio, f = _f_ratio(metric)
    target = -phi_const / np.sqrt(1.0 + phi_const ** 2)

    if phi_const == 0.0:
        return RadialOracle(c3=0.0, r0=r0, profile=lambda r: np.zeros_like(np.asarray(r, float)),
                            slope=lambda r: np.zeros_like(np.asarray(r, float)), mean_offset=0.0)

    def g(c):
        return _shoot_slope(c, r0, fratio) - target

    # linearized estimate of the speed from the flux balance
    length = 2.0 * np.pi * f(r0)
    area = 2.0 * np.pi * quad(f, _R_START, r0, limit=200)[0]
    c_lin = -phi_const * length / area
    lo, hi = -4.0 * abs(c_lin) - 0.5, 4.0 * abs(c_lin) + 0.5
    while g(lo) * g(hi) > 0:
        lo *= 2.0
        hi *= 2.0
        if abs(lo) > 1e3:
            raise RuntimeError("translator oracle: bracketing failed")
    c3 = brentq(g, lo, hi, xtol=1e-14)

    def rhs(r, y):
        u, p = y
        return [p, (1.0 - p * p) * (c3 - fratio(r) * p)]

    sol = solve_ivp(rhs, [_R_START, r0], [0.0, c3 * _R_START / 2.0],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    mean = (quad(lambda r: sol.sol(r)[0] * f(r), _R_START, r0, limit=200)[0]
            / quad(f, _R_START, r0, limit=200)[0])

    def profile(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = sol.sol(np.clip(r.ravel(), _R_START, r0))[0].reshape(r.shape) - mean
        return out if out.size > 1 else float(out.flat[0])

    def slope(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = sol.sol(np.clip(r.ravel(), _R_START, r0))[1].reshape(r.shape)
        return out if out.size > 1 else float(out.flat[0])

    return RadialOracle(c3=c3, r0=r0, profile=profile, slope=slope, mean_offset=mean)


def oracle_c3_from_flux(oracle: RadialOracle, phi_const, metric=None):
    """Cross-check: speed from the flux balance on the oracle profile."""
    fratio, f = _f_ratio(metric)
    num = phi_const * 2.0 * np.pi * f(oracle.r0)
    den = 2.0 * np.pi * quad(
        lambda r: f(r) / np.sqrt(1.0 - np.minimum(oracle.slope(r) ** 2, 1.0 - 1e-15)),
        _R_START, oracle.r0, limit=200)[0]
    return -num / den


@dataclasses.dataclass
class RegularizedOracle:
    eps: float
    r0: float
    u: callable
    slope: callable
    mean_eps_u: float


def regularized_oracle(eps, phi_const, r0, metric=None) -> RegularizedOracle:
    """Shooting solution of the regularized radial problem (zeroth-order term eps*u)."""
    fratio, f = _f_ratio(metric)
    target = -phi_const / np.sqrt(1.0 + phi_const ** 2)

    def solve(a):
        def rhs(r, y):
            u, p = y
            return [p, (1.0 - p * p) * (eps * u - fratio(r) * p)]
        return solve_ivp(rhs, [_R_START, r0],
                         [a * (1.0 + eps * _R_START ** 2 / 4.0), eps * a * _R_START / 2.0],
                         method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)

    def g(a):
        return solve(a).y[1, -1] - target

    guess = translator_oracle(phi_const, r0, metric).c3 / eps if phi_const != 0 else 0.0
    lo, hi = guess - max(2.0, abs(guess)), guess + max(2.0, abs(guess))
    while g(lo) * g(hi) > 0:
        span = hi - lo
        lo -= span
        hi += span
        if span > 1e8:
            raise RuntimeError("regularized oracle: bracketing failed")
    a = brentq(g, lo, hi, xtol=1e-13 * max(1.0, abs(guess)))
    sol = solve(a)
    mean_eu = eps * (quad(lambda r: sol.sol(r)[0] * f(r), _R_START, r0, limit=200)[0]
                     / quad(f, _R_START, r0, limit=200)[0])

    def u_of_r(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = sol.sol(np.clip(r.ravel(), _R_START, r0))[0].reshape(r.shape)
        return out if out.size > 1 else float(out.flat[0])

    def slope(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = sol.sol(np.clip(r.ravel(), _R_START, r0))[1].reshape(r.shape)
        return out if out.size > 1 else float(out.flat[0])

    return RegularizedOracle(eps=eps, r0=r0, u=u_of_r, slope=slope, mean_eps_u=mean_eu)
