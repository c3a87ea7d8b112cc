"""Boundary-fitted curvilinear grid and nodal scalar fields.

Computational coordinates (rho, s) live on [0, 1] x [0, 2pi): rho scales the
star-shaped map toward the boundary curve, s is the boundary parameter.
Radial nodes sit at rho_i = (i + 1/2) h with h = 1/(n_radial - 1/2), so the
first ring is offset h/2 from the center while the outermost ring lies
exactly on the boundary.  The angular direction is uniform and periodic; the
number of angular nodes must be even so that the ray (-rho, s) coincides
with (rho, s + pi) when stencils cross the center.

The ambient metric is pulled back onto (rho, s) through the mapping x(rho, s),
giving nodal arrays for sigma~, its inverse, sqrt(det), the Christoffel
symbols of the pulled-back metric, and the Gaussian curvature.  All PDE
stencils downstream act on the uniform computational grid with these
coefficients, which keeps every covariant operation a plain centered
difference plus analytic data.

Quadrature: interior nodes own cells [rho_i - h/2, rho_i + h/2] x s-cell with
midpoint weights sqrt(det sigma~) * h * hs; boundary nodes own half cells.
Boundary integrals use the periodic trapezoid rule (spectrally accurate).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .domain import ConvexDomain
from .errors import GridError, ScenarioError

_SPACELIKE_EPS = 1e-10  # operations reject |Du|^2 >= 1 - this margin


class CurvilinearGrid:
    """Structured grid over a convex domain with pulled-back metric data."""

    def __init__(self, domain: ConvexDomain, n_radial: int, n_angular: int):
        if n_radial < 8:
            raise GridError("n_radial must be at least 8")
        if n_angular < 16:
            raise GridError("n_angular must be at least 16")
        if n_angular % 2 != 0:
            raise GridError("n_angular must be even (cross-center stencils)")

        self.domain = domain
        self.metric = domain.metric
        self.n_radial = int(n_radial)
        self.n_angular = int(n_angular)
        self.hr = 1.0 / (n_radial - 0.5)
        self.hs = 2.0 * np.pi / n_angular
        self.rho = (np.arange(n_radial) + 0.5) * self.hr
        self.rho[-1] = 1.0  # exact by construction; pin against roundoff
        self.s = np.arange(n_angular) * self.hs
        self.anti = (np.arange(n_angular) + n_angular // 2) % n_angular

        R, S = np.meshgrid(self.rho, self.s, indexing="ij")
        curve = domain.curve
        gam = curve.gamma(S)
        dgam = curve.dgamma(S)
        d2gam = curve.d2gamma(S)

        if curve.kind == "chart_circle":
            X = np.stack([R * curve.r0, S], axis=-1)
            J = np.zeros(X.shape + (2,))
            J[..., 0, 0] = curve.r0
            J[..., 1, 1] = 1.0
            x_rs = np.zeros_like(X)
            x_ss = np.zeros_like(X)
        else:
            c = curve.center
            X = c + R[..., None] * (gam - c)
            J = np.stack([gam - c, R[..., None] * dgam], axis=-1)  # J[..., i, a]
            x_rs = dgam
            x_ss = R[..., None] * d2gam

        jac_det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(jac_det <= 0.0):
            i, j = np.unravel_index(int(np.argmin(jac_det)), jac_det.shape)
            raise GridError(
                f"degenerate grid mapping at node ({i}, {j}): det J = {jac_det[i, j]:.3e}"
            )

        self.metric.check_chart(X.reshape(-1, 2))
        sig = self.metric.sigma(X)
        gam_chart = self.metric.christoffel(X)

        self.X = X
        self.jac = J
        self.jac_det = jac_det
        self.jac_inv = _inv2(J)
        self.sigma_t = np.einsum("...ia,...ij,...jb->...ab", J, sig, J)
        self.sigma_t_inv = _inv2(self.sigma_t)
        det = self.sigma_t[..., 0, 0] * self.sigma_t[..., 1, 1] - self.sigma_t[..., 0, 1] ** 2
        self.sqrt_det = np.sqrt(det)

        # Gamma~^c_{ab} = B^c_k ( x^k_{,ab} + Gamma^k_{ij} J^i_a J^j_b )
        d2x = np.zeros(X.shape[:-1] + (2, 2, 2))  # index [..., k, a, b]
        d2x[..., :, 0, 1] = x_rs
        d2x[..., :, 1, 0] = x_rs
        d2x[..., :, 1, 1] = x_ss
        inner = d2x + np.einsum("...kij,...ia,...jb->...kab", gam_chart, J, J)
        self.gamma_t = np.einsum("...ck,...kab->...cab", self.jac_inv, inner)
        self.gauss = self.metric.gauss_curvature(X)

        # quadrature weights: midpoint cells, half cell on the boundary ring
        drho = np.full(self.n_radial, self.hr)
        drho[-1] = 0.5 * self.hr
        self.weights = self.sqrt_det * drho[:, None] * self.hs
        self.area = float(np.sum(self.weights))

        # boundary ring data (rho = 1)
        self.sqrt_sigma_ss_bd = np.sqrt(self.sigma_t[-1, :, 1, 1])
        self.boundary_weights = self.sqrt_sigma_ss_bd * self.hs
        self.perimeter = float(np.sum(self.boundary_weights))
        # physical radial spacing, used for h^2-scaled tolerances
        self.h = float(np.max(np.sqrt(self.sigma_t[..., 0, 0])) * self.hr)

    # -- integrals ----------------------------------------------------------

    def domain_integral(self, values, du2=None):
        """Integral over the domain; optional weight (1 - |Du|^2)^(-1/2)."""
        values = np.asarray(values)
        if du2 is None:
            return float(np.sum(self.weights * values))
        du2 = np.asarray(du2)
        if np.any(du2 >= 1.0 - _SPACELIKE_EPS):
            from .errors import SpacelikeViolationError

            idx = np.unravel_index(int(np.argmax(du2)), du2.shape)
            raise SpacelikeViolationError(idx, float(du2[idx]))
        return float(np.sum(self.weights * values / np.sqrt(1.0 - du2)))

    def boundary_integral(self, boundary_values):
        """Periodic trapezoid rule along the boundary ring."""
        boundary_values = np.asarray(boundary_values)
        if boundary_values.shape != (self.n_angular,):
            raise ValueError("boundary_integral expects one value per boundary node")
        return float(np.sum(self.boundary_weights * boundary_values))

    def mean(self, values):
        return self.domain_integral(values) / self.area

    # -- IO helpers -----------------------------------------------------------

    def node_table(self):
        """Rows (i, j, rho, s, x1, x2, weight) for CSV dumps."""
        rows = []
        for i in range(self.n_radial):
            for j in range(self.n_angular):
                rows.append((i, j, self.rho[i], self.s[j],
                             self.X[i, j, 0], self.X[i, j, 1], self.weights[i, j]))
        return rows


def _inv2(M):
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1] / det
    out[..., 1, 1] = M[..., 0, 0] / det
    out[..., 0, 1] = -M[..., 0, 1] / det
    out[..., 1, 0] = -M[..., 1, 0] / det
    return out


def build_grid(domain: ConvexDomain, n_radial: int, n_angular: int) -> CurvilinearGrid:
    return CurvilinearGrid(domain, n_radial, n_angular)


@dataclasses.dataclass
class GridFunction:
    """Scalar nodal field on a curvilinear grid; arithmetic is nodewise."""

    values: np.ndarray
    grid: CurvilinearGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n_radial, self.grid.n_angular)
        if self.values.shape != expected:
            raise ValueError(f"GridFunction shape {self.values.shape} != grid {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction values must be finite")

    @classmethod
    def constant(cls, grid, value=0.0):
        return cls(np.full((grid.n_radial, grid.n_angular), float(value)), grid)

    @classmethod
    def from_chart(cls, grid, fn):
        """Sample a chart-coordinate callable fn(x1, x2)."""
        return cls(fn(grid.X[..., 0], grid.X[..., 1]), grid)

    @classmethod
    def from_comp(cls, grid, fn):
        """Sample a computational-coordinate callable fn(rho, s)."""
        R, S = np.meshgrid(grid.rho, grid.s, indexing="ij")
        return cls(fn(R, S), grid)

    def copy(self):
        return GridFunction(self.values.copy(), self.grid)

    def mean(self):
        return self.grid.mean(self.values)

    def __add__(self, other):
        other = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.values + other, self.grid)

    def __sub__(self, other):
        other = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.values - other, self.grid)

    def __mul__(self, scalar):
        return GridFunction(self.values * scalar, self.grid)

    __rmul__ = __mul__


class ContactAngle:
    """Prescribed contact-angle function phi on the boundary.

    Built from a spec dict: {"kind": "constant", "value": c} or
    {"kind": "fourier", "a0": ..., "cos": [...], "sin": [...]} or
    {"kind": "table", "values": [...]} (one value per angular node).
    """

    def __init__(self, spec: dict, domain: ConvexDomain, n_angular: int | None = None):
        self.spec = dict(spec)
        self.domain = domain
        kind = spec.get("kind")
        if kind == "constant":
            c = float(spec["value"])
            self._phi = lambda s: np.full_like(np.asarray(s, dtype=float), c)
            self._dphi = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        elif kind == "fourier":
            a0 = float(spec.get("a0", 0.0))
            ac = np.asarray(spec.get("cos", []), dtype=float)
            asn = np.asarray(spec.get("sin", []), dtype=float)

            def _phi(s, a0=a0, ac=ac, asn=asn):
                s = np.asarray(s, dtype=float)
                out = np.full_like(s, a0)
                for k, c in enumerate(ac, start=1):
                    out = out + c * np.cos(k * s)
                for k, c in enumerate(asn, start=1):
                    out = out + c * np.sin(k * s)
                return out

            def _dphi(s, ac=ac, asn=asn):
                s = np.asarray(s, dtype=float)
                out = np.zeros_like(s)
                for k, c in enumerate(ac, start=1):
                    out = out - c * k * np.sin(k * s)
                for k, c in enumerate(asn, start=1):
                    out = out + c * k * np.cos(k * s)
                return out

            self._phi, self._dphi = _phi, _dphi
        elif kind == "table":
            vals = np.asarray(spec["values"], dtype=float)
            if n_angular is not None and len(vals) != n_angular:
                raise ScenarioError(
                    f"phi table length {len(vals)} does not match n_angular {n_angular}"
                )
            n = len(vals)
            coef = np.fft.rfft(vals)
            kvec = np.arange(len(coef))

            def _phi(s, coef=coef, n=n):
                s = np.asarray(s, dtype=float)
                modes = coef[None, :] * np.exp(1j * np.outer(s, kvec))
                scale = np.ones(len(coef))
                scale[1:] = 2.0
                if n % 2 == 0:
                    scale[-1] = 1.0
                return (modes.real @ scale / n).reshape(s.shape)

            def _dphi(s, coef=coef, n=n):
                s = np.asarray(s, dtype=float)
                modes = (1j * kvec)[None, :] * coef[None, :] * np.exp(1j * np.outer(s, kvec))
                scale = np.ones(len(coef))
                scale[1:] = 2.0
                if n % 2 == 0:
                    scale[-1] = 1.0
                return (modes.real @ scale / n).reshape(s.shape)

            self._phi, self._dphi = _phi, _dphi
        else:
            raise ScenarioError(f"unknown phi kind '{kind}'")

        sdense = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        vals = self._phi(sdense)
        if not np.all(np.isfinite(vals)):
            raise ScenarioError("phi evaluates to non-finite values")
        self.phi0 = float(np.min(vals))
        self.phi1 = float(np.max(vals))
        _, _, w = domain.frame(sdense)
        self.phi2 = float(np.max(np.abs(self._dphi(sdense) / w)))  # max |D_T phi|
        self.boundary_integral = float(np.sum(vals * w) * (2.0 * np.pi / len(sdense)))

    def __call__(self, s):
        return self._phi(s)

    def d_tangent(self, s):
        """D_T phi at boundary parameters s."""
        _, _, w = self.domain.frame(np.asarray(s, dtype=float))
        return self._dphi(s) / w

    def values_on(self, grid: CurvilinearGrid):
        return self._phi(grid.s)
