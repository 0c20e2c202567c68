"""Maps between physical, Riemann, and exponentially rescaled field variables.

A congested segment carries two characteristic families: the driver-property
perturbation travels downstream at v*, the velocity perturbation upstream at
gamma*p* - v*. The rescaling exp(x/(tau v*)) absorbs the relaxation decay of
the first family so that both transports become source-free apart from the
cross coupling c(x).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RepresentationError
from .model import NetworkParams, SegmentParams, SteadyState

PHYSICAL = "physical"
RIEMANN = "riemann"
SCALED = "scaled"


@dataclass
class FieldState:
    grid: np.ndarray
    a: np.ndarray  # rho | w-tilde | w-bar
    b: np.ndarray  # v | v-tilde
    rep: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if not (self.grid.shape == self.a.shape == self.b.shape):
            raise DomainError("grid and value arrays must have identical shape")
        if self.grid.size < 2:
            raise DomainError("a field state needs at least two grid points")
        if self.rep not in (PHYSICAL, RIEMANN, SCALED):
            raise RepresentationError(f"unknown representation {self.rep!r}")

    def copy(self) -> "FieldState":
        return FieldState(self.grid.copy(), self.a.copy(), self.b.copy(), self.rep)


def _require(state: FieldState, rep: str):
    if state.rep != rep:
        raise RepresentationError(f"expected {rep} state, got {state.rep}")


def to_riemann(phys: FieldState, ss: SteadyState, params: SegmentParams) -> FieldState:
    """Characteristic coordinates about the steady state.

    w-tilde = (gamma p*/q*) (rho v - q*) + (1/r) (v - v*),  v-tilde = v - v*.
    """
    _require(phys, PHYSICAL)
    rho, v = phys.a, phys.b
    vt = v - ss.v_star
    wt = (params.gamma * ss.p_star / ss.q_star) * (rho * v - ss.q_star) + vt / ss.r
    return FieldState(phys.grid.copy(), wt, vt, RIEMANN)


def from_riemann(riem: FieldState, ss: SteadyState, params: SegmentParams) -> FieldState:
    """Exact affine inverse of to_riemann."""
    _require(riem, RIEMANN)
    wt, vt = riem.a, riem.b
    v = ss.v_star + vt
    if np.any(v <= 0):
        raise DomainError("recovered velocity is not positive")
    flux = ss.q_star + (ss.q_star / (params.gamma * ss.p_star)) * (wt - vt / ss.r)
    rho = flux / v
    if np.any(rho <= 0) or np.any(rho >= params.rho_max):
        raise DomainError("recovered density left the open interval (0, rho_max)")
    return FieldState(riem.grid.copy(), rho, v, PHYSICAL)


def scale_w(riem: FieldState, ss: SteadyState, params: SegmentParams) -> FieldState:
    """w-bar(x) = exp(x/(tau v*)) w-tilde(x); the v component is untouched."""
    _require(riem, RIEMANN)
    factor = np.exp(riem.grid / (params.tau * ss.v_star))
    return FieldState(riem.grid.copy(), factor * riem.a, riem.b.copy(), SCALED)


def unscale_w(scaled: FieldState, ss: SteadyState, params: SegmentParams) -> FieldState:
    _require(scaled, SCALED)
    factor = np.exp(-scaled.grid / (params.tau * ss.v_star))
    return FieldState(scaled.grid.copy(), factor * scaled.a, scaled.b.copy(), RIEMANN)


def coupling_coefficient(x, ss: SteadyState, params: SegmentParams):
    """Cross-coupling rate c(x) = -(1/tau) exp(-x/(tau v*)), strictly negative."""
    x = np.asarray(x, dtype=float)
    lo, hi = params.interval
    if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
        raise DomainError(f"position outside segment interval [{lo}, {hi}]")
    out = -(1.0 / params.tau) * np.exp(-x / (params.tau * ss.v_star))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BoundaryRows:
    """Reflection/transmission gains of the linearized boundary conditions.

    In rescaled variables the four boundary relations read
        outlet   : v1(L)  = g_outlet * w1(L)
        junction : w1(0)  = g_junction_w * w2(0)
        junction : v2(0)  = g_t * v1(0) + g_a * w2(0) + g_control * U0
        inlet    : w2(-L) = g_inlet * v2(-L)
    """
    g_outlet: float
    g_junction_w: float
    g_inlet: float
    g_t: float
    g_a: float
    g_control: float
    r1: float
    r2: float
    e1: float  # exp(-L/(tau1 v1*))
    e2: float  # exp(-L/(tau2 v2*))


def boundary_rows(net: NetworkParams) -> BoundaryRows:
    ss1, ss2 = net.ss1, net.ss2
    r1, r2 = ss1.r, ss2.r
    if r1 == 1.0:
        raise DomainError("junction row degenerates at r1 = 1")
    e1 = float(np.exp(-net.seg1.length / (net.seg1.tau * ss1.v_star)))
    e2 = float(np.exp(-net.seg2.length / (net.seg2.tau * ss2.v_star)))
    return BoundaryRows(
        g_outlet=r1 * e1,
        g_junction_w=1.0,
        g_inlet=e2 / r2,
        g_t=r2 / r1,
        g_a=(r1 - r2) / (1.0 - r1),
        g_control=ss2.v_star * (1.0 - r2) / ss2.q_star,
        r1=r1,
        r2=r2,
        e1=e1,
        e2=e2,
    )
