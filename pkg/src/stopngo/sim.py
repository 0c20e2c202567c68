"""Time-domain simulation of the two-segment network.

Two integrators share the grid and recording conventions: an upwind scheme
for the rescaled linear dynamics and a first-order finite-volume scheme for
the full nonlinear model. Both segments use N+1 nodes with spacing h = L/N;
the junction is the shared node x = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import TargetState, backstepping_transform, control_input
from .errors import DomainError, InfeasibleError, SimulationError
from .kernels import KernelTable
from .model import (
    NetworkParams,
    congested_flux_root,
    equilibrium_velocity,
    inverse_pressure,
    pressure,
)
from .riemann import (
    PHYSICAL,
    SCALED,
    FieldState,
    boundary_rows,
    coupling_coefficient,
    scale_w,
    to_riemann,
    unscale_w,
)

RHO_FLOOR = 1e-6


@dataclass(frozen=True)
class ICSpec:
    """Sinusoid initial data: rho = rho*(1 + eps sin(2 pi k x/L + phase))."""

    eps: float = 0.05
    k1: int = 1
    k2: int = 1
    phase1: float = 0.0
    phase2: float = 0.0

    def __post_init__(self):
        if self.eps < 0.0:
            raise DomainError(f"amplitude must be nonnegative, got {self.eps}")


@dataclass(frozen=True)
class SimConfig:
    t_final: float
    N: int = 256
    cfl: float = 0.9
    loop_mode: str = "closed"
    model: str = "nonlinear"
    ic: ICSpec = field(default_factory=ICSpec)
    record_every: int = 8

    def __post_init__(self):
        if self.N < 32:
            raise DomainError(f"N must be at least 32, got {self.N}")
        if not 0.0 < self.cfl <= 0.95:
            raise DomainError(f"cfl must lie in (0, 0.95], got {self.cfl}")
        if self.t_final <= 0.0:
            raise DomainError(f"t_final must be positive, got {self.t_final}")
        if self.loop_mode not in ("open", "closed"):
            raise DomainError(f"unknown loop_mode {self.loop_mode!r}")
        if self.model not in ("linear", "nonlinear"):
            raise DomainError(f"unknown model {self.model!r}")
        if self.record_every < 1:
            raise DomainError("record_every must be a positive integer")


@dataclass
class SimRecord:
    """Recorded trajectory; both representations are stored per instant."""

    times: np.ndarray
    grid1: np.ndarray
    grid2: np.ndarray
    rho1: np.ndarray
    v1: np.ndarray
    rho2: np.ndarray
    v2: np.ndarray
    wbar1: np.ndarray
    vtil1: np.ndarray
    wbar2: np.ndarray
    vtil2: np.ndarray
    u0: np.ndarray
    norm1: np.ndarray
    norm2: np.ndarray
    linf1: np.ndarray
    linf2: np.ndarray
    window: float
    n_steps: int
    target: list[TargetState] | None = None
    trace_times: np.ndarray | None = None
    trace_beta1: np.ndarray | None = None
    trace_beta2: np.ndarray | None = None
    trace_u0: np.ndarray | None = None
    mass_err: float | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("recorded times must be strictly increasing")
        if self.norm1.shape != self.times.shape or self.norm2.shape != self.times.shape:
            raise DomainError("norm history length does not match times")


@dataclass
class NormHistory:
    times: np.ndarray
    seg1: np.ndarray
    seg2: np.ndarray
    total: np.ndarray
    window: float
    rate: float | None
    status: str


def initial_condition(ic: ICSpec, net: NetworkParams, N: int):
    """On-equilibrium sinusoid perturbation (v = V(rho) pointwise)."""
    if ic.eps >= 0.5:
        raise DomainError(f"amplitude must be below 0.5, got {ic.eps}")
    L = net.seg1.length
    out = []
    for params, ss, k, phase in (
        (net.seg1, net.ss1, ic.k1, ic.phase1),
        (net.seg2, net.ss2, ic.k2, ic.phase2),
    ):
        lo, hi = params.interval
        x = np.linspace(lo, hi, N + 1)
        rho = ss.rho_star * (1.0 + ic.eps * np.sin(2.0 * np.pi * k * x / L + phase))
        if np.any(rho <= 0.0) or np.any(rho >= params.rho_max):
            raise DomainError("initial density leaves (0, rho_max)")
        out.append(FieldState(x, rho, equilibrium_velocity(rho, params), PHYSICAL))
    return out[0], out[1]


def _l2(grid, a, b) -> float:
    return float(np.sqrt(np.trapezoid(a * a + b * b, grid)))


def _trap_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


class _Recorder:
    def __init__(self, net, x1, x2, tables):
        self.net = net
        self.x1, self.x2 = x1, x2
        self.tables = tables
        self.times, self.u0 = [], []
        self.phys = {k: [] for k in ("rho1", "v1", "rho2", "v2")}
        self.scal = {k: [] for k in ("wbar1", "vtil1", "wbar2", "vtil2")}
        self.norm1, self.norm2, self.linf1, self.linf2 = [], [], [], []
        self.target = [] if tables is not None else None

    def push(self, t, u0, phys1, phys2, scaled1, scaled2):
        net = self.net
        self.times.append(t)
        self.u0.append(u0)
        self.phys["rho1"].append(phys1.a.copy())
        self.phys["v1"].append(phys1.b.copy())
        self.phys["rho2"].append(phys2.a.copy())
        self.phys["v2"].append(phys2.b.copy())
        self.scal["wbar1"].append(scaled1.a.copy())
        self.scal["vtil1"].append(scaled1.b.copy())
        self.scal["wbar2"].append(scaled2.a.copy())
        self.scal["vtil2"].append(scaled2.b.copy())
        self.norm1.append(_l2(self.x1, scaled1.a, scaled1.b))
        self.norm2.append(_l2(self.x2, scaled2.a, scaled2.b))
        for dev, phys, ss in (
            (self.linf1, phys1, net.ss1),
            (self.linf2, phys2, net.ss2),
        ):
            dev.append(
                max(
                    float(np.max(np.abs(phys.a - ss.rho_star))) / ss.rho_star,
                    float(np.max(np.abs(phys.b - ss.v_star))) / ss.v_star,
                )
            )
        if self.target is not None:
            self.target.append(
                backstepping_transform(
                    scaled1, scaled2, self.tables[0], self.tables[1], net
                )
            )

    def finish(self, window, n_steps, **extra) -> SimRecord:
        return SimRecord(
            times=np.asarray(self.times),
            grid1=self.x1,
            grid2=self.x2,
            rho1=np.asarray(self.phys["rho1"]),
            v1=np.asarray(self.phys["v1"]),
            rho2=np.asarray(self.phys["rho2"]),
            v2=np.asarray(self.phys["v2"]),
            wbar1=np.asarray(self.scal["wbar1"]),
            vtil1=np.asarray(self.scal["vtil1"]),
            wbar2=np.asarray(self.scal["wbar2"]),
            vtil2=np.asarray(self.scal["vtil2"]),
            u0=np.asarray(self.u0),
            norm1=np.asarray(self.norm1),
            norm2=np.asarray(self.norm2),
            linf1=np.asarray(self.linf1),
            linf2=np.asarray(self.linf2),
            window=window,
            n_steps=n_steps,
            target=self.target,
            **extra,
        )


def _affine_physical(scaled: FieldState, ss, params) -> FieldState:
    # Diagnostic reconstruction for linear snapshots. The linearized state is
    # free to leave the box (0, rho_max) x (0, v_max) transiently, so this
    # applies the affine inverse without the range guard of from_riemann.
    til = unscale_w(scaled, ss, params)
    v = ss.v_star + til.b
    flux = ss.q_star + ss.q_star / (params.gamma * ss.p_star) * (til.a - til.b / ss.r)
    return FieldState(scaled.grid.copy(), flux / v, v, PHYSICAL)


def _check_tables(tables, x1, x2):
    t1, t2 = tables
    if t1.segment_id != 1 or t2.segment_id != 2:
        raise DomainError("tables must be (segment 1, segment 2)")
    if t1.M + 1 != x1.size or not np.allclose(t1.x, x1) or not np.allclose(t2.x, x2):
        raise DomainError("kernel table grid does not match the simulation grid")


def run_linear(
    cfg: SimConfig,
    net: NetworkParams,
    tables: tuple[KernelTable, KernelTable] | None = None,
    coupling1=None,
    coupling2=None,
) -> SimRecord:
    """Upwind integration of the rescaled linear dynamics.

    Transport speeds are +v_i* for w-bar and -(gamma_i p_i* - v_i*) for
    v-tilde, with the cross source c_i(x) w-bar_i in the v-tilde equations.
    The closed loop solves the junction row together with the feedback law
    each step, so the target-system junction relation holds exactly.
    """
    closed = cfg.loop_mode == "closed"
    if closed and tables is None:
        raise DomainError("closed-loop linear run requires kernel tables")
    ss1, ss2 = net.ss1, net.ss2
    seg1, seg2 = net.seg1, net.seg2
    N = cfg.N
    L = seg1.length
    h = L / N
    x1 = np.linspace(0.0, L, N + 1)
    x2 = np.linspace(-L, 0.0, N + 1)
    if tables is not None:
        _check_tables(tables, x1, x2)

    phys1, phys2 = initial_condition(cfg.ic, net, N)
    s1 = scale_w(to_riemann(phys1, ss1, seg1), ss1, seg1)
    s2 = scale_w(to_riemann(phys2, ss2, seg2), ss2, seg2)
    w1, v1 = s1.a.copy(), s1.b.copy()
    w2, v2 = s2.a.copy(), s2.b.copy()

    c1 = np.broadcast_to(
        np.asarray(
            coupling1(x1) if coupling1 else coupling_coefficient(x1, ss1, seg1), float
        ),
        x1.shape,
    )
    c2 = np.broadcast_to(
        np.asarray(
            coupling2(x2) if coupling2 else coupling_coefficient(x2, ss2, seg2), float
        ),
        x2.shape,
    )
    rows = boundary_rows(net)
    speeds = (ss1.lambda_w, ss1.lambda_v, ss2.lambda_w, ss2.lambda_v)
    dt0 = cfg.cfl * h / max(speeds)

    if tables is not None:
        tw = _trap_weights(N + 1, h)
        k1w0 = tables[0].Kvw[0, :] * tw
        k1v0 = tables[0].Kvv[0, :] * tw
        k2wN = tables[1].Kvw[N, :] * tw
        k2vN = tables[1].Kvv[N, :] * tw
        # the junction row contains v2[N] inside its own quadrature; solve for it
        denom = 1.0 - k2vN[N]
        trace_t, trace_b1, trace_b2, trace_u = [], [], [], []
    else:
        trace_t = None

    rec = _Recorder(net, x1, x2, tables)

    def snapshot(t, u0):
        sc1 = FieldState(x1, w1, v1, SCALED)
        sc2 = FieldState(x2, w2, v2, SCALED)
        p1 = _affine_physical(sc1, ss1, seg1)
        p2 = _affine_physical(sc2, ss2, seg2)
        rec.push(t, u0, p1, p2, sc1, sc2)

    snapshot(0.0, 0.0)
    t, step, u0 = 0.0, 0, 0.0
    while t < cfg.t_final - 1e-9 * dt0:
        dt = min(dt0, cfg.t_final - t)
        nw1, nv1 = ss1.lambda_w * dt / h, ss1.lambda_v * dt / h
        nw2, nv2 = ss2.lambda_w * dt / h, ss2.lambda_v * dt / h
        neww1, newv1 = w1.copy(), v1.copy()
        neww2, newv2 = w2.copy(), v2.copy()
        neww1[1:] = w1[1:] - nw1 * (w1[1:] - w1[:-1])
        newv1[:-1] = v1[:-1] + nv1 * (v1[1:] - v1[:-1]) + dt * c1[:-1] * w1[:-1]
        neww2[1:] = w2[1:] - nw2 * (w2[1:] - w2[:-1])
        newv2[:-1] = v2[:-1] + nv2 * (v2[1:] - v2[:-1]) + dt * c2[:-1] * w2[:-1]

        newv1[-1] = rows.g_outlet * neww1[-1]
        neww2[0] = rows.g_inlet * newv2[0]
        neww1[0] = rows.g_junction_w * neww2[-1]
        rhs0 = rows.g_t * newv1[0] + rows.g_a * neww2[-1]
        if closed:
            i1 = float(k1w0 @ neww1 + k1v0 @ newv1)
            i2p = float(k2wN @ neww2 + k2vN @ newv2) - k2vN[N] * newv2[-1]
            newv2[-1] = (rhs0 + i2p - rows.g_t * i1) / denom
            i2 = i2p + k2vN[N] * newv2[-1]
            u0 = (newv2[-1] - rhs0) / rows.g_control
        else:
            newv2[-1] = rhs0
            u0 = 0.0
        w1, v1, w2, v2 = neww1, newv1, neww2, newv2
        t += dt
        step += 1
        if not (
            np.isfinite(w1).all()
            and np.isfinite(v1).all()
            and np.isfinite(w2).all()
            and np.isfinite(v2).all()
        ):
            raise SimulationError(f"non-finite state at step {step}, t = {t:.3f} s")
        if trace_t is not None:
            if not closed:
                i1 = float(k1w0 @ w1 + k1v0 @ v1)
                i2 = float(k2wN @ w2 + k2vN @ v2)
            trace_t.append(t)
            trace_b1.append(v1[0] - i1)
            trace_b2.append(v2[-1] - i2)
            trace_u.append(u0)
        if step % cfg.record_every == 0 or t >= cfg.t_final - 1e-9 * dt0:
            snapshot(t, u0)

    extra = {}
    if trace_t is not None:
        extra = dict(
            trace_times=np.asarray(trace_t),
            trace_beta1=np.asarray(trace_b1),
            trace_beta2=np.asarray(trace_b2),
            trace_u0=np.asarray(trace_u),
        )
    return rec.finish(ss1.kappa + ss2.kappa, step, **extra)


def junction_coupling(left_trace, u0: float, net: NetworkParams):
    """Junction states seen from segment 1 given the segment-2 trace.

    Solves rho1 v1 = rho2 v2 + U0 together with continuity of the driver
    property v + p(rho) for the congested-branch root.
    """
    rho2, v2 = float(left_trace[0]), float(left_trace[1])
    if not 0.0 < rho2 < net.seg2.rho_max or v2 <= 0.0:
        raise DomainError("left trace must be a valid physical state")
    w = v2 + pressure(rho2, net.seg2)
    q2 = rho2 * v2
    demanded = q2 + u0
    seg1 = net.seg1
    g = seg1.gamma
    rho_cr = (w / (seg1.pressure_coeff * (1.0 + g))) ** (1.0 / g)
    cap = rho_cr * w * g / (1.0 + g)
    if demanded <= 0.0 or demanded > cap:
        raise InfeasibleError(
            f"no congested junction state for U_0 = {u0}; "
            f"feasible interval is ({-q2}, {cap - q2}]"
        )
    rho1 = congested_flux_root(w, demanded, seg1)
    return rho1, demanded / rho1


def run_nonlinear(
    cfg: SimConfig,
    net: NetworkParams,
    tables: tuple[KernelTable, KernelTable] | None = None,
) -> SimRecord:
    """First-order finite-volume integration of the full network.

    Conservative variables (rho, y = rho (v + p)) per segment, local
    Lax-Friedrichs interior fluxes, explicit Euler splitting for the
    relaxation source. Vertex-centered cells: the end cells have width h/2,
    so boundary fluxes act directly on the trace nodes. Junction fluxes are
    built from the outgoing characteristic invariants (w from segment 2,
    v from segment 1) and the flux balance with the ramp input, which keeps
    the per-step mass accounting exact.
    """
    closed = cfg.loop_mode == "closed"
    if closed and tables is None:
        raise DomainError("closed-loop nonlinear run requires kernel tables")
    ss1, ss2 = net.ss1, net.ss2
    seg1, seg2 = net.seg1, net.seg2
    N = cfg.N
    L = seg1.length
    h = L / N
    x1 = np.linspace(0.0, L, N + 1)
    x2 = np.linspace(-L, 0.0, N + 1)
    if tables is not None:
        _check_tables(tables, x1, x2)
    q_star = ss1.q_star
    wc = _trap_weights(N + 1, h)

    phys1, phys2 = initial_condition(cfg.ic, net, N)
    rho1, v1 = phys1.a.copy(), phys1.b.copy()
    rho2, v2 = phys2.a.copy(), phys2.b.copy()
    y1 = rho1 * (v1 + pressure(rho1, seg1))
    y2 = rho2 * (v2 + pressure(rho2, seg2))

    rec = _Recorder(net, x1, x2, tables)
    trace_u = [] if closed else None
    mass = float(wc @ rho1 + wc @ rho2)
    mass_err = 0.0

    def speeds(rho, v, params):
        return np.maximum(np.abs(v - params.gamma * pressure(rho, params)), np.abs(v))

    def scaled_pair():
        p1 = FieldState(x1, rho1, v1, PHYSICAL)
        p2 = FieldState(x2, rho2, v2, PHYSICAL)
        sc1 = scale_w(to_riemann(p1, ss1, seg1), ss1, seg1)
        sc2 = scale_w(to_riemann(p2, ss2, seg2), ss2, seg2)
        return p1, p2, sc1, sc2

    p1, p2, sc1, sc2 = scaled_pair()
    rec.push(0.0, 0.0, p1, p2, sc1, sc2)

    t, step, u0 = 0.0, 0, 0.0
    while True:
        for label, rho, v in (("segment 1", rho1, v1), ("segment 2", rho2, v2)):
            if np.any(rho <= RHO_FLOOR) or np.any(v <= 0.0):
                raise SimulationError(
                    f"state left the congested regime in {label} at step {step}, "
                    f"t = {t:.3f} s (min rho = {rho.min():.3e}, min v = {v.min():.3e})"
                )
        a1 = speeds(rho1, v1, seg1)
        a2 = speeds(rho2, v2, seg2)
        amax = max(float(a1.max()), float(a2.max()))
        if t >= cfg.t_final - 1e-12 * cfg.t_final:
            break
        dt = min(cfg.cfl * (0.5 * h) / amax, cfg.t_final - t)

        if closed:
            _, _, sc1, sc2 = scaled_pair()
            u0 = control_input(sc1, sc2, tables[0], tables[1], net)
        else:
            u0 = 0.0

        # junction invariants: w rides out of segment 2, v rides out of segment 1
        w2t = v2[-1] + pressure(rho2[-1], seg2)
        v1t = v1[0]
        if w2t - v1t <= 0.0:
            raise SimulationError(f"junction pressure collapsed at step {step}")
        rho1J = inverse_pressure(w2t - v1t, seg1)
        if not RHO_FLOOR < rho1J < seg1.rho_max:
            raise SimulationError(
                f"junction density {rho1J:.4f} outside (0, rho_max) at step {step}"
            )
        q1J = rho1J * v1t
        q2J = q1J - u0
        if q2J <= 0.0:
            raise SimulationError(
                f"ramp input {u0:.4f} veh/s exceeds the junction flux {q1J:.4f} "
                f"veh/s at step {step}; feasible U_0 < {q1J:.4f}"
            )
        # outer boundaries: impose flux q* on the incoming characteristic,
        # zeroth-order extrapolation of the outgoing invariant
        v_in = v2[0]
        rho_g = q_star / v_in
        if rho_g >= seg2.rho_max:
            raise SimulationError(f"inlet ghost density reached rho_max at step {step}")
        w_g = v_in + pressure(rho_g, seg2)
        w_out = v1[-1] + pressure(rho1[-1], seg1)

        fluxes = []
        for rho, v, y, aloc, fl, fr_ in (
            (rho1, v1, y1, a1, (q1J, q1J * w2t), (q_star, q_star * w_out)),
            (rho2, v2, y2, a2, (q_star, q_star * w_g), (q2J, q2J * w2t)),
        ):
            q = rho * v
            fy = y * v
            am = np.maximum(aloc[:-1], aloc[1:])
            f_rho = 0.5 * (q[:-1] + q[1:]) - 0.5 * am * (rho[1:] - rho[:-1])
            f_y = 0.5 * (fy[:-1] + fy[1:]) - 0.5 * am * (y[1:] - y[:-1])
            fluxes.append((f_rho, f_y, fl, fr_))

        for (rho, y), (f_rho, f_y, fl, fr_) in zip(
            ((rho1, y1), (rho2, y2)), fluxes
        ):
            rho[0] -= dt * (f_rho[0] - fl[0]) / (0.5 * h)
            rho[1:-1] -= dt * (f_rho[1:] - f_rho[:-1]) / h
            rho[-1] -= dt * (fr_[0] - f_rho[-1]) / (0.5 * h)
            y[0] -= dt * (f_y[0] - fl[1]) / (0.5 * h)
            y[1:-1] -= dt * (f_y[1:] - f_y[:-1]) / h
            y[-1] -= dt * (fr_[1] - f_y[-1]) / (0.5 * h)

        # relaxation on the post-flux state; y carries the whole source
        for rho, y, params in ((rho1, y1, seg1), (rho2, y2, seg2)):
            v_rel = y / rho - pressure(rho, params)
            y += dt * (-rho * (v_rel - equilibrium_velocity(rho, params)) / params.tau)

        v1 = y1 / rho1 - pressure(rho1, seg1)
        v2 = y2 / rho2 - pressure(rho2, seg2)
        t += dt
        step += 1
        if not (np.isfinite(rho1).all() and np.isfinite(y1).all()
                and np.isfinite(rho2).all() and np.isfinite(y2).all()):
            raise SimulationError(f"non-finite state at step {step}, t = {t:.3f} s")

        new_mass = float(wc @ rho1 + wc @ rho2)
        mass_err = max(mass_err, abs((new_mass - mass) - dt * u0) / new_mass)
        mass = new_mass
        if trace_u is not None:
            trace_u.append(u0)
        if step % cfg.record_every == 0 or t >= cfg.t_final - 1e-12 * cfg.t_final:
            p1, p2, sc1, sc2 = scaled_pair()
            rec.push(t, u0, p1, p2, sc1, sc2)

    extra = dict(mass_err=mass_err)
    if trace_u is not None:
        extra["trace_u0"] = np.asarray(trace_u)
    return rec.finish(ss1.kappa + ss2.kappa, step, **extra)


def norms_and_rate(record) -> NormHistory:
    """Norm history plus a decay rate fitted on the windowed peak envelope.

    The rate is positive for decay (the envelope behaves like e^{-rate t}).
    A trajectory already at round-off level is reported as converged with no
    fit attempted.
    """
    from .stability import fit_envelope_rate

    times = np.asarray(record.times, dtype=float)
    if times.size < 10:
        raise DomainError(f"need at least 10 recorded times, got {times.size}")
    n1 = np.asarray(record.norm1, dtype=float)
    n2 = np.asarray(record.norm2, dtype=float)
    total = np.sqrt(n1 * n1 + n2 * n2)
    window = float(record.window)
    if float(total.max()) < 1e-14:
        return NormHistory(times, n1, n2, total, window, None, "converged")
    rate = fit_envelope_rate(times, total, window)
    return NormHistory(times, n1, n2, total, window, rate, "ok")


def export_states_csv(record: SimRecord, path):
    cols = (
        ("rho1", "v1", "wbar1", "vtil1"),
        ("rho2", "v2", "wbar2", "vtil2"),
    )
    with open(path, "w") as f:
        f.write("time,x,segment,rho,v,wbar,vtil,U0\n")
        for i, t in enumerate(record.times):
            for seg, grid in ((1, record.grid1), (2, record.grid2)):
                rho, v, wb, vt = (getattr(record, c)[i] for c in cols[seg - 1])
                u = record.u0[i]
                for j in range(grid.size):
                    f.write(
                        "%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                        % (t, grid[j], seg, rho[j], v[j], wb[j], vt[j], u)
                    )


def export_norms_csv(record: SimRecord, path):
    n1, n2 = record.norm1, record.norm2
    total = np.sqrt(n1 * n1 + n2 * n2)
    with open(path, "w") as f:
        f.write("time,norm_seg1,norm_seg2,total\n")
        for i, t in enumerate(record.times):
            f.write("%.17g,%.17g,%.17g,%.17g\n" % (t, n1[i], n2[i], total[i]))
