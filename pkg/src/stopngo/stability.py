"""Boundary-coupling spectral test and the scalar delay-difference model.

Dissipativity of the boundary loop is measured two independent ways: a
numerical infimum of the scaled 2-norm of the coupling matrix, and a closed
form built from the two cycle gains of that matrix. Agreement of the two is
part of the acceptance suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import AssumptionError, DomainError
from .model import NetworkParams
from .riemann import boundary_rows

SP1_TOL = 1e-9


def coupling_matrix(net: NetworkParams) -> np.ndarray:
    """4x4 boundary-coupling matrix in the state order (w1, v2, v1, w2).

    Only five entries are structurally nonzero: the w pass-through at the
    junction, the two junction gains feeding v2, and one reflection per outer
    boundary.
    """
    rows = boundary_rows(net)
    H = np.zeros((4, 4))
    H[0, 3] = rows.g_junction_w
    H[1, 2] = rows.g_t
    H[1, 3] = rows.g_a
    H[2, 0] = rows.e1 / rows.r2
    H[3, 1] = rows.r1 * rows.e2
    return H


def _scaled_norm(H: np.ndarray, theta: np.ndarray) -> float:
    d = np.exp(np.concatenate([[0.0], theta]))
    return float(np.linalg.norm((H * d[:, None]) / d[None, :], 2))


def sp1(H: np.ndarray, restarts: int = 16, seed: int = 0) -> float:
    """Infimum over positive diagonal scalings D of ||D H D^-1||_2.

    One diagonal entry is pinned to 1, leaving three free log-parameters.
    Multi-start Nelder-Mead; a Perron-balanced start on |H| is included since
    it is the exact minimizer for nonnegative matrices with irreducible
    pattern.
    """
    H = np.asarray(H, dtype=float)
    if H.shape != (4, 4) or not np.all(np.isfinite(H)):
        raise DomainError("sp1 expects a finite 4x4 real matrix")
    if not H.any():
        return 0.0
    starts = [np.zeros(3)]
    A = np.abs(H)
    eigvals, right = np.linalg.eig(A)
    u = np.abs(right[:, np.argmax(eigvals.real)].real)
    eigvals_t, left = np.linalg.eig(A.T)
    w = np.abs(left[:, np.argmax(eigvals_t.real)].real)
    if np.all(u > 0) and np.all(w > 0):
        d0 = np.sqrt(w / u)
        starts.append(np.log(d0[1:] / d0[0]))
    rng = np.random.default_rng(seed)
    starts.extend(rng.normal(0.0, 2.0, size=(restarts, 3)))
    best = _scaled_norm(H, np.zeros(3))
    for s in starts:
        res = minimize(
            lambda th: _scaled_norm(H, th),
            s,
            method="Nelder-Mead",
            options=dict(fatol=SP1_TOL * 1e-2, xatol=1e-8, maxiter=4000, maxfev=8000),
        )
        if res.fun < best:
            best = float(res.fun)
    return best


def closed_form_condition(net: NetworkParams) -> tuple[float, float, float]:
    """(value, a, b) with value = sqrt((a + sqrt(a^2 + 4b))/2); stable iff value < 1."""
    rows = boundary_rows(net)
    if rows.r1 < rows.r2:
        raise AssumptionError(
            f"closed form inapplicable: requires r1 >= r2, got r1 = {rows.r1}, "
            f"r2 = {rows.r2}; fall back to sp1"
        )
    a = rows.g_a * rows.r1 * rows.e2
    b = rows.e1 * rows.e2
    value = float(np.sqrt((a + np.sqrt(a * a + 4.0 * b)) / 2.0))
    return value, float(a), float(b)


@dataclass(frozen=True)
class DifferenceModel:
    coef_short: float
    coef_long: float
    kappa1: float
    kappa2: float

    def __post_init__(self):
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise DomainError("delays must be positive")


def build_difference_model(net: NetworkParams) -> DifferenceModel:
    """Delay recurrence satisfied by the junction trace of the target system.

    x(t) = coef_short x(t - kappa2) + coef_long x(t - kappa1 - kappa2).
    """
    rows = boundary_rows(net)
    if rows.r1 == 1.0 or rows.r2 == 0.0:
        raise DomainError("difference model degenerate at r1 = 1 or r2 = 0")
    return DifferenceModel(
        coef_short=rows.e2 * (rows.r1 - rows.r2) / ((1.0 - rows.r1) * rows.r2),
        coef_long=rows.e1 * rows.e2,
        kappa1=net.ss1.kappa,
        kappa2=net.ss2.kappa,
    )


@dataclass
class DifferenceSeries:
    times: np.ndarray
    values: np.ndarray
    rate: float | None
    diverged: bool
    delay_rounding_error: float


def simulate_difference(
    model: DifferenceModel, history, horizon: float, dt: float | None = None
) -> DifferenceSeries:
    """Iterate the delay recurrence from a given history on [-kappa1-kappa2, 0].

    history may be a scalar, an array sampled on that interval, or a callable
    of time. Delays are rounded to the nearest grid multiple; the rounding
    error is reported with the series.
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    if dt is None:
        dt = model.kappa2 / 256.0
    if dt > model.kappa2 / 200.0:
        raise DomainError("dt must not exceed kappa2/200")
    n2 = max(1, round(model.kappa2 / dt))
    n12 = max(n2 + 1, round((model.kappa1 + model.kappa2) / dt))
    rounding = max(abs(n2 * dt - model.kappa2), abs(n12 * dt - (model.kappa1 + model.kappa2)))
    n_hist = n12 + 1
    t_hist = np.arange(-n12, 1) * dt
    if callable(history):
        h = np.array([float(history(t)) for t in t_hist])
    else:
        h = np.asarray(history, dtype=float)
        if h.ndim == 0:
            h = np.full(n_hist, float(h))
        else:
            h = np.interp(t_hist, np.linspace(-(model.kappa1 + model.kappa2), 0.0, h.size), h)
    n_steps = int(np.ceil(horizon / dt))
    x = np.empty(n_hist + n_steps)
    x[:n_hist] = h
    for k in range(n_hist, n_hist + n_steps):
        x[k] = model.coef_short * x[k - n2] + model.coef_long * x[k - n12]
    times = (np.arange(n_hist + n_steps) - n12) * dt
    window = model.kappa1 + model.kappa2
    rate = fit_envelope_rate(times[n_hist:], x[n_hist:], window)
    diverged = bool(np.max(np.abs(x[n_hist:])) > 10.0 * (np.max(np.abs(h)) + 1e-300))
    return DifferenceSeries(times, x, rate, diverged, rounding)


def fit_envelope_rate(times: np.ndarray, values: np.ndarray, window: float) -> float | None:
    """Least-squares decay rate of the peak envelope over consecutive windows.

    Returns sigma >= 0 fitted to peak ~ exp(-sigma t); None when the signal is
    too small for a meaningful fit (already converged).
    """
    times = np.asarray(times, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if times.size < 2:
        return None
    t0 = times[0]
    peaks, centers = [], []
    n_win = int((times[-1] - t0) / window)
    for i in range(n_win):
        mask = (times >= t0 + i * window) & (times < t0 + (i + 1) * window)
        if not mask.any():
            continue
        p = values[mask].max()
        if p < 1e-14:
            continue
        j = np.argmax(values[mask])
        peaks.append(p)
        centers.append(times[mask][j])
    if len(peaks) < 2:
        return None
    slope = np.polyfit(centers, np.log(peaks), 1)[0]
    return float(-slope)
