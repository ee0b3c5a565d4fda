"""Time integration of the driven dynamics with impulse handling and events.

The adaptive path wraps scipy's RK45 with dense output; the fixed-step RK4
path is hand-rolled and doubles as an independent cross-check.  Velocity
impulses are applied exactly at their timestamps by splitting the integration
interval, with pre- and post-jump samples recorded at the same time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import ForceProfile, LienardSystem, PhasePoint, Trajectory
from .errors import DomainError, EventNotFoundError, IntegrationError

SECTION_TOL = 1e-12  # |x2| after crossing refinement

METHODS = ("rk4_fixed", "rk45_adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration method and accuracy knobs.

    rk4_fixed requires dt; rk45_adaptive requires rel_tol and abs_tol in
    (0, 1e-2].  output_dt controls the spacing of emitted samples for the
    adaptive method (None picks a spacing fine enough for quadrature on the
    samples; the fixed-step method emits every step).
    """

    method: str = "rk45_adaptive"
    dt: Optional[float] = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_steps: int = 5_000_000
    output_dt: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; known: {METHODS}")
        if self.method == "rk4_fixed":
            if self.dt is None or not (self.dt > 0):
                raise DomainError("rk4_fixed requires dt > 0")
        else:
            for name, tol in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)):
                if not (0.0 < tol <= 1e-2):
                    raise DomainError(f"{name} must lie in (0, 1e-2], got {tol}")
        if self.max_steps < 1:
            raise DomainError("max_steps must be positive")


#: tight tolerances for verification runs
VERIFY_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)
#: looser tolerances for parameter sweeps
SWEEP_CONFIG = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8)


@dataclass(frozen=True)
class EventSpec:
    """A crossing of the section x2 = 0 in a given direction and half-plane.

    direction "descending" means x2 goes + -> -; x1_sign selects the
    half-plane (+1 or -1) the crossing must occur in.
    """

    kind: str = "section_crossing"
    direction: str = "descending"
    x1_sign: int = 1

    def __post_init__(self):
        if self.kind != "section_crossing":
            raise DomainError(f"unknown event kind {self.kind!r}")
        if self.direction not in ("descending", "ascending"):
            raise DomainError(f"direction must be descending or ascending")
        if self.x1_sign not in (-1, 1):
            raise DomainError("x1_sign must be +1 or -1")


def _rhs(sys: LienardSystem, force: ForceProfile):
    mu, h, dV = sys.mu, sys.h, sys.dV
    smooth = force.smooth

    def f(t, y):
        x1, x2 = y
        F = smooth(t) if smooth is not None else 0.0
        return (x2, -mu * h(x1) * x2 - dV(x1) + F)

    return f


def _n_output(span: float, cfg: IntegratorConfig) -> int:
    if cfg.output_dt is not None:
        return max(2, int(math.ceil(span / cfg.output_dt)) + 1)
    return int(np.clip(math.ceil(span / 0.005), 400, 200_000)) + 1


def _rk4_segment(f, t0, t1, y0, dt, max_steps):
    """Fixed-step classical RK4 from t0 to t1; returns (times, states, ok)."""
    span = t1 - t0
    n = max(1, int(math.ceil(span / dt)))
    h = span / n
    ts = np.empty(n + 1)
    ys = np.empty((n + 1, 2))
    ts[0] = t0
    ys[0] = y0
    x1, x2 = float(y0[0]), float(y0[1])
    t = t0
    for i in range(1, n + 1):
        if i > max_steps:
            return ts[:i], ys[:i], False
        k1 = f(t, (x1, x2))
        k2 = f(t + 0.5 * h, (x1 + 0.5 * h * k1[0], x2 + 0.5 * h * k1[1]))
        k3 = f(t + 0.5 * h, (x1 + 0.5 * h * k2[0], x2 + 0.5 * h * k2[1]))
        k4 = f(t + h, (x1 + h * k3[0], x2 + h * k3[1]))
        x1 += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        x2 += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        t = t0 + i * h
        ts[i] = t
        ys[i] = (x1, x2)
    return ts, ys, True


def _rk45_segment(f, t0, t1, y0, cfg):
    """Adaptive RK45 over [t0, t1], resampled on a uniform grid."""
    sol = solve_ivp(
        f,
        (t0, t1),
        y0,
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        dense_output=True,
    )
    if not sol.success or len(sol.t) > cfg.max_steps:
        ts = sol.t
        ys = sol.y.T
        return ts, ys, False
    ts = np.linspace(t0, t1, _n_output(t1 - t0, cfg))
    ys = sol.sol(ts).T
    ys[0] = y0
    ys[-1] = sol.y[:, -1]
    return ts, ys, True


def integrate_driven(
    sys: LienardSystem,
    start: PhasePoint,
    force: ForceProfile,
    t_f: float,
    cfg: IntegratorConfig = VERIFY_CONFIG,
) -> Trajectory:
    """Integrate the driven dynamics over [0, t_f], applying velocity impulses.

    The interval is split at impulse times; at each jump both the pre- and
    post-jump states are recorded at the same timestamp.  t_f = 0 is allowed
    for jump-only protocols.
    """
    if t_f < 0:
        raise DomainError(f"t_f must be non-negative, got {t_f}")
    if any(not (0.0 <= t <= t_f) for t, _ in force.impulses):
        raise DomainError("impulse times must lie within [0, t_f]")

    f = _rhs(sys, force)
    jumps = dict(force.impulses)
    boundaries = sorted({0.0, t_f, *jumps.keys()})

    all_t = [np.array([0.0])]
    all_y = [np.array([[start.x1, start.x2]])]
    y = np.array([start.x1, start.x2], dtype=float)

    def apply_jump(t, y):
        y2 = np.array([y[0], y[1] + jumps[t]])
        all_t.append(np.array([t]))
        all_y.append(y2[None, :])
        return y2

    if boundaries[0] in jumps:
        y = apply_jump(0.0, y)

    for t0, t1 in zip(boundaries, boundaries[1:]):
        if cfg.method == "rk4_fixed":
            ts, ys, ok = _rk4_segment(f, t0, t1, y, cfg.dt, cfg.max_steps)
        else:
            ts, ys, ok = _rk45_segment(f, t0, t1, y, cfg)
        all_t.append(ts[1:])
        all_y.append(ys[1:])
        if not ok:
            partial = Trajectory(np.concatenate(all_t), np.vstack(all_y), force=force)
            raise IntegrationError(
                f"integration failed on [{t0}, {t1}] (step budget or solver failure)",
                partial=partial,
            )
        y = ys[-1]
        if t1 in jumps and t1 != 0.0:
            y = apply_jump(t1, y)

    return Trajectory(np.concatenate(all_t), np.vstack(all_y), force=force)


def integrate_until_event(
    sys: LienardSystem,
    start: PhasePoint,
    event: EventSpec,
    cfg: IntegratorConfig = VERIFY_CONFIG,
    t_max: float = 100.0,
    _skip: float = 1e-9,
) -> tuple[Trajectory, PhasePoint, float]:
    """Undriven flow until the first matching section crossing.

    Returns (trajectory up to the crossing, crossing point, crossing time);
    the crossing is refined on the dense output until |x2| < 1e-12.  _skip
    suppresses a crossing at t ~ 0 so the return map can start on the section.
    """
    direction = -1 if event.direction == "descending" else 1
    if _skip <= 0 and abs(start.x2) < SECTION_TOL and np.sign(start.x1) == event.x1_sign:
        raise DomainError("start already lies on the section")

    f = _rhs(sys, ForceProfile.zero())
    y0 = np.array([start.x1, start.x2])

    if cfg.method == "rk4_fixed":
        return _event_rk4(sys, f, y0, event, direction, cfg, t_max, _skip)

    def section(t, y):
        return y[1]

    section.direction = direction
    section.terminal = True

    # terminal events keep each pass short; crossings rejected by the time or
    # half-plane filter are hopped over and integration resumes just past them
    pieces = []
    t_cur, y_cur = 0.0, y0
    t_cross = None
    while True:
        sol = solve_ivp(
            f,
            (t_cur, t_max),
            y_cur,
            method="RK45",
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            dense_output=True,
            events=section,
        )
        if sol.status == -1:
            raise IntegrationError("integration failed before any section crossing")
        pieces.append(sol)
        if sol.status != 1:
            raise EventNotFoundError(
                f"no {event.direction} crossing with sign(x1)={event.x1_sign} "
                f"before t={t_max}"
            )
        te = float(sol.t_events[0][-1])
        ye = sol.y_events[0][-1]
        if te > _skip and np.sign(ye[0]) == event.x1_sign:
            t_cross = te
            break
        t_cur = te + max(1e-9, 1e-12 * t_max)
        if t_cur >= t_max:
            raise EventNotFoundError(
                f"no {event.direction} crossing with sign(x1)={event.x1_sign} "
                f"before t={t_max}"
            )
        y_cur = sol.sol(t_cur)

    # refine on the dense output until the section residual is tiny
    dense = pieces[-1].sol
    if abs(dense(t_cross)[1]) >= SECTION_TOL:
        width = max(1e-8, 1e-12 * t_cross)
        lo = max(t_cross - width, pieces[-1].t[0])
        hi = min(t_cross + width, t_max)
        if dense(lo)[1] * dense(hi)[1] < 0:
            t_cross = brentq(lambda t: dense(t)[1], lo, hi, xtol=1e-15, rtol=8.9e-16)
    y_cross = dense(t_cross)

    ts = np.linspace(0.0, t_cross, _n_output(t_cross, cfg))
    ys = np.empty((len(ts), 2))
    starts = np.array([p.t[0] for p in pieces])
    idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(pieces) - 1)
    for k, piece in enumerate(pieces):
        mask = idx == k
        if mask.any():
            ys[mask] = piece.sol(np.clip(ts[mask], piece.t[0], piece.t[-1])).T
    ys[0] = y0
    ys[-1] = y_cross
    traj = Trajectory(ts, ys)
    return traj, PhasePoint(*y_cross), float(t_cross)


def _event_rk4(sys, f, y0, event, direction, cfg, t_max, skip):
    """Fixed-step event location: per-step sign check plus bisection."""
    dt = cfg.dt
    n = int(math.ceil(t_max / dt))
    ts = [0.0]
    ys = [tuple(y0)]
    y = tuple(y0)
    t = 0.0
    for i in range(n):
        h = min(dt, t_max - t)
        ynew = _rk4_step(f, t, y, h)
        # descending: x2 goes from >0 to <=0; ascending the reverse
        if direction == -1:
            crossed = y[1] > 0.0 and ynew[1] <= 0.0
        else:
            crossed = y[1] < 0.0 and ynew[1] >= 0.0
        if crossed and t + h > skip and np.sign(ynew[0]) == event.x1_sign:
            lo, hi = 0.0, h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                ym = _rk4_step(f, t, y, mid)
                if (ym[1] > 0.0) == (direction == -1):
                    lo = mid
                else:
                    hi = mid
                if abs(ym[1]) < SECTION_TOL:
                    break
            t_cross = t + mid
            ts.append(t_cross)
            ys.append(ym)
            traj = Trajectory(np.array(ts), np.array(ys))
            return traj, PhasePoint(*ym), t_cross
        t += h
        y = ynew
        ts.append(t)
        ys.append(y)
    raise EventNotFoundError(
        f"no {event.direction} crossing with sign(x1)={event.x1_sign} before t={t_max}"
    )


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, (y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]))
    k3 = f(t + 0.5 * h, (y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]))
    k4 = f(t + h, (y[0] + h * k3[0], y[1] + h * k3[1]))
    return (
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    )


# ---------------------------------------------------------------------------
# small-damping asymptotics (van der Pol only)
# ---------------------------------------------------------------------------


def small_mu_amplitude(sys: LienardSystem, start: PhasePoint, t):
    """Slow amplitude envelope A(t) of the weakly damped relaxation.

    A(t) = 2 / sqrt(1 - (r0^2 - 4)/r0^2 * exp(-mu t)) with r0 the initial
    radius; valid for van der Pol damping with mu << 1.  Accepts array t.
    """
    _require_van_der_pol(sys)
    r0 = math.hypot(start.x1, start.x2)
    if r0 == 0.0:
        raise DomainError("origin is the unstable fixed point; envelope undefined")
    if sys.mu > 0.2:
        warnings.warn(f"amplitude envelope assumes mu << 1, got mu = {sys.mu}")
    decay = np.exp(-sys.mu * np.asarray(t, dtype=float))
    return 2.0 / np.sqrt(1.0 - (r0 * r0 - 4.0) / (r0 * r0) * decay)


def small_mu_envelope(sys: LienardSystem, start: PhasePoint, t: float) -> PhasePoint:
    """Asymptotic prediction of the undriven state at time t for mu << 1.

    x1 = A(t) cos(t + phi0), x2 = -A(t) sin(t + phi0).  The phase is the
    quadrant-correct two-argument form phi0 = atan2(-x20, x10), which is what
    makes the t = 0 value reproduce the start point in every quadrant.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    amp = float(small_mu_amplitude(sys, start, t))
    phi0 = math.atan2(-start.x2, start.x1)
    return PhasePoint(amp * math.cos(t + phi0), -amp * math.sin(t + phi0))


def _require_van_der_pol(sys: LienardSystem) -> None:
    if not sys.is_van_der_pol():
        raise DomainError("small-damping envelope is defined for van der Pol damping only")
