"""Numerical representation of the unique stable limit cycle.

The cycle is located as a fixed point of the Poincare first-return map on the
half-line {x2 = 0, x1 > 0} (descending crossings), found by secant iteration.
One period is then sampled densely and split into an upper (x2 >= 0) and a
lower (x2 <= 0) branch, each represented by a shape-preserving monotone cubic
interpolant x2 = s(x1) on [-x_max, x_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .core import LienardSystem, PhasePoint
from .errors import CycleNotFoundError, DomainError
from .integrate import EventSpec, IntegratorConfig, integrate_until_event

CYCLE_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12)

FIXED_POINT_TOL = 1e-11
MAX_SECANT_ITER = 50


@dataclass(frozen=True)
class LimitCycle:
    """One densely sampled period of the cycle with branch interpolants.

    samples trace the orbit from (x_max, 0) once around and back; the first
    and last rows coincide to integration accuracy.  upper_branch and
    lower_branch map x1 to the on-cycle velocity on [-x_max, x_max] and are
    pinned to zero at the turning points +-x_max.
    """

    system: LienardSystem
    times: np.ndarray
    samples: np.ndarray  # shape (n, 2)
    period: float
    x_max: float
    upper_branch: PchipInterpolator
    lower_branch: PchipInterpolator


def _return_map(sys, x1, cfg, t_max):
    """(P(x1), return time) for the descending-crossing first-return map."""
    event = EventSpec(direction="descending", x1_sign=1)
    cheap = IntegratorConfig(
        method=cfg.method,
        dt=cfg.dt,
        rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol,
        max_steps=cfg.max_steps,
        output_dt=t_max,  # keep the bookkeeping trajectory tiny
    )
    _, crossing, t_cross = integrate_until_event(
        sys, PhasePoint(x1, 0.0), event, cheap, t_max=t_max, _skip=1e-6
    )
    return crossing.x1, t_cross


def find_limit_cycle(
    sys: LienardSystem,
    cfg: IntegratorConfig = CYCLE_CONFIG,
    initial_guess: float = 2.0,
    n_samples: int = 4001,
) -> LimitCycle:
    """Locate the cycle by secant iteration on the first-return map.

    The rightmost point of the cycle lies on the section (x2 = 0 there), so
    the converged fixed point is x_max; a local quadratic fit over the densely
    sampled orbit confirms it.  Raises CycleNotFoundError on non-convergence.
    """
    t_max = 100.0 / min(1.0, sys.mu) if sys.mu < 1 else 100.0

    def residual(x1):
        px, tret = _return_map(sys, x1, cfg, t_max)
        return px - x1, tret

    x0, x1 = float(initial_guess), float(initial_guess) * 1.005
    r0, _ = residual(x0)
    r1, period = residual(x1)
    for _ in range(MAX_SECANT_ITER):
        if abs(r1) < FIXED_POINT_TOL:
            break
        if r1 == r0:
            raise CycleNotFoundError("secant iteration stalled (flat residual)")
        x2 = x1 - r1 * (x1 - x0) / (r1 - r0)
        if not np.isfinite(x2) or x2 <= sys.b:
            raise CycleNotFoundError(f"secant iterate left the admissible region: {x2}")
        x0, r0 = x1, r1
        x1 = x2
        r1, period = residual(x1)
    else:
        raise CycleNotFoundError(
            f"no fixed point after {MAX_SECANT_ITER} secant iterations (|r| = {abs(r1):.2e})"
        )

    x_star = x1

    # one full period, densely sampled from the fixed point
    def f(t, y):
        return (y[1], -sys.mu * sys.h(y[0]) * y[1] - sys.dV(y[0]))

    def section(t, y):
        return y[1]

    section.direction = -1

    sol = solve_ivp(
        f,
        (0.0, 1.5 * period),
        [x_star, 0.0],
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        dense_output=True,
        events=section,
    )
    t_events = [t for t in sol.t_events[0] if t > 1e-6]
    if not t_events:
        raise CycleNotFoundError("lost the section crossing while sampling the period")
    T = float(t_events[0])

    times = np.linspace(0.0, T, n_samples)
    samples = sol.sol(times).T
    samples[0] = (x_star, 0.0)
    samples[-1] = sol.sol(T)

    # quadratic refinement of the orbit maximum around the section crossing
    dt = T / (n_samples - 1)
    tq = np.array([-2 * dt, -dt, 0.0, dt, 2 * dt])
    xq = sol.sol(T + tq)[0]
    c = np.polyfit(tq, xq, 2)
    x_max = float(np.polyval(c, -c[1] / (2 * c[0]))) if c[0] < 0 else x_star
    if abs(x_max - x_star) > 1e-6:
        raise CycleNotFoundError(
            f"quadratic fit of the orbit maximum disagrees with the fixed point "
            f"({x_max} vs {x_star})"
        )

    upper, lower = _build_branches(sol, T, x_max, n_samples)
    return LimitCycle(
        system=sys,
        times=times,
        samples=samples,
        period=T,
        x_max=x_max,
        upper_branch=upper,
        lower_branch=lower,
    )


def _build_branches(sol, T, x_max, n_samples):
    """Monotone-in-x1 branch interpolants pinned to (+-x_max, 0)."""
    # the ascending crossing marks the leftmost point, at T/2 by point symmetry
    t_left = brentq(
        lambda t: sol.sol(t)[1], 0.35 * T, 0.65 * T, xtol=1e-14, rtol=8.9e-16
    )

    def branch_data(t0, t1, reverse):
        ts = np.linspace(t0, t1, n_samples // 2 + 1)[1:-1]
        xs, vs = sol.sol(ts)
        if reverse:
            xs, vs = xs[::-1], vs[::-1]
        # pin exact turning points, drop samples that would break monotonicity
        keep = (xs > -x_max + 1e-13) & (xs < x_max - 1e-13)
        xs = np.concatenate([[-x_max], xs[keep], [x_max]])
        vs = np.concatenate([[0.0], vs[keep], [0.0]])
        keep = np.concatenate([[True], np.diff(xs) > 0.0])
        return xs[keep], vs[keep]

    # from (x_max, 0) the orbit descends: first half is the lower branch
    xl, vl = branch_data(0.0, t_left, reverse=True)
    xu, vu = branch_data(t_left, T, reverse=False)
    lower = PchipInterpolator(xl, np.minimum(vl, 0.0), extrapolate=False)
    upper = PchipInterpolator(xu, np.maximum(vu, 0.0), extrapolate=False)
    return upper, lower


def distance_to_cycle(lc: LimitCycle, p: PhasePoint) -> float:
    """Minimum Euclidean distance from p to the sampled cycle polyline."""
    pts = lc.samples
    a = pts[:-1]
    d = pts[1:] - a
    w = np.array([p.x1, p.x2]) - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", w, d) / np.where(seg_len2 > 0, seg_len2, 1.0), 0.0, 1.0)
    closest = a + t[:, None] * d
    diff = closest - np.array([p.x1, p.x2])
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def branch_velocity(lc: LimitCycle, x1: float, branch: str) -> float:
    """On-cycle velocity at position x1 on the requested branch."""
    if branch not in ("upper", "lower"):
        raise DomainError(f"branch must be 'upper' or 'lower', got {branch!r}")
    if abs(x1) > lc.x_max:
        raise DomainError(f"|x1| = {abs(x1)} exceeds the cycle extent {lc.x_max}")
    if abs(x1) == lc.x_max:
        return 0.0
    interp = lc.upper_branch if branch == "upper" else lc.lower_branch
    return float(interp(x1))
