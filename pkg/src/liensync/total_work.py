"""Total-work minimisation over the endpoint on the limit cycle.

For a fixed endpoint the path work is the closed-form minimum from
``nc_optimal``; the endpoint itself is then optimised over the cycle.  The
stationarity condition along the cycle reads

    mu * s_branch(x1f) = 2 [g(x1f) - g(x10)] / (s_f sqrt(h(x1f)))

whose solutions are the interior candidates (case MT2), competing against the
cycle's extreme point (case MT1, x2f = 0) and, when the start sits exactly at
|x10| = b, the degenerate constant path (case MT3).  For starts outside the
cycle the global optimum jumps from MT1 to an MT2 root at a critical scaled
time; ``critical_time`` locates it by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import LienardSystem, WorkBreakdown
from .errors import DomainError
from .limit_cycle import LimitCycle, branch_velocity
from .nc_optimal import EDGE_TOL, GFunction, gfunction_for, _check_feasible

SCAN_MARGIN = 1e-6  # keeps scans off the singular ends h(x1f) = 0 and x2f = 0


def _flip(branch: str) -> str:
    return "lower" if branch == "upper" else "upper"


def total_work_at(
    sys: LienardSystem,
    lc: LimitCycle,
    gf: GFunction,
    x10: float,
    x20: float,
    x1f: float,
    branch: str,
    s_f: float,
) -> WorkBreakdown:
    """Total work for a fixed on-cycle endpoint (x1f, s_branch(x1f)).

    The damping-channel part comes from the closed-form path to x1f; the
    conservative part from the endpoint energies, kicks included.
    """
    if not (s_f > 0.0):
        raise DomainError(f"s_f must be positive, got {s_f}")
    _check_feasible(sys, x10, x1f)
    if abs(x1f) > lc.x_max + EDGE_TOL:
        raise DomainError(f"endpoint |x1f| = {abs(x1f)} is off the cycle (x_max = {lc.x_max})")
    t_f = sys.mu * s_f
    dg = gf.eval(abs(x1f)) - gf.eval(abs(x10))
    w_nc = sys.mu * (dg / t_f) ** 2 * t_f
    x2f = 0.0 if abs(x1f) >= lc.x_max - EDGE_TOL else branch_velocity(lc, x1f, branch)
    delta_e = float(sys.energy(x1f, x2f) - sys.energy(x10, x20))
    return WorkBreakdown.of(delta_e, w_nc)


def _el_end_velocity(sys, gf, x10, x1f, t_f):
    """Terminal velocity of the closed-form path, signed."""
    sign = 1.0 if x10 > 0 else -1.0
    c1 = (gf.eval(abs(x1f)) - gf.eval(abs(x10))) / t_f
    return sign * c1 / math.sqrt(sys.h(abs(x1f)))


def mt2_residual(
    sys: LienardSystem,
    lc: LimitCycle,
    gf: GFunction,
    x10: float,
    x1f: float,
    branch: str,
    s_f: float,
) -> float:
    """Endpoint-stationarity residual mu h(x1f) x2f (2 x2(tf-) - x2f)."""
    t_f = sys.mu * s_f
    x2f = branch_velocity(lc, x1f, branch)
    v_end = _el_end_velocity(sys, gf, x10, x1f, t_f)
    return sys.mu * sys.h(x1f) * x2f * (2.0 * v_end - x2f)


def mt2_roots(
    sys: LienardSystem,
    lc: LimitCycle,
    gf: GFunction,
    x10: float,
    s_f: float,
    branch: str,
    n_scan: int = 400,
) -> list[float]:
    """Interior stationary endpoints on one branch, by sign scan + refinement.

    Solves mu s_branch(x) = 2 [g(x) - g(|x10|)] / (s_f sqrt(h(x))) on
    [b + margin, x_max - margin].  An empty list is a valid outcome.  At a
    root, the endpoint velocity necessarily shares the sign of
    g(x1f) - g(x10), so only the matching branch can carry solutions.
    """
    if x10 < 0:
        return [-r for r in mt2_roots(sys, lc, gf, -x10, s_f, _flip(branch), n_scan)]
    if abs(x10) < sys.b - EDGE_TOL:
        raise DomainError(f"|x10| = {abs(x10)} lies inside the active region")
    interp = lc.upper_branch if branch == "upper" else lc.lower_branch
    g10 = gf.eval(x10)

    # uniform body plus a geometric tail toward b: for long connection times
    # the interior root migrates to within o(margin) of b and would escape a
    # fixed-margin scan
    body = np.linspace(sys.b + SCAN_MARGIN, lc.x_max - SCAN_MARGIN, n_scan)
    tail = sys.b + np.geomspace(1e-13, SCAN_MARGIN, 81)[:-1]
    xs = np.concatenate([tail, body])
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = sys.mu * interp(xs) - 2.0 * (gf.eval(xs) - g10) / (s_f * np.sqrt(sys.h(xs)))

    def residual(x):
        return float(
            sys.mu * interp(x) - 2.0 * (gf.eval(x) - g10) / (s_f * math.sqrt(sys.h(x)))
        )

    roots = []
    sgn = np.sign(resid)
    for i in range(len(xs) - 1):
        if sgn[i] == 0.0:
            roots.append(float(xs[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            roots.append(brentq(residual, xs[i], xs[i + 1], xtol=1e-12, rtol=8.9e-16))
    if sgn[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


@dataclass(frozen=True)
class LandscapeSample:
    x1f: float
    branch: str
    w_total: float
    delta_e: float
    w_nc: float


@dataclass(frozen=True)
class Mt2Root:
    x1f: float
    branch: str
    work: WorkBreakdown


@dataclass(frozen=True)
class GlobalOpt:
    x1f: float
    branch: Optional[str]
    case: str
    work: WorkBreakdown


@dataclass(frozen=True)
class TotalWorkLandscape:
    """Total work over the admissible endpoints at one scaled time s_f."""

    s_f: float
    samples: tuple[LandscapeSample, ...]
    interior_roots: tuple[Mt2Root, ...]
    boundary_value: float
    global_opt: GlobalOpt


def optimal_endpoint_total(
    sys: LienardSystem,
    lc: LimitCycle,
    gf: GFunction,
    x10: float,
    x20: float,
    s_f: float,
    n_scan: int = 400,
) -> TotalWorkLandscape:
    """Scan both branches, refine interior candidates, pick the global optimum.

    Candidates are the cycle extreme (MT1), every interior stationary point
    (MT2, both branches), and the constant path at |x10| = b (MT3, only when
    reachable).  The samples record the full landscape for plotting.
    """
    if abs(x10) < sys.b - EDGE_TOL:
        raise DomainError(f"|x10| = {abs(x10)} lies inside the active region")
    sign = 1.0 if x10 > 0 else -1.0

    def work(x1f, branch):
        return total_work_at(sys, lc, gf, x10, x20, x1f, branch, s_f)

    xs_mag = np.linspace(sys.b + SCAN_MARGIN, lc.x_max - SCAN_MARGIN, n_scan)
    samples = []
    for branch in ("upper", "lower"):
        for xm in xs_mag:
            x1f = sign * xm
            wb = work(x1f, branch)
            samples.append(LandscapeSample(x1f, branch, wb.total, wb.delta_E, wb.w_nc))

    boundary_x = sign * lc.x_max
    w_boundary = work(boundary_x, "upper")  # x2f = 0 there on either branch
    candidates = [GlobalOpt(boundary_x, None, "MT1", w_boundary)]

    for branch in ("upper", "lower"):
        for root in mt2_roots(sys, lc, gf, x10, s_f, branch, n_scan=n_scan):
            candidates.append(GlobalOpt(root, branch, "MT2", work(root, branch)))

    if abs(abs(x10) - sys.b) <= EDGE_TOL:
        for branch in ("upper", "lower"):
            x1f = sign * sys.b
            candidates.append(GlobalOpt(x1f, branch, "MT3", work(x1f, branch)))

    # ties go to the boundary case, which is listed first
    best = min(candidates, key=lambda c: c.work.total)
    return TotalWorkLandscape(
        s_f=float(s_f),
        samples=tuple(samples),
        interior_roots=tuple(
            Mt2Root(c.x1f, c.branch, c.work) for c in candidates if c.case == "MT2"
        ),
        boundary_value=w_boundary.total,
        global_opt=best,
    )


def critical_time(
    sys: LienardSystem,
    lc: LimitCycle,
    gf: GFunction,
    x10: float,
    x20: float,
    s_range: tuple[float, float],
) -> Optional[float]:
    """Scaled time at which the boundary and interior optima exchange roles.

    Bisection on the sign of W_boundary - W_interior_min, refined to relative
    1e-6; returns None when no crossing lies inside s_range.  Requires a start
    outside the cycle (only then do the two candidates compete).
    """
    if abs(x10) <= lc.x_max:
        raise DomainError(
            f"critical time needs a start outside the cycle (|x10| > {lc.x_max})"
        )
    lo, hi = float(s_range[0]), float(s_range[1])
    if not (0.0 < lo < hi):
        raise DomainError(f"need 0 < lo < hi, got {s_range}")

    def gap(s_f):
        """boundary minus best interior; negative when the boundary wins."""
        w_boundary = total_work_at(
            sys, lc, gf, x10, x20, math.copysign(lc.x_max, x10), "upper", s_f
        ).total
        interior = [
            total_work_at(sys, lc, gf, x10, x20, r, branch, s_f).total
            for branch in ("upper", "lower")
            for r in mt2_roots(sys, lc, gf, x10, s_f, branch)
        ]
        if not interior:
            return -1.0
        return w_boundary - min(interior)

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0:
        return None
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if g_mid == 0.0:
            return mid
        if g_mid * g_lo < 0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    return 0.5 * (lo + hi)
