"""Closed-form synthesis of minimum-damping-work driving protocols.

Paths that extremise the damping-channel work w_nc = mu * int h(x1) x2^2 dt
conserve x1' * sqrt(h(x1)); with g the antiderivative of sqrt(h) anchored at
g(b) = 0, the optimal position satisfies g(x1(t)) = C0 + C1 t, which makes the
whole trajectory, its driving force, and the minimum work available in closed
form once g and its inverse are computable.  Velocity boundary conditions are
met by instantaneous kicks at the endpoints, which cost no damping-channel
work.  Everything is computed in the right half-plane and reflected through
the point symmetry (x1, x2) -> (-x1, -x2) when the start lies at x1 < 0.

The minimisation is only well-posed in the dissipative region |x1| >= b with
both endpoints in the same half-plane; anything else raises NoSolutionError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .core import ForceProfile, LienardSystem, PhasePoint
from .errors import DomainError, NoSolutionError, SingularForceError
from .limit_cycle import LimitCycle, branch_velocity

EDGE_TOL = 1e-12  # slack when comparing |x| against b or x_max


class GFunction:
    """Antiderivative of sqrt(h) on |x| >= b, with g(b) = 0 and odd extension.

    Built once per system: the substitution x = b + v^2 removes the
    square-root singularity of g' at b, the node values are accumulated with
    per-segment Gauss-Legendre quadrature, and a cubic Hermite spline with
    exact slopes dg/dv = 2 v sqrt(h(b + v^2)) interpolates between nodes.
    Evaluations beyond the cached table fall back to adaptive quadrature.
    """

    def __init__(self, system: LienardSystem, x_table_max: float = 12.0, nodes_per_unit: int = 600):
        if x_table_max <= system.b + 1e-9:
            raise DomainError("x_table_max must exceed b")
        self.system = system
        self.b = system.b
        self.x_table_max = float(x_table_max)
        v_max = math.sqrt(self.x_table_max - self.b)
        n = max(801, int(nodes_per_unit * v_max) + 1)
        v = np.linspace(0.0, v_max, n)
        # per-segment Gauss-Legendre accumulation of int 2 w sqrt(h(b + w^2)) dw
        gl_x, gl_w = np.polynomial.legendre.leggauss(12)
        mid = 0.5 * (v[1:] + v[:-1])
        half = 0.5 * np.diff(v)
        pts = mid[:, None] + half[:, None] * gl_x[None, :]
        vals = 2.0 * pts * np.sqrt(np.maximum(system.h(self.b + pts**2), 0.0))
        seg = half * (vals @ gl_w)
        g = np.concatenate([[0.0], np.cumsum(seg)])
        slope = 2.0 * v * np.sqrt(np.maximum(system.h(self.b + v**2), 0.0))
        self._v = v
        self._g = g
        self._x = self.b + v**2
        self._spline = CubicHermiteSpline(v, g, slope)
        self._g_max = float(g[-1])

    # -- forward evaluation --------------------------------------------------

    def eval(self, x):
        """g at signed position(s) x with |x| >= b (odd extension)."""
        arr = np.asarray(x, dtype=float)
        mag = np.abs(arr)
        if np.any(mag < self.b - 1e-9):
            raise DomainError(f"g is defined only for |x| >= b = {self.b}")
        v = np.sqrt(np.maximum(mag - self.b, 0.0))
        out = np.where(v <= self._v[-1], self._spline(np.minimum(v, self._v[-1])), np.nan)
        if np.any(np.isnan(out)):
            flat = np.atleast_1d(out)
            vflat = np.atleast_1d(v)
            for i in np.flatnonzero(np.isnan(flat)):
                flat[i] = self._quad_tail(vflat[i])
            out = flat.reshape(np.shape(out))
        out = out * np.sign(arr)
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    def _quad_tail(self, v):
        val, _ = quad(
            lambda w: 2.0 * w * math.sqrt(max(self.system.h(self.b + w * w), 0.0)),
            self._v[-1],
            v,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        return self._g_max + val

    # -- inversion -------------------------------------------------------------

    def invert(self, y: float) -> float:
        """The unique x >= b with g(x) = y, for y >= 0."""
        y = float(y)
        if y < 0.0:
            raise DomainError(f"g_invert requires y >= 0, got {y}")
        if y == 0.0:
            return self.b
        if y <= self._g_max:
            roots = self._spline.solve(y, extrapolate=False)
            v = float(roots[0])
            return self.b + v * v
        hi = self.x_table_max
        step = max(1.0, self.x_table_max)
        while self.eval(hi) < y:
            hi += step
            step *= 2.0
            if hi > 1e6:
                raise DomainError(f"g_invert target {y} out of reach")
        return brentq(lambda x: self.eval(x) - y, self.x_table_max, hi, xtol=1e-12, rtol=8.9e-16)

    def invert_many(self, y: np.ndarray) -> np.ndarray:
        """Vectorized inverse on y >= 0: table interpolation plus Newton polish."""
        y = np.asarray(y, dtype=float)
        if np.any(y < -1e-15) or np.any(y > self._g_max):
            return np.array([self.invert(max(yi, 0.0)) for yi in np.atleast_1d(y)])
        u = np.interp(np.maximum(y, 0.0), self._g, self._x)
        for _ in range(3):
            v = np.sqrt(np.maximum(u - self.b, 0.0))
            resid = self._spline(v) - y
            deriv = np.sqrt(np.maximum(self.system.h(u), 1e-300))
            u = np.maximum(u - resid / deriv, self.b)
        return u


_GF_CACHE: dict[tuple[LienardSystem, float], GFunction] = {}


def gfunction_for(sys: LienardSystem, x_needed: float = 0.0) -> GFunction:
    """Shared per-system g-function cache, sized to cover |x_needed|."""
    xmax = 12.0
    while xmax < abs(x_needed) + 1.0:
        xmax *= 2.0
    key = (sys, xmax)
    if key not in _GF_CACHE:
        _GF_CACHE[key] = GFunction(sys, x_table_max=xmax)
    return _GF_CACHE[key]


def g_eval(gf: GFunction, x: float) -> float:
    """Signed antiderivative of sqrt(h) anchored at g(b) = 0."""
    return gf.eval(x)


def g_invert(gf: GFunction, y: float) -> float:
    """Inverse of g on the right half-plane (y >= 0)."""
    return gf.invert(y)


# ---------------------------------------------------------------------------
# optimal paths
# ---------------------------------------------------------------------------


def _check_feasible(sys: LienardSystem, x10: float, x1f: float) -> int:
    if abs(x10) < sys.b - EDGE_TOL or abs(x1f) < sys.b - EDGE_TOL:
        raise NoSolutionError(
            f"both endpoints must satisfy |x1| >= b = {sys.b} "
            f"(got x10 = {x10}, x1f = {x1f}); no minimiser exists otherwise"
        )
    if math.copysign(1.0, x10) != math.copysign(1.0, x1f):
        raise NoSolutionError(
            f"endpoints must lie in the same half-plane, got x10 = {x10}, x1f = {x1f}"
        )
    return 1 if x10 > 0 else -1


class ElPath:
    """The work-minimising position history between two anchored positions.

    Callable: path(t) -> PhasePoint for t in [0, t_f]; x1/x2 accept arrays.
    The motion conserves x1' sqrt(h(x1)); C0 and C1 are the affine
    coefficients of g(|x1|) in time, computed in the right half-plane.
    """

    def __init__(self, system: LienardSystem, x10: float, x1f: float, t_f: float,
                 gf: Optional[GFunction] = None):
        if not (t_f > 0.0):
            raise DomainError(f"t_f must be positive, got {t_f}")
        self.sign = _check_feasible(system, x10, x1f)
        self.system = system
        self.x10 = float(x10)
        self.x1f = float(x1f)
        self.t_f = float(t_f)
        self.gf = gf if gf is not None else gfunction_for(system, max(abs(x10), abs(x1f)))
        self.C0 = self.gf.eval(abs(x10))
        self.C1 = (self.gf.eval(abs(x1f)) - self.C0) / self.t_f

    def x1(self, t):
        t = np.asarray(t, dtype=float)
        if self.C1 == 0.0:
            out = np.full_like(t, self.x10)
            return float(out) if t.ndim == 0 else out
        y = self.C0 + self.C1 * np.clip(t, 0.0, self.t_f)
        u = self.gf.invert_many(np.atleast_1d(y))
        out = self.sign * u
        return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def x2(self, t):
        t = np.asarray(t, dtype=float)
        if self.C1 == 0.0:
            out = np.zeros_like(t)
            return float(out) if t.ndim == 0 else out
        x1 = np.atleast_1d(self.x1(t))
        with np.errstate(divide="ignore"):
            out = self.sign * self.C1 / np.sqrt(np.maximum(self.system.h(x1), 0.0))
        return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def __call__(self, t: float) -> PhasePoint:
        return PhasePoint(float(self.x1(t)), float(self.x2(t)))

    @property
    def velocity_start(self) -> float:
        """x2(0+), the velocity the path jumps to after the initial kick."""
        return self._edge_velocity(self.x10)

    @property
    def velocity_end(self) -> float:
        """x2(t_f-), the velocity just before the terminal kick."""
        return self._edge_velocity(self.x1f)

    def _edge_velocity(self, x: float) -> float:
        if self.C1 == 0.0:
            return 0.0
        h = self.system.h(abs(x))
        if h <= 0.0:
            return math.inf if self.sign * self.C1 > 0 else -math.inf
        return self.sign * self.C1 / math.sqrt(h)


def solve_el_path(
    sys: LienardSystem, x10: float, x1f: float, t_f: float, gf: Optional[GFunction] = None
) -> ElPath:
    """Closed-form work-minimising path with positions anchored at both ends."""
    return ElPath(sys, x10, x1f, t_f, gf=gf)


# ---------------------------------------------------------------------------
# plans: endpoint choice, impulses, force, minimum work
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalPlan:
    """A fully determined driving protocol onto the limit cycle.

    endpoint_case is "T2_stay" when the endpoint keeps the start position
    (zero damping-channel work), "T1_extreme" when it is the cycle's extreme
    point, or "forced" for a user-pinned endpoint.  impulse_start/impulse_end
    are the velocity jumps applied at t = 0+ and t = t_f-.
    """

    system: LienardSystem
    x10: float
    x20: float
    x1f: float
    x2f: float
    t_f: float
    C0: float
    C1: float
    endpoint_case: str
    impulse_start: float
    impulse_end: float
    w_nc_min: float
    branch: Optional[str] = None

    @property
    def s_f(self) -> float:
        return self.t_f / self.system.mu

    @property
    def sign(self) -> int:
        return 1 if self.x10 > 0 else -1

    def path(self, gf: Optional[GFunction] = None) -> ElPath:
        return ElPath(self.system, self.x10, self.x1f, self.t_f, gf=gf)


def choose_endpoint_nc(sys: LienardSystem, lc: LimitCycle, x10: float) -> tuple[float, str]:
    """Transversality-selected endpoint: the on-cycle position closest in x1."""
    if abs(x10) < sys.b - EDGE_TOL:
        raise NoSolutionError(
            f"|x10| = {abs(x10)} lies inside the active region (b = {sys.b}); no minimiser"
        )
    if abs(x10) <= lc.x_max:
        return x10, "T2_stay"
    return math.copysign(lc.x_max, x10), "T1_extreme"


def make_plan(
    sys: LienardSystem,
    lc: LimitCycle,
    x10: float,
    x20: float,
    t_f: Optional[float] = None,
    s_f: Optional[float] = None,
    x1f: Optional[float] = None,
    branch: Optional[str] = None,
    gf: Optional[GFunction] = None,
) -> OptimalPlan:
    """Assemble the minimum-damping-work plan from a start point to the cycle.

    Exactly one of t_f / s_f must be given (s_f = t_f / mu).  x1f pins the
    endpoint (it must lie on the cycle); branch picks the on-cycle velocity
    sign when the endpoint is interior, defaulting to the branch needing the
    smaller terminal kick.
    """
    if (t_f is None) == (s_f is None):
        raise DomainError("exactly one of t_f and s_f must be provided")
    if t_f is None:
        t_f = sys.mu * s_f
    if not (t_f > 0.0):
        raise DomainError(f"connection time must be positive, got t_f = {t_f}")

    chosen, case = choose_endpoint_nc(sys, lc, x10)
    if x1f is None:
        x1f = chosen
    else:
        x1f = float(x1f)
        if abs(x1f) > lc.x_max + 1e-9:
            raise DomainError(
                f"forced endpoint |x1f| = {abs(x1f)} lies beyond the cycle extent {lc.x_max}"
            )
        x1f = math.copysign(min(abs(x1f), lc.x_max), x1f)
        if x1f != chosen:
            case = "forced"

    gf = gf if gf is not None else gfunction_for(sys, max(abs(x10), abs(x1f)))
    path = ElPath(sys, x10, x1f, t_f, gf=gf)

    if abs(x1f) >= lc.x_max - EDGE_TOL:
        x2f = 0.0
        branch = None
    else:
        v_end = path.velocity_end
        if branch is None:
            up = branch_velocity(lc, x1f, "upper")
            lo = branch_velocity(lc, x1f, "lower")
            branch = "upper" if abs(up - v_end) <= abs(lo - v_end) else "lower"
        x2f = branch_velocity(lc, x1f, branch)

    w_nc = sys.mu * path.C1**2 * t_f
    return OptimalPlan(
        system=sys,
        x10=float(x10),
        x20=float(x20),
        x1f=x1f,
        x2f=x2f,
        t_f=float(t_f),
        C0=path.C0,
        C1=path.C1,
        endpoint_case=case,
        impulse_start=path.velocity_start - x20,
        impulse_end=x2f - path.velocity_end,
        w_nc_min=w_nc,
        branch=branch,
    )


def synthesize_force(sys: LienardSystem, plan: OptimalPlan, gf: Optional[GFunction] = None) -> ForceProfile:
    """Driving force realising the plan: smooth part plus endpoint kicks.

    Along the path, F = -C1s^2 h'(x1) / (2 h(x1)^2) + mu C1s sqrt(h(x1)) + dV(x1)
    with C1s = x1' sqrt(h(x1)) the signed motion constant.  The kicks at t = 0+
    and t = t_f- carry the velocity boundary conditions.
    """
    if plan.C1 != 0.0 and (
        abs(plan.x10) <= sys.b + EDGE_TOL or abs(plan.x1f) <= sys.b + EDGE_TOL
    ):
        raise SingularForceError(
            "force diverges when a moving path touches h = 0 at |x1| = b"
        )
    path = plan.path(gf)
    c1s = path.sign * path.C1
    mu, h, h_prime, dV = sys.mu, sys.h, sys.h_prime, sys.dV

    if plan.C1 == 0.0:
        const = float(dV(plan.x10))
        smooth = lambda t: const  # noqa: E731 - trivial closure
    else:

        def smooth(t):
            x1 = float(path.x1(t))
            hv = h(x1)
            return -c1s * c1s * h_prime(x1) / (2.0 * hv * hv) + mu * c1s * math.sqrt(hv) + dV(x1)

    impulses = [
        (t, dv)
        for t, dv in ((0.0, plan.impulse_start), (plan.t_f, plan.impulse_end))
        if dv != 0.0
    ]
    return ForceProfile(smooth=smooth, impulses=tuple(impulses))


def wnc_min(
    sys: LienardSystem,
    lc: LimitCycle,
    x10: float,
    s_f: float,
    gf: Optional[GFunction] = None,
) -> float:
    """Minimum damping-channel work to reach the cycle in scaled time s_f.

    Zero whenever the start position lies between the cycle extremes;
    otherwise mu C1^2 t_f, which collapses to (g(x_max) - g(|x10|))^2 / s_f.
    """
    if not (s_f > 0.0):
        raise DomainError(f"s_f must be positive, got {s_f}")
    if abs(x10) < sys.b - EDGE_TOL:
        raise NoSolutionError(f"|x10| = {abs(x10)} lies inside the active region")
    if abs(x10) <= lc.x_max:
        return 0.0
    gf = gf if gf is not None else gfunction_for(sys, abs(x10))
    t_f = sys.mu * s_f
    c1 = (gf.eval(lc.x_max) - gf.eval(abs(x10))) / t_f
    return sys.mu * c1 * c1 * t_f


def speed_limit(
    sys: LienardSystem,
    lc: LimitCycle,
    x10: float,
    w_budget: float,
    gf: Optional[GFunction] = None,
) -> float:
    """Smallest scaled time that keeps the damping-channel work within budget."""
    if not (w_budget > 0.0):
        raise DomainError(f"work budget must be positive, got {w_budget}")
    if abs(x10) < sys.b - EDGE_TOL:
        raise NoSolutionError(f"|x10| = {abs(x10)} lies inside the active region")
    if abs(x10) <= lc.x_max:
        return 0.0
    gf = gf if gf is not None else gfunction_for(sys, abs(x10))
    dg = gf.eval(lc.x_max) - gf.eval(abs(x10))
    return dg * dg / w_budget
