"""Independent oracles that cross-check the closed-form machinery.

Every analytic result has a second, independently coded route here: the work
integral is recomputed by hand-rolled composite Simpson quadrature, the
optimal path by shooting on its governing ODE (no g-function involved),
optimality by random smooth perturbations, and the synthesized force by
closed-loop replay through the time integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .core import LienardSystem, PhasePoint, Trajectory
from .errors import DomainError, NoSolutionError, OracleFailure
from .integrate import ForceProfile, IntegratorConfig, integrate_driven
from .limit_cycle import LimitCycle, distance_to_cycle
from .nc_optimal import OptimalPlan, synthesize_force

REPLAY_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def merged_with(self, other: "VerificationReport") -> "VerificationReport":
        return VerificationReport(self.checks + other.checks)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "measured": c.measured,
                    "expected": c.expected,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def _check(name, measured, expected, tolerance) -> CheckResult:
    return CheckResult(
        name, float(measured), float(expected), float(tolerance),
        bool(abs(measured - expected) <= tolerance),
    )


def _eval_path(path, ts):
    """(x1, x2) arrays for either a vectorized path or a scalar callable."""
    if hasattr(path, "x1") and hasattr(path, "x2"):
        return np.asarray(path.x1(ts)), np.asarray(path.x2(ts))
    pts = [path(t) for t in ts]
    return np.array([p.x1 for p in pts]), np.array([p.x2 for p in pts])


def _simpson_uniform(vals: np.ndarray, h: float) -> float:
    # hand-rolled on purpose: this is the independent quadrature route
    return h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum())


def oracle_wnc_quadrature(sys: LienardSystem, path, t_f: float, n: int = 2000) -> float:
    """Damping-channel work along an arbitrary path by composite Simpson.

    Uses n and 2n subintervals; the Richardson gap |S_2n - S_n| / 15 must be
    below 1e-10, otherwise the value is not trusted and OracleFailure is
    raised.
    """
    if n < 1000:
        raise DomainError(f"oracle needs n >= 1000 subintervals, got {n}")
    n += n % 2  # Simpson needs an even subinterval count
    values = {}
    for m in (n, 2 * n):
        ts = np.linspace(0.0, t_f, m + 1)
        x1, x2 = _eval_path(path, ts)
        integrand = sys.mu * sys.h(x1) * x2**2
        values[m] = _simpson_uniform(integrand, t_f / m)
    err = abs(values[2 * n] - values[n]) / 15.0
    if err > 1e-10:
        raise OracleFailure(
            f"Simpson work quadrature did not settle (Richardson gap {err:.2e})"
        )
    return float(values[2 * n])


class BvpPath:
    """Shooting solution of the path ODE h(x1) x1'' + h'(x1) x1'^2 / 2 = 0.

    Shares nothing with the g-function route beyond the system definition;
    used to cross-validate the closed-form path.
    """

    def __init__(self, sys: LienardSystem, x10: float, x1f: float, t_f: float,
                 sign: int, sol=None):
        self.system = sys
        self.x10, self.x1f, self.t_f, self.sign = x10, x1f, t_f, sign
        self._sol = sol  # None for the constant path

    def x1(self, t):
        t = np.asarray(t, dtype=float)
        if self._sol is None:
            out = np.full_like(t, self.x10)
        else:
            out = self.sign * self._sol(np.clip(t, 0.0, self.t_f))[0]
        return float(out) if t.ndim == 0 else out

    def x2(self, t):
        t = np.asarray(t, dtype=float)
        if self._sol is None:
            out = np.zeros_like(t)
        else:
            out = self.sign * self._sol(np.clip(t, 0.0, self.t_f))[1]
        return float(out) if t.ndim == 0 else out

    def __call__(self, t: float) -> PhasePoint:
        return PhasePoint(float(self.x1(t)), float(self.x2(t)))


def oracle_el_bvp(sys: LienardSystem, x10: float, x1f: float, t_f: float) -> BvpPath:
    """Two-point boundary-value solution of the path ODE by shooting.

    Integrates u'' = -h'(u) u'^2 / (2 h(u)) in the right half-plane and
    brackets the initial velocity until the endpoint position is hit.
    """
    if not (t_f > 0.0):
        raise DomainError(f"t_f must be positive, got {t_f}")
    if abs(x10) < sys.b - 1e-12 or abs(x1f) < sys.b - 1e-12:
        raise NoSolutionError("both endpoints must satisfy |x1| >= b")
    if math.copysign(1.0, x10) != math.copysign(1.0, x1f):
        raise NoSolutionError("endpoints must lie in the same half-plane")
    sign = 1 if x10 > 0 else -1
    u0, uf = abs(x10), abs(x1f)
    if u0 == uf:
        return BvpPath(sys, x10, x1f, t_f, sign, sol=None)

    h, hp = sys.h, sys.h_prime
    # the converged path stays within [min(u0, uf), max(u0, uf)], so a guard
    # below that range only triggers for overshooting trial velocities
    b_guard = sys.b + 0.5 * (min(u0, uf) - sys.b)

    def ode(t, y):
        u, v = y
        return (v, -hp(u) * v * v / (2.0 * h(u)))

    def edge(t, y):
        return y[0] - b_guard

    edge.terminal = True
    edge.direction = -1

    def endpoint(v0):
        return solve_ivp(
            ode, (0.0, t_f), [u0, v0], method="RK45",
            rtol=1e-12, atol=1e-12, dense_output=True, events=edge,
        )

    def miss(v0):
        sol = endpoint(v0)
        if sol.status == 1 or not sol.success:
            # trial path dived toward the singular edge h = 0: it ends below
            # any admissible target, which fixes the sign for bracketing
            return b_guard - uf
        return sol.y[0, -1] - uf

    v_lin = (uf - u0) / t_f
    lo, hi = 0.0, v_lin
    m_lo = miss(lo)
    m_hi = miss(hi)
    grow = 0
    while m_lo * m_hi > 0:
        hi *= 2.0
        m_hi = miss(hi)
        grow += 1
        if grow > 60:
            raise OracleFailure("could not bracket the shooting velocity")
    v_star = brentq(miss, min(lo, hi), max(lo, hi), xtol=1e-14, rtol=8.9e-16)
    sol = endpoint(v_star)
    if sol.status == 1 or not sol.success:
        raise OracleFailure("converged trial path still hits the singular edge")
    if abs(sol.y[0, -1] - uf) > 1e-9:
        raise OracleFailure(
            f"shooting residual too large: {abs(sol.y[0, -1] - uf):.2e}"
        )
    return BvpPath(sys, x10, x1f, t_f, sign, sol=sol.sol)


# ---------------------------------------------------------------------------
# closed-loop replay and adjoint checks
# ---------------------------------------------------------------------------


def closed_loop_replay(
    sys: LienardSystem,
    lc: LimitCycle,
    plan: OptimalPlan,
    force: Optional[ForceProfile] = None,
    cfg: IntegratorConfig = REPLAY_CONFIG,
    n_periods: int = 5,
) -> VerificationReport:
    """Drive the system with the synthesized force and check it lands and stays.

    Integrates from the plan's start under the force (kicks included), checks
    the terminal point sits within 1e-3 of the cycle, then lets the system
    run free for n_periods and checks the orbit never strays more than 1e-2.
    """
    if force is None:
        force = synthesize_force(sys, plan)
    traj = integrate_driven(sys, PhasePoint(plan.x10, plan.x20), force, plan.t_f, cfg)
    d_term = distance_to_cycle(lc, traj.final)

    free = integrate_driven(
        sys, traj.final, ForceProfile.zero(), n_periods * lc.period, cfg
    )
    idx = np.linspace(0, len(free) - 1, 2001).astype(int)
    d_tube = max(
        distance_to_cycle(lc, PhasePoint(*free.states[i])) for i in idx
    )
    return VerificationReport(
        (
            _check("terminal_distance_to_cycle", d_term, 0.0, 1e-3),
            _check("free_orbit_tube_distance", d_tube, 0.0, 1e-2),
        )
    )


def adjoint_residuals(
    sys: LienardSystem, plan: OptimalPlan, n: int = 201, fd_step: float = 1e-5
) -> VerificationReport:
    """Check the costate identity and the endpoint orthogonality product.

    Along an optimal path the costate p1 = 2 mu h(x1) x2 must satisfy
    p1' = mu h'(x1) x2^2 (checked by central differences), and the chosen
    endpoint must null the product h(x1(tf-)) x2(tf-) x2f.
    """
    path = plan.path()
    margin = max(2.0 * fd_step, 1e-4 * plan.t_f)
    ts = np.linspace(margin, plan.t_f - margin, n)

    def p1(t):
        x1, x2 = path.x1(t), path.x2(t)
        return 2.0 * sys.mu * sys.h(x1) * x2

    dp1 = (p1(ts + fd_step) - p1(ts - fd_step)) / (2.0 * fd_step)
    rhs = sys.mu * sys.h_prime(path.x1(ts)) * path.x2(ts) ** 2
    ode_resid = float(np.max(np.abs(dp1 - rhs)))

    product = 2.0 * sys.mu * sys.h(path.x1f) * path.velocity_end * plan.x2f
    return VerificationReport(
        (
            _check("costate_ode_residual", ode_resid, 0.0, 1e-6),
            _check("transversality_product", product, 0.0, 1e-8),
        )
    )


# ---------------------------------------------------------------------------
# local optimality by smooth perturbations
# ---------------------------------------------------------------------------


class PerturbedPath:
    """Base path plus a clamped cubic-spline bump delta(t), delta = 0 at ends."""

    def __init__(self, base, t_f: float, knot_values: np.ndarray):
        knots = np.linspace(0.0, t_f, len(knot_values))
        self._base = base
        self._bump = CubicSpline(knots, knot_values, bc_type="natural")
        self._dbump = self._bump.derivative()

    def x1(self, t):
        return self._base.x1(t) + self._bump(t)

    def x2(self, t):
        return self._base.x2(t) + self._dbump(t)


def perturbation_margins(
    sys: LienardSystem,
    plan: OptimalPlan,
    n_perturb: int = 50,
    amplitude: float = 1e-2,
    seed: int = 20240901,
    n_knots: int = 6,
    n_quad: int = 2000,
) -> np.ndarray:
    """W_nc(perturbed) - W_nc(plan) for seeded random endpoint-fixed bumps."""
    if amplitude > 1e-2:
        raise DomainError("perturbation amplitude must stay within 1e-2")
    path = plan.path()
    w_plan = oracle_wnc_quadrature(sys, path, plan.t_f, n=n_quad)
    rng = np.random.default_rng(seed)
    margins = np.empty(n_perturb)
    for k in range(n_perturb):
        vals = np.zeros(n_knots + 2)
        vals[1:-1] = rng.uniform(-1.0, 1.0, n_knots) * amplitude
        pert = PerturbedPath(path, plan.t_f, vals)
        margins[k] = oracle_wnc_quadrature(sys, pert, plan.t_f, n=n_quad) - w_plan
    return margins


def local_optimality(
    sys: LienardSystem, plan: OptimalPlan, n_perturb: int = 50, seed: int = 20240901
) -> VerificationReport:
    """No seeded smooth perturbation may undercut the plan's work by > 1e-10."""
    margins = perturbation_margins(sys, plan, n_perturb=n_perturb, seed=seed)
    worst = float(margins.min())
    return VerificationReport(
        (CheckResult("perturbation_min_margin", worst, 0.0, 1e-10, worst >= -1e-10),)
    )
