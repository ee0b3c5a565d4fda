"""Oscillator systems, phase-plane state, force profiles, and work bookkeeping.

The state convention throughout is (x1, x2) = (position, velocity).  A system
is a damped non-linear oscillator

    x'' + mu * h(x) * x' + V'(x) = F(t)

with even polynomial damping shape h and even confining potential V (only its
odd derivative dV = V' is stored).  The undriven dynamics has a unique stable
limit cycle when h has a single positive zero b (damping is active inside
|x| < b, dissipative outside) and the running integral of h has a single
positive zero a beyond which it keeps growing.  ``validate_system`` checks
those conditions on a grid; ``make_van_der_pol`` builds the canonical
instance h = x^2 - 1, V = x^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import ContractViolation, DomainError, SystemValidationError
from .poly import Polynomial

ROOT_TOL = 1e-12  # bracketed root refinement tolerance for b and a


@dataclass(frozen=True)
class LienardSystem:
    """A damped oscillator x'' + mu*h(x)*x' + dV(x) = F with derived constants.

    b is the single positive zero of h (edge of the dissipative region) and a
    the positive zero of xi(x) = int_0^x h.  Instances are immutable and
    hashable; use ``build_system`` or ``make_van_der_pol`` rather than the
    raw constructor so the existence conditions are actually checked.
    """

    mu: float
    h: Polynomial
    dV: Polynomial
    b: float
    a: float

    def __post_init__(self):
        if not (self.mu > 0.0) or not math.isfinite(self.mu):
            raise DomainError(f"damping coefficient must be positive, got {self.mu}")

    @cached_property
    def V(self) -> Polynomial:
        """Potential energy, reconstructed from dV with V(0) = 0."""
        return self.dV.antiderivative()

    @cached_property
    def h_prime(self) -> Polynomial:
        return self.h.derivative()

    @cached_property
    def xi(self) -> Polynomial:
        """Running integral of the damping shape, xi(x) = int_0^x h."""
        return self.h.antiderivative()

    def energy(self, x1, x2):
        """E = x2^2 / 2 + V(x1); accepts scalars or arrays."""
        return 0.5 * np.asarray(x2) ** 2 + self.V(np.asarray(x1))

    def is_van_der_pol(self) -> bool:
        return self.h.coefficients == (-1.0, 0.0, 1.0) and self.dV.coefficients == (0.0, 1.0)


@dataclass(frozen=True)
class PhasePoint:
    """A point (x1, x2) = (position, velocity) on the phase plane."""

    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise DomainError(f"phase point must be finite, got ({self.x1}, {self.x2})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    def reflected(self) -> "PhasePoint":
        return PhasePoint(-self.x1, -self.x2)


@dataclass(frozen=True)
class ForceProfile:
    """Driving force: a smooth part F(t) plus instantaneous velocity kicks.

    Each impulse (t, delta_v) jumps x2 by delta_v at time t without moving x1
    and without doing any damping-channel work.  Impulse times must be
    strictly increasing.
    """

    smooth: Optional[Callable[[float], float]] = None
    impulses: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        imps = tuple((float(t), float(dv)) for t, dv in self.impulses)
        object.__setattr__(self, "impulses", imps)
        times = [t for t, _ in imps]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise DomainError("impulse times must be strictly increasing")
        if any(not (math.isfinite(t) and math.isfinite(dv)) for t, dv in imps):
            raise DomainError("impulse entries must be finite")

    def smooth_at(self, t):
        """Smooth force value(s) at time(s) t; zero when no smooth part is set."""
        if self.smooth is None:
            return np.zeros_like(t, dtype=float) if isinstance(t, np.ndarray) else 0.0
        if isinstance(t, np.ndarray):
            return np.array([float(self.smooth(ti)) for ti in t])
        return float(self.smooth(t))

    @staticmethod
    def zero() -> "ForceProfile":
        return ForceProfile(smooth=None, impulses=())

    @staticmethod
    def constant(value: float) -> "ForceProfile":
        v = float(value)
        return ForceProfile(smooth=lambda t: v, impulses=())


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled phase path, optionally with the force that generated it.

    Times are non-decreasing starting at 0; a repeated time marks an impulse,
    with the pre-jump and post-jump states stored on consecutive rows.
    """

    times: np.ndarray
    states: np.ndarray  # shape (n, 2)
    force: Optional[ForceProfile] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2 or len(t) != len(s):
            raise ContractViolation(
                f"times/states shape mismatch: {t.shape} vs {s.shape}"
            )
        if len(t) == 0:
            raise ContractViolation("trajectory must be non-empty")
        if t[0] != 0.0:
            raise ContractViolation(f"trajectory must start at t=0, got {t[0]}")
        if np.any(np.diff(t) < 0):
            raise ContractViolation("times must be non-decreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def initial(self) -> PhasePoint:
        return PhasePoint(*self.states[0])

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(*self.states[-1])

    def segments(self):
        """Yield (times, states) views split at repeated timestamps (jumps)."""
        breaks = np.flatnonzero(np.diff(self.times) == 0.0)
        start = 0
        for j in breaks:
            if j + 1 > start:
                yield self.times[start : j + 1], self.states[start : j + 1]
            start = j + 1
        yield self.times[start:], self.states[start:]

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Join a trajectory that continues from this one's final sample."""
        if not np.allclose(self.states[-1], other.states[0], rtol=0, atol=1e-9):
            raise ContractViolation("concat requires a shared sample point")
        t2 = other.times + self.times[-1]
        return Trajectory(
            np.concatenate([self.times, t2[1:]]),
            np.vstack([self.states, other.states[1:]]),
            force=self.force,
        )

    def write_csv(self, path) -> None:
        """CSV with header t,x1,x2,F; impulse rows share t with pre/post x2."""
        fvals = (
            self.force.smooth_at(self.times)
            if self.force is not None
            else np.zeros_like(self.times)
        )
        with open(path, "w") as fh:
            fh.write("t,x1,x2,F\n")
            for t, (x1, x2), f in zip(self.times, self.states, fvals):
                fh.write(f"{t:.17g},{x1:.17g},{x2:.17g},{f:.17g}\n")


@dataclass(frozen=True)
class WorkBreakdown:
    """Work split W = delta_E + w_nc along a driven trajectory."""

    delta_E: float
    w_nc: float
    total: float

    @staticmethod
    def of(delta_E: float, w_nc: float) -> "WorkBreakdown":
        return WorkBreakdown(delta_E, w_nc, delta_E + w_nc)


# ---------------------------------------------------------------------------
# system constructors and validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SystemValidationReport:
    """Pass/fail per limit-cycle existence condition, plus the roots found."""

    checks: tuple[ValidationCheck, ...]
    b: Optional[float]
    a: Optional[float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "b": self.b,
            "a": self.a,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


def _single_positive_root(f, grid):
    """First bracketed sign change of f on the grid, refined by Brent's method.

    Returns (root, n_sign_changes).  f must be negative at grid[1] for the
    sign pattern checked here (negative before the root, positive after).
    """
    vals = f(grid)
    sign = np.sign(vals)
    changes = []
    for i in range(1, len(grid) - 1):
        if sign[i] == 0.0:
            changes.append((grid[i], grid[i]))
        elif sign[i] * sign[i + 1] < 0:
            changes.append((grid[i], grid[i + 1]))
    if not changes:
        return None, 0
    lo, hi = changes[0]
    root = lo if lo == hi else brentq(f, lo, hi, xtol=ROOT_TOL, rtol=8.9e-16)
    return root, len(changes)


def validate_system(
    sys: LienardSystem, x_grid_max: float = 10.0, n_grid: int = 2001
) -> SystemValidationReport:
    """Check the limit-cycle existence conditions on [0, x_grid_max].

    Conditions: h even, dV odd, potential confining with single minimum at 0,
    h with a single positive zero b (negative before, positive after), xi with
    a single positive zero a (negative before, non-decreasing beyond), all
    verified on an n_grid-point grid with bracketed root refinement.
    """
    if n_grid < 100:
        raise DomainError(f"n_grid must be at least 100, got {n_grid}")
    if not (x_grid_max > 0):
        raise DomainError("x_grid_max must be positive")

    checks: list[ValidationCheck] = []
    grid = np.linspace(0.0, x_grid_max, n_grid)
    step = grid[1] - grid[0]

    checks.append(
        ValidationCheck("mu_positive", sys.mu > 0.0, f"mu = {sys.mu}")
    )
    checks.append(
        ValidationCheck("h_even", sys.h.is_even(), f"h coefficients {sys.h.coefficients}")
    )
    checks.append(
        ValidationCheck("dV_odd", sys.dV.is_odd(), f"dV coefficients {sys.dV.coefficients}")
    )

    # confinement: x * dV(x) > 0 away from the origin
    interior = grid[1:]
    confining = bool(np.all(interior * sys.dV(interior) > 0.0))
    checks.append(
        ValidationCheck(
            "potential_confining",
            confining,
            "x*dV(x) > 0 on the grid" if confining else "potential not confining",
        )
    )

    # h: single positive zero, negative before, positive after
    b, n_changes = _single_positive_root(sys.h, grid)
    if b is None:
        checks.append(ValidationCheck("h_single_positive_zero", False, "h has no positive zero"))
        checks.append(ValidationCheck("h_sign_pattern", False, "no zero to pattern around"))
    else:
        checks.append(
            ValidationCheck(
                "h_single_positive_zero",
                n_changes == 1,
                f"b = {b:.15g}, sign changes = {n_changes}",
            )
        )
        before = grid[(grid > 0) & (grid < b - step)]
        after = grid[grid > b + step]
        pattern = bool(np.all(sys.h(before) < 0.0)) and bool(np.all(sys.h(after) > 0.0))
        checks.append(
            ValidationCheck(
                "h_sign_pattern",
                pattern,
                "h < 0 on (0,b), h > 0 beyond b" if pattern else "h sign pattern violated",
            )
        )

    # xi: single positive zero a, negative before, non-decreasing beyond
    xi = sys.xi
    a, n_changes_xi = _single_positive_root(xi, grid)
    if a is None:
        checks.append(ValidationCheck("xi_single_positive_zero", False, "xi has no positive zero"))
        checks.append(ValidationCheck("xi_sign_pattern", False, "no zero to pattern around"))
        checks.append(ValidationCheck("xi_nondecreasing_beyond_a", False, "no zero found"))
    else:
        checks.append(
            ValidationCheck(
                "xi_single_positive_zero",
                n_changes_xi == 1,
                f"a = {a:.15g}, sign changes = {n_changes_xi}",
            )
        )
        before = grid[(grid > 0) & (grid < a - step)]
        neg_before = bool(np.all(xi(before) < 0.0))
        checks.append(
            ValidationCheck(
                "xi_sign_pattern",
                neg_before,
                "xi < 0 on (0,a)" if neg_before else "xi sign pattern violated",
            )
        )
        beyond = grid[grid >= a]
        nondecr = bool(np.all(np.diff(xi(beyond)) >= -1e-12))
        checks.append(
            ValidationCheck(
                "xi_nondecreasing_beyond_a",
                nondecr,
                "xi non-decreasing beyond a" if nondecr else "xi decreases beyond a",
            )
        )

    return SystemValidationReport(tuple(checks), b, a)


def build_system(
    mu: float,
    h: Polynomial | list | tuple,
    dV: Polynomial | list | tuple,
    x_grid_max: float = 10.0,
    n_grid: int = 2001,
) -> LienardSystem:
    """Validate a candidate oscillator and construct it, or raise.

    Raises SystemValidationError carrying the full report when any
    limit-cycle existence condition fails.
    """
    if not isinstance(h, Polynomial):
        h = Polynomial(h)
    if not isinstance(dV, Polynomial):
        dV = Polynomial(dV)
    candidate = LienardSystem(mu=float(mu), h=h, dV=dV, b=math.nan, a=math.nan)
    report = validate_system(candidate, x_grid_max=x_grid_max, n_grid=n_grid)
    if not report.passed:
        raise SystemValidationError(report)
    return LienardSystem(mu=float(mu), h=h, dV=dV, b=report.b, a=report.a)


def make_van_der_pol(mu: float) -> LienardSystem:
    """The canonical instance: h = x^2 - 1, dV = x, b = 1, a = sqrt(3)."""
    if not (mu > 0.0):
        raise DomainError(f"damping coefficient must be positive, got {mu}")
    return LienardSystem(
        mu=float(mu),
        h=Polynomial((-1.0, 0.0, 1.0)),
        dV=Polynomial((0.0, 1.0)),
        b=1.0,
        a=math.sqrt(3.0),
    )


# ---------------------------------------------------------------------------
# dynamics and work bookkeeping
# ---------------------------------------------------------------------------


def vector_field(sys: LienardSystem, p: PhasePoint, F: float = 0.0) -> tuple[float, float]:
    """Right-hand side of the driven dynamics at a phase point."""
    return (p.x2, -sys.mu * sys.h(p.x1) * p.x2 - sys.dV(p.x1) + F)


def work_breakdown(sys: LienardSystem, traj: Trajectory) -> WorkBreakdown:
    """Split the external work into conservative and damping-channel parts.

    w_nc = mu * int h(x1) x2^2 dt by composite quadrature over the samples
    (Simpson within each smooth segment); delta_E comes from the endpoint
    energies, so velocity jumps contribute there and never to w_nc.
    """
    if len(traj) == 0:
        raise ContractViolation("trajectory must be non-empty")
    w_nc = 0.0
    for ts, ss in traj.segments():
        if len(ts) < 2:
            continue
        integrand = sys.mu * sys.h(ss[:, 0]) * ss[:, 1] ** 2
        if len(ts) >= 3:
            w_nc += simpson(integrand, x=ts)
        else:
            w_nc += float(np.trapz(integrand, ts))
    e0 = float(sys.energy(*traj.states[0]))
    e1 = float(sys.energy(*traj.states[-1]))
    return WorkBreakdown.of(e1 - e0, w_nc)


# ---------------------------------------------------------------------------
# JSON system definitions
# ---------------------------------------------------------------------------

PRESETS = {"van_der_pol": make_van_der_pol}


def system_from_dict(spec: dict) -> LienardSystem:
    """Build a system from {"mu":..., "h":[...], "dV":[...]} or a preset alias."""
    if "preset" in spec:
        name = spec["preset"]
        if name not in PRESETS:
            raise DomainError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        return PRESETS[name](float(spec["mu"]))
    try:
        mu, h, dV = spec["mu"], spec["h"], spec["dV"]
    except KeyError as err:
        raise DomainError(f"system definition missing key: {err}") from err
    return build_system(float(mu), list(h), list(dV))


def system_to_dict(sys: LienardSystem) -> dict:
    return {
        "mu": sys.mu,
        "h": list(sys.h.coefficients),
        "dV": list(sys.dV.coefficients),
    }
