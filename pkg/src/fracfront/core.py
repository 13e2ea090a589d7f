"""Problem definition shared by every other module.

The continuous problem is

    (-dxx)^a phi + c phi' = f(phi)   on R,
    phi(-inf) = 0,  phi(+inf) = 1,   phi(0) = theta,

with fractional order a in (1/2, 1), an ignition nonlinearity f
(nonnegative, supported on [theta, 1], f'(1) < 0) and the operator
normalization constant c_a fixed so that the singular-integral form of
(-dxx)^a has Fourier symbol |xi|^(2a).

This module holds the immutable value types: the nonlinearity families,
the problem spec, uniform grids with exterior states, grid profiles and
the converged front container.  Everything here is pure data plus pure
functions; instances are safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np
from scipy.special import gamma as _gamma


# ---------------------------------------------------------------------------
#  operator normalization constant
# ---------------------------------------------------------------------------

def normalization_constant(alpha: float) -> float:
    """Constant c_a making the singular integral match the symbol |xi|^(2a).

        c_a = 4^a Gamma(a + 1/2) / (sqrt(pi) |Gamma(-a)|)

    Valid for a in (0, 1); the endpoints are rejected (Gamma poles).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return 4.0**alpha * _gamma(alpha + 0.5) / (math.sqrt(math.pi) * abs(_gamma(-alpha)))


# ---------------------------------------------------------------------------
#  ignition nonlinearities
# ---------------------------------------------------------------------------

# Families keyed by tag.  Each entry: (f(u; theta), Lipschitz bound on [0,1]).
# The two production families vanish outside [theta, 1] identically and have
# f'(1) < 0; "linear_ramp" and "zero" deliberately violate the ignition
# conditions and exist for validation tests only.

def _f_quadratic(u: np.ndarray, theta: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = (u > theta) & (u < 1.0)
    return np.where(inside, (u - theta) * (1.0 - u), 0.0)


def _f_quadratic_squared(u: np.ndarray, theta: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = (u > theta) & (u < 1.0)
    return np.where(inside, (u - theta) ** 2 * (1.0 - u), 0.0)


def _f_linear_ramp(u: np.ndarray, theta: float) -> np.ndarray:
    # broken on purpose: f(1-) = 1 - theta != 0, so supp f != [theta, 1]
    u = np.asarray(u, dtype=float)
    inside = (u > theta) & (u < 1.0)
    return np.where(inside, u - theta, 0.0)


def _f_zero(u: np.ndarray, theta: float) -> np.ndarray:
    return np.zeros_like(np.asarray(u, dtype=float))


_FAMILIES: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "quadratic": _f_quadratic,
    "quadratic_squared": _f_quadratic_squared,
    "linear_ramp": _f_linear_ramp,
    "zero": _f_zero,
}


def _lipschitz_bound(family: str, theta: float) -> float:
    # analytic sup |f'| on [0,1] per family (kink at theta included)
    if family == "quadratic":
        return 1.0 - theta
    if family == "quadratic_squared":
        return (1.0 - theta) ** 2
    if family == "linear_ramp":
        return 1.0
    if family == "zero":
        return 0.0
    raise ValueError(f"unknown nonlinearity family {family!r}")


@dataclass(frozen=True)
class IgnitionNonlinearity:
    """Reaction term u -> f(u), vanishing below the ignition level theta.

    ``sup_f`` is filled by :meth:`create` (dense scan plus golden-section
    refinement) and cached; ``lipschitz`` is the analytic bound used as the
    damping constant of the monotone iteration.
    """

    theta: float
    family: str = "quadratic"
    sup_f: float = 0.0
    lipschitz: float = 0.0

    @staticmethod
    def create(theta: float, family: str = "quadratic") -> "IgnitionNonlinearity":
        if not (0.0 < theta < 1.0):
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        if family not in _FAMILIES:
            raise ValueError(f"unknown nonlinearity family {family!r}; "
                             f"choose from {sorted(_FAMILIES)}")
        fn = IgnitionNonlinearity(theta=theta, family=family)
        sup_f = _scan_supremum(fn)
        lip = _lipschitz_bound(family, theta)
        return IgnitionNonlinearity(theta=theta, family=family, sup_f=sup_f, lipschitz=lip)

    def __call__(self, u) :
        return eval_nonlinearity(self, u)

    def derivative(self, u) -> np.ndarray:
        """Pointwise f'(u) (interior branch; 0 outside the support)."""
        u = np.asarray(u, dtype=float)
        th = self.theta
        inside = (u > th) & (u < 1.0)
        if self.family == "quadratic":
            d = 1.0 + th - 2.0 * u
        elif self.family == "quadratic_squared":
            d = (u - th) * (2.0 + th - 3.0 * u)
        elif self.family == "linear_ramp":
            d = np.ones_like(u)
        else:
            d = np.zeros_like(u)
        return np.where(inside, d, 0.0)


def eval_nonlinearity(f: IgnitionNonlinearity, u):
    """f(u); exactly zero for u <= theta and u >= 1."""
    out = _FAMILIES[f.family](u, f.theta)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


def _scan_supremum(f: IgnitionNonlinearity, n_scan: int = 4001) -> float:
    """sup f on [theta, 1] by dense sampling plus golden-section refinement."""
    us = np.linspace(f.theta, 1.0, n_scan)
    vals = _FAMILIES[f.family](us, f.theta)
    k = int(np.argmax(vals))
    if vals[k] <= 0.0:
        return 0.0
    lo = us[max(k - 1, 0)]
    hi = us[min(k + 1, n_scan - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = float(_FAMILIES[f.family](np.asarray(c), f.theta))
    fd = float(_FAMILIES[f.family](np.asarray(d), f.theta))
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(_FAMILIES[f.family](np.asarray(c), f.theta))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(_FAMILIES[f.family](np.asarray(d), f.theta))
    u_star = 0.5 * (a + b)
    return float(_FAMILIES[f.family](np.asarray(u_star), f.theta))


@dataclass(frozen=True)
class NonlinearityReport:
    """Outcome of the structural checks on a nonlinearity."""

    nonnegative: bool
    support_in_theta_one: bool
    continuous: bool
    derivative_at_one_negative: bool
    nondegenerate: bool
    f_prime_at_one: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


class NonlinearityValidationError(ValueError):
    """Raised when a nonlinearity violates the ignition conditions."""

    def __init__(self, report: NonlinearityReport):
        self.report = report
        super().__init__("nonlinearity validation failed: " + ", ".join(report.failures))


def validate_nonlinearity(f: IgnitionNonlinearity, n_samples: int = 2001) -> NonlinearityReport:
    """Sample f on [-1, 2] and check the ignition structure.

    Checks: nonnegativity, support contained in [theta, 1], continuity
    (no jump above lipschitz * spacing, with slack for the sampling), a
    negative one-sided derivative at u = 1, and nondegeneracy (sup f > 0).
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    us = np.linspace(-1.0, 2.0, n_samples)
    du = us[1] - us[0]
    vals = _FAMILIES[f.family](us, f.theta)

    nonneg = bool(np.all(vals >= 0.0))
    outside = (us <= f.theta) | (us >= 1.0)
    support_ok = bool(np.all(vals[outside] == 0.0))
    lip = max(_lipschitz_bound(f.family, f.theta), 1.0)
    jumps = np.abs(np.diff(vals))
    continuous = bool(np.all(jumps <= 2.0 * lip * du + 1e-12))
    delta = 1e-5
    fp1 = (float(_FAMILIES[f.family](np.asarray(1.0), f.theta))
           - float(_FAMILIES[f.family](np.asarray(1.0 - delta), f.theta))) / delta
    deriv_ok = fp1 < 0.0
    sup_f = float(vals.max())
    nondeg = sup_f > 0.0

    failures = []
    if not nonneg:
        failures.append("f(u) >= 0")
    if not support_ok:
        failures.append("supp f = [theta, 1]")
    if not continuous:
        failures.append("continuity")
    if not deriv_ok:
        failures.append("f'(1) < 0")
    if not nondeg:
        failures.append("sup f > 0")
    return NonlinearityReport(
        nonnegative=nonneg,
        support_in_theta_one=support_ok,
        continuous=continuous,
        derivative_at_one_negative=deriv_ok,
        nondegenerate=nondeg,
        f_prime_at_one=fp1,
        failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
#  problem spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Identity of the continuous problem: (alpha, theta, f, c_alpha)."""

    alpha: float
    theta: float
    nonlinearity: IgnitionNonlinearity
    c_alpha: float

    @staticmethod
    def create(alpha: float, theta: float = 0.3,
               family: str = "quadratic") -> "ProblemSpec":
        if not (0.5 < alpha < 1.0):
            raise ValueError(
                f"alpha must lie strictly in (1/2, 1); got {alpha}. "
                "alpha = 1 is served by the classical oracle module only.")
        f = IgnitionNonlinearity.create(theta, family)
        report = validate_nonlinearity(f)
        if not report.passed:
            raise NonlinearityValidationError(report)
        return ProblemSpec(alpha=alpha, theta=theta, nonlinearity=f,
                           c_alpha=normalization_constant(alpha))

    @property
    def beta_profile(self) -> float:
        """Tail exponent 2a - 1 of the front profile."""
        return 2.0 * self.alpha - 1.0

    @property
    def sup_f(self) -> float:
        return self.nonlinearity.sup_f


# ---------------------------------------------------------------------------
#  grids and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform symmetric mesh on [-b, b] with 0 as an exact node.

    n must be odd so the normalization phi(0) = theta is imposed at a node
    without interpolation.  h = 2b/(n-1); nodes are built as integer
    multiples of h so the center is exactly 0.0.
    """

    half_width: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"n must be odd and >= 3, got {self.n}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        m = (self.n - 1) // 2
        h = self.half_width / m
        object.__setattr__(self, "h", h)
        nodes = (np.arange(self.n) - m) * h
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def center_index(self) -> int:
        return (self.n - 1) // 2

    @property
    def b(self) -> float:
        return self.half_width

    @staticmethod
    def from_spacing(half_width: float, h: float) -> "Grid":
        """Grid with node count chosen so spacing is as close to h as possible."""
        m = max(int(round(half_width / h)), 1)
        return Grid(half_width=half_width, n=2 * m + 1)


@dataclass
class Profile:
    """Grid samples of a candidate solution plus prescribed exterior states."""

    grid: Grid
    values: np.ndarray
    exterior_left: float = 0.0
    exterior_right: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"values must have shape ({self.grid.n},)")

    def is_monotone(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    def within_range(self, tol_overshoot: float = 0.0) -> bool:
        lo = min(self.exterior_left, self.exterior_right) - tol_overshoot
        hi = max(self.exterior_left, self.exterior_right) + tol_overshoot
        return bool(self.values.min() >= lo and self.values.max() <= hi)

    def derivative(self) -> np.ndarray:
        """Centered first differences (one-sided at the two end nodes)."""
        return np.gradient(self.values, self.grid.h)

    def value_at_zero(self) -> float:
        return float(self.values[self.grid.center_index])

    def copy(self) -> "Profile":
        return Profile(self.grid, self.values.copy(),
                       self.exterior_left, self.exterior_right)


def resample_profile(p: Profile, grid: Grid) -> Profile:
    """Linear interpolation onto a new grid, exterior states used as fill."""
    vals = np.interp(grid.nodes, p.grid.nodes, p.values,
                     left=p.exterior_left, right=p.exterior_right)
    return Profile(grid, vals, p.exterior_left, p.exterior_right)


# ---------------------------------------------------------------------------
#  solution containers
# ---------------------------------------------------------------------------

@dataclass
class ContinuationStage:
    b: float
    n: int
    c_b: float
    residual: float
    center_values: tuple[float, ...]


@dataclass
class DiagnosticsRecord:
    residual_norm: float = math.nan
    conservation_residual: float = math.nan
    conservation_scale: float = math.nan
    speed_mass_residual: float = math.nan
    speed_mass_residual_raw: float = math.nan
    gamma0: float = math.nan
    gamma1: float = math.nan
    gamma0_flat: bool = True
    gamma1_flat: bool = True
    speed_bound: float = math.nan
    history: list[ContinuationStage] = field(default_factory=list)
    tail_fits: dict = field(default_factory=dict)
    domination: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class FrontSolution:
    """Converged pair (phi_0, c_0) with attached diagnostics."""

    profile: Profile
    speed: float
    diagnostics: DiagnosticsRecord

    def theta_pinning_error(self, theta: float) -> float:
        return abs(self.profile.value_at_zero() - theta)
