"""Truncated-domain solver: fixed-speed solves and the speed bracket search.

For fixed c the discrete problem on [-b, b] with exterior states 0/1 is

    A phi + c D phi = f(phi)   at interior nodes,

with A the assembled nonlocal operator and D the upwind first difference
chosen by the sign of c, which keeps the system an M-matrix.  The solve
runs a monotone (sub/super-solution) iteration

    (A + cD + lam I) phi^{k+1} = lam phi^k + f(phi^k),   lam >= Lip(f),

from the ordered envelopes phi = 0 (increasing iterates) and phi = 1
(decreasing iterates), then polishes with a damped Newton step to push the
residual to tolerance.  The front speed on the truncated domain is located
by bisection on g(c) = phi_c(0) - theta over the bracket [-K, K] supplied
by the super-solution speed bound; only the endpoint signs of g are relied
on, not monotonicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import Grid, IgnitionNonlinearity, Profile, ProblemSpec
from .operator import OperatorAssembly, apply as op_apply
from .kernels import supersolution_threshold


class SolverError(RuntimeError):
    pass


class DomainTooSmallError(SolverError):
    """No sign change of g(c) on [-K, K]: the truncation half-width is below
    the threshold the bracketing construction requires."""


# ---------------------------------------------------------------------------
#  drift and residual
# ---------------------------------------------------------------------------

def drift_apply(p: Profile, c: float) -> np.ndarray:
    """Upwind c * phi' at every node (zeros at the boundary nodes)."""
    v = p.values
    h = p.grid.h
    out = np.zeros_like(v)
    if c >= 0.0:
        out[1:-1] = c * (v[1:-1] - v[:-2]) / h
    else:
        out[1:-1] = c * (v[2:] - v[1:-1]) / h
    return out


def equation_residual(assembly: OperatorAssembly, p: Profile, c: float,
                      f: IgnitionNonlinearity) -> np.ndarray:
    """(-dxx)^a phi + c phi' - f(phi) at interior nodes (full-length array)."""
    res = op_apply(assembly, p) + drift_apply(p, c)
    res[1:-1] -= f(p.values[1:-1])
    res[0] = res[-1] = 0.0
    return res


def _interior_system(assembly: OperatorAssembly, c: float,
                     e_left: float, e_right: float):
    """Interior matrix A_I + cD and the constant vector from boundary data."""
    A = assembly.interior_matrix
    n = assembly.grid.n
    h = assembly.grid.h
    AI = A[1:-1, 1:-1].copy()
    const = (A[1:-1, 0] * e_left + A[1:-1, n - 1] * e_right
             + assembly.tail_left[1:-1] * e_left
             + assembly.tail_right[1:-1] * e_right)
    m = n - 2
    idx = np.arange(m)
    if c >= 0.0:
        AI[idx, idx] += c / h
        AI[idx[1:], idx[1:] - 1] -= c / h
        const[0] += -c / h * e_left
    else:
        AI[idx, idx] -= c / h
        AI[idx[:-1], idx[:-1] + 1] += c / h
        const[-1] += c / h * e_right
    return AI, const


# ---------------------------------------------------------------------------
#  fixed-speed solve
# ---------------------------------------------------------------------------

@dataclass
class FixedSpeedSolve:
    speed: float
    profile: Profile
    residual_norm: float
    iterations: int
    method: str                      # "monotone-iteration" | "damped-newton"
    envelope_gap: float = math.nan
    warnings: list[str] = field(default_factory=list)


def solve_fixed_speed(c: float, grid: Grid, f: IgnitionNonlinearity,
                      assembly: OperatorAssembly, *,
                      lam: float | None = None,
                      tol_residual: float | None = None,
                      max_iter: int = 10_000,
                      monotone_steps: int = 30,
                      warm_start: np.ndarray | None = None,
                      e_left: float = 0.0, e_right: float = 1.0) -> FixedSpeedSolve:
    """Solve the fixed-speed truncated problem; see the module docstring."""
    if assembly.grid.n != grid.n or assembly.grid.half_width != grid.half_width:
        raise SolverError("assembly grid does not match the requested grid")
    if lam is None:
        lam = max(f.lipschitz, 1e-8)
    if tol_residual is None:
        tol_residual = 1e-8 * (1.0 + f.sup_f)
    n = grid.n
    m = n - 2
    AI, const = _interior_system(assembly, c, e_left, e_right)

    def full_profile(v: np.ndarray) -> Profile:
        vals = np.empty(n)
        vals[0], vals[-1] = e_left, e_right
        vals[1:-1] = v
        return Profile(grid, vals, e_left, e_right)

    def Fres(v: np.ndarray) -> np.ndarray:
        return AI @ v + const - f(v)

    iterations = 0
    gap = math.nan
    warnings_out: list[str] = []

    def try_newton(v0: np.ndarray, budget: int):
        """Damped Newton; returns (v, rnorm, ok, iters_used)."""
        v = v0.copy()
        res = Fres(v)
        rnorm = float(np.max(np.abs(res)))
        used = 0
        for _ in range(budget):
            if rnorm <= 0.5 * tol_residual:
                return v, rnorm, True, used
            used += 1
            J = AI - np.diag(f.derivative(v))
            try:
                step = sla.solve(J, -res)
            except sla.LinAlgError:
                return v, rnorm, False, used
            t = 1.0
            improved = False
            for _ in range(30):
                v_try = v + t * step
                res_try = Fres(v_try)
                r_try = float(np.max(np.abs(res_try)))
                if r_try < rnorm * (1.0 - 1e-4 * t) or r_try <= 0.5 * tol_residual:
                    v, res, rnorm = v_try, res_try, r_try
                    improved = True
                    break
                t *= 0.5
            if not improved:
                return v, rnorm, False, used
        return v, rnorm, rnorm <= tol_residual, used

    method = "damped-newton"
    v = None
    rnorm = math.inf
    if warm_start is not None:
        v0 = warm_start[1:-1].copy() if warm_start.shape == (n,) else warm_start.copy()
        v, rnorm, ok, used = try_newton(v0, 60)
        iterations += used
        if not ok:
            warnings_out.append("warm-start-newton-fallback")
            v = None

    if v is None or rnorm > tol_residual:
        # monotone envelopes from the constant sub/super-solutions, with
        # Newton retries once the squeeze has made enough progress
        lu = sla.lu_factor(AI + lam * np.eye(m))
        lo = np.full(m, min(e_left, e_right))
        hi = np.full(m, max(e_left, e_right))
        converged = False
        while iterations < max_iter:
            block = min(monotone_steps, max_iter - iterations)
            for _ in range(block):
                # squeeze inward; rounding excursions outside the envelope
                # order are clipped so monotonicity of the iterates is exact
                lo = np.maximum(lo, sla.lu_solve(lu, lam * lo + f(lo) - const))
                hi = np.minimum(hi, sla.lu_solve(lu, lam * hi + f(hi) - const))
                iterations += 1
                gap = float(np.max(hi - lo))
                if gap <= tol_residual:
                    break
            v = 0.5 * (lo + hi)
            if gap <= tol_residual:
                method = "monotone-iteration"
                converged = True
                break
            v, rnorm, ok, used = try_newton(v, 40)
            iterations += used
            if ok:
                converged = True
                break
        if not converged:
            res = Fres(0.5 * (lo + hi))
            raise SolverError(
                f"envelopes failed to converge within {max_iter} iterations; "
                f"gap {gap:.3e}, residual {float(np.max(np.abs(res))):.3e}")
        if method == "monotone-iteration":
            warnings_out.append("newton-bypassed")
    res = Fres(v)
    rnorm = float(np.max(np.abs(res)))

    # discrete comparison keeps the exact solution in [0,1]; shave rounding
    overshoot = max(float(-v.min() + min(e_left, e_right)),
                    float(v.max() - max(e_left, e_right)))
    if overshoot > 1e-8:
        warnings_out.append(f"range-overshoot {overshoot:.2e}")
    np.clip(v, min(e_left, e_right), max(e_left, e_right), out=v)
    res = Fres(v)
    rnorm = float(np.max(np.abs(res)))

    return FixedSpeedSolve(speed=c, profile=full_profile(v), residual_norm=rnorm,
                           iterations=iterations, method=method,
                           envelope_gap=gap, warnings=warnings_out)


# ---------------------------------------------------------------------------
#  speed bound and shooting
# ---------------------------------------------------------------------------

def speed_bound(spec: ProblemSpec) -> float:
    """Bisection bracket K: the certified super-solution speed, augmented by
    the explicit intermediate-region constraint c (2a-1) / A^(2a) >= sup f."""
    th = supersolution_threshold(spec)
    beta = 2.0 * spec.alpha - 1.0
    K_mid = th.crossing_A ** (2.0 * spec.alpha) * spec.sup_f / beta
    return max(th.K, K_mid)


@dataclass
class SpeedBracket:
    c_low: float
    c_high: float
    g_low: float
    g_high: float

    def __post_init__(self):
        if not (self.g_low > 0.0 > self.g_high):
            raise ValueError("bracket must satisfy g(c_low) > 0 > g(c_high)")


@dataclass
class ShootResult:
    profile: Profile
    c_b: float
    g_b: float
    bracket: SpeedBracket
    trace: list[tuple[float, float, int, float]]   # (c, g, iterations, residual)
    residual_norm: float


def shoot_speed(grid: Grid, spec_or_f, assembly: OperatorAssembly,
                tol_c: float = 1e-6, *, K: float | None = None,
                tol_g: float = 1e-6, tol_residual: float | None = None,
                max_bisect: int = 200, method: str = "bisect") -> ShootResult:
    """Find c_b with phi_{c_b}(0) = theta by sign-change bracketing on [-K, K].

    Accepts a ProblemSpec (K defaulted from the super-solution bound) or a
    bare IgnitionNonlinearity with an explicit K (the classical oracle path).
    Bisection is the default; method="brent" switches to inverse-quadratic
    acceleration on the same bracket.
    """
    if isinstance(spec_or_f, ProblemSpec):
        f = spec_or_f.nonlinearity
        if K is None:
            K = speed_bound(spec_or_f)
    else:
        f = spec_or_f
        if K is None:
            raise ValueError("an explicit K is required without a ProblemSpec")
    theta = f.theta
    trace: list[tuple[float, float, int, float]] = []
    warm: dict[float, np.ndarray] = {}

    def g(c: float) -> float:
        ws = None
        if warm:
            c_near = min(warm, key=lambda cc: abs(cc - c))
            ws = warm[c_near]
        sol = solve_fixed_speed(c, grid, f, assembly, warm_start=ws,
                                tol_residual=tol_residual)
        warm[c] = sol.profile.values
        gval = sol.profile.value_at_zero() - theta
        trace.append((c, gval, sol.iterations, sol.residual_norm))
        return gval

    g_lo = g(-K)
    g_hi = g(K)
    if not (g_lo > 0.0 > g_hi):
        raise DomainTooSmallError(
            f"no sign change of phi_c(0) - theta on [-K, K] (K={K:.4g}, "
            f"g(-K)={g_lo:.3e}, g(K)={g_hi:.3e}); the truncation half-width "
            f"b={grid.b:.4g} is too small for the speed bracket")
    bracket = SpeedBracket(c_low=-K, c_high=K, g_low=g_lo, g_high=g_hi)

    lo, hi, glo, ghi = -K, K, g_lo, g_hi
    c_mid, g_mid = lo, glo
    for _ in range(max_bisect):
        if method == "brent" and ghi != glo:
            c_try = hi - ghi * (hi - lo) / (ghi - glo)   # secant candidate
            if not (lo + 0.1 * (hi - lo) < c_try < hi - 0.1 * (hi - lo)):
                c_try = 0.5 * (lo + hi)
        else:
            c_try = 0.5 * (lo + hi)
        g_try = g(c_try)
        c_mid, g_mid = c_try, g_try
        if g_try > 0.0:
            lo, glo = c_try, g_try
        else:
            hi, ghi = c_try, g_try
        if hi - lo <= tol_c and abs(g_mid) <= tol_g:
            break
    else:
        raise SolverError(
            f"speed bisection exceeded {max_bisect} steps "
            f"(bracket width {hi - lo:.3e}, |g| {abs(g_mid):.3e})")

    sol = solve_fixed_speed(c_mid, grid, f, assembly,
                            warm_start=warm.get(c_mid),
                            tol_residual=tol_residual)
    return ShootResult(profile=sol.profile, c_b=c_mid, g_b=g_mid,
                       bracket=bracket, trace=trace,
                       residual_norm=sol.residual_norm)
